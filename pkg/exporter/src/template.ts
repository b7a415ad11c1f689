/**
 * Prompt templates.
 *
 * A template is a pattern string with a "{text}" slot for the input, exactly
 * one "[MASK]" marker where the model predicts, and, for entity-typing
 * patterns, exactly one "[ENT]" slot that copies an entity mention into the
 * prompt. "A [MASK] news: {text}" wraps classification inputs;
 * "{text} [ENT] is [MASK]." wraps one entity mention per record.
 */

import { ENTITY_SLOT, MASK_TOKEN } from "./tokenizer";

export interface PromptTemplate {
  template_id: string;
  pattern: string;
}

const TEXT_SLOT = "{text}";

function countOf(haystack: string, needle: string): number {
  return haystack.split(needle).length - 1;
}

export function validateTemplate(template: PromptTemplate): void {
  const { template_id, pattern } = template;
  if (!template_id) throw new Error("template needs a non-empty template_id");
  const masks = countOf(pattern, MASK_TOKEN);
  if (masks !== 1) {
    throw new Error(
      `template '${template_id}' must contain exactly one ${MASK_TOKEN} marker, found ${masks}`
    );
  }
  if (countOf(pattern, TEXT_SLOT) !== 1) {
    throw new Error(`template '${template_id}' must contain exactly one ${TEXT_SLOT} slot`);
  }
  const ents = countOf(pattern, ENTITY_SLOT);
  if (ents > 1) {
    throw new Error(
      `template '${template_id}' must contain at most one ${ENTITY_SLOT} slot, found ${ents}`
    );
  }
}

export function needsEntity(template: PromptTemplate): boolean {
  return template.pattern.includes(ENTITY_SLOT);
}

/**
 * Fill the pattern's slots. The result still contains the mask marker;
 * tokenization happens in the model.
 */
export function applyTemplate(
  template: PromptTemplate,
  text: string,
  entity?: string
): string {
  validateTemplate(template);
  if (text.includes(MASK_TOKEN)) {
    throw new Error("input text must not contain the mask marker");
  }
  if (needsEntity(template)) {
    if (entity === undefined || entity.length === 0) {
      throw new Error(
        `template '${template.template_id}' has an ${ENTITY_SLOT} slot but the instance carries no entity mention`
      );
    }
    if (!text.toLowerCase().includes(entity.toLowerCase())) {
      throw new Error(`entity mention '${entity}' does not occur in the instance text`);
    }
  } else if (entity !== undefined) {
    // a mention on a plain classification template is silently unused
  }
  let prompt = template.pattern.replace(TEXT_SLOT, text);
  if (needsEntity(template)) prompt = prompt.replace(ENTITY_SLOT, entity!);
  return prompt;
}

/** Patterns that ship with the exporter, addressable by id from the CLI. */
export const BUILTIN_TEMPLATES: Record<string, PromptTemplate> = {
  "news-t1": { template_id: "news-t1", pattern: "A [MASK] news: {text}" },
  "news-t2": { template_id: "news-t2", pattern: "{text} This topic is about [MASK]." },
  "entity-t1": { template_id: "entity-t1", pattern: "{text} [ENT] is [MASK]." },
};

/** Accept a built-in id or a raw pattern typed on the command line. */
export function resolveTemplate(spec: string): PromptTemplate {
  const builtin = BUILTIN_TEMPLATES[spec];
  if (builtin) return builtin;
  if (spec.includes(MASK_TOKEN)) {
    const template = { template_id: "custom", pattern: spec };
    validateTemplate(template);
    return template;
  }
  const known = Object.keys(BUILTIN_TEMPLATES).join(", ");
  throw new Error(
    `'${spec}' is neither a built-in template id (${known}) nor a pattern with a ${MASK_TOKEN} marker`
  );
}
