/**
 * NDJSON export.
 *
 * Output follows the protoverb dataset layout: one header object on the
 * first line carrying format_version, dim, class_names, template_id and
 * model_id, then one record per line with keys in the order id, split,
 * label, token, embedding, label_word_logprobs. Embeddings are float32
 * (shortest round-trip decimals); records appear in corpus order; when a
 * verbalizer is given, each record also carries the per-class label-word
 * log-probabilities gathered from a full-vocabulary log-softmax.
 */

import * as fs from "node:fs";
import { Corpus } from "./corpus";
import { float32Repr } from "./floats";
import { MaskedLM } from "./model";
import { applyTemplate, needsEntity, PromptTemplate, validateTemplate } from "./template";

export type Verbalizer = Record<string, string[]>;

export type Split = "train" | "test";

const ALL_SPLITS: readonly Split[] = ["train", "test"];

interface RecordFields {
  id: string;
  split: string;
  label?: number;
  token?: string;
  embedding: Float64Array;
  logprobs?: number[][];
}

function headerLine(model: MaskedLM, classNames: string[], templateId: string): string {
  return JSON.stringify({
    format_version: 1,
    dim: model.dim,
    class_names: classNames,
    template_id: templateId,
    model_id: model.id,
  });
}

function recordLine(rec: RecordFields): string {
  const parts = [`"id":${JSON.stringify(rec.id)}`, `"split":${JSON.stringify(rec.split)}`];
  if (rec.label !== undefined) parts.push(`"label":${rec.label}`);
  if (rec.token !== undefined) parts.push(`"token":${JSON.stringify(rec.token)}`);
  const emb = Array.from(rec.embedding, float32Repr).join(",");
  parts.push(`"embedding":[${emb}]`);
  if (rec.logprobs !== undefined) {
    const cls = rec.logprobs.map((ws) => `[${ws.map((v) => JSON.stringify(v)).join(",")}]`);
    parts.push(`"label_word_logprobs":[${cls.join(",")}]`);
  }
  return `{${parts.join(",")}}`;
}

/**
 * Check a verbalizer against the class list and the model vocabulary and
 * return, per class, the vocabulary indices of its label words.
 */
function resolveVerbalizer(
  verbalizer: Verbalizer,
  classNames: string[],
  model: MaskedLM
): number[][] {
  for (const key of Object.keys(verbalizer)) {
    if (!classNames.includes(key)) {
      throw new Error(`verbalizer names unknown class '${key}'`);
    }
  }
  return classNames.map((name) => {
    const words = verbalizer[name];
    if (!Array.isArray(words) || words.length === 0) {
      throw new Error(`verbalizer needs at least one label word for class '${name}'`);
    }
    return words.map((word) => {
      if (typeof word !== "string" || word.length === 0) {
        throw new Error(`verbalizer for class '${name}' contains a non-string entry`);
      }
      const pieces = model.tokenizer.tokenizeWord(word);
      if (pieces.length !== 1) {
        throw new Error(
          `label word '${word}' tokenizes to ${pieces.length} pieces; label words must be single tokens`
        );
      }
      const idx = model.vocabIndex(word);
      if (idx === -1) {
        throw new Error(`label word '${word}' is not in the model vocabulary`);
      }
      return idx;
    });
  });
}

export interface DatasetExportOptions {
  corpus: Corpus;
  template: PromptTemplate;
  model: MaskedLM;
  verbalizer?: Verbalizer;
  splits?: readonly Split[];
}

export interface ExportResult {
  content: string;
  nRecords: number;
}

/** Build the NDJSON content for a dataset export. */
export function exportDataset(opts: DatasetExportOptions): ExportResult {
  const { corpus, template, model } = opts;
  validateTemplate(template);
  const splits = opts.splits ?? ALL_SPLITS;
  if (splits.length === 0) {
    throw new Error("at least one split must be exported");
  }
  for (const s of splits) {
    if (!ALL_SPLITS.includes(s)) {
      throw new Error(`unknown split '${s}' (use train, test)`);
    }
  }
  if (new Set(splits).size !== splits.length) {
    throw new Error("splits must not repeat");
  }
  const wordIds = opts.verbalizer
    ? resolveVerbalizer(opts.verbalizer, corpus.class_names, model)
    : undefined;

  const lines = [headerLine(model, corpus.class_names, template.template_id)];
  let n = 0;
  for (const split of splits) {
    corpus[split].forEach((inst, i) => {
      const prompt = applyTemplate(template, inst.text, inst.entity);
      const { hidden } = model.encodePrompt(prompt);
      const rec: RecordFields = {
        id: `${split}-${String(i).padStart(4, "0")}`,
        split,
        label: inst.label,
        embedding: hidden,
      };
      if (wordIds) {
        const lp = model.logProbs(hidden);
        rec.logprobs = wordIds.map((ids) => ids.map((idx) => lp[idx]!));
      }
      lines.push(recordLine(rec));
      n++;
    });
  }
  return { content: lines.join("\n") + "\n", nRecords: n };
}

export interface VocabExportOptions {
  words: readonly string[];
  template: PromptTemplate;
  model: MaskedLM;
  /** class names for the file header, usually taken from the corpus */
  classNames: string[];
}

/**
 * Build the NDJSON content for a vocabulary probe: one record per word,
 * in the given order, with the word standing in the template's text slot.
 */
export function exportVocabProbe(opts: VocabExportOptions): ExportResult {
  const { words, template, model, classNames } = opts;
  validateTemplate(template);
  if (needsEntity(template)) {
    throw new Error("vocabulary probes do not support entity templates");
  }
  if (words.length === 0) {
    throw new Error("no probe tokens given");
  }
  const seen = new Set<string>();
  const lines = [headerLine(model, classNames, template.template_id)];
  words.forEach((word, i) => {
    if (typeof word !== "string" || word.length === 0) {
      throw new Error(`probe token at position ${i} is empty`);
    }
    const token = word.toLowerCase();
    if (seen.has(token)) {
      throw new Error(`duplicate probe token '${token}'`);
    }
    seen.add(token);
    const { hidden } = model.encodePrompt(applyTemplate(template, token));
    lines.push(
      recordLine({
        id: `probe-${String(i).padStart(4, "0")}`,
        split: "vocab_probe",
        token,
        embedding: hidden,
      })
    );
  });
  return { content: lines.join("\n") + "\n", nRecords: words.length };
}

export function loadVerbalizer(path: string): Verbalizer {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`cannot read verbalizer file ${path}: ${(err as Error).message}`);
  }
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    throw new Error(`verbalizer file ${path} is not valid JSON: ${(err as Error).message}`);
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new Error(`verbalizer file ${path} must map class names to word lists`);
  }
  return data as Verbalizer;
}
