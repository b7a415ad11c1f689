/**
 * A tiny frozen masked language model.
 *
 * Stands in for a pinned pretrained checkpoint at fixture scale. Every
 * token embedding is a pure function of (model id, token), drawn from a
 * seeded stream, so the "weights" never change and never need shipping.
 * The hidden state at the mask position is a distance-weighted mean of the
 * context token embeddings (closer tokens count more), and vocabulary
 * log-probabilities are a temperature-scaled log-softmax over cosine
 * similarity between that hidden state and each vocabulary embedding.
 * Inference is deterministic: the same model id and prompt always produce
 * bit-identical outputs.
 */

import { CLASS_WORDS, FILLER_WORDS } from "./corpus";
import { Rng } from "./rng";
import { MASK_TOKEN, Tokenizer } from "./tokenizer";

const PROMPT_WORDS = ["news", "this", "topic", "is", "about", "story"];

function buildVocab(): string[] {
  const seen = new Set<string>();
  for (const words of CLASS_WORDS) for (const w of words) seen.add(w);
  for (const w of FILLER_WORDS) seen.add(w);
  for (const w of PROMPT_WORDS) seen.add(w);
  return [...seen].sort();
}

const MODEL_DIMS: Record<string, number> = {
  "toy-mlm-24": 24,
  "toy-mlm-48": 48,
};

const INV_TEMPERATURE = 5.0;

export class MaskedLM {
  readonly tokenizer: Tokenizer;
  readonly vocab: string[];
  private readonly cache = new Map<string, Float64Array>();

  constructor(readonly id: string, readonly dim: number) {
    this.vocab = buildVocab();
    this.tokenizer = new Tokenizer(this.vocab);
  }

  /** Frozen embedding for any token, including piece-fallback tokens. */
  embedding(token: string): Float64Array {
    const hit = this.cache.get(token);
    if (hit) return hit;
    const rng = new Rng(`${this.id}::emb::${token}`);
    const v = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) v[i] = rng.symmetric();
    this.cache.set(token, v);
    return v;
  }

  /**
   * Hidden state at the mask: weighted mean of context embeddings with
   * weight 1 / (1 + distance). The mask token itself contributes nothing.
   */
  hiddenAtMask(tokens: readonly string[], maskIndex: number): Float64Array {
    if (maskIndex < 0 || maskIndex >= tokens.length || tokens[maskIndex] !== MASK_TOKEN) {
      throw new Error(`maskIndex ${maskIndex} does not point at a ${MASK_TOKEN} token`);
    }
    const h = new Float64Array(this.dim);
    let total = 0;
    for (let i = 0; i < tokens.length; i++) {
      if (i === maskIndex) continue;
      const w = 1 / (1 + Math.abs(i - maskIndex));
      const e = this.embedding(tokens[i]!);
      for (let d = 0; d < this.dim; d++) h[d] = h[d]! + w * e[d]!;
      total += w;
    }
    if (total === 0) {
      throw new Error("prompt has no context tokens around the mask");
    }
    for (let d = 0; d < this.dim; d++) h[d] = h[d]! / total;
    return h;
  }

  /** Tokenize a filled prompt and return the mask-position hidden state. */
  encodePrompt(prompt: string): { tokens: string[]; hidden: Float64Array } {
    const tokens = this.tokenizer.tokenize(prompt);
    const maskIndex = tokens.indexOf(MASK_TOKEN);
    if (maskIndex === -1) {
      throw new Error("prompt lost its mask marker during tokenization");
    }
    if (tokens.indexOf(MASK_TOKEN, maskIndex + 1) !== -1) {
      throw new Error("prompt contains more than one mask token");
    }
    return { tokens, hidden: this.hiddenAtMask(tokens, maskIndex) };
  }

  /** Log-softmax over the full vocabulary at the mask position. */
  logProbs(hidden: Float64Array): Float64Array {
    const hNorm = norm(hidden);
    if (hNorm === 0) throw new Error("hidden state has zero norm");
    const logits = new Float64Array(this.vocab.length);
    let max = -Infinity;
    for (let i = 0; i < this.vocab.length; i++) {
      const e = this.embedding(this.vocab[i]!);
      logits[i] = (INV_TEMPERATURE * dot(hidden, e)) / (hNorm * norm(e));
      if (logits[i]! > max) max = logits[i]!;
    }
    let sum = 0;
    for (let i = 0; i < logits.length; i++) sum += Math.exp(logits[i]! - max);
    const logZ = max + Math.log(sum);
    const out = new Float64Array(logits.length);
    for (let i = 0; i < logits.length; i++) out[i] = logits[i]! - logZ;
    return out;
  }

  /** Index of a token in the scored vocabulary, -1 when absent. */
  vocabIndex(token: string): number {
    return this.vocab.indexOf(token.toLowerCase());
  }
}

function dot(a: Float64Array, b: Float64Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i]! * b[i]!;
  return s;
}

function norm(a: Float64Array): number {
  return Math.sqrt(dot(a, a));
}

export function knownModels(): string[] {
  return Object.keys(MODEL_DIMS);
}

export function loadModel(id: string): MaskedLM {
  const dim = MODEL_DIMS[id];
  if (dim === undefined) {
    throw new Error(`unknown model '${id}' (known: ${knownModels().join(", ")})`);
  }
  return new MaskedLM(id, dim);
}
