/**
 * Synthetic four-class news corpus.
 *
 * Real headline datasets are too heavy for a test fixture, so this builds
 * news-like word salad instead: each class owns a topical word list, every
 * sentence mixes a handful of topic words with shared filler words, and a
 * small fraction of topic words are swapped for words from another class.
 * Some words intentionally belong to two classes ("startup", "deal",
 * "record"), so single sentences can be ambiguous while class averages stay
 * separable. Everything is driven by one seeded stream, so a given seed
 * always produces the same corpus.
 */

import * as fs from "node:fs";
import { Rng } from "./rng";

export interface Instance {
  text: string;
  label: number;
  entity?: string;
}

export interface Corpus {
  class_names: string[];
  train: Instance[];
  test: Instance[];
}

export const CLASS_NAMES = ["World", "Sports", "Business", "Tech"] as const;

export const CLASS_WORDS: readonly (readonly string[])[] = [
  // World
  [
    "government", "minister", "treaty", "border", "embassy", "election",
    "parliament", "sanctions", "diplomat", "summit", "refugee", "ceasefire",
    "capital", "president", "coalition", "protest", "regime", "alliance",
    "territory", "crisis", "peace", "deal",
  ],
  // Sports
  [
    "coach", "tournament", "goal", "stadium", "league", "striker",
    "playoff", "season", "injury", "transfer", "champion", "referee",
    "match", "title", "defender", "finals", "squad", "trophy",
    "fans", "derby", "win", "record",
  ],
  // Business
  [
    "market", "shares", "profit", "merger", "investor", "revenue",
    "earnings", "stock", "trader", "acquisition", "inflation", "banker",
    "quarterly", "dividend", "forecast", "economy", "retail", "exports",
    "growth", "debt", "deal", "record", "startup",
  ],
  // Tech
  [
    "software", "chip", "browser", "algorithm", "server", "robot",
    "encryption", "database", "smartphone", "developer", "network", "cloud",
    "silicon", "gadget", "app", "quantum", "laptop", "firmware",
    "sensor", "platform", "update", "startup",
  ],
];

export const FILLER_WORDS: readonly string[] = [
  "the", "a", "an", "on", "after", "before", "with", "over", "new",
  "local", "major", "official", "report", "announced", "today", "during",
  "amid", "sources", "according", "latest", "early", "plans", "expected",
];

export interface CorpusOptions {
  trainPerClass: number;
  testPerClass: number;
  seed: number;
  /** chance that one topic word is swapped for another class's word */
  noiseRate?: number;
}

function makeSentence(rng: Rng, label: number, noiseRate: number): string {
  const own = CLASS_WORDS[label]!;
  const nTopic = 4 + rng.int(3); // 4..6 topic words
  const nFiller = 3 + rng.int(3); // 3..5 fillers
  const words: string[] = [];
  for (let i = 0; i < nTopic; i++) {
    if (rng.next() < noiseRate) {
      const other = (label + 1 + rng.int(CLASS_WORDS.length - 1)) % CLASS_WORDS.length;
      words.push(rng.pick(CLASS_WORDS[other]!));
    } else {
      words.push(rng.pick(own));
    }
  }
  for (let i = 0; i < nFiller; i++) words.push(rng.pick(FILLER_WORDS));
  rng.shuffle(words);
  return words.join(" ");
}

export function makeNewsCorpus(opts: CorpusOptions): Corpus {
  const { trainPerClass, testPerClass, seed } = opts;
  const noiseRate = opts.noiseRate ?? 0.15;
  if (!Number.isInteger(trainPerClass) || trainPerClass < 1) {
    throw new RangeError(`trainPerClass must be a positive integer, got ${trainPerClass}`);
  }
  if (!Number.isInteger(testPerClass) || testPerClass < 1) {
    throw new RangeError(`testPerClass must be a positive integer, got ${testPerClass}`);
  }
  if (noiseRate < 0 || noiseRate >= 1) {
    throw new RangeError(`noiseRate must be in [0, 1), got ${noiseRate}`);
  }
  const rng = new Rng(`news-corpus::${seed}`);
  const train: Instance[] = [];
  const test: Instance[] = [];
  // class-major order keeps the corpus stable when per-class counts change
  for (let label = 0; label < CLASS_NAMES.length; label++) {
    for (let i = 0; i < trainPerClass; i++) {
      train.push({ text: makeSentence(rng, label, noiseRate), label });
    }
  }
  for (let label = 0; label < CLASS_NAMES.length; label++) {
    for (let i = 0; i < testPerClass; i++) {
      test.push({ text: makeSentence(rng, label, noiseRate), label });
    }
  }
  return { class_names: [...CLASS_NAMES], train, test };
}

export function saveCorpus(corpus: Corpus, path: string): void {
  fs.writeFileSync(path, JSON.stringify(corpus, null, 1) + "\n");
}

export function loadCorpus(path: string): Corpus {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf8");
  } catch (err) {
    throw new Error(`cannot read corpus file ${path}: ${(err as Error).message}`);
  }
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (err) {
    throw new Error(`corpus file ${path} is not valid JSON: ${(err as Error).message}`);
  }
  return checkCorpus(data, path);
}

function checkCorpus(data: unknown, path: string): Corpus {
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new Error(`corpus file ${path} must hold a JSON object`);
  }
  const obj = data as Record<string, unknown>;
  const names = obj.class_names;
  if (
    !Array.isArray(names) ||
    names.length < 2 ||
    !names.every((n) => typeof n === "string")
  ) {
    throw new Error(`corpus file ${path}: class_names must list at least two strings`);
  }
  const out: Corpus = { class_names: names as string[], train: [], test: [] };
  for (const split of ["train", "test"] as const) {
    const rows = obj[split];
    if (!Array.isArray(rows)) {
      throw new Error(`corpus file ${path}: missing '${split}' array`);
    }
    rows.forEach((row, i) => {
      if (typeof row !== "object" || row === null) {
        throw new Error(`corpus file ${path}: ${split}[${i}] is not an object`);
      }
      const inst = row as Record<string, unknown>;
      if (typeof inst.text !== "string" || inst.text.length === 0) {
        throw new Error(`corpus file ${path}: ${split}[${i}] needs a non-empty 'text'`);
      }
      if (
        typeof inst.label !== "number" ||
        !Number.isInteger(inst.label) ||
        inst.label < 0 ||
        inst.label >= names.length
      ) {
        throw new Error(
          `corpus file ${path}: ${split}[${i}] label must be an integer in [0, ${names.length})`
        );
      }
      if (inst.entity !== undefined && typeof inst.entity !== "string") {
        throw new Error(`corpus file ${path}: ${split}[${i}] entity must be a string`);
      }
      const keep: Instance = { text: inst.text, label: inst.label };
      if (typeof inst.entity === "string") keep.entity = inst.entity;
      out[split].push(keep);
    });
  }
  return out;
}
