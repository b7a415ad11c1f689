/**
 * Word-level tokenizer with a fixed vocabulary.
 *
 * Text is lowercased and split on anything that is not a letter or digit.
 * A word found in the vocabulary is a single token. Anything else falls
 * back to character pieces ("qu##", "an##", ...), the same way subword
 * tokenizers split rare words. Label words must map to exactly one token,
 * so the piece fallback is what makes multi-token verbalizer words
 * detectable.
 */

export const MASK_TOKEN = "[MASK]";
export const ENTITY_SLOT = "[ENT]";

const WORD_RE = /[a-z0-9]+/g;

export class Tokenizer {
  private readonly known: Set<string>;

  constructor(readonly vocab: readonly string[]) {
    this.known = new Set(vocab);
    if (this.known.size !== vocab.length) {
      throw new Error("tokenizer vocabulary contains duplicates");
    }
  }

  hasWord(word: string): boolean {
    return this.known.has(word.toLowerCase());
  }

  /** Tokens for a single word; length > 1 means piece fallback kicked in. */
  tokenizeWord(word: string): string[] {
    const w = word.toLowerCase();
    if (this.known.has(w)) return [w];
    const pieces: string[] = [];
    for (let i = 0; i < w.length; i += 2) {
      pieces.push(w.slice(i, i + 2) + "##");
    }
    return pieces;
  }

  /** Tokens for free text. The mask marker survives as its own token. */
  tokenize(text: string): string[] {
    const out: string[] = [];
    // protect the marker from the lowercasing word split
    const segments = text.split(MASK_TOKEN);
    segments.forEach((segment, i) => {
      if (i > 0) out.push(MASK_TOKEN);
      const lower = segment.toLowerCase();
      for (const match of lower.matchAll(WORD_RE)) {
        for (const tok of this.tokenizeWord(match[0])) out.push(tok);
      }
    });
    return out;
  }
}
