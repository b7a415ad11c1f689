/**
 * Seeded random number generator.
 *
 * JavaScript has no built-in seedable RNG, so this wraps sfc32, a small
 * well-studied 32-bit generator. Seeds may be numbers or strings; strings
 * are hashed with FNV-1a so that e.g. a model id plus a token name can key
 * an independent stream. The same seed always yields the same sequence,
 * which is what makes exports reproducible.
 */

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

export class Rng {
  private a: number;
  private b: number;
  private c: number;
  private d: number;

  constructor(seed: number | string) {
    const s = typeof seed === "string" ? fnv1a(seed) : seed >>> 0;
    // spread one 32-bit seed over the four state words, then warm up
    this.a = s ^ 0x9e3779b9;
    this.b = (s << 13) | (s >>> 19);
    this.c = s ^ 0x85ebca6b;
    this.d = Math.imul(s, 0xc2b2ae35) | 1;
    for (let i = 0; i < 12; i++) this.nextUint32();
  }

  nextUint32(): number {
    const t = (((this.a + this.b) >>> 0) + this.d) >>> 0;
    this.d = (this.d + 1) >>> 0;
    this.a = this.b ^ (this.b >>> 9);
    this.b = (this.c + (this.c << 3)) >>> 0;
    this.c = ((this.c << 21) | (this.c >>> 11)) >>> 0;
    this.c = (this.c + t) >>> 0;
    return t;
  }

  /** Uniform in [0, 1). */
  next(): number {
    return this.nextUint32() / 4294967296;
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    if (!Number.isInteger(n) || n <= 0) {
      throw new RangeError(`int() needs a positive integer bound, got ${n}`);
    }
    return Math.floor(this.next() * n);
  }

  /** Uniform in [-1, 1). */
  symmetric(): number {
    return this.next() * 2 - 1;
  }

  pick<T>(items: readonly T[]): T {
    if (items.length === 0) throw new RangeError("pick() from an empty list");
    return items[this.int(items.length)]!;
  }

  /** Fisher-Yates shuffle, in place. */
  shuffle<T>(items: T[]): T[] {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      const tmp = items[i]!;
      items[i] = items[j]!;
      items[j] = tmp;
    }
    return items;
  }
}
