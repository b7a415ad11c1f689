/**
 * Embeddings are stored in 32-bit precision: the model computes in doubles,
 * but the wire format rounds to float32 and prints the shortest decimal
 * string that reads back to the same float32 value. That keeps files small
 * and makes byte-level comparison of exports meaningful.
 */

/** Round a double to the nearest float32 value. */
export function toFloat32(x: number): number {
  return Math.fround(x);
}

/** Shortest decimal string that round-trips through float32. */
export function float32Repr(x: number): string {
  const v = Math.fround(x);
  if (!Number.isFinite(v)) {
    throw new RangeError(`cannot serialize non-finite value ${x}`);
  }
  if (Object.is(v, 0) || Object.is(v, -0)) return "0.0";
  for (let p = 1; p <= 9; p++) {
    const s = v.toPrecision(p);
    if (Math.fround(Number(s)) === v) return cleanup(s);
  }
  return cleanup(String(v));
}

// "1e-7" and "3.5e+3" are valid JSON numbers, but normalize the plus sign
// away and make sure plain integers still look like floats
function cleanup(s: string): string {
  s = s.replace("e+", "e");
  if (!s.includes(".") && !s.includes("e")) s += ".0";
  return s;
}
