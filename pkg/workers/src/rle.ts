/**
 * Run-length encoding for binary masks, matching the orchestrator's wire
 * convention: run lengths alternate background/foreground starting with
 * background, so a mask whose first pixel is foreground leads with a zero.
 */

export function encodeMask(bits: Uint8Array): number[] {
  if (bits.length === 0) {
    throw new Error('cannot encode an empty mask');
  }
  const runs: number[] = [];
  let current = bits[0] !== 0;
  if (current) {
    runs.push(0);
  }
  let length = 0;
  for (let i = 0; i < bits.length; i++) {
    const value = bits[i] !== 0;
    if (value === current) {
      length += 1;
    } else {
      runs.push(length);
      current = value;
      length = 1;
    }
  }
  runs.push(length);
  return runs;
}

export function decodeMask(runs: number[], area: number): Uint8Array {
  const bits = new Uint8Array(area);
  let offset = 0;
  let value = 0;
  for (const run of runs) {
    if (run < 0 || offset + run > area) {
      throw new Error('invalid run list');
    }
    if (value) {
      bits.fill(1, offset, offset + run);
    }
    offset += run;
    value = 1 - value;
  }
  if (offset !== area) {
    throw new Error(`runs cover ${offset} pixels, expected ${area}`);
  }
  return bits;
}
