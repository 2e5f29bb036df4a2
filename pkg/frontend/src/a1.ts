/** A1-style cell addressing (1-based rows and columns). */

export interface Addr {
  row: number;
  col: number;
}

export function colLetters(col: number): string {
  if (!Number.isInteger(col) || col < 1) {
    throw new RangeError(`column must be a positive integer, got ${col}`);
  }
  let n = col;
  let out = "";
  while (n > 0) {
    n -= 1;
    out = String.fromCharCode(65 + (n % 26)) + out;
    n = Math.floor(n / 26);
  }
  return out;
}

export function renderA1(addr: Addr): string {
  if (!Number.isInteger(addr.row) || addr.row < 1) {
    throw new RangeError(`row must be a positive integer, got ${addr.row}`);
  }
  return `${colLetters(addr.col)}${addr.row}`;
}

const A1_RE = /^([A-Z]+)([1-9][0-9]*)$/;

export function parseA1(text: string): Addr {
  const m = A1_RE.exec(text);
  if (!m) throw new RangeError(`not an A1 cell reference: ${JSON.stringify(text)}`);
  let col = 0;
  for (const ch of m[1]) col = col * 26 + (ch.charCodeAt(0) - 64);
  return { row: Number(m[2]), col };
}
