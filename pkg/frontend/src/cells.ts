/** Local cell-input classification and context-window geometry. */

import type { Addr } from "./a1.js";

export type Classified =
  | { kind: "empty" }
  | { kind: "num"; value: string }
  | { kind: "str"; value: string };

const NUMBER_RE = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;

/**
 * Classify typed text the way the grid document distinguishes cells.
 *
 * The literal is kept verbatim — classification never rewrites what the
 * user typed, so export/import round-trips are lossless.
 */
export function classifyInput(text: string): Classified {
  if (text === "") return { kind: "empty" };
  if (NUMBER_RE.test(text)) return { kind: "num", value: text };
  return { kind: "str", value: text };
}

/**
 * True when `addr` falls inside the square context window of half-width
 * `radius` centred on `target` — the cells the model actually reads.
 */
export function inContextWindow(target: Addr, addr: Addr, radius: number): boolean {
  return (
    Math.abs(addr.row - target.row) <= radius && Math.abs(addr.col - target.col) <= radius
  );
}
