/** Presentation helpers for suggestion entries. */

import type { Suggestion } from "./types.js";

export interface SketchSpan {
  text: string;
  /** True for RANGE placeholders, which the UI renders highlighted. */
  highlight: boolean;
}

const SKETCH_TERMINATOR = "$ENDSKETCH$";

/**
 * Sketch tokens ready for display: the structural terminator is dropped,
 * RANGE placeholders are flagged for highlighting.
 */
export function sketchSpans(sketch: readonly string[]): SketchSpan[] {
  return sketch
    .filter((token) => token !== SKETCH_TERMINATOR)
    .map((token) => ({ text: token, highlight: token === "RANGE" }));
}

export function formatScore(suggestion: Suggestion): string {
  return suggestion.log_prob.toFixed(3);
}

/** Label for the suggestion panel; `null` list means "nothing requested yet". */
export function panelLabel(suggestions: readonly Suggestion[] | null): string {
  if (suggestions === null) return "";
  if (suggestions.length === 0) return "no suggestions";
  return `${suggestions.length} suggestion${suggestions.length === 1 ? "" : "s"}`;
}
