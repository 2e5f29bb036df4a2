/** Wire types shared with the suggestion service, plus structural guards. */

export type CellKind = "num" | "str" | "formula";

export interface CellDoc {
  row: number;
  col: number;
  kind: CellKind;
  value: string;
  formula?: string;
}

export interface SheetDoc {
  name: string;
  frozen_rows: number;
  cells: CellDoc[];
}

/** The canonical grid document — the only format the service accepts. */
export interface GridDoc {
  sheets: SheetDoc[];
}

export interface RangeDoc {
  start: [number, number];
  end: [number, number] | null;
}

export interface Suggestion {
  rank: number;
  formula: string;
  log_prob: number;
  sketch: string[];
  ranges: RangeDoc[];
}

export interface Diagnostics {
  dropped_unrenderable: number;
  latency_ms: number;
  beam_steps?: number;
}

export interface PredictRequest {
  grid: GridDoc;
  sheet: string;
  target: string;
  top_k: number;
  request_id: string;
}

export interface PredictResponse {
  request_id: string;
  target: string;
  sheet: string;
  suggestions: Suggestion[];
  diagnostics: Diagnostics;
}

export interface ServiceConfig {
  radius: number;
  window_rows: number;
  window_cols: number;
  beam_size: number;
  max_top_k: number;
  max_body_bytes: number;
  max_in_flight: number;
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function fail(context: string, detail: string): never {
  throw new Error(`${context}: ${detail}`);
}

function asNumber(value: unknown, context: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    fail(context, "expected a finite number");
  }
  return value;
}

function asString(value: unknown, context: string): string {
  if (typeof value !== "string") fail(context, "expected a string");
  return value;
}

function asOffsetPair(value: unknown, context: string): [number, number] {
  if (!Array.isArray(value) || value.length !== 2) {
    fail(context, "expected a [row, col] offset pair");
  }
  return [asNumber(value[0], context), asNumber(value[1], context)];
}

function parseRange(value: unknown, context: string): RangeDoc {
  if (!isRecord(value)) fail(context, "expected a range object");
  return {
    start: asOffsetPair(value.start, `${context}.start`),
    end: value.end === null ? null : asOffsetPair(value.end, `${context}.end`),
  };
}

function parseSuggestion(value: unknown, context: string): Suggestion {
  if (!isRecord(value)) fail(context, "expected a suggestion object");
  const sketch = value.sketch;
  if (!Array.isArray(sketch)) fail(context, "sketch must be an array");
  const ranges = value.ranges;
  if (!Array.isArray(ranges)) fail(context, "ranges must be an array");
  return {
    rank: asNumber(value.rank, `${context}.rank`),
    formula: asString(value.formula, `${context}.formula`),
    log_prob: asNumber(value.log_prob, `${context}.log_prob`),
    sketch: sketch.map((t, i) => asString(t, `${context}.sketch[${i}]`)),
    ranges: ranges.map((r, i) => parseRange(r, `${context}.ranges[${i}]`)),
  };
}

/** Validate a decoded predict response; throws with a readable path on shape errors. */
export function parsePredictResponse(value: unknown): PredictResponse {
  if (!isRecord(value)) fail("response", "expected an object");
  const suggestions = value.suggestions;
  if (!Array.isArray(suggestions)) fail("response", "suggestions must be an array");
  const diagnostics = value.diagnostics;
  if (!isRecord(diagnostics)) fail("response", "diagnostics must be an object");
  return {
    request_id: asString(value.request_id, "response.request_id"),
    target: asString(value.target, "response.target"),
    sheet: asString(value.sheet, "response.sheet"),
    suggestions: suggestions.map((s, i) => parseSuggestion(s, `response.suggestions[${i}]`)),
    diagnostics: {
      dropped_unrenderable: asNumber(
        diagnostics.dropped_unrenderable,
        "response.diagnostics.dropped_unrenderable",
      ),
      latency_ms: asNumber(diagnostics.latency_ms, "response.diagnostics.latency_ms"),
      ...(diagnostics.beam_steps !== undefined
        ? { beam_steps: asNumber(diagnostics.beam_steps, "response.diagnostics.beam_steps") }
        : {}),
    },
  };
}

export function parseServiceConfig(value: unknown): ServiceConfig {
  if (!isRecord(value)) fail("config", "expected an object");
  const get = (key: string) => asNumber(value[key], `config.${key}`);
  return {
    radius: get("radius"),
    window_rows: get("window_rows"),
    window_cols: get("window_cols"),
    beam_size: get("beam_size"),
    max_top_k: get("max_top_k"),
    max_body_bytes: get("max_body_bytes"),
    max_in_flight: get("max_in_flight"),
  };
}
