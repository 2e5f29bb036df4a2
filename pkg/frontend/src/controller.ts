/**
 * UI state machine: one grid, one service client, at most one request in
 * flight.  Nothing is ever applied to the grid except through an explicit
 * `acceptSuggestion` call.
 */

import { renderA1 } from "./a1.js";
import type { ServiceClient } from "./client.js";
import { ServiceError } from "./client.js";
import { nextBelow, type UiGrid } from "./grid.js";
import type { Suggestion } from "./types.js";

function defaultIdGen(): string {
  if (typeof globalThis.crypto?.randomUUID === "function") {
    return globalThis.crypto.randomUUID();
  }
  return `req-${Date.now()}-${Math.floor(Math.random() * 1e9)}`;
}

export interface Banner {
  message: string;
  canRetry: boolean;
}

export class SuggestController {
  readonly grid: UiGrid;
  private readonly client: ServiceClient;
  private readonly nextId: () => string;

  /** Request id currently in flight; null when idle. */
  private activeId: string | null = null;
  private lastTopK: number | null = null;

  suggestions: Suggestion[] | null = null;
  banner: Banner | null = null;
  /** Half-width of the model's context window, once /v1/config has answered. */
  windowRadius: number | null = null;
  maxTopK: number | null = null;
  onChange: (() => void) | null = null;

  constructor(grid: UiGrid, client: ServiceClient, idGen: () => string = defaultIdGen) {
    this.grid = grid;
    this.client = client;
    this.nextId = idGen;
  }

  get pending(): boolean {
    return this.activeId !== null;
  }

  private changed(): void {
    this.onChange?.();
  }

  /** Fetch service limits; harmless to skip if the service is down. */
  async init(): Promise<void> {
    try {
      const config = await this.client.config();
      this.windowRadius = config.radius;
      this.maxTopK = config.max_top_k;
    } catch (exc) {
      this.banner = { message: messageOf(exc), canRetry: false };
    }
    this.changed();
  }

  /**
   * Serialize the grid and ask for suggestions at the selected target.
   * No-op while a request is pending (the UI disables the button too).
   * Responses whose id no longer matches the in-flight id are discarded.
   */
  async requestSuggestions(topK: number): Promise<void> {
    if (this.activeId !== null) return;
    const id = this.nextId();
    this.activeId = id;
    this.lastTopK = topK;
    this.banner = null;
    this.changed();
    try {
      const response = await this.client.predict({
        grid: this.grid.toDoc(),
        sheet: this.grid.sheetName,
        target: renderA1(this.grid.selected),
        top_k: topK,
        request_id: id,
      });
      if (this.activeId !== id) return; // superseded: stale response discarded
      if (response.request_id !== id) return; // not ours: discarded
      this.suggestions = response.suggestions;
      this.banner = null;
    } catch (exc) {
      if (this.activeId !== id) return;
      this.banner = {
        message: messageOf(exc),
        canRetry: !(exc instanceof ServiceError) || exc.isNetworkFailure,
      };
    } finally {
      if (this.activeId === id) {
        this.activeId = null;
        this.changed();
      }
    }
  }

  /**
   * Give up on the in-flight request.  The grid keeps its state; if the
   * response still arrives it is discarded by its stale request id.
   */
  cancelPending(): void {
    if (this.activeId === null) return;
    this.activeId = null;
    this.changed();
  }

  /** Re-issue the last request (under a fresh request id). */
  async retry(): Promise<void> {
    if (this.lastTopK === null) return;
    this.banner = null;
    await this.requestSuggestions(this.lastTopK);
  }

  /**
   * Apply the suggestion at `rank` to the selected cell — formula text
   * verbatim — and move the selection to the cell below.
   */
  acceptSuggestion(rank: number): void {
    const suggestion = this.suggestions?.find((s) => s.rank === rank);
    if (suggestion === undefined) {
      throw new Error(`no suggestion at rank ${rank}`);
    }
    const target = this.grid.selected;
    this.grid.setFormulaCell(target, suggestion.formula);
    this.grid.select(nextBelow(target));
    this.suggestions = null;
    this.changed();
  }

  dismissBanner(): void {
    this.banner = null;
    this.changed();
  }
}

function messageOf(exc: unknown): string {
  if (exc instanceof Error) return exc.message;
  return String(exc);
}
