/** Editable client-side grid state mirroring the canonical grid document. */

import type { Addr } from "./a1.js";
import { canonicalJson, type JsonValue } from "./canon.js";
import { classifyInput } from "./cells.js";
import type { CellDoc, CellKind, GridDoc } from "./types.js";

export const MAX_ROWS = 50;
export const MAX_COLS = 26;

export interface Cell {
  kind: CellKind;
  value: string;
  formula?: string;
}

function key(addr: Addr): string {
  return `${addr.row},${addr.col}`;
}

function checkBounds(addr: Addr): void {
  if (
    !Number.isInteger(addr.row) ||
    !Number.isInteger(addr.col) ||
    addr.row < 1 ||
    addr.col < 1 ||
    addr.row > MAX_ROWS ||
    addr.col > MAX_COLS
  ) {
    throw new RangeError(
      `cell (${addr.row}, ${addr.col}) outside the ${MAX_ROWS}x${MAX_COLS} grid`,
    );
  }
}

/**
 * One sheet of cells with a frozen-header toggle and a single selected
 * target.  Literals are stored verbatim; nothing here reformats what the
 * user typed, so export round-trips are lossless.
 */
export class UiGrid {
  sheetName: string;
  frozenRows: 0 | 1 = 1;
  private cells = new Map<string, Cell>();
  private selectedAddr: Addr = { row: 1, col: 1 };

  constructor(sheetName = "Sheet1") {
    this.sheetName = sheetName;
  }

  get selected(): Addr {
    return { ...this.selectedAddr };
  }

  select(addr: Addr): void {
    checkBounds(addr);
    this.selectedAddr = { row: addr.row, col: addr.col };
  }

  toggleFrozen(): void {
    this.frozenRows = this.frozenRows === 0 ? 1 : 0;
  }

  cellAt(addr: Addr): Cell | undefined {
    const cell = this.cells.get(key(addr));
    return cell === undefined ? undefined : { ...cell };
  }

  /** Classify typed text as num/str/empty and update the cell. */
  editCell(addr: Addr, text: string): void {
    checkBounds(addr);
    const classified = classifyInput(text);
    if (classified.kind === "empty") {
      this.cells.delete(key(addr));
    } else {
      this.cells.set(key(addr), { kind: classified.kind, value: classified.value });
    }
  }

  /** Write an accepted suggestion: the formula text is stored verbatim. */
  setFormulaCell(addr: Addr, formula: string): void {
    checkBounds(addr);
    this.cells.set(key(addr), { kind: "formula", value: "0", formula });
  }

  /** Text shown when a cell is being edited: formula source for formula cells. */
  displayText(addr: Addr): string {
    const cell = this.cells.get(key(addr));
    if (cell === undefined) return "";
    return cell.kind === "formula" ? cell.formula ?? "" : cell.value;
  }

  get occupied(): number {
    return this.cells.size;
  }

  lastOccupiedRow(): number {
    let last = 0;
    for (const k of this.cells.keys()) {
      const row = Number(k.split(",")[0]);
      if (row > last) last = row;
    }
    return last;
  }

  /**
   * Frozen-row count as exported: clamped to the occupied area, since the
   * document format forbids freezing rows past the last occupied one.
   */
  effectiveFrozenRows(): number {
    return Math.min(this.frozenRows, this.lastOccupiedRow());
  }

  toDoc(): GridDoc {
    const entries: Array<[number, number, Cell]> = [];
    for (const [k, cell] of this.cells.entries()) {
      const [row, col] = k.split(",").map(Number);
      entries.push([row, col, cell]);
    }
    entries.sort((a, b) => a[0] - b[0] || a[1] - b[1]);
    const cells: CellDoc[] = entries.map(([row, col, cell]) => ({
      row,
      col,
      kind: cell.kind,
      value: cell.value,
      ...(cell.formula !== undefined ? { formula: cell.formula } : {}),
    }));
    return {
      sheets: [
        { name: this.sheetName, frozen_rows: this.effectiveFrozenRows(), cells },
      ],
    };
  }

  /** Canonical grid-document text, as downloaded by the export action. */
  exportText(): string {
    return canonicalJson(this.toDoc() as unknown as JsonValue);
  }

  static fromDoc(doc: GridDoc): UiGrid {
    const sheet = doc.sheets[0];
    if (sheet === undefined) throw new Error("grid document has no sheets");
    const grid = new UiGrid(sheet.name);
    grid.frozenRows = sheet.frozen_rows > 0 ? 1 : 0;
    for (const cell of sheet.cells) {
      const addr = { row: cell.row, col: cell.col };
      checkBounds(addr);
      if (cell.kind === "formula") {
        if (cell.formula === undefined) {
          throw new Error(`formula cell at (${cell.row}, ${cell.col}) has no formula text`);
        }
        grid.cells.set(key(addr), {
          kind: "formula",
          value: cell.value,
          formula: cell.formula,
        });
      } else {
        grid.cells.set(key(addr), { kind: cell.kind, value: cell.value });
      }
    }
    return grid;
  }
}

export function nextBelow(addr: Addr): Addr {
  return { row: Math.min(addr.row + 1, MAX_ROWS), col: addr.col };
}
