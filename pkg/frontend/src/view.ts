/** DOM rendering and event wiring (browser only; state lives in the controller). */

import { colLetters, renderA1, type Addr } from "./a1.js";
import { inContextWindow } from "./cells.js";
import type { SuggestController } from "./controller.js";
import { MAX_COLS, MAX_ROWS } from "./grid.js";
import { formatScore, panelLabel, sketchSpans } from "./sketch.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class AppView {
  private readonly controller: SuggestController;
  private readonly toolbar = el("div", "toolbar");
  private readonly banner = el("div", "banner");
  private readonly formulaBar = el("div", "formula-bar");
  private readonly gridHost = el("div", "grid-host");
  private readonly panel = el("div", "panel");
  private readonly editInput = el("input") as HTMLInputElement;
  private readonly topKInput = el("input") as HTMLInputElement;
  private readonly addrLabel = el("span", "addr");

  constructor(root: HTMLElement, controller: SuggestController) {
    this.controller = controller;
    root.replaceChildren(
      this.toolbar,
      this.banner,
      this.formulaBar,
      this.gridHost,
      this.panel,
    );
    this.buildToolbar();
    this.buildFormulaBar();
    controller.onChange = () => this.render();
    this.render();
  }

  private buildToolbar(): void {
    const frozen = el("label", "frozen-toggle");
    const box = el("input") as HTMLInputElement;
    box.type = "checkbox";
    box.checked = this.controller.grid.frozenRows > 0;
    box.addEventListener("change", () => {
      this.controller.grid.toggleFrozen();
      this.render();
    });
    frozen.append(box, document.createTextNode(" header row frozen"));

    this.topKInput.type = "number";
    this.topKInput.min = "1";
    this.topKInput.value = "5";
    this.topKInput.className = "top-k";
    const topKLabel = el("label", undefined, "top-k ");
    topKLabel.append(this.topKInput);

    const suggest = el("button", "suggest", "Suggest");
    suggest.addEventListener("click", () => {
      void this.controller.requestSuggestions(this.readTopK());
    });
    const cancel = el("button", "cancel", "Cancel");
    cancel.addEventListener("click", () => this.controller.cancelPending());
    const exportBtn = el("button", "export", "Export grid");
    exportBtn.addEventListener("click", () => this.download());

    this.toolbar.append(frozen, topKLabel, suggest, cancel, exportBtn);
  }

  private readTopK(): number {
    const parsed = Number.parseInt(this.topKInput.value, 10);
    const max = this.controller.maxTopK ?? 64;
    if (Number.isNaN(parsed) || parsed < 1) return 5;
    return Math.min(parsed, max);
  }

  private buildFormulaBar(): void {
    this.editInput.type = "text";
    this.editInput.placeholder = "cell contents";
    this.editInput.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        this.controller.grid.editCell(this.controller.grid.selected, this.editInput.value);
        this.render();
      }
    });
    this.formulaBar.append(this.addrLabel, this.editInput);
  }

  private download(): void {
    const text = this.controller.grid.exportText();
    const blob = new Blob([text], { type: "application/json" });
    const link = el("a") as HTMLAnchorElement;
    link.href = URL.createObjectURL(blob);
    link.download = `${this.controller.grid.sheetName}.grid.json`;
    link.click();
    URL.revokeObjectURL(link.href);
  }

  render(): void {
    this.renderBanner();
    this.renderFormulaBar();
    this.renderGrid();
    this.renderPanel();
    const suggest = this.toolbar.querySelector<HTMLButtonElement>("button.suggest");
    if (suggest) suggest.disabled = this.controller.pending;
    const cancel = this.toolbar.querySelector<HTMLButtonElement>("button.cancel");
    if (cancel) cancel.hidden = !this.controller.pending;
  }

  private renderBanner(): void {
    const banner = this.controller.banner;
    this.banner.replaceChildren();
    this.banner.hidden = banner === null;
    if (banner === null) return;
    this.banner.append(el("span", "message", banner.message));
    if (banner.canRetry) {
      const retry = el("button", "retry", "Retry");
      retry.addEventListener("click", () => void this.controller.retry());
      this.banner.append(retry);
    }
    const dismiss = el("button", "dismiss", "Dismiss");
    dismiss.addEventListener("click", () => this.controller.dismissBanner());
    this.banner.append(dismiss);
  }

  private renderFormulaBar(): void {
    const selected = this.controller.grid.selected;
    this.addrLabel.textContent = renderA1(selected);
    this.editInput.value = this.controller.grid.displayText(selected);
  }

  private renderGrid(): void {
    const grid = this.controller.grid;
    const selected = grid.selected;
    const radius = this.controller.windowRadius;
    const table = el("table", "grid");
    const head = el("tr");
    head.append(el("th"));
    for (let col = 1; col <= MAX_COLS; col++) {
      head.append(el("th", undefined, colLetters(col)));
    }
    table.append(head);
    for (let row = 1; row <= MAX_ROWS; row++) {
      const tr = el("tr");
      if (row <= grid.frozenRows) tr.className = "frozen";
      tr.append(el("th", undefined, String(row)));
      for (let col = 1; col <= MAX_COLS; col++) {
        const addr: Addr = { row, col };
        const cell = grid.cellAt(addr);
        const td = el("td", undefined, cell?.value ?? "");
        if (cell?.kind === "formula") td.classList.add("formula");
        if (row === selected.row && col === selected.col) td.classList.add("selected");
        if (radius !== null && inContextWindow(selected, addr, radius)) {
          td.classList.add("ctx");
        }
        td.addEventListener("click", () => {
          grid.select(addr);
          this.render();
          this.editInput.focus();
        });
        tr.append(td);
      }
      table.append(tr);
    }
    this.gridHost.replaceChildren(table);
  }

  private renderPanel(): void {
    const suggestions = this.controller.suggestions;
    this.panel.replaceChildren();
    const label = panelLabel(suggestions);
    if (this.controller.pending) {
      this.panel.append(el("p", "status", "requesting suggestions…"));
      return;
    }
    if (label) this.panel.append(el("p", "status", label));
    if (suggestions === null) return;
    const list = el("ol", "suggestions");
    for (const suggestion of suggestions) {
      const item = el("li");
      const accept = el("button", "accept", "Accept");
      accept.addEventListener("click", () =>
        this.controller.acceptSuggestion(suggestion.rank),
      );
      const sketch = el("span", "sketch");
      for (const span of sketchSpans(suggestion.sketch)) {
        sketch.append(el("span", span.highlight ? "range-token" : "token", span.text));
      }
      item.append(
        accept,
        el("code", "formula", suggestion.formula),
        el("span", "score", formatScore(suggestion)),
        sketch,
      );
      list.append(item);
    }
    this.panel.append(list);
  }
}
