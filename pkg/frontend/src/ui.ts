/**
 * The steering screen: story so far, editable keywords for the next
 * sentence, score-sorted knowledge pinning, and per-step provenance.
 *
 * Every state change round-trips through the gateway; after a mutation
 * the view is re-fetched with GET so the display always mirrors the
 * server byte-for-byte. No optimistic updates.
 */

import { GatewayClient, GatewayError, SessionView } from "./api.js";
import {
  canEditKeywords,
  canPinKnowledge,
  canStep,
  isComplete,
  parseKeywordInput,
  planLog,
  storyLine,
} from "./state.js";

const SOURCE_BADGES: Record<string, string> = {
  predicted: "predicted",
  human: "human override",
  extracted: "extracted",
};

export class SteerApp {
  view: SessionView | null = null;
  lastAction: Promise<void> = Promise.resolve();
  private lastOp: (() => Promise<void>) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: GatewayClient,
    private readonly doc: Document = root.ownerDocument,
  ) {
    this.root.innerHTML = `
      <section id="start-panel">
        <form id="start-form">
          <label>First sentence
            <input id="first-sentence" type="text" placeholder="[FEMALE] was on a long road trip ." />
          </label>
          <button id="start" type="submit">Start story</button>
        </form>
      </section>
      <div id="error" class="error" hidden>
        <span id="error-text"></span>
        <button id="retry" type="button">Retry</button>
      </div>
      <section id="session-panel" hidden>
        <ol id="story"></ol>
        <div id="complete-banner" class="banner" hidden>Story complete.</div>
        <div id="planning">
          <form id="keyword-form">
            <label>Keywords for the next sentence (separate with ;)
              <input id="keywords" type="text" />
            </label>
            <button id="apply-keywords" type="submit">Retrieve knowledge</button>
          </form>
          <div id="knowledge-panel">
            <ul id="knowledge"></ul>
            <button id="pin" type="button">Pin selected</button>
          </div>
          <button id="generate" type="button">Generate next sentence</button>
        </div>
        <div id="history-panel">
          <button id="export-story" type="button">Export story</button>
          <button id="export-plan" type="button">Export plan log</button>
        </div>
      </section>
    `;
    this.wire();
    this.renderControls();
  }

  private el<T extends HTMLElement>(id: string): T {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  private wire(): void {
    this.el<HTMLFormElement>("start-form").addEventListener("submit", (event) => {
      event.preventDefault();
      this.lastAction = this.guarded(() =>
        this.start(this.el<HTMLInputElement>("first-sentence").value),
      );
    });
    this.el<HTMLFormElement>("keyword-form").addEventListener("submit", (event) => {
      event.preventDefault();
      this.lastAction = this.guarded(() => this.applyKeywords());
    });
    this.el<HTMLButtonElement>("pin").addEventListener("click", () => {
      this.lastAction = this.guarded(() => this.pinSelected());
    });
    this.el<HTMLButtonElement>("generate").addEventListener("click", () => {
      this.lastAction = this.guarded(() => this.generateNext());
    });
    this.el<HTMLButtonElement>("retry").addEventListener("click", () => {
      const op = this.lastOp;
      if (op) this.lastAction = this.guarded(op);
    });
    this.el<HTMLButtonElement>("export-story").addEventListener("click", () => {
      this.download("story.tsv", this.exportStory() + "\n");
    });
    this.el<HTMLButtonElement>("export-plan").addEventListener("click", () => {
      this.download("plan.tsv", this.exportPlanLog());
    });
  }

  private async guarded(op: () => Promise<void>): Promise<void> {
    this.lastOp = op;
    this.clearError();
    try {
      await op();
    } catch (error) {
      this.showError(error);
    }
  }

  private showError(error: unknown): void {
    const box = this.el<HTMLDivElement>("error");
    const text = this.el<HTMLSpanElement>("error-text");
    if (error instanceof GatewayError) {
      const hint = error.retryable ? " (backend busy, retry in a moment)" : "";
      text.textContent = `${error.detail}${hint}`;
    } else {
      text.textContent = String(error);
    }
    box.hidden = false;
  }

  private clearError(): void {
    this.el<HTMLDivElement>("error").hidden = true;
    this.el<HTMLSpanElement>("error-text").textContent = "";
  }

  get errorText(): string {
    return this.el<HTMLDivElement>("error").hidden
      ? ""
      : (this.el<HTMLSpanElement>("error-text").textContent ?? "");
  }

  async start(firstSentence: string): Promise<void> {
    const created = await this.client.createSession(firstSentence);
    await this.refresh(created.session_id);
  }

  /** Reconnect to an existing session (another tab, a saved id). */
  async attach(sessionId: string): Promise<void> {
    await this.refresh(sessionId);
  }

  async refresh(sessionId?: string): Promise<void> {
    const id = sessionId ?? this.requireView().session_id;
    this.view = await this.client.getSession(id);
    this.render();
  }

  async applyKeywords(): Promise<void> {
    const view = this.requireView();
    if (!canEditKeywords(view)) throw new Error("keywords are not editable in this phase");
    const phrases = parseKeywordInput(this.el<HTMLInputElement>("keywords").value);
    await this.client.overrideKeywords(view.session_id, phrases);
    await this.refresh();
  }

  async pinSelected(): Promise<void> {
    const view = this.requireView();
    if (!canPinKnowledge(view)) throw new Error("no knowledge candidates to pin in this phase");
    await this.client.pinKnowledge(view.session_id, this.selectedIds());
    await this.refresh();
  }

  async generateNext(): Promise<void> {
    const view = this.requireView();
    // client-side guard: never send a step outside knowledge_ready
    if (!canStep(view)) throw new Error("select keywords and knowledge before generating");
    await this.client.step(view.session_id);
    await this.refresh();
  }

  exportStory(): string {
    return storyLine(this.requireView());
  }

  exportPlanLog(): string {
    return planLog(this.requireView());
  }

  selectedIds(): number[] {
    const boxes = this.root.querySelectorAll<HTMLInputElement>("#knowledge input[type=checkbox]");
    return Array.from(boxes)
      .filter((box) => box.checked)
      .map((box) => Number(box.value));
  }

  private requireView(): SessionView {
    if (!this.view) throw new Error("no active session");
    return this.view;
  }

  private render(): void {
    const view = this.requireView();
    this.el<HTMLElement>("session-panel").hidden = false;
    this.renderStory(view);
    this.renderKeywords(view);
    this.renderKnowledge(view);
    this.renderControls();
  }

  private renderStory(view: SessionView): void {
    const list = this.el<HTMLOListElement>("story");
    list.innerHTML = "";
    for (const step of view.steps) {
      const item = this.doc.createElement("li");
      const sentence = this.doc.createElement("span");
      sentence.className = "sentence";
      sentence.textContent = step.sentence;
      item.appendChild(sentence);

      const badge = this.doc.createElement("span");
      badge.className = `badge badge-${step.provenance === "given" ? "given" : step.keyword_source}`;
      badge.textContent =
        step.provenance === "given" ? "given" : SOURCE_BADGES[step.keyword_source] ?? step.keyword_source;
      item.appendChild(badge);

      if (step.keywords.length > 0 || step.knowledge.length > 0) {
        const plan = this.doc.createElement("span");
        plan.className = "plan";
        const ids = step.knowledge.map((k) => k.triple_id).join(",");
        plan.textContent = ` [${step.keywords.join(" ; ")}] {${ids}}`;
        item.appendChild(plan);
      }
      list.appendChild(item);
    }
    this.el<HTMLDivElement>("complete-banner").hidden = !isComplete(view);
  }

  private renderKeywords(view: SessionView): void {
    const input = this.el<HTMLInputElement>("keywords");
    if (canEditKeywords(view)) {
      input.value = (view.pending_keywords ?? []).join(" ; ");
    }
    input.disabled = !canEditKeywords(view);
    this.el<HTMLButtonElement>("apply-keywords").disabled = !canEditKeywords(view);
  }

  private renderKnowledge(view: SessionView): void {
    const list = this.el<HTMLUListElement>("knowledge");
    list.innerHTML = "";
    const candidates = view.pending_knowledge ?? [];
    const pinned = new Set(view.pinned_ids ?? []);
    const limit = view.knowledge_per_step;
    for (const candidate of candidates) {
      const item = this.doc.createElement("li");
      const label = this.doc.createElement("label");
      const box = this.doc.createElement("input");
      box.type = "checkbox";
      box.value = String(candidate.triple_id);
      box.checked = pinned.size > 0 ? pinned.has(candidate.triple_id) : false;
      box.addEventListener("change", () => {
        if (box.checked && this.selectedIds().length > limit) {
          box.checked = false; // at most N knowledge sentences per step
        }
      });
      label.appendChild(box);
      const text = this.doc.createElement("span");
      text.textContent = ` ${candidate.score.toFixed(4)}  ${candidate.text}`;
      label.appendChild(text);
      item.appendChild(label);
      list.appendChild(item);
    }
    this.el<HTMLButtonElement>("pin").disabled = !canPinKnowledge(view) || candidates.length === 0;
  }

  private renderControls(): void {
    const view = this.view;
    this.el<HTMLButtonElement>("generate").disabled = view === null || !canStep(view);
    const exportable = view !== null;
    this.el<HTMLButtonElement>("export-story").disabled = !exportable;
    this.el<HTMLButtonElement>("export-plan").disabled = !exportable;
  }

  private download(filename: string, content: string): void {
    try {
      const blob = new Blob([content], { type: "text/tab-separated-values" });
      const anchor = this.doc.createElement("a");
      anchor.href = URL.createObjectURL(blob);
      anchor.download = filename;
      anchor.click();
      URL.revokeObjectURL(anchor.href);
    } catch {
      // headless environments have no object URLs; exports stay available
      // through exportStory()/exportPlanLog()
    }
  }
}
