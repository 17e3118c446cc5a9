import { ApiClient, ApiError, RecommendGate } from "./api";
import { renderError, renderPreview, renderResults, renderStatements } from "./render";
import { SelectionState, clampK } from "./state";
import { layoutWheel, renderWheelSvg, type WheelViewModel } from "./wheel";
import type { RecommendResponse, Statement } from "./types";

interface Elements {
  wheel: HTMLElement;
  statements: HTMLElement;
  preview: HTMLElement;
  results: HTMLElement;
  freeText: HTMLTextAreaElement;
  userId: HTMLInputElement;
  k: HTMLInputElement;
  submit: HTMLButtonElement;
}

/** Wire the selection UI into a root element. Exported so tests can
 * mount it against a stubbed fetch. */
export async function bootstrap(root: HTMLElement, api: ApiClient): Promise<AppController> {
  root.innerHTML = `
    <main class="app">
      <section class="left">
        <div id="wheel"></div>
      </section>
      <section class="right">
        <label>User id <input id="user-id" type="text" placeholder="u001"/></label>
        <div id="statements"><p class="empty">Pick an emotion to see statements.</p></div>
        <label>Describe what you want to feel
          <textarea id="free-text" rows="3"></textarea></label>
        <h2>Your description</h2>
        <div id="preview"></div>
        <label>Results <input id="k" type="number" min="1" max="100" value="10"/></label>
        <button id="submit" disabled>Recommend</button>
        <div id="results"></div>
      </section>
    </main>`;
  const elements: Elements = {
    wheel: root.querySelector("#wheel")!,
    statements: root.querySelector("#statements")!,
    preview: root.querySelector("#preview")!,
    results: root.querySelector("#results")!,
    freeText: root.querySelector("#free-text")!,
    userId: root.querySelector("#user-id")!,
    k: root.querySelector("#k")!,
    submit: root.querySelector("#submit")!,
  };
  const controller = new AppController(api, elements);
  await controller.start();
  return controller;
}

export class AppController {
  readonly state = new SelectionState();
  private model: WheelViewModel | null = null;
  private visible: Statement[] = [];
  private lastResults: RecommendResponse | null = null;
  private expandedBook: string | null = null;
  private readonly gate: RecommendGate;

  constructor(
    private readonly api: ApiClient,
    private readonly el: Elements,
  ) {
    this.gate = new RecommendGate(api);
    el.results.addEventListener("click", (ev) => this.onResultClick(ev));
    el.wheel.addEventListener("click", (ev) => this.onWheelClick(ev));
    el.statements.addEventListener("change", (ev) => this.onStatementToggle(ev));
    el.freeText.addEventListener("input", () => {
      this.state.setFreeText(this.el.freeText.value);
      this.refreshPreview();
    });
    el.userId.addEventListener("input", () => {
      this.state.userId = this.el.userId.value;
      this.refreshPreview();
    });
    el.k.addEventListener("change", () => {
      this.state.setK(Number(this.el.k.value));
      this.el.k.value = String(this.state.k);
    });
    el.submit.addEventListener("click", () => void this.recommend());
  }

  async start(): Promise<void> {
    const payload = await this.api.getWheel();
    this.model = layoutWheel(payload);
    this.refreshWheel();
    this.refreshPreview();
  }

  private refreshWheel(): void {
    if (!this.model) return;
    const selected = new Set(this.state.categories.keys());
    this.el.wheel.innerHTML = renderWheelSvg(this.model, selected);
  }

  private refreshStatements(): void {
    const selectedIds = new Set(this.state.statements.keys());
    this.el.statements.innerHTML = renderStatements(this.visible, selectedIds);
  }

  refreshPreview(): void {
    this.el.preview.innerHTML = renderPreview(this.state.preview());
    this.el.submit.disabled = !this.state.canRecommend();
  }

  private onWheelClick(ev: Event): void {
    const target = (ev.target as Element | null)?.closest("[data-category]");
    if (!target) return;
    const category = target.getAttribute("data-category")!;
    const intensity = target.getAttribute("data-intensity") ?? undefined;
    const nowSelected = this.state.toggleCategory(category, intensity);
    this.refreshWheel();
    this.refreshPreview();
    if (nowSelected) {
      void this.loadStatements(category, intensity);
    }
  }

  async loadStatements(category: string, intensity?: string): Promise<void> {
    try {
      const page = await this.api.getStatements(category, intensity);
      this.visible = page.statements;
      this.refreshStatements();
    } catch (err) {
      this.el.statements.innerHTML = renderError(describe(err), true);
      const retry = this.el.statements.querySelector("[data-action=retry]");
      retry?.addEventListener("click", () => void this.loadStatements(category, intensity));
    }
  }

  private onStatementToggle(ev: Event): void {
    const input = ev.target as HTMLInputElement | null;
    const id = input?.getAttribute("data-statement-id");
    if (!id) return;
    const statement = this.visible.find((s) => s.id === id);
    if (!statement) return;
    this.state.toggleStatement(statement);
    this.refreshStatements();
    this.refreshPreview();
  }

  async recommend(): Promise<void> {
    if (!this.state.canRecommend()) return;
    const body = {
      user_id: this.state.userId.trim(),
      ac: this.state.toAcPayload(),
      k: clampK(this.state.k),
      protocol: "sampled" as const,
    };
    try {
      const response = await this.gate.submit(body);
      this.lastResults = response;
      this.expandedBook = null;
      this.el.results.innerHTML = renderResults(response.items);
    } catch (err) {
      if ((err as Error).name === "AbortError") return; // superseded by a newer query
      this.el.results.innerHTML = renderError(describe(err), true);
      const retry = this.el.results.querySelector("[data-action=retry]");
      retry?.addEventListener("click", () => void this.recommend());
    }
  }

  private onResultClick(ev: Event): void {
    const row = (ev.target as Element | null)?.closest("[data-book-id]");
    if (!row || !this.lastResults) return;
    const id = row.getAttribute("data-book-id")!;
    this.expandedBook = this.expandedBook === id ? null : id;
    this.el.results.innerHTML = renderResults(
      this.lastResults.items,
      this.expandedBook ?? undefined,
    );
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.status === 404) return `Not found: ${err.detail}`;
    if (err.status === 400) return `Bad request: ${err.detail}`;
    if (err.status === 503) return "The model is still loading; try again shortly.";
    return err.message;
  }
  return err instanceof Error ? err.message : String(err);
}

declare global {
  interface Window {
    __acrecBooted?: Promise<AppController>;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.__acrecBooted = bootstrap(document.getElementById("app")!, new ApiClient(""));
}
