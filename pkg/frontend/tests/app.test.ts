// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, RecommendGate } from "../src/api";
import { bootstrap } from "../src/main";
import { MockService } from "./mock_service";

function mount(service: MockService) {
  document.body.innerHTML = '<div id="root"></div>';
  const api = new ApiClient("", service.fetch);
  return bootstrap(document.getElementById("root")!, api);
}

function clickCategory(name: string) {
  const spoke = document.querySelector(`[data-category="${name}"]`)!;
  spoke.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

async function settle() {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe("selection UI against the mock service", () => {
  let service: MockService;

  beforeEach(() => {
    service = new MockService();
  });

  it("renders all 27 wheel categories from the service payload", async () => {
    await mount(service);
    expect(service.wheelCalls).toBe(1);
    const categories = new Set(
      [...document.querySelectorAll("#wheel [data-category]")].map((el) =>
        el.getAttribute("data-category"),
      ),
    );
    expect(categories.size).toBe(27);
    expect(categories.has("Other")).toBe(true);
  });

  it("selecting a category fetches and filters its statements", async () => {
    await mount(service);
    clickCategory("Fear");
    await settle();
    expect(service.statementCalls).toEqual([{ category: "Fear", intensity: null }]);
    const shown = [...document.querySelectorAll("#statements [data-statement-id]")].map((el) =>
      el.getAttribute("data-statement-id"),
    );
    expect(shown).toEqual(["s-fear-1", "s-fear-2"]);
    const spoke = document.querySelector('#wheel g[data-category="Fear"]')!;
    expect(spoke.getAttribute("class")).toContain("selected");
  });

  it("multi-category selection highlights each active spoke", async () => {
    await mount(service);
    for (const name of ["Fear", "Joy", "Sadness", "Tension"]) {
      clickCategory(name);
      await settle();
    }
    const selected = document.querySelectorAll("#wheel g.spoke.selected");
    expect(selected.length).toBe(4);
  });

  it("composes, submits, and renders a ranked list; the scored text byte-matches the preview", async () => {
    const app = await mount(service);
    (document.getElementById("user-id") as HTMLInputElement).value = "u001";
    document.getElementById("user-id")!.dispatchEvent(new Event("input", { bubbles: true }));

    clickCategory("Fear");
    await settle();
    const checkbox = document.querySelector(
      '[data-statement-id="s-fear-2"]',
    ) as HTMLInputElement;
    checkbox.checked = true;
    checkbox.dispatchEvent(new Event("change", { bubbles: true }));
    const checkbox1 = document.querySelector(
      '[data-statement-id="s-fear-1"]',
    ) as HTMLInputElement;
    checkbox1.checked = true;
    checkbox1.dispatchEvent(new Event("change", { bubbles: true }));

    const freeText = document.getElementById("free-text") as HTMLTextAreaElement;
    freeText.value = "something that lingers";
    freeText.dispatchEvent(new Event("input", { bubbles: true }));

    const preview = document.querySelector("#preview .preview")!.textContent!;
    expect(preview).toBe(
      "something that lingers keeps me on edge all night a creeping dread that builds slowly",
    );

    const submit = document.getElementById("submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
    await app.recommend();
    await settle();

    const rows = [...document.querySelectorAll("#results .result")];
    expect(rows.length).toBe(10);
    expect(rows[0].querySelector(".title")!.textContent).toBe("Mock Book 1");
    const scores = rows.map((r) => Number(r.querySelector(".score")!.textContent));
    expect([...scores].sort((a, b) => b - a)).toEqual(scores);

    // what the server actually scored is exactly what the user saw
    expect(service.lastRenderedDescription).toBe(preview);
    expect(service.recommendBodies[0].ac.statement_ids).toEqual(["s-fear-1", "s-fear-2"]);

    // selecting a result reveals its descriptions
    rows[1].dispatchEvent(new MouseEvent("click", { bubbles: true }));
    const details = document.querySelector("#results .expanded .details")!;
    expect(details.textContent).toContain("catalog text for mock book 2");
    expect(details.textContent).toContain("what other readers said about book 2");
  });

  it("deselecting everything disables the recommend button", async () => {
    await mount(service);
    (document.getElementById("user-id") as HTMLInputElement).value = "u001";
    document.getElementById("user-id")!.dispatchEvent(new Event("input", { bubbles: true }));

    clickCategory("Fear");
    await settle();
    const checkbox = document.querySelector(
      '[data-statement-id="s-fear-1"]',
    ) as HTMLInputElement;
    checkbox.dispatchEvent(new Event("change", { bubbles: true }));
    const submit = document.getElementById("submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(false);
    // the panel re-rendered; toggle off through the fresh element
    const fresh = document.querySelector('[data-statement-id="s-fear-1"]') as HTMLInputElement;
    fresh.dispatchEvent(new Event("change", { bubbles: true }));
    expect(submit.disabled).toBe(true);
  });

  it("re-querying reflects the current selection state", async () => {
    const app = await mount(service);
    (document.getElementById("user-id") as HTMLInputElement).value = "u001";
    document.getElementById("user-id")!.dispatchEvent(new Event("input", { bubbles: true }));
    const freeText = document.getElementById("free-text") as HTMLTextAreaElement;
    freeText.value = "first wish";
    freeText.dispatchEvent(new Event("input", { bubbles: true }));
    await app.recommend();
    freeText.value = "second wish";
    freeText.dispatchEvent(new Event("input", { bubbles: true }));
    await app.recommend();
    expect(service.recommendBodies.map((b) => b.ac.free_text)).toEqual([
      "first wish",
      "second wish",
    ]);
  });

  it("renders service errors with actionable text", async () => {
    const app = await mount(service);
    (document.getElementById("user-id") as HTMLInputElement).value = "u001";
    document.getElementById("user-id")!.dispatchEvent(new Event("input", { bubbles: true }));
    const freeText = document.getElementById("free-text") as HTMLTextAreaElement;
    freeText.value = "anything";
    freeText.dispatchEvent(new Event("input", { bubbles: true }));
    service.failNextRecommend = true;
    await app.recommend();
    await settle();
    const error = document.querySelector("#results .error")!;
    expect(error.textContent).toContain("model is still loading");
    expect(error.querySelector("[data-action=retry]")).not.toBeNull();
  });
});

describe("RecommendGate", () => {
  it("cancels the in-flight request when a new one is submitted", async () => {
    let aborted = 0;
    const slowFetch: typeof fetch = (_input, init) =>
      new Promise((resolve, reject) => {
        init?.signal?.addEventListener("abort", () => {
          aborted += 1;
          reject(new DOMException("aborted", "AbortError"));
        });
        setTimeout(
          () =>
            resolve(
              new Response(
                JSON.stringify({ items: [], model_digest: "d", latency_ms: 0 }),
                { status: 200, headers: { "content-type": "application/json" } },
              ),
            ),
          30,
        );
      });
    const gate = new RecommendGate(new ApiClient("", slowFetch));
    const body = { user_id: "u", ac: { free_text: "x" }, k: 5, protocol: "sampled" as const };
    const first = gate.submit(body);
    const second = gate.submit(body);
    await expect(first).rejects.toHaveProperty("name", "AbortError");
    await expect(second).resolves.toHaveProperty("model_digest", "d");
    expect(aborted).toBe(1);
  });
});
