import { beforeEach, describe, expect, it } from "vitest";
import { ApiClient, type Fetcher } from "../src/api";
import { GameApp, buildDaPayload } from "../src/app";
import type { SessionView } from "../src/types";

/** Network stub: canned /v1 responses, full request log via ApiClient. */
function stubFetcher(view: SessionView, overrides: Record<string, unknown> = {}): Fetcher {
  return async (url, init) => {
    const method = init?.method ?? "GET";
    const key = `${method} ${url.replace(/^https?:\/\/[^/]+/, "")}`;
    const canned: Record<string, unknown> = {
      "POST /v1/sessions": { session_id: view.session_id },
      [`GET /v1/sessions/${view.session_id}`]: view,
      [`POST /v1/sessions/${view.session_id}/da/5`]: { shares: { A: 0.5, B: 0.3, C: 0.2 } },
      [`POST /v1/sessions/${view.session_id}/da/7`]: {
        chart: "histogram", variable: "Cost", bin_edges: [0, 1, 2], counts: [4, 6],
      },
      [`POST /v1/sessions/${view.session_id}/models`]: { model_id: 1, status: "estimated", cached: false },
      [`GET /v1/sessions/${view.session_id}/models/1`]: {
        model_id: 1, status: "estimated", cached: false,
        parameters: [{ name: "b_cost", estimate: -0.0123, robust_se: 0.002, t_stat: -6.15, p_value: 0 }],
        fit: { ll_final: -100 },
      },
      [`POST /v1/sessions/${view.session_id}/report`]: { session_id: view.session_id, closed: true, r_models: [1] },
      ...overrides,
    };
    if (canned[key] === undefined) {
      return new Response(JSON.stringify({ error: "UnknownAction", detail: key }), { status: 400 });
    }
    return new Response(JSON.stringify(canned[key]), { status: 200 });
  };
}

function baseView(): SessionView {
  return {
    session_id: "s1", user_id: "u", dataset_ref: "default", current_phase: "DA",
    closed: false, time_limit: 2700, n_events: 0, models: [],
  };
}

const flush = () => new Promise((r) => setTimeout(r, 0));

describe("game app", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<main id='app'></main>";
    root = document.getElementById("app")!;
  });

  async function startApp(view = baseView(), overrides = {}) {
    const api = new ApiClient("", stubFetcher(view, overrides));
    const app = new GameApp(root, api);
    await app.start("u");
    app.stopClock();
    return { app, api };
  }

  it("start renders the four phase tabs, countdown, and session label", async () => {
    await startApp();
    const tabs = [...root.querySelectorAll("#tabs button")].map((b) => b.textContent);
    expect(tabs).toEqual(["DA", "MS", "OI", "R"]);
    expect(root.querySelector("#countdown")?.textContent).toBe("45:00");
    expect(root.querySelector("#session-label")?.textContent).toContain("s1");
  });

  it("running a DA tool dispatches exactly one API call and renders the payload", async () => {
    const { app, api } = await startApp();
    const before = api.requestLog.length;
    (root.querySelector("#da-tool") as HTMLSelectElement).value = "5";
    (root.querySelector("#da-run") as HTMLButtonElement).click();
    await flush();
    expect(api.requestLog.length - before).toBe(1);
    expect(api.requestLog.at(-1)).toEqual({ method: "POST", url: "/v1/sessions/s1/da/5" });
    expect(root.querySelector("#da-output")?.textContent).toContain("0.5");
    expect(app.view?.closed).toBe(false);
  });

  it("histogram bars come straight from the server bins (thin-client rule)", async () => {
    const { api } = await startApp();
    (root.querySelector("#da-tool") as HTMLSelectElement).value = "7";
    (root.querySelector("#da-variables") as HTMLInputElement).value = "Cost";
    (root.querySelector("#da-run") as HTMLButtonElement).click();
    await flush();
    const bars = [...root.querySelectorAll("#da-output .bar")];
    expect(bars.map((b) => (b as HTMLElement).dataset["count"])).toEqual(["4", "6"]);
    expect(api.requestLog.filter((r) => r.method === "POST").length).toBe(2); // session + tool
  });

  it("MMNL form disables interaction selectors on random attributes", async () => {
    const { app } = await startApp();
    app.activeTab = "MS";
    app.render();
    const family = root.querySelector("#ms-family") as HTMLSelectElement;
    family.value = "2";
    family.dispatchEvent(new Event("change"));
    const dist = root.querySelector("#ms-dist-3") as HTMLSelectElement; // Noise
    dist.value = "1";
    dist.dispatchEvent(new Event("change"));
    expect((root.querySelector("#ms-interaction-3") as HTMLSelectElement).disabled).toBe(true);
    expect((root.querySelector("#ms-interaction-0") as HTMLSelectElement).disabled).toBe(false);
    // family-wide locks
    expect((root.querySelector("#ms-asc") as HTMLInputElement).disabled).toBe(true);
    expect((root.querySelector("#ms-transform-0") as HTMLSelectElement).disabled).toBe(true);
  });

  it("invalid forms grey out the submit button and list the violations", async () => {
    const { app } = await startApp();
    app.activeTab = "MS";
    app.form.transform[5] = 3; // log on Cost
    app.render();
    expect((root.querySelector("#ms-submit") as HTMLButtonElement).disabled).toBe(true);
    expect(root.querySelector("#ms-violations")?.textContent)
      .toContain("log of nonpositive attribute");
  });

  it("submitting a model adds a status badge and renders server estimates", async () => {
    const { app, api } = await startApp();
    app.activeTab = "MS";
    app.render();
    const before = api.requestLog.filter((r) => r.method === "POST").length;
    (root.querySelector("#ms-submit") as HTMLButtonElement).click();
    await flush();
    await flush();
    expect(api.requestLog.filter((r) => r.method === "POST").length - before).toBe(1);
    expect(root.querySelector(".badge-estimated")?.textContent).toBe("estimated");
    expect(root.querySelector("#ms-output")?.textContent).toContain("-0.0123");
  });

  it("report submit stays disabled until a model is picked and text entered", async () => {
    const view = baseView();
    view.models = [{ model_id: 1, family: 1, status: "estimated", cached: false },
                   { model_id: 2, family: 1, status: "misspecified", cached: false }];
    const { app } = await startApp(view);
    app.activeTab = "R";
    app.render();
    // only estimated models are offered
    expect(root.querySelectorAll("#report-models input").length).toBe(1);
    const submit = root.querySelector("#report-submit") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    (root.querySelector("#report-model-1") as HTMLInputElement).click();
    expect(submit.disabled).toBe(true);   // still no text
    const text = root.querySelector("#report-text") as HTMLTextAreaElement;
    text.value = "model 1 fits best";
    text.dispatchEvent(new Event("input"));
    expect(submit.disabled).toBe(false);
    submit.click();
    await flush();
    expect(root.querySelector("#closed-banner")).not.toBeNull();
  });

  it("4xx bodies are surfaced verbatim", async () => {
    const { app } = await startApp(baseView(), {
      "POST /v1/sessions/s1/da/5": undefined, // falls through to the 400 stub
    });
    void app;
    (root.querySelector("#da-tool") as HTMLSelectElement).value = "5";
    (root.querySelector("#da-run") as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector("#da-output .error")?.textContent).toContain("UnknownAction");
  });

  it("restore() reconstructs the view from server state alone", async () => {
    const view = baseView();
    view.models = [{ model_id: 1, family: 2, status: "estimated", cached: true }];
    view.current_phase = "OI";
    const api = new ApiClient("", stubFetcher(view));
    const app = new GameApp(root, api);
    await app.restore("s1");
    app.stopClock();
    expect(root.querySelectorAll("#models li").length).toBe(1);
    expect(root.querySelector(".badge-cached")).not.toBeNull();
    expect(root.querySelector("#session-label")?.textContent).toContain("s1");
  });
});

describe("DA payload mapping", () => {
  it("maps the variables box onto each tool's payload shape", () => {
    expect(buildDaPayload(7, "Cost")).toEqual({ variable: "Cost" });
    expect(buildDaPayload(12, "Noise, Cost")).toEqual({ variables: ["Noise", "Cost"] });
    expect(buildDaPayload(11, "Noise,Cost,Green")).toEqual({ variables: ["Noise", "Cost", "Green"] });
    expect(buildDaPayload(10, "cost_A, desc")).toEqual({ variable: "cost_A", order: "desc" });
    expect(buildDaPayload(13, "median")).toEqual({ statistic: "median" });
    expect(buildDaPayload(4, "10")).toEqual({ n: 10 });
    expect(buildDaPayload(2, "")).toEqual({});
  });
});
