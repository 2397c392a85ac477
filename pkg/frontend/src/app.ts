/** Single-page game client: four phase tabs (DA/MS/OI/R), tool panels bound
 * to the server's action codes, a model list with status badges, and a
 * countdown. Thin client: every number rendered originates from a /v1
 * payload, and every user interaction dispatches exactly one API call
 * (pending models are then polled per the async contract). */

import { ApiClient, ApiError } from "./api";
import { renderPayload } from "./charts";
import {
  ATTRIBUTES,
  BOXCOX,
  DIST_FIXED,
  DIST_LOGNORMAL,
  DIST_NORMAL,
  INTERACTION_COVARIATES,
  LC,
  LINEAR,
  LOG,
  MEMBERSHIP_COVARIATES,
  MMNL,
  MNL,
  SpecForm,
  controlState,
  defaultForm,
  normalizeForm,
  toSpecJson,
  validateSpec,
} from "./constraints";
import type { ModelBadge, ParameterRow, SessionView } from "./types";

export const DA_TOOLS: Record<number, string> = {
  1: "view_summary_statistics", 2: "view_data_dictionary", 3: "check_missing_data",
  4: "view_first_rows", 5: "view_choice_shares", 6: "view_choice_task_example",
  7: "view_histogram", 8: "delete_missing_values", 9: "view_boxplot",
  10: "sort_dataset", 11: "view_correlation", 12: "view_scatter_plot",
  13: "replace_missing_values", 14: "view_pie_chart", 15: "view_bar_chart",
};

export const OI_TOOLS: Record<number, string> = {
  21: "view_result_table", 22: "view_final_loglik", 23: "view_initial_loglik",
  24: "view_null_loglik", 25: "view_likelihood_ratio", 26: "view_rho2",
  27: "view_adj_rho2", 28: "view_aic", 29: "view_bic", 30: "view_n_parameters",
  31: "view_n_rows", 32: "view_n_individuals", 33: "view_gradient_norm",
  34: "view_estimation_time", 35: "calculate_wtp", 36: "compare_models",
  37: "elbow_graph", 38: "view_draws_used",
};

const PHASES = ["DA", "MS", "OI", "R"] as const;
type Phase = (typeof PHASES)[number];

function h(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Map the free-form variables box onto each DA tool's payload shape. */
export function buildDaPayload(code: number, variablesText: string): Record<string, unknown> {
  const vars = variablesText.split(",").map((s) => s.trim()).filter(Boolean);
  switch (DA_TOOLS[code]) {
    case "view_summary_statistics":
      return vars.length ? { variable: vars[0] } : {};
    case "view_first_rows":
      return vars.length ? { n: Number(vars[0]) } : {};
    case "view_choice_task_example":
      return vars.length === 2 ? { respondent: Number(vars[0]), task: Number(vars[1]) } : {};
    case "view_histogram":
    case "view_boxplot":
    case "view_pie_chart":
    case "view_bar_chart":
      return { variable: vars[0] ?? "" };
    case "sort_dataset":
      return { variable: vars[0] ?? "", order: vars[1] ?? "asc" };
    case "view_correlation":
    case "view_scatter_plot":
      return { variables: vars };
    case "replace_missing_values":
      return vars.length ? { statistic: vars[0] } : {};
    default:
      return {};
  }
}

export class GameApp {
  sessionId = "";
  view: SessionView | null = null;
  form: SpecForm = defaultForm();
  activeTab: Phase = "DA";
  private startedAt = 0;
  private ticker: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly root: HTMLElement,
    readonly api: ApiClient,
  ) {}

  async start(userId: string): Promise<void> {
    const { session_id } = await this.api.createSession(userId);
    await this.restore(session_id);
  }

  /** Rebuild the whole view from server state (also used on page reload). */
  async restore(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    this.view = await this.api.getSession(sessionId);
    this.startedAt = Date.now();
    this.render();
    this.stopClock();
    this.ticker = setInterval(() => this.tickClock(), 1000);
  }

  stopClock(): void {
    if (this.ticker) clearInterval(this.ticker);
    this.ticker = null;
  }

  private tickClock(): void {
    const node = this.root.querySelector<HTMLElement>("#countdown");
    if (!node || !this.view) return;
    const elapsed = Math.floor((Date.now() - this.startedAt) / 1000);
    const left = Math.max(this.view.time_limit - elapsed, 0);
    node.textContent = `${Math.floor(left / 60)}:${String(left % 60).padStart(2, "0")}`;
    node.classList.toggle("overtime", left === 0);
  }

  // -- rendering ------------------------------------------------------------

  render(): void {
    const view = this.view;
    if (!view) return;
    this.root.innerHTML = "";
    const header = h("header", {});
    header.appendChild(h("span", { id: "session-label" }, `session ${view.session_id}`));
    header.appendChild(h("span", { id: "countdown" }, `${Math.floor(view.time_limit / 60)}:00`));
    const tabs = h("nav", { id: "tabs" });
    for (const phase of PHASES) {
      const tab = h("button", { "data-tab": phase, type: "button" }, phase);
      if (phase === this.activeTab) tab.classList.add("active");
      tab.addEventListener("click", () => { this.activeTab = phase; this.render(); });
      tabs.appendChild(tab);
    }
    header.appendChild(tabs);
    this.root.appendChild(header);
    this.root.appendChild(this.renderModelList());
    if (view.closed) {
      this.root.appendChild(h("div", { id: "closed-banner" },
        "Session closed — report submitted."));
      return;
    }
    const panel = h("section", { id: "panel", "data-phase": this.activeTab });
    switch (this.activeTab) {
      case "DA": this.buildDaPanel(panel); break;
      case "MS": this.buildMsPanel(panel); break;
      case "OI": this.buildOiPanel(panel); break;
      case "R": this.buildReportPanel(panel); break;
    }
    this.root.appendChild(panel);
  }

  private renderModelList(): HTMLElement {
    const list = h("ul", { id: "models" });
    for (const m of this.view?.models ?? []) {
      const item = h("li", { "data-model-id": String(m.model_id) },
        `#${m.model_id} ${m.family ? ["", "MNL", "MMNL", "LC"][m.family] : ""} `);
      const badge = h("span", { class: `badge badge-${m.status}` }, m.status);
      item.appendChild(badge);
      if (m.cached) item.appendChild(h("span", { class: "badge badge-cached" }, "cached"));
      list.appendChild(item);
    }
    return list;
  }

  private upsertBadge(badge: ModelBadge): void {
    if (!this.view) return;
    const models = this.view.models.filter((m) => m.model_id !== badge.model_id);
    models.push(badge);
    models.sort((a, b) => a.model_id - b.model_id);
    this.view.models = models;
    this.root.querySelector("#models")?.replaceWith(this.renderModelList());
  }

  private showError(target: HTMLElement, err: unknown): void {
    target.innerHTML = "";
    const box = h("div", { class: "error" });
    if (err instanceof ApiError) {
      // surface the 4xx body verbatim
      box.appendChild(h("pre", {}, JSON.stringify(err.body, null, 2)));
    } else {
      box.textContent = String(err);
    }
    target.appendChild(box);
  }

  // -- DA -------------------------------------------------------------------

  private buildDaPanel(panel: HTMLElement): void {
    const select = h("select", { id: "da-tool" }) as HTMLSelectElement;
    for (const [code, name] of Object.entries(DA_TOOLS)) {
      select.appendChild(h("option", { value: code }, `${code} ${name}`));
    }
    const vars = h("input", {
      id: "da-variables", placeholder: "variable(s), comma-separated",
    }) as HTMLInputElement;
    const run = h("button", { id: "da-run", type: "button" }, "Run") as HTMLButtonElement;
    const output = h("div", { id: "da-output" });
    run.addEventListener("click", async () => {
      const code = Number(select.value);
      try {
        const payload = await this.api.daTool(this.sessionId, code,
          buildDaPayload(code, vars.value));
        output.innerHTML = "";
        output.appendChild(renderPayload(payload));
      } catch (err) {
        this.showError(output, err);
      }
    });
    panel.append(select, vars, run, output);
  }

  // -- MS -------------------------------------------------------------------

  private buildMsPanel(panel: HTMLElement): void {
    const form = this.form;
    const state = controlState(form);
    const violations = validateSpec(form);
    const rerender = () => { this.form = normalizeForm(this.form); this.render(); };

    const familySelect = h("select", { id: "ms-family" }) as HTMLSelectElement;
    for (const [value, label] of [[MNL, "MNL"], [MMNL, "Mixed logit"], [LC, "Latent class"]] as const) {
      const opt = h("option", { value: String(value) }, label) as HTMLOptionElement;
      opt.selected = form.family === value;
      familySelect.appendChild(opt);
    }
    familySelect.addEventListener("change", () => {
      this.form = defaultForm(Number(familySelect.value));
      this.render();
    });
    panel.appendChild(h("label", {}, "Family "));
    panel.appendChild(familySelect);

    const asc = h("input", { type: "checkbox", id: "ms-asc" }) as HTMLInputElement;
    asc.checked = form.asc;
    asc.disabled = state.ascDisabled;
    asc.addEventListener("change", () => { this.form.asc = asc.checked; rerender(); });
    panel.appendChild(asc);
    panel.appendChild(h("label", {}, "alternative-specific constants"));

    const table = h("table", { id: "ms-attributes" });
    const head = h("tr", {});
    for (const th of ["attribute", "include", "alt-specific", "transform", "interaction", "distribution"]) {
      head.appendChild(h("th", {}, th));
    }
    table.appendChild(head);
    ATTRIBUTES.forEach((attr, i) => {
      const row = h("tr", { "data-attr": attr });
      row.appendChild(h("td", {}, attr));

      const include = h("input", { type: "checkbox", id: `ms-include-${i}` }) as HTMLInputElement;
      include.checked = form.include[i];
      include.disabled = state.includeDisabled[i];
      include.addEventListener("change", () => { this.form.include[i] = include.checked; rerender(); });
      row.appendChild(h("td", {})).appendChild(include);

      const altSpec = h("input", { type: "checkbox", id: `ms-altspec-${i}` }) as HTMLInputElement;
      altSpec.checked = form.altSpecific[i];
      altSpec.disabled = state.altSpecificDisabled[i];
      altSpec.addEventListener("change", () => { this.form.altSpecific[i] = altSpec.checked; rerender(); });
      row.appendChild(h("td", {})).appendChild(altSpec);

      const transform = h("select", { id: `ms-transform-${i}` }) as HTMLSelectElement;
      for (const [value, label] of [[LINEAR, "linear"], [BOXCOX, "box-cox"], [LOG, "log"]] as const) {
        const opt = h("option", { value: String(value) }, label) as HTMLOptionElement;
        opt.selected = form.transform[i] === value;
        if (value === LOG && state.logOptionDisabled[i]) opt.disabled = true;
        transform.appendChild(opt);
      }
      transform.disabled = state.transformDisabled[i];
      transform.addEventListener("change", () => {
        this.form.transform[i] = Number(transform.value); rerender();
      });
      row.appendChild(h("td", {})).appendChild(transform);

      const interaction = h("select", { id: `ms-interaction-${i}` }) as HTMLSelectElement;
      interaction.appendChild(h("option", { value: "0" }, "none"));
      for (const [code, name] of Object.entries(INTERACTION_COVARIATES)) {
        const opt = h("option", { value: code }, name) as HTMLOptionElement;
        opt.selected = form.interaction[i] === Number(code);
        interaction.appendChild(opt);
      }
      interaction.disabled = state.interactionDisabled[i];
      interaction.addEventListener("change", () => {
        this.form.interaction[i] = Number(interaction.value); rerender();
      });
      row.appendChild(h("td", {})).appendChild(interaction);

      const dist = h("select", { id: `ms-dist-${i}` }) as HTMLSelectElement;
      for (const [value, label] of [[DIST_FIXED, "fixed"], [DIST_NORMAL, "normal"],
                                    [DIST_LOGNORMAL, "lognormal"]] as const) {
        const opt = h("option", { value: String(value) }, label) as HTMLOptionElement;
        opt.selected = form.dist[i] === value;
        dist.appendChild(opt);
      }
      dist.disabled = state.distDisabled[i];
      dist.addEventListener("change", () => {
        this.form.dist[i] = Number(dist.value); rerender();
      });
      row.appendChild(h("td", {})).appendChild(dist);

      table.appendChild(row);
    });
    panel.appendChild(table);

    const nClass = h("select", { id: "ms-nclass" }) as HTMLSelectElement;
    for (const n of state.nClassOptions.length ? state.nClassOptions : [0]) {
      const opt = h("option", { value: String(n) }, String(n)) as HTMLOptionElement;
      opt.selected = form.nClass === n;
      nClass.appendChild(opt);
    }
    nClass.disabled = state.nClassDisabled;
    nClass.addEventListener("change", () => { this.form.nClass = Number(nClass.value); rerender(); });
    panel.appendChild(h("label", {}, "classes "));
    panel.appendChild(nClass);

    const membership = h("div", { id: "ms-membership" });
    MEMBERSHIP_COVARIATES.forEach((cov, j) => {
      const box = h("input", { type: "checkbox", id: `ms-member-${j}` }) as HTMLInputElement;
      box.checked = form.membership[j];
      box.disabled = state.membershipDisabled[j];
      box.addEventListener("change", () => { this.form.membership[j] = box.checked; rerender(); });
      membership.appendChild(box);
      membership.appendChild(h("label", {}, cov));
    });
    panel.appendChild(membership);

    const problems = h("ul", { id: "ms-violations" });
    for (const v of violations) {
      problems.appendChild(h("li", {}, v.detail ? `${v.constraint}: ${v.detail}` : v.constraint));
    }
    panel.appendChild(problems);

    const output = h("div", { id: "ms-output" });
    const submit = h("button", { id: "ms-submit", type: "button" }, "Estimate") as HTMLButtonElement;
    submit.disabled = violations.length > 0;
    submit.addEventListener("click", async () => {
      submit.disabled = true;
      try {
        const reply = await this.api.requestModel(this.sessionId, toSpecJson(this.form));
        this.upsertBadge({ model_id: reply.model_id,
                           family: this.form.family,
                           status: reply.status as ModelBadge["status"],
                           cached: reply.cached });
        let detail;
        if (reply.status === "pending") {
          detail = await this.api.awaitModel(this.sessionId, reply.model_id);
          this.upsertBadge({ model_id: reply.model_id, family: this.form.family,
                             status: detail.status as ModelBadge["status"],
                             cached: detail.cached });
        } else {
          detail = await this.api.getModel(this.sessionId, reply.model_id);
        }
        output.innerHTML = "";
        output.appendChild(h("div", { class: "model-status" },
          `model #${reply.model_id}: ${detail.status}`));
        if (detail.parameters) output.appendChild(this.parameterTable(detail.parameters));
      } catch (err) {
        this.showError(output, err);
      } finally {
        submit.disabled = validateSpec(this.form).length > 0;
      }
    });
    panel.append(submit, output);
  }

  private parameterTable(parameters: ParameterRow[]): HTMLElement {
    const table = h("table", { class: "parameters" });
    const head = h("tr", {});
    for (const th of ["parameter", "estimate", "robust se", "t", "p"]) head.appendChild(h("th", {}, th));
    table.appendChild(head);
    for (const p of parameters) {
      const tr = h("tr", {});
      tr.appendChild(h("td", {}, p.name));
      tr.appendChild(h("td", {}, p.estimate.toFixed(4)));
      tr.appendChild(h("td", {}, p.robust_se.toFixed(4)));
      tr.appendChild(h("td", {}, p.t_stat.toFixed(2)));
      tr.appendChild(h("td", {}, p.p_value.toFixed(4)));
      table.appendChild(tr);
    }
    return table;
  }

  /** Side-by-side view of the compare-models payload: aligned coefficient
   * rows (absent entries shown as ·) and metric rows with the best model
   * highlighted. */
  private comparisonTable(reply: Record<string, unknown>): HTMLElement {
    const box = h("div", { class: "comparison" });
    const paramRows = reply["parameters"] as
      Array<{ parameter: string; values: Array<{ estimate: number; robust_se: number } | null> }>;
    const table = h("table", { class: "compare-parameters" });
    for (const row of paramRows) {
      const tr = h("tr", {});
      tr.appendChild(h("td", {}, row.parameter));
      for (const cell of row.values) {
        tr.appendChild(h("td", {},
          cell ? `${cell.estimate.toFixed(4)} (${cell.robust_se.toFixed(4)})` : "·"));
      }
      table.appendChild(tr);
    }
    box.appendChild(table);
    const metricRows = reply["metrics"] as
      Array<{ metric: string; values: number[]; best: number; tie: boolean }>;
    const metricsTable = h("table", { class: "compare-metrics" });
    for (const row of metricRows) {
      const tr = h("tr", {});
      tr.appendChild(h("td", {}, row.metric));
      row.values.forEach((v, i) => {
        const td = h("td", {}, v.toFixed(4));
        if (i === row.best && !row.tie) td.classList.add("best");
        tr.appendChild(td);
      });
      metricsTable.appendChild(tr);
    }
    box.appendChild(metricsTable);
    return box;
  }

  // -- OI -------------------------------------------------------------------

  private buildOiPanel(panel: HTMLElement): void {
    const select = h("select", { id: "oi-tool" }) as HTMLSelectElement;
    for (const [code, name] of Object.entries(OI_TOOLS)) {
      select.appendChild(h("option", { value: code }, `${code} ${name}`));
    }
    const ids = h("input", {
      id: "oi-model-ids", placeholder: "model id(s), comma-separated",
    }) as HTMLInputElement;
    const run = h("button", { id: "oi-run", type: "button" }, "Run") as HTMLButtonElement;
    const output = h("div", { id: "oi-output" });
    run.addEventListener("click", async () => {
      const code = Number(select.value);
      const modelIds = ids.value.split(",")
        .map((s) => Number(s.trim()))
        .filter((n) => Number.isFinite(n) && n > 0);
      let payload: Record<string, unknown> = {};
      if (OI_TOOLS[code] === "compare_models") payload = { model_ids: modelIds };
      else if (OI_TOOLS[code] !== "elbow_graph") payload = { model_id: modelIds[0] };
      try {
        const reply = await this.api.oiTool(this.sessionId, code, payload);
        output.innerHTML = "";
        if (reply["metrics"]) {
          output.appendChild(this.comparisonTable(reply));
        } else if (reply["parameters"]) {
          output.appendChild(this.parameterTable(reply["parameters"] as ParameterRow[]));
        } else {
          output.appendChild(renderPayload(reply));
        }
      } catch (err) {
        this.showError(output, err);
      }
    });
    panel.append(select, ids, run, output);
  }

  // -- R --------------------------------------------------------------------

  private buildReportPanel(panel: HTMLElement): void {
    const estimated = (this.view?.models ?? []).filter((m) => m.status === "estimated");
    const picks = h("div", { id: "report-models" });
    const boxes: HTMLInputElement[] = [];
    for (const m of estimated) {
      const box = h("input", {
        type: "checkbox", id: `report-model-${m.model_id}`, value: String(m.model_id),
      }) as HTMLInputElement;
      boxes.push(box);
      picks.appendChild(box);
      picks.appendChild(h("label", {}, `model #${m.model_id}`));
    }
    const text = h("textarea", { id: "report-text", placeholder: "findings" }) as HTMLTextAreaElement;
    const submit = h("button", { id: "report-submit", type: "button" }, "Submit report") as HTMLButtonElement;
    const output = h("div", { id: "report-output" });
    const refreshEnabled = () => {
      submit.disabled = !boxes.some((b) => b.checked) || text.value.trim() === "";
    };
    refreshEnabled();
    boxes.forEach((b) => b.addEventListener("change", refreshEnabled));
    text.addEventListener("input", refreshEnabled);
    submit.addEventListener("click", async () => {
      const ids = boxes.filter((b) => b.checked).map((b) => Number(b.value));
      try {
        await this.api.submitReport(this.sessionId, ids, text.value);
        if (this.view) this.view.closed = true;
        this.stopClock();
        this.render();
      } catch (err) {
        this.showError(output, err);
      }
    });
    panel.append(picks, text, submit, output);
  }
}
