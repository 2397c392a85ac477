/** Render server chart payloads (bins/series/fractions) into DOM. Every
 * number shown comes straight from the payload — nothing is computed here
 * beyond pixel scaling. */

type Payload = Record<string, unknown>;

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderHistogram(p: Payload): HTMLElement {
  const counts = p["counts"] as number[];
  const edges = p["bin_edges"] as number[];
  const root = el("div", "chart chart-histogram");
  root.appendChild(el("div", "chart-title", `Histogram of ${p["variable"]}`));
  const max = Math.max(...counts, 1);
  counts.forEach((count, i) => {
    const bar = el("div", "bar");
    bar.style.height = `${Math.round((count / max) * 100)}%`;
    bar.dataset["count"] = String(count);
    bar.dataset["from"] = String(edges[i]);
    bar.dataset["to"] = String(edges[i + 1]);
    bar.title = `[${edges[i]}, ${edges[i + 1]}): ${count}`;
    root.appendChild(bar);
  });
  return root;
}

function renderBoxplot(p: Payload): HTMLElement {
  const root = el("div", "chart chart-boxplot");
  root.appendChild(el("div", "chart-title", `Boxplot of ${p["variable"]}`));
  for (const key of ["min", "q1", "median", "q3", "max"]) {
    root.appendChild(el("div", `stat stat-${key}`, `${key}: ${p[key]}`));
  }
  const outliers = p["outliers"] as number[];
  root.appendChild(el("div", "stat stat-outliers", `outliers: ${outliers.join(", ") || "none"}`));
  return root;
}

function renderCategorical(p: Payload): HTMLElement {
  const kind = p["chart"] as string;
  const labels = p["labels"] as unknown[];
  const counts = p["counts"] as number[];
  const fractions = p["fractions"] as number[] | undefined;
  const root = el("div", `chart chart-${kind}`);
  root.appendChild(el("div", "chart-title", `${kind} of ${p["variable"]}`));
  labels.forEach((label, i) => {
    const text = fractions
      ? `${label}: ${counts[i]} (${(fractions[i] * 100).toFixed(1)}%)`
      : `${label}: ${counts[i]}`;
    const slice = el("div", "slice", text);
    slice.dataset["label"] = String(label);
    slice.dataset["count"] = String(counts[i]);
    root.appendChild(slice);
  });
  return root;
}

function renderScatter(p: Payload): HTMLElement {
  const xs = p["x"] as number[];
  const ys = p["y"] as number[];
  const root = el("div", "chart chart-scatter");
  root.appendChild(el("div", "chart-title", `${p["y_label"]} vs ${p["x_label"]}`));
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 100 100");
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.min(...ys), yMax = Math.max(...ys);
  const scale = (v: number, lo: number, hi: number) => (hi > lo ? ((v - lo) / (hi - lo)) * 100 : 50);
  xs.forEach((x, i) => {
    const dot = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    dot.setAttribute("cx", scale(x, xMin, xMax).toFixed(2));
    dot.setAttribute("cy", (100 - scale(ys[i], yMin, yMax)).toFixed(2));
    dot.setAttribute("r", "1");
    svg.appendChild(dot);
  });
  root.appendChild(svg);
  root.dataset["points"] = String(xs.length);
  return root;
}

function renderTable(title: string, header: string[], rows: unknown[][]): HTMLElement {
  const root = el("div", "chart chart-table");
  root.appendChild(el("div", "chart-title", title));
  const table = document.createElement("table");
  const thead = document.createElement("tr");
  for (const h of header) thead.appendChild(el("th", "", h));
  table.appendChild(thead);
  for (const row of rows) {
    const tr = document.createElement("tr");
    for (const cell of row) tr.appendChild(el("td", "", cell === null ? "·" : String(cell)));
    table.appendChild(tr);
  }
  root.appendChild(table);
  return root;
}

/** Dispatch on the payload shape returned by the DA endpoints. */
export function renderPayload(p: Payload): HTMLElement {
  switch (p["chart"]) {
    case "histogram": return renderHistogram(p);
    case "boxplot": return renderBoxplot(p);
    case "pie":
    case "bar": return renderCategorical(p);
    case "scatter": return renderScatter(p);
  }
  if (p["statistics"]) {
    const stats = p["statistics"] as Record<string, Record<string, unknown>>;
    const names = Object.keys(stats);
    const cols = names.length ? Object.keys(stats[names[0]]) : [];
    return renderTable("Summary statistics", ["variable", ...cols],
      names.map((n) => [n, ...cols.map((c) => stats[n][c])]));
  }
  if (p["dictionary"]) {
    const entries = p["dictionary"] as Record<string, unknown>[];
    return renderTable("Data dictionary", ["name", "description", "kind", "levels", "units"],
      entries.map((d) => [d["name"], d["description"], d["kind"],
        (d["levels"] as unknown[]).join("/"), d["units"]]));
  }
  if (p["missing"]) {
    const missing = p["missing"] as Record<string, number>;
    return renderTable("Absent values per column", ["column", "absent"],
      Object.entries(missing).filter(([, n]) => n > 0));
  }
  if (p["columns"] && p["rows"]) {
    return renderTable("First rows", p["columns"] as string[], p["rows"] as unknown[][]);
  }
  if (p["shares"]) {
    const shares = p["shares"] as Record<string, number>;
    return renderTable("Choice shares", ["alternative", "share"], Object.entries(shares));
  }
  if (p["matrix"]) {
    const vars = p["variables"] as string[];
    const matrix = p["matrix"] as number[][];
    return renderTable("Correlation", ["", ...vars],
      matrix.map((row, i) => [vars[i], ...row.map((v) => v.toFixed(3))]));
  }
  if (p["alternatives"]) {
    const alts = p["alternatives"] as Record<string, Record<string, unknown>>;
    const names = Object.keys(alts);
    const attrs = names.length ? Object.keys(alts[names[0]]) : [];
    const table = renderTable(`Choice task (respondent ${p["respondent"]}, task ${p["task"]})`,
      ["attribute", ...names], attrs.map((a) => [a, ...names.map((n) => alts[n][a])]));
    table.appendChild(el("div", "chosen", `chosen: ${p["choice"]}`));
    return table;
  }
  // generic key/value fallback (sorted_by, rows-after-delete, single metrics)
  return renderTable("Result", ["field", "value"],
    Object.entries(p).map(([k, v]) => [k, typeof v === "object" ? JSON.stringify(v) : v]));
}
