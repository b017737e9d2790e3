// Pure HTML/SVG renderers: every view is a function of the latest
// received payload, so snapshots of these strings pin the console UI.

import {
  BoxGroup, CoefficientCells, Emission, PlotSpec, SchemaInfo, statColumns,
  StatCells, TaskView,
} from "./types.js";

const STAT_ORDER: Array<[string, keyof StatCells]> = [
  ["Mu", "mu"], ["SE", "se"], ["Std", "std"], ["Min", "min"], ["Med", "med"],
  ["Max", "max"], ["Skew", "skew"], ["Kurt", "kurt"], ["mp", "mp"],
];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function cell(v: number | null | undefined): string {
  if (v === null || v === undefined || Number.isNaN(v)) return "nan";
  // verbatim service value: cells must equal the raw JSON, no client math
  return String(v);
}

export function renderStatsTable(e: Emission): string {
  const cols = statColumns(e);
  const head = STAT_ORDER.map(([label]) => `<th>${label}</th>`).join("");
  const rows = cols.map((name) => {
    const cells = e[name] as StatCells;
    const tds = STAT_ORDER.map(([, key]) =>
      `<td data-col="${esc(name)}" data-stat="${key}">${cell(cells[key])}</td>`).join("");
    return `<tr><th>${esc(name)}</th>${tds}</tr>`;
  }).join("");
  return `<table class="stats" data-k="${e.k ?? ""}">` +
    `<thead><tr><th></th>${head}</tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderRegressionTable(e: Emission): string {
  const coefs = e.coefficients as Record<string, CoefficientCells>;
  const metric = e.metric as Record<string, number | null>;
  const [metricName, metricValue] = Object.entries(metric)[0];
  const label = metricName === "r_squared" ? "R.Squared" : "Out-of-sample AUC";
  const headline = metricValue === null
    ? `${label} = nan`
    : `${label} = ${(metricValue * 100).toFixed(1)} %`;
  const rows = Object.entries(coefs).map(([name, c]) =>
    `<tr><th>${esc(name)}</th><td>${cell(c.estimate)}</td><td>${cell(c.standerr)}</td>` +
    `<td>${cell(c.tstat)}</td><td>${cell(c.pvalue)}</td></tr>`).join("");
  return `<p class="headline">${headline}</p>` +
    `<table class="model" data-k="${e.k ?? ""}"><thead><tr><th></th><th>Estimate</th>` +
    `<th>StandErr</th><th>tStat</th><th>pValue</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderFreqTable(e: Emission): string {
  const levels = e.levels as Array<{ level: string; count: number; pct: number }>;
  const rows = levels.map((l) =>
    `<tr><th>${esc(l.level)}</th><td>${l.count}</td><td>${l.pct.toFixed(2)}</td></tr>`).join("");
  const cap = e.capped ? `<p class="cap">only top 100 levels displayed</p>` : "";
  return `<p>${esc(String(e.variable))}: ${e.levels_discovered} levels, ` +
    `${e.total} counts</p><table class="freq"><thead><tr><th>level</th><th>count</th>` +
    `<th>%</th></tr></thead><tbody>${rows}</tbody></table>${cap}`;
}

export function renderCorrTable(e: Emission): string {
  const cols = e.columns as string[];
  const matrix = e.matrix as Array<Array<number | null>>;
  const head = cols.map((c) => `<th>${esc(c)}</th>`).join("");
  const rows = matrix.map((row, i) =>
    `<tr><th>${esc(cols[i])}</th>${row.map((v) => `<td>${cell(v)}</td>`).join("")}</tr>`)
    .join("");
  return `<table class="corr"><thead><tr><th></th>${head}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`;
}

export function renderSeSparkline(series: Array<{ k: number; se: number }>,
                                  width = 220, height = 60): string {
  if (series.length === 0) return `<svg width="${width}" height="${height}"></svg>`;
  const ks = series.map((p) => p.k);
  const ses = series.map((p) => p.se);
  const kMin = Math.min(...ks), kMax = Math.max(...ks);
  const seMax = Math.max(...ses, 1e-12);
  const x = (k: number) => kMax === kMin ? width / 2 : 4 + (k - kMin) / (kMax - kMin) * (width - 8);
  const y = (se: number) => height - 4 - (se / seMax) * (height - 8);
  const points = series.map((p) => `${x(p.k).toFixed(1)},${y(p.se).toFixed(1)}`).join(" ");
  const last = series[series.length - 1];
  return `<svg class="separk" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">` +
    `<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="${points}"/>` +
    `<text x="${width - 4}" y="12" text-anchor="end" font-size="10">SE ${cell(last.se)} @ k=${last.k}</text>` +
    `</svg>`;
}

export function renderTaskRow(view: TaskView): string {
  const stop = view.state === "running"
    ? `<button class="stop" data-task="${esc(view.taskId)}">Stop</button>` : "";
  const err = view.error ? ` <span class="err">${esc(view.error)}</span>` : "";
  return `<li data-task="${esc(view.taskId)}">` +
    `<span class="tid">${esc(view.taskId)}</span> ` +
    `<span class="kind">${esc(view.kind)}</span> ` +
    `<span class="badge badge-${esc(view.state)}">${esc(view.state)}</span>` +
    `${stop}${err}</li>`;
}

export function renderSchema(info: SchemaInfo, mp: Record<string, number | null>): string {
  const rows = [...info.header, "_INTERCEPT_"].map((name) => {
    const mpCell = mp[name] === undefined || mp[name] === null ? "" : cell(mp[name]);
    const act = info.roles[name] !== "dropped" && mpCell !== ""
      ? ` <button class="toq" data-col="${esc(name)}">quantitative</button>` : "";
    return `<tr><th>${esc(name)}</th><td>${esc(info.roles[name] ?? "")}</td>` +
      `<td data-mp="${esc(name)}">${mpCell}</td><td>${act}</td></tr>`;
  }).join("");
  return `<table class="schema"><thead><tr><th>column</th><th>role</th><th>mp</th>` +
    `<th></th></tr></thead><tbody>${rows}</tbody></table>`;
}

// ------------------------------------------------------------- plot kinds

function frame(width: number, height: number, inner: string, title: string): string {
  return `<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `font-family="monospace" font-size="10">` +
    `<rect width="${width}" height="${height}" fill="white" stroke="#ccc"/>` +
    `<text x="${width / 2}" y="14" text-anchor="middle">${esc(title)}</text>${inner}</svg>`;
}

export function renderPlot(spec: PlotSpec, width = 420, height = 280): string {
  const m = { l: 40, r: 10, t: 24, b: 30 };
  const iw = width - m.l - m.r;
  const ih = height - m.t - m.b;
  const kinds: Record<string, () => string> = {
    hist: () => {
      const counts = spec.data.counts as number[];
      const peak = Math.max(...counts, 1);
      const bw = iw / counts.length;
      const bars = counts.map((c, i) => {
        const h = (c / peak) * ih;
        return `<rect x="${(m.l + i * bw).toFixed(1)}" y="${(m.t + ih - h).toFixed(1)}" ` +
          `width="${Math.max(bw - 1, 0.5).toFixed(1)}" height="${h.toFixed(1)}" fill="#1f77b4"/>`;
      }).join("");
      return bars;
    },
    corr: () => {
      const cols = spec.data.columns as string[];
      const matrix = spec.data.matrix as Array<Array<number | null>>;
      const side = Math.min(iw, ih) / cols.length;
      let cells = "";
      matrix.forEach((row, i) => row.forEach((v, j) => {
        const t = v === null ? 0 : Math.max(-1, Math.min(1, v));
        const chan = Math.round(255 * (1 - Math.abs(t)));
        const color = v === null ? "#ccc"
          : t >= 0 ? `rgb(255,${chan},${chan})` : `rgb(${chan},${chan},255)`;
        cells += `<rect x="${(m.l + j * side).toFixed(1)}" y="${(m.t + i * side).toFixed(1)}" ` +
          `width="${side.toFixed(1)}" height="${side.toFixed(1)}" fill="${color}" stroke="#eee"/>`;
      }));
      return cells;
    },
    tstat_bars: () => {
      const names = spec.data.names as string[];
      const tstats = (spec.data.tstats as Array<number | null>)
        .map((t) => t === null ? 0 : Math.max(-50, Math.min(50, t)));
      const pvals = spec.data.pvalues as Array<number | null>;
      const peak = Math.max(...tstats.map(Math.abs), 1);
      const bw = iw / names.length;
      const zero = m.t + ih / 2;
      return tstats.map((t, i) => {
        const h = Math.abs(t) / peak * (ih / 2);
        const y = t >= 0 ? zero - h : zero;
        const sig = pvals[i] !== null && (pvals[i] as number) < 5;
        return `<rect x="${(m.l + i * bw + 2).toFixed(1)}" y="${y.toFixed(1)}" ` +
          `width="${Math.max(bw - 4, 1).toFixed(1)}" height="${Math.max(h, 0.5).toFixed(1)}" ` +
          `fill="${sig ? "#d62728" : "#9467bd"}"/>`;
      }).join("") + `<line x1="${m.l}" y1="${zero}" x2="${m.l + iw}" y2="${zero}" stroke="black"/>`;
    },
  };
  const barKinds = new Set(["mu", "std", "size"]);
  const boxKinds = new Set(["box", "gbox"]);
  let inner: string;
  if (kinds[spec.kind]) {
    inner = kinds[spec.kind]();
  } else if (barKinds.has(spec.kind)) {
    const values = (spec.data.values as Array<number | null>).map((v) => v ?? 0);
    const peak = Math.max(...values.map(Math.abs), 1e-12);
    const bw = iw / values.length;
    inner = values.map((v, i) => {
      const h = Math.abs(v) / peak * ih;
      return `<rect x="${(m.l + i * bw + 1).toFixed(1)}" y="${(m.t + ih - h).toFixed(1)}" ` +
        `width="${Math.max(bw - 2, 1).toFixed(1)}" height="${h.toFixed(1)}" fill="#1f77b4"/>`;
    }).join("");
  } else if (boxKinds.has(spec.kind)) {
    const groups = spec.data.groups as BoxGroup[];
    const lo = Math.min(...groups.map((g) => g.whisker_low));
    const hi = Math.max(...groups.map((g) => g.whisker_high));
    const y = (v: number) => m.t + ih - ((v - lo) / (hi - lo || 1)) * ih;
    const bw = iw / groups.length;
    inner = groups.map((g, i) => {
      const cx = m.l + i * bw + bw / 2;
      const bl = m.l + i * bw + bw * 0.25;
      return `<line x1="${cx}" y1="${y(g.whisker_low).toFixed(1)}" x2="${cx}" ` +
        `y2="${y(g.whisker_high).toFixed(1)}" stroke="black"/>` +
        `<rect x="${bl.toFixed(1)}" y="${y(g.q3).toFixed(1)}" width="${(bw * 0.5).toFixed(1)}" ` +
        `height="${(y(g.q1) - y(g.q3)).toFixed(1)}" fill="#1f77b4" fill-opacity="0.35" stroke="black"/>` +
        `<line x1="${bl.toFixed(1)}" y1="${y(g.med).toFixed(1)}" x2="${(bl + bw * 0.5).toFixed(1)}" ` +
        `y2="${y(g.med).toFixed(1)}" stroke="black" stroke-width="1.5"/>`;
    }).join("");
  } else {
    inner = `<text x="${width / 2}" y="${height / 2}" text-anchor="middle">unsupported: ${esc(spec.kind)}</text>`;
  }
  return frame(width, height, inner, spec.title || spec.kind);
}

export function renderEmission(kind: string, e: Emission): string {
  if (kind === "stats") return renderStatsTable(e);
  if (kind === "ols" || kind === "logit") return renderRegressionTable(e);
  if (kind === "table") return renderFreqTable(e);
  if (kind === "corr") return renderCorrTable(e);
  if (kind === "plot" && e.plot) return renderPlot(e.plot as PlotSpec);
  return `<pre>${esc(JSON.stringify(e))}</pre>`;
}
