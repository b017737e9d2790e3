// Wire types for the session service emissions and plot payloads.

export interface StatCells {
  mu: number | null;
  se: number | null;
  std: number | null;
  min: number | null;
  med: number | null;
  max: number | null;
  skew: number | null;
  kurt: number | null;
  mp: number | null;
}

// Stats emissions put per-column objects next to the envelope fields, so
// everything not in RESERVED is a column name.
export type Emission = Record<string, unknown> & {
  task_id?: string;
  k?: number;
  n?: number;
  state?: string;
  elapsed_s?: number;
  terminal?: boolean;
  error?: string;
};

export const RESERVED = new Set([
  "k", "n", "elapsed_s", "task_id", "state", "terminal", "error",
  "coefficients", "metric", "discarded", "replicates", "plot",
  "variable", "levels", "levels_discovered", "total", "capped",
  "columns", "matrix",
]);

export interface CoefficientCells {
  estimate: number | null;
  standerr: number | null;
  tstat: number | null;
  pvalue: number | null;
}

export interface PlotSpec {
  kind: string;
  data: Record<string, unknown>;
  title: string;
  xlabel: string;
  ylabel: string;
  k: number;
}

export interface BoxGroup {
  label: string;
  q1: number;
  med: number;
  q3: number;
  whisker_low: number;
  whisker_high: number;
  outliers: number[];
  n: number;
}

export interface TaskView {
  taskId: string;
  kind: string;
  state: string; // running | stopped_by_se | stopped_by_k | cancelled | failed
  latest: Emission | null; // highest-k data emission received
  seSeries: Array<{ k: number; se: number }>; // max SE per emission, stats tasks
  error?: string;
}

export interface SchemaInfo {
  path: string;
  header: string[];
  n_estimate: number;
  roles: Record<string, string>;
  program: string[];
  defaults: Record<string, unknown>;
}

export function statColumns(e: Emission): string[] {
  return Object.keys(e).filter((key) => !RESERVED.has(key));
}

export function isTerminal(e: Emission): boolean {
  return e.terminal === true;
}
