// Console state: pure reducers over received emissions. The displayed
// table is always the payload of the highest replicate index seen; the
// client never aggregates or recomputes statistics itself.

import { Emission, isTerminal, statColumns, TaskView } from "./types.js";

export interface ConsoleState {
  sessionId: string | null;
  history: string[];
  tasks: Map<string, TaskView>;
  order: string[]; // task ids, newest last
}

export function initialState(): ConsoleState {
  return { sessionId: null, history: [], tasks: new Map(), order: [] };
}

export function trackTask(state: ConsoleState, taskId: string, kind: string): ConsoleState {
  const tasks = new Map(state.tasks);
  tasks.set(taskId, { taskId, kind, state: "running", latest: null, seSeries: [] });
  return { ...state, tasks, order: [...state.order, taskId] };
}

export function recordCommand(state: ConsoleState, command: string): ConsoleState {
  return { ...state, history: [...state.history, command] };
}

function maxSe(e: Emission): number | null {
  let worst: number | null = null;
  for (const col of statColumns(e)) {
    const cell = e[col] as { se?: number | null };
    if (cell && typeof cell.se === "number") {
      worst = worst === null ? cell.se : Math.max(worst, cell.se);
    }
  }
  return worst;
}

export function applyEmission(state: ConsoleState, taskId: string, e: Emission): ConsoleState {
  const prev = state.tasks.get(taskId);
  if (!prev) return state;
  const next: TaskView = { ...prev, seSeries: [...prev.seSeries] };
  if (isTerminal(e)) {
    next.state = (e.state as string) ?? "stopped_by_k";
    if (e.error) next.error = e.error as string;
  } else {
    const k = (e.k as number) ?? 0;
    const prevK = (prev.latest?.k as number) ?? -1;
    if (k >= prevK) next.latest = e; // display tracks the highest k received
    if (prev.kind === "stats") {
      const se = maxSe(e);
      if (se !== null) next.seSeries.push({ k, se });
    }
  }
  const tasks = new Map(state.tasks);
  tasks.set(taskId, next);
  return { ...state, tasks };
}

export function taskBadge(view: TaskView): string {
  return view.state === "running" ? "running" : view.state;
}

export function isFinished(view: TaskView): boolean {
  return view.state !== "running";
}
