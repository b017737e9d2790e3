// DOM bootstrap: panels for dataset opening, command entry with history,
// live task tables with SE sparklines, plot gallery and the schema view.

import { ServiceClient } from "./api.js";
import { Controller } from "./controller.js";
import { ConsoleState } from "./state.js";
import {
  renderEmission, renderSchema, renderSeSparkline, renderTaskRow,
} from "./render.js";
import { Emission, PlotSpec, SchemaInfo, statColumns } from "./types.js";

const base = (document.querySelector("meta[name=pondstat-base]") as HTMLMetaElement)
  ?.content || "http://127.0.0.1:8000";

const app = document.querySelector<HTMLDivElement>("#app")!;
app.innerHTML = `
  <header><h1>pondstat console</h1><span id="banner" hidden>connection lost -
    <button id="reconnect">reconnect</button></span></header>
  <section id="opener">
    <input id="path" placeholder="dataset path on the server" size="48"/>
    <textarea id="codebook" rows="2" cols="48"
      placeholder='optional codebook JSON: {"qlist": [...], "drop": [...]}'></textarea>
    <button id="open">Open dataset</button>
  </section>
  <section id="command-row" hidden>
    <input id="command" size="64" placeholder="stats Distance | app ArrDelay sign(x)*log1p(abs(x)) | help"/>
    <button id="send">Run</button>
  </section>
  <section id="layout">
    <div><h2>tasks</h2><ul id="tasks"></ul></div>
    <div><h2>latest table</h2><div id="sparkline"></div><div id="table"></div></div>
    <div><h2>plots</h2><div id="plots"></div></div>
    <div><h2>schema</h2><div id="schema"></div></div>
  </section>
  <pre id="messages"></pre>
`;

const el = (id: string) => document.getElementById(id)!;
const client = new ServiceClient(base);
let schemaInfo: SchemaInfo | null = null;
let lastMp: Record<string, number | null> = {};
let lostTask: string | null = null;
const history: string[] = [];
let historyAt = 0;

function collectMp(state: ConsoleState): void {
  for (const id of state.order) {
    const view = state.tasks.get(id)!;
    if (view.kind === "stats" && view.latest) {
      for (const col of statColumns(view.latest)) {
        const cells = view.latest[col] as { mp?: number | null };
        if (cells && cells.mp !== undefined) lastMp[col] = cells.mp;
      }
    }
  }
}

const controller = new Controller(client, {
  onChange(state: ConsoleState) {
    el("tasks").innerHTML = state.order
      .map((id) => renderTaskRow(state.tasks.get(id)!)).join("");
    const active = [...state.order].reverse()
      .map((id) => state.tasks.get(id)!)
      .find((v) => v.latest !== null);
    if (active && active.latest) {
      el("table").innerHTML = renderEmission(active.kind, active.latest as Emission);
      el("sparkline").innerHTML = active.kind === "stats"
        ? renderSeSparkline(active.seSeries) : "";
      if (active.kind === "plot" && active.latest.plot) {
        el("plots").innerHTML = renderEmission("plot", active.latest as Emission);
      }
    }
    collectMp(state);
    if (schemaInfo) el("schema").innerHTML = renderSchema(schemaInfo, lastMp);
  },
  onConnectionLoss(taskId: string) {
    lostTask = taskId;
    el("banner").hidden = false;
  },
  onMessage(text: string) {
    el("messages").textContent = text;
  },
});

async function refreshSchema(): Promise<void> {
  if (!controller.state.sessionId) return;
  schemaInfo = await client.schema(controller.state.sessionId);
  el("schema").innerHTML = renderSchema(schemaInfo, lastMp);
}

el("open").addEventListener("click", async () => {
  const path = (el("path") as HTMLInputElement).value.trim();
  const cbText = (el("codebook") as HTMLTextAreaElement).value.trim();
  try {
    await controller.open(path, cbText ? JSON.parse(cbText) : null);
    (el("command-row") as HTMLElement).hidden = false;
    lastMp = {};
    await refreshSchema();
  } catch (err) {
    el("messages").textContent = String(err);
  }
});

async function sendCommand(): Promise<void> {
  const box = el("command") as HTMLInputElement;
  const text = box.value.trim();
  if (!text) return;
  history.push(text);
  historyAt = history.length;
  box.value = "";
  try {
    await controller.submit(text);
    if (/^(qlist|drop|app|bin|ady|set)\b/.test(text)) await refreshSchema();
  } catch (err) {
    el("messages").textContent = String(err);
  }
}

el("send").addEventListener("click", sendCommand);
el("command").addEventListener("keydown", (ev) => {
  const box = el("command") as HTMLInputElement;
  if (ev.key === "Enter") void sendCommand();
  else if (ev.key === "ArrowUp" && historyAt > 0) {
    historyAt -= 1;
    box.value = history[historyAt] ?? "";
  } else if (ev.key === "ArrowDown" && historyAt < history.length) {
    historyAt += 1;
    box.value = history[historyAt] ?? "";
  }
});

el("tasks").addEventListener("click", async (ev) => {
  const target = ev.target as HTMLElement;
  if (target.classList.contains("stop")) {
    await controller.stop(target.dataset.task!);
  }
});

el("schema").addEventListener("click", async (ev) => {
  const target = ev.target as HTMLElement;
  if (target.classList.contains("toq")) {
    await controller.promoteToQuantitative(target.dataset.col!);
    await refreshSchema();
  }
});

el("reconnect").addEventListener("click", () => {
  el("banner").hidden = true;
  if (lostTask) controller.reconnect(lostTask);
});
