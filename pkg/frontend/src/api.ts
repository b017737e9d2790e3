// Thin client over the session service. fetch and the event-stream
// reader are injectable so tests can drive the console without a server.

import { Emission, PlotSpec, SchemaInfo } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface StreamHandle {
  close(): void;
}

export type StreamOpener = (
  url: string,
  onEvent: (e: Emission) => void,
  onError: () => void,
) => StreamHandle;

export class ServiceClient {
  constructor(
    public baseUrl: string,
    private fetchImpl: FetchLike = fetch.bind(globalThis),
    private openStreamImpl: StreamOpener = defaultStreamOpener,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail = (body as { detail?: string }).detail ?? resp.statusText;
      throw new Error(detail);
    }
    return body;
  }

  async openSession(path: string, codebook?: object | null): Promise<string> {
    const body = await this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(codebook ? { path, codebook } : { path }),
    });
    return (body as { session_id: string }).session_id;
  }

  async schema(sessionId: string): Promise<SchemaInfo> {
    return await this.request(`/sessions/${sessionId}/schema`) as SchemaInfo;
  }

  async command(sessionId: string, command: string):
      Promise<{ task_id?: string; kind?: string; message?: string }> {
    return await this.request(`/sessions/${sessionId}/commands`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ command }),
    }) as { task_id?: string; kind?: string; message?: string };
  }

  async cancelTask(sessionId: string, taskId: string): Promise<string> {
    const body = await this.request(
      `/sessions/${sessionId}/tasks/${taskId}/cancel`, { method: "POST" });
    return (body as { state: string }).state;
  }

  async latestPlot(sessionId: string, taskId: string): Promise<PlotSpec> {
    return await this.request(`/sessions/${sessionId}/plots/${taskId}/latest`) as PlotSpec;
  }

  streamTask(sessionId: string, taskId: string, fromIndex: number,
             onEvent: (e: Emission) => void, onError: () => void): StreamHandle {
    const url = `${this.baseUrl}/sessions/${sessionId}/tasks/${taskId}/stream` +
      `?from_index=${fromIndex}`;
    return this.openStreamImpl(url, onEvent, onError);
  }
}

// Browser default: EventSource, closed by the caller after the terminal
// event (the service ends the response there anyway).
function defaultStreamOpener(url: string, onEvent: (e: Emission) => void,
                             onError: () => void): StreamHandle {
  const es = new EventSource(url);
  es.onmessage = (msg) => onEvent(JSON.parse(msg.data) as Emission);
  es.onerror = () => onError();
  return { close: () => es.close() };
}
