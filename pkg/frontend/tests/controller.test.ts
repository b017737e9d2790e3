import { readFileSync } from "node:fs";
import { describe, expect, it, vi } from "vitest";

import { ServiceClient, StreamHandle } from "../src/api.js";
import { Controller } from "../src/controller.js";
import { Emission } from "../src/types.js";

const stream: Emission[] = JSON.parse(
  readFileSync(new URL("./fixtures/stats_stream.json", import.meta.url), "utf-8"));

interface FakeServer {
  client: ServiceClient;
  pushAll(events: Emission[]): void;
  cancels: string[];
  streamOpens: number;
}

function fakeServer(): FakeServer {
  let sink: ((e: Emission) => void) | null = null;
  const state = { cancels: [] as string[], streamOpens: 0 };
  const fetchImpl = async (url: string, init?: RequestInit): Promise<Response> => {
    const body = init?.body ? JSON.parse(init.body as string) : {};
    let payload: unknown = {};
    if (url.endsWith("/sessions")) payload = { session_id: "s1" };
    else if (url.endsWith("/commands")) {
      if ((body.command as string).startsWith("stats")) payload = { task_id: "t1", kind: "stats" };
      else payload = { ok: true, message: "done" };
    } else if (url.endsWith("/cancel")) {
      state.cancels.push(url);
      payload = { task_id: "t1", state: "cancelled" };
    } else if (url.endsWith("/schema")) {
      payload = { path: "x.csv", header: ["value"], n_estimate: 1,
                  roles: { value: "qualitative", _INTERCEPT_: "quantitative" },
                  program: [], defaults: {} };
    }
    return new Response(JSON.stringify(payload), { status: 200 });
  };
  const opener = (_url: string, onEvent: (e: Emission) => void): StreamHandle => {
    state.streamOpens += 1;
    sink = onEvent;
    return { close: () => { sink = null; } };
  };
  const client = new ServiceClient("http://test", fetchImpl, opener);
  return {
    client,
    pushAll: (events) => { for (const e of events) sink?.(e); },
    get cancels() { return state.cancels; },
    get streamOpens() { return state.streamOpens; },
  } as FakeServer;
}

describe("console controller", () => {
  it("tracks a task and updates per emission until terminal", async () => {
    const server = fakeServer();
    const changes: string[] = [];
    const c = new Controller(server.client, {
      onChange: (s) => changes.push(s.tasks.get("t1")?.state ?? "none"),
    });
    await c.open("x.csv");
    await c.submit("stats value");
    expect(c.state.tasks.get("t1")!.state).toBe("running");
    server.pushAll(stream);
    const view = c.state.tasks.get("t1")!;
    expect(view.state).toBe("stopped_by_k"); // badge reached a terminal state
    expect(view.latest!.k).toBe(4);
    expect(view.seSeries.length).toBe(4);
    expect(changes[changes.length - 1]).toBe("stopped_by_k");
  });

  it("Stop issues the cancel endpoint call and the badge goes terminal", async () => {
    const server = fakeServer();
    const c = new Controller(server.client, { onChange: () => {} });
    await c.open("x.csv");
    await c.submit("stats value");
    const state = await c.stop("t1");
    expect(state).toBe("cancelled");
    expect(server.cancels.length).toBe(1);
    expect(server.cancels[0]).toContain("/sessions/s1/tasks/t1/cancel");
    // the service then terminates the stream with a cancelled event
    server.pushAll([stream[0], { task_id: "t1", k: 1, state: "cancelled",
                                 terminal: true, elapsed_s: 0.1 }]);
    const view = c.state.tasks.get("t1")!;
    expect(view.state).toBe("cancelled");
    expect(view.latest!.k).toBe(1); // table frozen at the last data emission
  });

  it("reconnect resumes the stream past consumed emissions", async () => {
    const server = fakeServer();
    let lost: string | null = null;
    const c = new Controller(server.client, {
      onChange: () => {},
      onConnectionLoss: (tid) => { lost = tid; },
    });
    await c.open("x.csv");
    await c.submit("stats value");
    server.pushAll(stream.slice(0, 2));
    expect(c.state.tasks.get("t1")!.latest!.k).toBe(2);
    expect(server.streamOpens).toBe(1);
    c.reconnect("t1");
    expect(server.streamOpens).toBe(2);
    server.pushAll(stream.slice(2));
    expect(c.state.tasks.get("t1")!.state).toBe("stopped_by_k");
    expect(lost).toBeNull(); // no spurious banner in the happy path
  });

  it("plain commands surface their message", async () => {
    const server = fakeServer();
    const messages: string[] = [];
    const c = new Controller(server.client, {
      onChange: () => {}, onMessage: (t) => messages.push(t),
    });
    await c.open("x.csv");
    await c.submit("qlist value");
    expect(messages).toEqual(["done"]);
  });
});
