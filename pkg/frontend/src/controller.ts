// Console controller: session wiring between the service client and the
// pure state/render layers. No DOM here, so the whole loop is testable.

import { ServiceClient, StreamHandle } from "./api.js";
import {
  applyEmission, ConsoleState, initialState, recordCommand, trackTask,
} from "./state.js";
import { Emission, isTerminal } from "./types.js";

export interface ControllerHooks {
  onChange(state: ConsoleState): void;
  onConnectionLoss?(taskId: string): void;
  onMessage?(text: string): void;
}

export class Controller {
  state: ConsoleState = initialState();
  private streams = new Map<string, StreamHandle>();
  private received = new Map<string, number>(); // emissions consumed per task

  constructor(private client: ServiceClient, private hooks: ControllerHooks) {}

  private update(next: ConsoleState): void {
    this.state = next;
    this.hooks.onChange(next);
  }

  async open(path: string, codebook?: object | null): Promise<void> {
    const sid = await this.client.openSession(path, codebook);
    this.update({ ...initialState(), sessionId: sid });
  }

  async submit(command: string): Promise<void> {
    if (!this.state.sessionId) throw new Error("no open session");
    this.update(recordCommand(this.state, command));
    const result = await this.client.command(this.state.sessionId, command);
    if (result.task_id) {
      this.update(trackTask(this.state, result.task_id, result.kind ?? "task"));
      this.follow(result.task_id);
    } else if (result.message && this.hooks.onMessage) {
      this.hooks.onMessage(result.message);
    }
  }

  follow(taskId: string): void {
    const sid = this.state.sessionId;
    if (!sid) return;
    this.streams.get(taskId)?.close();
    const from = this.received.get(taskId) ?? 0;
    const handle = this.client.streamTask(sid, taskId, from, (e: Emission) => {
      this.received.set(taskId, (this.received.get(taskId) ?? 0) + 1);
      this.update(applyEmission(this.state, taskId, e));
      if (isTerminal(e)) {
        this.streams.get(taskId)?.close();
        this.streams.delete(taskId);
      }
    }, () => {
      // connection lost: surface a banner; reconnect resumes past the
      // emissions already consumed
      this.hooks.onConnectionLoss?.(taskId);
    });
    this.streams.set(taskId, handle);
  }

  reconnect(taskId: string): void {
    this.follow(taskId);
  }

  async stop(taskId: string): Promise<string> {
    if (!this.state.sessionId) throw new Error("no open session");
    return await this.client.cancelTask(this.state.sessionId, taskId);
  }

  async promoteToQuantitative(column: string): Promise<void> {
    // click-to-qlist triage: extend the quantitative list with one column
    const sid = this.state.sessionId;
    if (!sid) return;
    const schema = await this.client.schema(sid);
    const current = Object.entries(schema.roles)
      .filter(([, role]) => role === "quantitative")
      .map(([name]) => name);
    if (!current.includes(column)) current.push(column);
    await this.client.command(sid, `qlist ${current.join(",")}`);
  }
}
