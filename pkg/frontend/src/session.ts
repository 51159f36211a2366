/**
 * The cockpit's connection and interaction state.
 *
 * Safety rules live here, not in the UI: leader commands go out only while
 * the pedal is engaged and are rate-limited client-side; state older than
 * one second flips the session to "stale" so the UI can show a banner; a
 * dropped connection reconnects automatically (the gateway treats the drop
 * as an implicit pedal release, so the loop is back in autonomous mode
 * regardless of what the cockpit thinks).
 */

import {
  EpisodeEventMessage,
  ErrorMessage,
  Mode,
  ModeChangedMessage,
  Role,
  ServerMessage,
  StateMessage,
  episodeEventMessage,
  helloMessage,
  leaderCmdMessage,
  parseServerMessage,
  pedalMessage,
} from "./protocol.js";

/** The subset of the WebSocket interface the session uses (ws and the
 * browser implementation both satisfy it). */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface SessionOptions {
  url: string;
  role?: Role;
  makeSocket?: (url: string) => SocketLike;
  /** millisecond clock, injectable for tests */
  now?: () => number;
  staleAfterMs?: number;
  /** minimum spacing between leader commands (client-side rate limit) */
  minCmdIntervalMs?: number;
  reconnectDelayMs?: number;
  /** scheduler, injectable for tests */
  schedule?: (fn: () => void, ms: number) => unknown;
  onUpdate?: () => void;
}

export class CockpitSession {
  connection: ConnectionState = "disconnected";
  latestState: StateMessage | null = null;
  lastStateAt = -Infinity;
  pedalEngaged = false;
  /** local leader command draft the sliders edit */
  draft: { q: number[]; gripper: number } | null = null;
  episodes: EpisodeEventMessage[] = [];
  modeChanges: ModeChangedMessage[] = [];
  errors: ErrorMessage[] = [];
  reconnects = 0;

  private socket: SocketLike | null = null;
  private lastCmdAt = -Infinity;
  private closedByUser = false;
  private readonly opts: Required<Omit<SessionOptions, "onUpdate">> & {
    onUpdate?: () => void;
  };

  constructor(options: SessionOptions) {
    this.opts = {
      url: options.url,
      role: options.role ?? "operator",
      makeSocket:
        options.makeSocket ??
        ((url: string) => new WebSocket(url) as unknown as SocketLike),
      now: options.now ?? (() => Date.now()),
      staleAfterMs: options.staleAfterMs ?? 1000,
      minCmdIntervalMs: options.minCmdIntervalMs ?? 50,
      reconnectDelayMs: options.reconnectDelayMs ?? 500,
      schedule: options.schedule ?? ((fn, ms) => setTimeout(fn, ms)),
      onUpdate: options.onUpdate,
    };
  }

  connect(): void {
    this.closedByUser = false;
    this.connection = "connecting";
    const socket = this.opts.makeSocket(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.connection = "connected";
      socket.send(helloMessage(this.opts.role));
      // The hardware pedal cannot vanish mid-press, but a browser can: a
      // reconnect never resumes an engaged pedal.
      this.pedalEngaged = false;
      this.touch();
    };
    socket.onmessage = (ev) => this.handleFrame(String(ev.data));
    socket.onerror = () => undefined;
    socket.onclose = () => {
      this.connection = "disconnected";
      this.pedalEngaged = false;
      this.touch();
      if (!this.closedByUser) {
        this.reconnects += 1;
        this.opts.schedule(() => this.connect(), this.opts.reconnectDelayMs);
      }
    };
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
    this.connection = "disconnected";
    this.touch();
  }

  private handleFrame(text: string): void {
    let message: ServerMessage;
    try {
      message = parseServerMessage(text);
    } catch {
      return; // tolerate unknown frames from newer servers
    }
    switch (message.type) {
      case "state":
        this.latestState = message;
        this.lastStateAt = this.opts.now();
        if (this.draft === null) {
          this.draft = { q: [...message.leader_q], gripper: message.gripper };
        }
        break;
      case "mode_changed":
        this.modeChanges.push(message);
        if (message.to !== "intervention") {
          // the loop left intervention for any reason: pedal is moot
          this.pedalEngaged = false;
        }
        break;
      case "episode_event":
        this.episodes.push(message);
        break;
      case "error":
        this.errors.push(message);
        break;
    }
    this.touch();
  }

  /** True when the UI must show the disconnect banner. */
  showBanner(): boolean {
    return this.connection !== "connected" || this.isStale();
  }

  isStale(): boolean {
    return this.opts.now() - this.lastStateAt > this.opts.staleAfterMs;
  }

  get mode(): Mode | null {
    return this.latestState?.mode ?? null;
  }

  sendPedal(pressed: boolean): boolean {
    if (this.connection !== "connected" || this.socket === null) {
      return false;
    }
    this.pedalEngaged = pressed;
    this.socket.send(pedalMessage(pressed));
    this.touch();
    return true;
  }

  /**
   * Send a leader command. Gated: nothing leaves the cockpit unless the
   * pedal is engaged, and commands are spaced at least minCmdIntervalMs
   * apart. Returns whether the command was actually sent.
   */
  sendLeaderCmd(q: number[], gripper: number): boolean {
    if (!this.pedalEngaged || this.connection !== "connected" || this.socket === null) {
      return false;
    }
    const now = this.opts.now();
    if (now - this.lastCmdAt < this.opts.minCmdIntervalMs) {
      return false;
    }
    this.lastCmdAt = now;
    this.draft = { q: [...q], gripper };
    this.socket.send(leaderCmdMessage(q, gripper));
    this.touch();
    return true;
  }

  sendEpisodeEvent(event: "start" | "end"): boolean {
    if (this.connection !== "connected" || this.socket === null) {
      return false;
    }
    this.socket.send(episodeEventMessage(event));
    this.touch();
    return true;
  }

  private touch(): void {
    this.opts.onUpdate?.();
  }
}
