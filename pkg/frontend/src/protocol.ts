/**
 * Wire message schema shared with the gateway. One JSON schema; the browser
 * speaks it over WebSocket text frames.
 */

export type Mode = "autonomous" | "intervention" | "paused" | "fault";
export type Role = "policy" | "operator" | "observer";

export interface StateMessage {
  type: "state";
  seq: number;
  t: number;
  mode: Mode;
  leader_q: number[];
  follower_q: number[];
  follower_target: number[];
  gripper: number;
  task: string | null;
  episode_id: string | null;
}

export interface ModeChangedMessage {
  type: "mode_changed";
  seq: number;
  from: Mode;
  to: Mode;
  reason: string;
}

export interface EpisodeEventMessage {
  type: "episode_event";
  seq: number;
  event: "start" | "end";
  id: string;
  outcome?: string | null;
}

export interface ErrorMessage {
  type: "error";
  seq: number;
  code: string;
  detail: string;
}

export type ServerMessage =
  | StateMessage
  | ModeChangedMessage
  | EpisodeEventMessage
  | ErrorMessage;

const MODES: readonly string[] = ["autonomous", "intervention", "paused", "fault"];

function isNumberArray(value: unknown): value is number[] {
  return Array.isArray(value) && value.every((x) => typeof x === "number" && Number.isFinite(x));
}

/** Parse one server frame; throws on anything outside the schema. */
export function parseServerMessage(text: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new Error(`not JSON: ${text.slice(0, 80)}`);
  }
  if (typeof raw !== "object" || raw === null) {
    throw new Error("message is not an object");
  }
  const msg = raw as Record<string, unknown>;
  if (typeof msg.seq !== "number") {
    throw new Error(`message without sequence number: ${text.slice(0, 80)}`);
  }
  switch (msg.type) {
    case "state":
      if (
        !MODES.includes(msg.mode as string) ||
        !isNumberArray(msg.leader_q) ||
        !isNumberArray(msg.follower_q) ||
        !isNumberArray(msg.follower_target) ||
        typeof msg.gripper !== "number"
      ) {
        throw new Error("malformed state message");
      }
      return msg as unknown as StateMessage;
    case "mode_changed":
      if (!MODES.includes(msg.from as string) || !MODES.includes(msg.to as string)) {
        throw new Error("malformed mode_changed message");
      }
      return msg as unknown as ModeChangedMessage;
    case "episode_event":
      if (msg.event !== "start" && msg.event !== "end") {
        throw new Error("malformed episode_event message");
      }
      return msg as unknown as EpisodeEventMessage;
    case "error":
      if (typeof msg.code !== "string") {
        throw new Error("malformed error message");
      }
      return msg as unknown as ErrorMessage;
    default:
      throw new Error(`unknown message type ${String(msg.type)}`);
  }
}

export function helloMessage(role: Role): string {
  return JSON.stringify({ type: "hello", role });
}

export function pedalMessage(pressed: boolean): string {
  return JSON.stringify({ type: "pedal", pressed });
}

export function leaderCmdMessage(q: number[], gripper: number): string {
  return JSON.stringify({ type: "leader_cmd", q, gripper });
}

export function episodeEventMessage(event: "start" | "end"): string {
  return JSON.stringify({ type: "episode_event", event });
}
