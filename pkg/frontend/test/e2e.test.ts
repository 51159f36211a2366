/**
 * End-to-end against the real simulator: spawn the gateway process, speak
 * the browser framing (WebSocket), and drive the loop like the cockpit does.
 */

import { ChildProcess, spawn } from "node:child_process";
import { resolve } from "node:path";

import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { parseServerMessage, ServerMessage } from "../src/protocol.js";
import { CockpitSession, SocketLike } from "../src/session.js";

const REPO_ROOT = resolve(__dirname, "..", "..");

let sim: ChildProcess;
let port = 0;

beforeAll(async () => {
  sim = spawn(
    "python3",
    ["-m", "telesync.cli", "sim", "--task", "reach2", "--rate-hz", "20",
     "--listen", "127.0.0.1:0", "--duration", "120"],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "inherit"] }
  );
  port = await new Promise<number>((resolvePort, reject) => {
    const timer = setTimeout(() => reject(new Error("sim did not start")), 15000);
    sim.stdout!.on("data", (chunk: Buffer) => {
      const match = /on 127\.0\.0\.1:(\d+)/.exec(chunk.toString());
      if (match) {
        clearTimeout(timer);
        resolvePort(Number(match[1]));
      }
    });
  });
}, 20000);

afterAll(() => {
  sim.kill("SIGINT");
});

function wsSession(role: "operator" | "observer", onUpdate?: () => void): CockpitSession {
  const session = new CockpitSession({
    url: `ws://127.0.0.1:${port}/`,
    role,
    makeSocket: (url) => new WebSocket(url) as unknown as SocketLike,
    reconnectDelayMs: 200,
    onUpdate,
  });
  session.connect();
  return session;
}

function waitFor(check: () => boolean, ms = 5000, label = "condition"): Promise<void> {
  return new Promise((resolveWait, reject) => {
    const started = Date.now();
    const poll = setInterval(() => {
      if (check()) {
        clearInterval(poll);
        resolveWait();
      } else if (Date.now() - started > ms) {
        clearInterval(poll);
        reject(new Error(`timed out waiting for ${label}`));
      }
    }, 5);
  });
}

describe("cockpit against the live simulator", () => {
  it("pedal toggle flips the mode within one state update", async () => {
    const received: ServerMessage[] = [];
    const socket = new WebSocket(`ws://127.0.0.1:${port}/`);
    socket.on("message", (data) => received.push(parseServerMessage(data.toString())));
    await new Promise<void>((res) => socket.on("open", () => res()));
    socket.send(JSON.stringify({ type: "hello", role: "operator" }));
    await waitFor(() => received.some((m) => m.type === "state"), 5000, "first state");

    const statesBefore = received.filter((m) => m.type === "state").length;
    const pressedAt = Date.now();
    socket.send(JSON.stringify({ type: "pedal", pressed: true }));
    await waitFor(
      () => received.some((m) => m.type === "state" && m.mode === "intervention"),
      5000,
      "intervention state"
    );
    const latency = Date.now() - pressedAt;

    const changed = received.find((m) => m.type === "mode_changed");
    expect(changed && changed.type === "mode_changed" && changed.to).toBe("intervention");
    // Within one state update: at most one more autonomous-mode state may
    // arrive after the press (the tick already in flight).
    const after = received.filter((m) => m.type === "state").slice(statesBefore);
    const flipIndex = after.findIndex((m) => m.type === "state" && m.mode === "intervention");
    expect(flipIndex).toBeGreaterThanOrEqual(0);
    expect(flipIndex).toBeLessThanOrEqual(1);
    // Round-trip pedal latency on localhost stays under 200 ms.
    expect(latency).toBeLessThan(200);

    socket.send(JSON.stringify({ type: "pedal", pressed: false }));
    await waitFor(
      () => received.some((m) => m.type === "mode_changed" && m.to === "autonomous"),
      5000,
      "release broadcast"
    );
    socket.close();
  }, 20000);

  it("sends leader commands only while the pedal is engaged", async () => {
    const session = wsSession("operator");
    await waitFor(() => session.latestState !== null, 5000, "session state");
    expect(session.sendLeaderCmd([0.3, 0.3], 0)).toBe(false);
    session.sendPedal(true);
    await waitFor(() => session.mode === "intervention", 5000, "intervention");
    await waitFor(() => session.sendLeaderCmd([0.3, 0.3], 0), 1000, "command accepted");
    await waitFor(() => {
      const q = session.latestState?.follower_q ?? [];
      return Math.abs((q[0] ?? 0) - 0.3) < 0.02 && Math.abs((q[1] ?? 0) - 0.3) < 0.02;
    }, 5000, "follower chasing the leader");
    session.sendPedal(false);
    await waitFor(() => session.mode === "autonomous", 5000, "back to autonomous");
    session.close();
  }, 20000);

  it("disconnect during intervention returns the loop to autonomous", async () => {
    const observer = wsSession("observer");
    const operator = wsSession("operator");
    await waitFor(() => operator.latestState !== null, 5000, "operator joined");
    await waitFor(() => observer.latestState !== null, 5000, "observer joined");
    operator.sendPedal(true);
    await waitFor(() => observer.mode === "intervention", 5000, "intervention seen");
    // The browser vanishes mid-press.
    operator.close();
    await waitFor(() => observer.mode === "autonomous", 5000, "auto-release");
    const release = observer.modeChanges.find((m) => m.to === "autonomous");
    expect(release).toBeDefined();
    observer.close();
  }, 20000);

  it("episode start/end round-trips through the gateway", async () => {
    const session = wsSession("operator");
    await waitFor(() => session.latestState !== null, 5000, "joined");
    session.sendEpisodeEvent("start");
    await waitFor(() => session.episodes.some((e) => e.event === "start"), 5000, "start event");
    await waitFor(() => session.latestState?.episode_id !== null, 5000, "episode id in state");
    session.sendEpisodeEvent("end");
    await waitFor(() => session.episodes.some((e) => e.event === "end"), 5000, "end event");
    session.close();
  }, 20000);
});
