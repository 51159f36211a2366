import { describe, expect, it } from "vitest";

import {
  helloMessage,
  leaderCmdMessage,
  parseServerMessage,
  pedalMessage,
} from "../src/protocol.js";

const state = {
  type: "state",
  seq: 3,
  t: 17,
  mode: "autonomous",
  leader_q: [0.1, -0.2],
  follower_q: [0.1, -0.2],
  follower_target: [0.1, -0.2],
  gripper: 0.5,
  task: "reach2",
  episode_id: null,
};

describe("parseServerMessage", () => {
  it("accepts a state message", () => {
    const msg = parseServerMessage(JSON.stringify(state));
    expect(msg.type).toBe("state");
    if (msg.type === "state") {
      expect(msg.mode).toBe("autonomous");
      expect(msg.leader_q).toEqual([0.1, -0.2]);
    }
  });

  it("accepts mode_changed, episode_event and error messages", () => {
    const changed = parseServerMessage(
      JSON.stringify({ type: "mode_changed", seq: 1, from: "autonomous", to: "intervention", reason: "pedal" })
    );
    expect(changed.type).toBe("mode_changed");
    const episode = parseServerMessage(
      JSON.stringify({ type: "episode_event", seq: 2, event: "end", id: "e1", outcome: "success" })
    );
    expect(episode.type).toBe("episode_event");
    const error = parseServerMessage(
      JSON.stringify({ type: "error", seq: 3, code: "role-violation", detail: "nope" })
    );
    expect(error.type).toBe("error");
  });

  it("rejects unknown types, bad JSON, and missing fields", () => {
    expect(() => parseServerMessage("{")).toThrow(/not JSON/);
    expect(() => parseServerMessage(JSON.stringify({ type: "warp", seq: 1 }))).toThrow(/unknown/);
    expect(() => parseServerMessage(JSON.stringify({ ...state, seq: undefined }))).toThrow(/sequence/);
    expect(() => parseServerMessage(JSON.stringify({ ...state, mode: "chaotic" }))).toThrow(/malformed/);
    expect(() =>
      parseServerMessage(JSON.stringify({ ...state, leader_q: ["a"] }))
    ).toThrow(/malformed/);
  });
});

describe("client message builders", () => {
  it("serialize with normative field names", () => {
    expect(JSON.parse(helloMessage("operator"))).toEqual({ type: "hello", role: "operator" });
    expect(JSON.parse(pedalMessage(true))).toEqual({ type: "pedal", pressed: true });
    expect(JSON.parse(leaderCmdMessage([1, 2], 0.3))).toEqual({
      type: "leader_cmd",
      q: [1, 2],
      gripper: 0.3,
    });
  });
});
