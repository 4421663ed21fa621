// Scripted-session equivalence: replaying the captured wire traffic through
// the client must reproduce the batch engine's positions bit-exactly.

import { describe, expect, it } from "vitest";
import { SessionClient } from "../src/session.js";
import { FrameMessage, ServerMessage, SnapshotMessage } from "../src/protocol.js";
import script from "./fixtures/session_script.json";

const messages = script.messages as unknown as ServerMessage[];
const snapshot = messages[0] as SnapshotMessage;

function drive(until?: number): SessionClient {
  const client = new SessionClient();
  for (const msg of messages) {
    client.handleMessage(msg);
    if (until !== undefined && client.seq === until) break;
  }
  return client;
}

describe("scripted steering session", () => {
  it("starts from a snapshot", () => {
    const client = new SessionClient();
    client.handleMessage(messages[0]);
    expect(client.seq).toBe(0);
    expect(client.agents.length).toBe(8);
    expect(client.bins).toEqual(script.bins_a);
  });

  it("reproduces the batch positions at the switch, bit-exactly", () => {
    const client = drive(script.expected.switch_seq);
    expect(client.seq).toBe(script.expected.switch_seq);
    expect(client.agents).toEqual(script.expected.at_switch);
    expect(client.bins).toEqual(script.bins_a);
  });

  it("reproduces the batch positions at the end, bit-exactly", () => {
    const client = drive();
    expect(client.seq).toBe(script.expected.final_seq);
    expect(client.agents).toEqual(script.expected.final);
    expect(client.bins).toEqual(script.bins_b);
    expect(client.needsResync).toBe(false);
  });

  it("records the switch as a marker, not a state edit", () => {
    const client = drive();
    expect(client.markers.length).toBe(1);
    expect(client.markers[0].bins).toEqual(script.bins_b);
    expect(client.markers[0].t).toBeCloseTo(
      script.ticks * script.decimation * 0.5, 10);
  });

  it("accumulates grid deltas consistently with per-step visit counting", () => {
    const client = drive();
    const agents = snapshot.agents.length;
    const steps = script.expected.final_seq * script.decimation;
    expect(client.gridTotal()).toBe(agents * steps);
  });

  it("keeps every on-screen number sourced from messages", () => {
    const client = drive();
    const lastFrame = [...messages].reverse()
      .find((m) => m.type === "frame") as FrameMessage;
    expect(client.lastMetrics).toEqual(lastFrame.metrics);
    expect(client.t).toBe(lastFrame.t);
  });
});

describe("stream resilience", () => {
  it("flags a sequence gap and recovers from a fresh snapshot", () => {
    const client = new SessionClient();
    client.handleMessage(messages[0]);
    client.handleMessage(messages[1]);
    const skipped = messages[3] as FrameMessage; // gap: seq 2 missing
    client.handleMessage(skipped);
    expect(client.needsResync).toBe(true);
    expect(client.seq).toBe(1); // gap frame rejected
    client.handleMessage(messages[0]);
    expect(client.needsResync).toBe(false);
    expect(client.seq).toBe(0);
  });

  it("disables commands while detached", () => {
    const sent: string[] = [];
    const client = new SessionClient();
    expect(client.requestSwitch([0, 0, 0])).toBe(false);
    client.attach({ send: (d) => sent.push(d) });
    expect(client.requestSwitch(script.bins_b)).toBe(true);
    client.detach();
    expect(client.requestSwitch(script.bins_b)).toBe(false);
    expect(sent.length).toBe(1);
    expect(JSON.parse(sent[0])).toEqual({ v: 1, type: "switch", bins: script.bins_b });
  });
});
