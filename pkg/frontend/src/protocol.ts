// Wire protocol of the steering service (see docs/wire-protocol.md in the
// repository root). All messages carry a protocol version in `v`.

export const PROTOCOL_VERSION = 1;

export type Vec2 = [number, number];

export interface Metrics {
  network: number;
  unique_cells: number;
  loc_variance: number;
  visit_rate: number;
}

export interface SnapshotMessage {
  v: number;
  type: "snapshot";
  seq: number;
  t: number;
  agents: Vec2[];
  links: [number, number][];
  grid: number[][];
  predictions: Vec2[];
  emitter: Vec2;
  bins: number[];
  paused: boolean;
  rate: number;
  arena: Vec2;
  comm_radius: number;
  cell_size: number;
  dims: number[];
}

export interface FrameMessage {
  v: number;
  type: "frame";
  seq: number;
  t: number;
  agents: Vec2[];
  links: [number, number][];
  grid_deltas: [number, number, number][];
  prediction: Vec2 | null;
  metrics: Metrics | null;
  bins: number[];
}

export interface AckMessage {
  v: number;
  type: "ack";
  command: string;
  bins: number[];
  t: number;
  seq: number;
}

export interface ErrorMessage {
  v: number;
  type: "error";
  error: string;
  detail?: string;
}

export interface PongMessage {
  v: number;
  type: "pong";
}

export type ServerMessage =
  | SnapshotMessage
  | FrameMessage
  | AckMessage
  | ErrorMessage
  | PongMessage;

export class ProtocolError extends Error {}

function fail(reason: string): never {
  throw new ProtocolError(reason);
}

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    fail("message is not valid JSON");
  }
  if (typeof data !== "object" || data === null) fail("message is not an object");
  const msg = data as Record<string, unknown>;
  if (msg.v !== PROTOCOL_VERSION) fail(`unsupported protocol version ${msg.v}`);
  switch (msg.type) {
    case "snapshot":
    case "frame":
    case "ack":
    case "error":
    case "pong":
      return msg as unknown as ServerMessage;
    default:
      fail(`unknown message type ${String(msg.type)}`);
  }
}

export function switchCommand(bins: number[]): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type: "switch", bins });
}
