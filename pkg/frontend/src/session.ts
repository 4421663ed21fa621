// Live-session state machine. The console holds no truth of its own: every
// number on screen comes from service messages accumulated here.

import {
  AckMessage,
  ErrorMessage,
  FrameMessage,
  Metrics,
  parseServerMessage,
  ServerMessage,
  SnapshotMessage,
  switchCommand,
  Vec2,
} from "./protocol.js";

export interface SwitchMarker {
  seq: number;
  t: number;
  bins: number[];
}

export interface Transport {
  send(data: string): void;
}

export interface SessionEvents {
  onFrame?(frame: FrameMessage): void;
  onSnapshot?(snap: SnapshotMessage): void;
  onMarker?(marker: SwitchMarker): void;
  onError?(err: ErrorMessage): void;
  onDesync?(expected: number, got: number): void;
}

export class SessionClient {
  seq = -1;
  t = 0;
  agents: Vec2[] = [];
  links: [number, number][] = [];
  grid: number[][] = [];
  predictions: Vec2[] = [];
  emitter: Vec2 | null = null;
  bins: number[] = [];
  paused = false;
  rate = 1;
  arena: Vec2 = [0, 0];
  commRadius = 0;
  cellSize = 0;
  dims: number[] = [];
  lastMetrics: Metrics | null = null;
  markers: SwitchMarker[] = [];
  lastError: ErrorMessage | null = null;
  /** Set when a frame arrives out of order; the owner should resync. */
  needsResync = false;
  /** Commands are disabled while the transport is down. */
  connected = false;

  constructor(private transport: Transport | null = null,
              private events: SessionEvents = {}) {}

  attach(transport: Transport): void {
    this.transport = transport;
    this.connected = true;
  }

  detach(): void {
    this.transport = null;
    this.connected = false;
  }

  requestSwitch(bins: number[]): boolean {
    if (!this.transport || !this.connected) return false;
    this.transport.send(switchCommand(bins));
    return true;
  }

  handleRaw(raw: string): ServerMessage {
    const msg = parseServerMessage(raw);
    this.handleMessage(msg);
    return msg;
  }

  handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "snapshot":
        this.applySnapshot(msg);
        break;
      case "frame":
        this.applyFrame(msg);
        break;
      case "ack": {
        const marker = this.applyAck(msg);
        this.events.onMarker?.(marker);
        break;
      }
      case "error":
        this.lastError = msg;
        this.events.onError?.(msg);
        break;
      case "pong":
        break;
    }
  }

  private applySnapshot(snap: SnapshotMessage): void {
    this.seq = snap.seq;
    this.t = snap.t;
    this.agents = snap.agents;
    this.links = snap.links;
    this.grid = snap.grid.map((row) => row.slice());
    this.predictions = snap.predictions.slice();
    this.emitter = snap.emitter;
    this.bins = snap.bins.slice();
    this.paused = snap.paused;
    this.rate = snap.rate;
    this.arena = snap.arena;
    this.commRadius = snap.comm_radius;
    this.cellSize = snap.cell_size;
    this.dims = snap.dims;
    this.needsResync = false;
    this.events.onSnapshot?.(snap);
  }

  private applyFrame(frame: FrameMessage): void {
    if (this.seq >= 0 && frame.seq !== this.seq + 1) {
      this.needsResync = true;
      this.events.onDesync?.(this.seq + 1, frame.seq);
      return;
    }
    this.seq = frame.seq;
    this.t = frame.t;
    this.agents = frame.agents;
    this.links = frame.links;
    this.bins = frame.bins.slice();
    for (const [ix, iy, count] of frame.grid_deltas) {
      if (this.grid[ix] !== undefined) this.grid[ix][iy] = count;
    }
    if (frame.prediction) this.predictions.push(frame.prediction);
    if (frame.metrics) this.lastMetrics = frame.metrics;
    this.events.onFrame?.(frame);
  }

  private applyAck(ack: AckMessage): SwitchMarker {
    const marker = { seq: ack.seq, t: ack.t, bins: ack.bins.slice() };
    this.markers.push(marker);
    return marker;
  }

  gridTotal(): number {
    let total = 0;
    for (const row of this.grid) for (const v of row) total += v;
    return total;
  }
}
