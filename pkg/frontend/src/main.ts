// Application wiring: archive browser panel + live steering panel.

import { ArchiveDetail, ArchiveView, AXIS_NAMES, CellSummary } from "./archive.js";
import { RollingCharts } from "./charts.js";
import { fitnessColor } from "./colormap.js";
import { drawCharts, drawWorld } from "./render.js";
import { SessionClient } from "./session.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

interface AppState {
  archiveName: string | null;
  view: ArchiveView | null;
  axis: 0 | 1 | 2;
  selected: CellSummary | null;
  session: SessionClient | null;
  sessionId: string | null;
  ws: WebSocket | null;
  charts: RollingCharts;
  reconnectDelay: number;
}

const state: AppState = {
  archiveName: null,
  view: null,
  axis: 1,
  selected: null,
  session: null,
  sessionId: null,
  ws: null,
  charts: new RollingCharts(),
  reconnectDelay: 500,
};

async function api<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      detail = body.detail?.detail ?? body.detail?.error ?? detail;
    } catch {
      /* keep statusText */
    }
    throw new Error(detail);
  }
  return resp.json() as Promise<T>;
}

function setStatus(text: string): void {
  $("status").textContent = text;
}

// ---------------------------------------------------------------------------
// Repertoire browser

async function loadArchiveList(): Promise<void> {
  const archives = await api<{ name: string; cells: number }[]>("/api/archives");
  const select = $<HTMLSelectElement>("archive-select");
  select.innerHTML = "";
  for (const a of archives) {
    const opt = document.createElement("option");
    opt.value = a.name;
    opt.textContent = `${a.name} (${a.cells} cells)`;
    select.appendChild(opt);
  }
  if (archives.length) {
    await selectArchive(archives[0].name);
  } else {
    $("browser").innerHTML = "<p class='empty'>No archives found. Evolve one first.</p>";
  }
}

async function selectArchive(name: string): Promise<void> {
  const detail = await api<ArchiveDetail>(`/api/archives/${name}`);
  state.archiveName = name;
  state.view = new ArchiveView(detail);
  renderBrowser();
}

function renderBrowser(): void {
  const view = state.view;
  const host = $("browser");
  host.innerHTML = "";
  if (!view || view.size === 0) {
    host.innerHTML = "<p class='empty'>Archive is empty.</p>";
    return;
  }
  const [lo, hi] = view.fitnessRange();
  const [ax, ay] = ArchiveView.panelAxes(state.axis);
  for (let s = 0; s < view.dims[state.axis]; s++) {
    const members = view.slice(state.axis, s);
    if (!members.length) continue;
    const panel = document.createElement("div");
    panel.className = "panel";
    const label = document.createElement("div");
    label.className = "panel-label";
    label.textContent = `${AXIS_NAMES[state.axis]} bin ${s} (${members.length})`;
    panel.appendChild(label);
    const grid = document.createElement("div");
    grid.className = "slice";
    grid.style.gridTemplateColumns = `repeat(${view.dims[ay]}, 7px)`;
    const byKey = new Map(members.map((c) => [`${c.bins[ax]},${c.bins[ay]}`, c]));
    for (let i = view.dims[ax] - 1; i >= 0; i--) {
      for (let j = 0; j < view.dims[ay]; j++) {
        const cellEl = document.createElement("div");
        cellEl.className = "cell";
        const cell = byKey.get(`${i},${j}`);
        if (cell) {
          cellEl.style.background = fitnessColor(cell.fitness, lo, hi);
          cellEl.title = `bins ${cell.bins.join(",")}\n` +
            `exploration ${cell.raw[0].toFixed(2)}, network ${cell.raw[1].toFixed(3)}, ` +
            `variance ${cell.raw[2].toFixed(0)}\nfitness ${cell.fitness.toFixed(4)}`;
          cellEl.addEventListener("click", () => onCellClick(cell));
        } else {
          cellEl.classList.add("empty-cell");
        }
        grid.appendChild(cellEl);
      }
    }
    panel.appendChild(grid);
    host.appendChild(panel);
  }
}

function onCellClick(cell: CellSummary): void {
  state.selected = cell;
  $("selected").textContent =
    `selected ${cell.bins.join(",")} fitness ${cell.fitness.toFixed(4)}`;
  if (state.session && state.sessionId) {
    const sent = state.session.requestSwitch(cell.bins);
    setStatus(sent ? `switch requested -> ${cell.bins.join(",")}`
                   : "disconnected: command not sent");
  }
}

// ---------------------------------------------------------------------------
// Live steering

async function startSession(): Promise<void> {
  if (!state.archiveName) return;
  const bins = state.selected?.bins;
  if (!bins) {
    setStatus("click a repertoire cell first");
    return;
  }
  const seed = Number($<HTMLInputElement>("seed-input").value) || 0;
  const info = await api<{ session: string }>("/api/sessions", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ archive: state.archiveName, bins, seed, paced: true }),
  });
  state.sessionId = info.session;
  state.charts.reset();
  connectStream();
  setStatus(`session ${info.session} running`);
}

function connectStream(): void {
  if (!state.sessionId) return;
  const session = new SessionClient(null, {
    onFrame: (f) => state.charts.addFrame(f),
    onMarker: (m) => state.charts.addMarker(m.t),
    onError: (e) => setStatus(`service error: ${e.error}${e.detail ? ` (${e.detail})` : ""}`),
    onDesync: () => reconnect("stream gap"),
  });
  state.session = session;
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${proto}://${location.host}/api/sessions/${state.sessionId}/stream`);
  state.ws = ws;
  ws.onopen = () => {
    state.reconnectDelay = 500;
  };
  ws.onmessage = (ev) => {
    session.handleRaw(String(ev.data));
    if (session.needsResync) reconnect("sequence gap");
  };
  ws.onclose = () => {
    session.detach();
    setStatus("stream lost: reconnecting (commands disabled)");
    if (state.sessionId) {
      setTimeout(connectStream, state.reconnectDelay);
      state.reconnectDelay = Math.min(state.reconnectDelay * 2, 8000);
    }
  };
  session.attach({ send: (data) => ws.send(data) });
}

function reconnect(reason: string): void {
  setStatus(`resync: ${reason}`);
  state.ws?.close();
}

async function sessionCommand(cmd: "pause" | "resume"): Promise<void> {
  if (!state.sessionId) return;
  await api(`/api/sessions/${state.sessionId}/${cmd}`, { method: "POST" });
  setStatus(cmd === "pause" ? "paused" : "running");
}

async function setRate(): Promise<void> {
  if (!state.sessionId) return;
  const rate = Number($<HTMLInputElement>("rate-input").value) || 1;
  await api(`/api/sessions/${state.sessionId}/rate`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ rate }),
  });
  setStatus(`rate ${rate}x`);
}

function renderLoop(): void {
  const worldCtx = $<HTMLCanvasElement>("world").getContext("2d");
  const chartCtx = $<HTMLCanvasElement>("charts").getContext("2d");
  const tick = () => {
    if (state.session && worldCtx) {
      drawWorld(worldCtx, state.session);
      $("clock").textContent =
        `t=${state.session.t.toFixed(1)}s seq=${state.session.seq} ` +
        `bins=${state.session.bins.join(",")}`;
    }
    if (chartCtx) drawCharts(chartCtx, state.charts);
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}

function wireUi(): void {
  $<HTMLSelectElement>("archive-select").addEventListener("change", (ev) => {
    void selectArchive((ev.target as HTMLSelectElement).value);
  });
  $<HTMLSelectElement>("axis-select").addEventListener("change", (ev) => {
    state.axis = Number((ev.target as HTMLSelectElement).value) as 0 | 1 | 2;
    renderBrowser();
  });
  $("start-btn").addEventListener("click", () => void startSession());
  $("pause-btn").addEventListener("click", () => void sessionCommand("pause"));
  $("resume-btn").addEventListener("click", () => void sessionCommand("resume"));
  $("rate-btn").addEventListener("click", () => void setRate());
}

wireUi();
renderLoop();
void loadArchiveList().catch((err) => setStatus(`cannot load archives: ${err}`));
