import { ApiClient } from "./api.js";
import { controlGuards, type ViewState } from "./guards.js";
import { LiveFeed, type WebSocketLike } from "./live.js";
import {
  DEFAULT_STROKE_MM,
  PIN_COUNT,
  type CellView,
  gridCells,
  hoverReadout,
  renderGrid,
} from "./grid.js";
import type { PatternEntry } from "./types.js";

const POLL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function apiBase(): string {
  const override = new URLSearchParams(location.search).get("api");
  return override ?? `http://${location.hostname || "127.0.0.1"}:7341`;
}

export function startApp(): void {
  const api = new ApiClient(apiBase());
  const wsUrl = api.baseUrl.replace(/^http/, "ws") + "/live";

  const view: ViewState = {
    connected: false,
    session: null,
    selectedPatternId: null,
    pendingName: "",
  };
  let strokeMm = DEFAULT_STROKE_MM;
  let patternRows: PatternEntry[] = [];

  const statusEl = el<HTMLSpanElement>("status");
  const staleEl = el<HTMLSpanElement>("stale");
  const toastEl = el<HTMLDivElement>("toast");
  const readoutEl = el<HTMLDivElement>("readout");
  const gridEl = el<HTMLDivElement>("grid");
  const patternsEl = el<HTMLUListElement>("patterns");

  const scenarioEl = el<HTMLSelectElement>("scenario");
  const durationEl = el<HTMLInputElement>("duration");
  const realtimeEl = el<HTMLInputElement>("realtime");
  const applySourceEl = el<HTMLButtonElement>("apply-source");
  const syncEl = el<HTMLButtonElement>("sync");
  const recordStartEl = el<HTMLButtonElement>("record-start");
  const recordNameEl = el<HTMLInputElement>("record-name");
  const recordStopEl = el<HTMLButtonElement>("record-stop");

  const gainEl = el<HTMLInputElement>("gain");
  const gainValueEl = el<HTMLSpanElement>("gain-value");
  const speedEl = el<HTMLInputElement>("speed");
  const speedValueEl = el<HTMLSpanElement>("speed-value");
  const sinkEl = el<HTMLSelectElement>("sink");
  const serialPathEl = el<HTMLInputElement>("serial-path");
  const loopEl = el<HTMLInputElement>("loop");
  const playEl = el<HTMLButtonElement>("play");
  const playStopEl = el<HTMLButtonElement>("play-stop");

  // 5x5 grid built once; renderGrid only mutates styles and labels
  const cellViews: CellView[] = [];
  for (let pin = 0; pin < PIN_COUNT; pin++) {
    const cell = document.createElement("div");
    cell.className = "cell";
    const bar = document.createElement("div");
    bar.className = "bar";
    const label = document.createElement("div");
    label.className = "cell-label";
    cell.append(bar, label);
    gridEl.appendChild(cell);
    cellViews.push({ bar, label });
    cell.addEventListener("mousemove", () => {
      const heights = feed.latest?.heights_mm;
      if (heights && heights.length === PIN_COUNT) {
        readoutEl.textContent = hoverReadout(gridCells(heights, strokeMm)[pin]);
      }
    });
    cell.addEventListener("mouseleave", () => {
      readoutEl.textContent = "";
    });
  }

  const feed = new LiveFeed(wsUrl, (url) => new WebSocket(url) as unknown as WebSocketLike);
  feed.start();

  function toast(message: string): void {
    toastEl.textContent = message;
    toastEl.classList.add("visible");
    setTimeout(() => toastEl.classList.remove("visible"), 5000);
  }

  function applyGuards(): void {
    view.pendingName = recordNameEl.value;
    const guards = controlGuards(view);
    applySourceEl.disabled = !guards.setSource;
    syncEl.disabled = !guards.sync;
    recordStartEl.disabled = !guards.recordStart;
    recordStopEl.disabled = !guards.recordStop;
    playEl.disabled = !guards.playbackStart;
    playStopEl.disabled = !guards.playbackStop;
    for (const button of patternsEl.querySelectorAll<HTMLButtonElement>(".delete")) {
      button.disabled = !guards.deletePattern || button.dataset.id !== view.selectedPatternId;
    }

    const s = view.session;
    statusEl.textContent = view.connected
      ? `connected | session ${s?.state ?? "?"}${s?.calibrated ? " (calibrated)" : ""} | live ${feed.status}`
      : "disconnected, retrying";
    statusEl.className = view.connected ? "ok" : "bad";
  }

  function renderPatterns(): void {
    patternsEl.replaceChildren();
    for (const entry of patternRows) {
      const item = document.createElement("li");
      const pick = document.createElement("button");
      pick.textContent = `${entry.name} (${entry.frame_count} frames, ${entry.profile_id})`;
      pick.className = entry.id === view.selectedPatternId ? "pick selected" : "pick";
      pick.addEventListener("click", () => void selectPattern(entry.id));
      const del = document.createElement("button");
      del.textContent = "delete";
      del.className = "delete";
      del.dataset.id = entry.id;
      del.addEventListener("click", () => void run(async () => {
        await api.deletePattern(entry.id);
        if (view.selectedPatternId === entry.id) view.selectedPatternId = null;
        await refreshPatterns();
      }));
      item.append(pick, del);
      patternsEl.appendChild(item);
    }
    applyGuards();
  }

  async function selectPattern(id: string): Promise<void> {
    view.selectedPatternId = id;
    try {
      strokeMm = (await api.pattern(id)).display_profile.stroke_mm;
    } catch {
      strokeMm = DEFAULT_STROKE_MM;
    }
    renderPatterns();
  }

  async function refreshPatterns(): Promise<void> {
    patternRows = (await api.patterns()).patterns;
    renderPatterns();
  }

  async function refreshSession(): Promise<void> {
    try {
      view.session = await api.getSession();
      view.connected = true;
    } catch {
      view.connected = false;
      view.session = null;
    }
    applyGuards();
  }

  /** Wrap a mutation: surface the server's error text, then re-mirror state. */
  async function run(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      toast(err instanceof Error ? err.message : String(err));
    }
    await refreshSession();
  }

  applySourceEl.addEventListener("click", () => void run(async () => {
    view.session = await api.setSource("synth", {
      scenario: scenarioEl.value,
      duration_ms: Math.round(Number(durationEl.value) * 1000),
      realtime: realtimeEl.checked,
    });
  }));
  syncEl.addEventListener("click", () => void run(async () => {
    view.session = await api.sync();
  }));
  recordStartEl.addEventListener("click", () => void run(async () => {
    view.session = await api.recordStart();
  }));
  recordStopEl.addEventListener("click", () => void run(async () => {
    const saved = await api.recordStop(recordNameEl.value.trim());
    view.session = saved;
    recordNameEl.value = "";
    await refreshPatterns();
  }));
  recordNameEl.addEventListener("input", applyGuards);

  gainEl.addEventListener("input", () => { gainValueEl.textContent = gainEl.value; });
  speedEl.addEventListener("input", () => { speedValueEl.textContent = speedEl.value; });
  sinkEl.addEventListener("change", () => {
    serialPathEl.disabled = sinkEl.value !== "serial";
  });
  playEl.addEventListener("click", () => void run(async () => {
    if (!view.selectedPatternId) return;
    await api.playbackStart({
      id: view.selectedPatternId,
      gain: Number(gainEl.value),
      speed: Number(speedEl.value),
      sink: sinkEl.value === "serial" ? `serial:${serialPathEl.value}` : "sim",
      loop: loopEl.checked,
      realtime: true,
    });
  }));
  playStopEl.addEventListener("click", () => void run(async () => {
    await api.playbackStop();
  }));

  // render loop: WS messages coalesce into the latest frame, drawn per tick
  const zeros = new Array<number>(PIN_COUNT).fill(0);
  function tick(): void {
    const heights = feed.latest?.heights_mm ?? zeros;
    if (heights.length === PIN_COUNT) {
      renderGrid(gridCells(heights, strokeMm), cellViews);
    }
    staleEl.textContent = feed.isStale() ? "stale" : "live";
    staleEl.className = feed.isStale() ? "bad" : "ok";
    requestAnimationFrame(tick);
  }
  requestAnimationFrame(tick);

  feed.onChange = applyGuards;
  void refreshSession();
  void refreshPatterns().catch(() => undefined);
  setInterval(() => {
    void refreshSession();
    void refreshPatterns().catch(() => undefined);
  }, POLL_MS);
}

startApp();
