// Browser entry point: wires the pattern editor, timeline, and playback to
// the filtering service. All state lives in this module; rendering is plain
// DOM and SVG with no framework.

import { ApiClient, SequenceGate, ServiceError } from "./api.js";
import { decodeWavB64 } from "./audio.js";
import {
  DmaPrimitive,
  EditorPattern,
  activeVector,
  dragHandle,
  newFreehandPattern,
  newPrimitivePattern,
  primitiveToWire,
  updatePrimitive,
} from "./pattern.js";
import {
  DEFAULT_LAYOUT,
  PolarLayout,
  RadialScale,
  gridRings,
  handlePoints,
  pointerAngleDeg,
  pointerGain,
  polarPath,
} from "./polar.js";
import {
  Segment,
  TimelineModel,
  insertSegment,
  newTimeline,
  removeSegment,
  segmentBoundarySeconds,
  toWireEntries,
} from "./timeline.js";
import { MetricsResponse, RenderResponse, SessionInfo } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

interface AppState {
  client: ApiClient;
  session: SessionInfo | null;
  timeline: TimelineModel;
  editingStart: number; // startFrame of the segment being edited
  scale: RadialScale;
  method: string;
  render: RenderResponse | null;
  metrics: MetricsResponse | null;
  lastError: { message: string; retry: () => void } | null;
}

const gate = new SequenceGate();

function defaultPattern(): EditorPattern {
  const cardioid: DmaPrimitive = { kind: "dma-simplified", mu: 0.5, thetaSDeg: 0, orderJ: 1 };
  return newPrimitivePattern([cardioid]);
}

const state: AppState = {
  client: new ApiClient(resolveBaseUrl()),
  session: null,
  timeline: newTimeline([{ startFrame: 0, pattern: defaultPattern() }]),
  editingStart: 0,
  scale: "linear",
  method: "parametric-oracle",
  render: null,
  metrics: null,
  lastError: null,
};

function resolveBaseUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? "http://127.0.0.1:8000";
}

function editingSegment(): Segment {
  const seg = state.timeline.segments.find((s) => s.startFrame === state.editingStart);
  return seg ?? state.timeline.segments[0];
}

function setEditingPattern(pattern: EditorPattern): void {
  const seg = editingSegment();
  state.timeline = insertSegment(state.timeline, { startFrame: seg.startFrame, pattern });
  redraw();
}

// ---------------------------------------------------------------------------
// error banner with retry

function showError(message: string, retry: () => void): void {
  state.lastError = { message, retry };
  redraw();
}

function clearError(): void {
  state.lastError = null;
}

async function guarded(action: () => Promise<void>): Promise<void> {
  clearError();
  try {
    await action();
  } catch (err) {
    const message = err instanceof ServiceError ? err.message : String(err);
    showError(message, () => void guarded(action));
    return;
  }
  redraw();
}

// ---------------------------------------------------------------------------
// service actions

async function connectSession(): Promise<void> {
  const token = gate.begin();
  const doas = readDoaInputs();
  const session = await state.client.createSession({
    duration_s: 2.0,
    seed: 7,
    sources: doas.map((deg) => ({ doa_deg: deg, kind: "speech-noise" })),
  });
  if (!gate.isCurrent(token)) return;
  state.session = session;
  state.render = null;
  state.metrics = null;
}

async function resolveEditingPattern(): Promise<void> {
  const seg = editingSegment();
  if (seg.pattern.mode !== "primitive-composition") return;
  const token = gate.begin();
  const resolved = await state.client.resolvePattern(
    seg.pattern.primitives.map(primitiveToWire),
    seg.pattern.floorDb,
    seg.pattern.l,
  );
  if (!gate.isCurrent(token)) return;
  // keep primitive mode but adopt the service's exact derived vector
  state.timeline = insertSegment(state.timeline, {
    startFrame: seg.startFrame,
    pattern: { ...seg.pattern, handles: resolved.gains },
  });
}

async function syncAndRender(): Promise<void> {
  if (!state.session) throw new ServiceError(0, "connect a session first");
  const sid = state.session.session_id;
  const token = gate.begin();
  await state.client.setTimeline(sid, toWireEntries(state.timeline));
  const render = await state.client.render(sid, state.method);
  const metrics = await state.client.metrics(sid);
  if (!gate.isCurrent(token)) return; // a newer request took over; drop this response
  state.render = render;
  state.metrics = metrics;
}

// ---------------------------------------------------------------------------
// playback

let audioCtx: AudioContext | null = null;

function playRender(): void {
  if (!state.render) return;
  const wav = decodeWavB64(state.render.wav_b64);
  audioCtx = audioCtx ?? new AudioContext({ sampleRate: wav.sampleRate });
  const buffer = audioCtx.createBuffer(1, wav.samples.length, wav.sampleRate);
  buffer.copyToChannel(new Float32Array(wav.samples), 0);
  const node = audioCtx.createBufferSource();
  node.buffer = buffer;
  node.connect(audioCtx.destination);
  node.start();
}

// ---------------------------------------------------------------------------
// view

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

function layout(): PolarLayout {
  return { ...DEFAULT_LAYOUT, scale: state.scale, floorDb: -40 };
}

function drawPolar(container: HTMLElement): void {
  const lay = layout();
  const svg = svgEl("svg", {
    viewBox: "0 0 400 400",
    width: "400",
    height: "400",
    style: "touch-action: none; background: #fafafa; border: 1px solid #ddd;",
  });

  for (const ring of gridRings(lay.scale, lay.floorDb)) {
    svg.appendChild(
      svgEl("circle", {
        cx: String(lay.cx),
        cy: String(lay.cy),
        r: String(lay.radius * ring.fraction),
        fill: "none",
        stroke: "#ddd",
      }),
    );
    svg.appendChild(
      Object.assign(svgEl("text", {
        x: String(lay.cx + 4),
        y: String(lay.cy - lay.radius * ring.fraction - 2),
        "font-size": "10",
        fill: "#999",
      }), { textContent: ring.label }),
    );
  }

  const gains = activeVector(editingSegment().pattern);
  svg.appendChild(
    svgEl("path", { d: polarPath(gains, lay), fill: "rgba(30,110,210,0.15)", stroke: "#1e6ed2", "stroke-width": "1.5" }),
  );

  // source direction spokes from the live session
  if (state.session) {
    for (const deg of state.session.doas_deg) {
      const theta = (deg * Math.PI) / 180;
      svg.appendChild(
        svgEl("line", {
          x1: String(lay.cx),
          y1: String(lay.cy),
          x2: String(lay.cx + lay.radius * Math.cos(theta)),
          y2: String(lay.cy - lay.radius * Math.sin(theta)),
          stroke: "#c77",
          "stroke-dasharray": "4 3",
        }),
      );
    }
  }

  // measured per-source ratios from the last render, overlaid as dots
  if (state.metrics) {
    for (let i = 0; i < state.metrics.doas_deg.length; i++) {
      const deg = state.metrics.doas_deg[i];
      const gain = Math.pow(10, state.metrics.source_ratios_db[i] / 20);
      const theta = (deg * Math.PI) / 180;
      const frac = lay.scale === "linear"
        ? Math.min(1, Math.max(0, gain))
        : Math.min(1, Math.max(0, (state.metrics.source_ratios_db[i] - lay.floorDb) / -lay.floorDb));
      svg.appendChild(
        svgEl("circle", {
          cx: String(lay.cx + lay.radius * frac * Math.cos(theta)),
          cy: String(lay.cy - lay.radius * frac * Math.sin(theta)),
          r: "5",
          fill: "#d2691e",
        }),
      );
    }
  }

  for (const h of handlePoints(gains, lay)) {
    const dot = svgEl("circle", { cx: String(h.x), cy: String(h.y), r: "3", fill: "#1e6ed2" });
    svg.appendChild(dot);
  }

  let dragging = false;
  const applyPointer = (ev: PointerEvent) => {
    const rect = (svg as unknown as SVGGraphicsElement).getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * 400;
    const y = ((ev.clientY - rect.top) / rect.height) * 400;
    const angle = pointerAngleDeg(x, y, lay);
    const gain = pointerGain(x, y, lay);
    setEditingPattern(dragHandle(editingSegment().pattern, angle, gain));
  };
  svg.addEventListener("pointerdown", (ev) => {
    dragging = true;
    applyPointer(ev as PointerEvent);
  });
  svg.addEventListener("pointermove", (ev) => {
    if (dragging) applyPointer(ev as PointerEvent);
  });
  window.addEventListener("pointerup", () => {
    dragging = false;
  });

  container.appendChild(svg);
}

function drawPrimitiveControls(container: HTMLElement): void {
  const seg = editingSegment();
  const pattern = seg.pattern;
  const box = el("div", { style: "margin-top: 8px;" });

  if (pattern.mode === "primitive-composition") {
    pattern.primitives.forEach((prim, i) => {
      if (prim.kind !== "dma-simplified") return;
      const row = el("div", {}, "");
      row.appendChild(el("span", {}, `lobe ${i}: mu `));
      const mu = el("input", { type: "range", min: "0", max: "1", step: "0.05", value: String(prim.mu) });
      mu.addEventListener("input", () => {
        const next: DmaPrimitive = { ...prim, mu: Number(mu.value) };
        setEditingPattern(updatePrimitive(pattern, i, next));
        void guarded(resolveEditingPattern);
      });
      row.appendChild(mu);
      row.appendChild(el("span", {}, " steer "));
      const steer = el("input", { type: "range", min: "0", max: "355", step: "5", value: String(prim.thetaSDeg) });
      steer.addEventListener("input", () => {
        const next: DmaPrimitive = { ...prim, thetaSDeg: Number(steer.value) };
        setEditingPattern(updatePrimitive(pattern, i, next));
        void guarded(resolveEditingPattern);
      });
      row.appendChild(steer);
      box.appendChild(row);
    });
  } else {
    box.appendChild(el("span", {}, "freehand: drag the handles on the polar grid"));
  }

  const toFreehand = el("button", {}, "to freehand");
  toFreehand.addEventListener("click", () => {
    setEditingPattern(newFreehandPattern(activeVector(pattern), pattern.floorDb));
  });
  const toPrimitive = el("button", {}, "reset to cardioid");
  toPrimitive.addEventListener("click", () => setEditingPattern(defaultPattern()));
  box.appendChild(toFreehand);
  box.appendChild(toPrimitive);
  container.appendChild(box);
}

function drawTimeline(container: HTMLElement): void {
  const box = el("div", { style: "margin-top: 12px;" });
  box.appendChild(el("strong", {}, "timeline"));
  const list = el("div", {});
  for (const seg of state.timeline.segments) {
    const row = el("div", {});
    const pick = el("button", {}, `frame ${seg.startFrame}${seg.startFrame === state.editingStart ? " (editing)" : ""}`);
    pick.addEventListener("click", () => {
      state.editingStart = seg.startFrame;
      redraw();
    });
    row.appendChild(pick);
    if (seg.startFrame !== 0) {
      const del = el("button", {}, "remove");
      del.addEventListener("click", () => {
        state.timeline = removeSegment(state.timeline, seg.startFrame);
        if (state.editingStart === seg.startFrame) state.editingStart = 0;
        redraw();
      });
      row.appendChild(del);
    }
    list.appendChild(row);
  }
  box.appendChild(list);

  const addRow = el("div", {});
  const frameInput = el("input", { type: "number", min: "1", value: "1", style: "width: 80px;" });
  const add = el("button", {}, "add segment at frame");
  add.addEventListener("click", () => {
    const frame = Number(frameInput.value);
    const maxFrames = state.session?.n_frames ?? Number.POSITIVE_INFINITY;
    if (!Number.isInteger(frame) || frame < 1 || frame >= maxFrames) {
      showError(`segment start must be an integer in [1, ${maxFrames - 1}]`, () => clearError());
      return;
    }
    try {
      state.timeline = insertSegment(state.timeline, {
        startFrame: frame,
        pattern: editingSegment().pattern,
      });
      state.editingStart = frame;
    } catch (err) {
      showError(String(err), () => clearError());
      return;
    }
    redraw();
  });
  addRow.appendChild(add);
  addRow.appendChild(frameInput);
  box.appendChild(addRow);
  container.appendChild(box);
}

function readDoaInputs(): number[] {
  const field = document.querySelector<HTMLInputElement>("#doas");
  const raw = field?.value ?? "40, 220";
  const doas = raw
    .split(",")
    .map((s) => Number(s.trim()))
    .filter((v) => Number.isFinite(v));
  return doas.length > 0 ? doas : [40, 220];
}

function drawSessionControls(container: HTMLElement): void {
  const box = el("div", { style: "margin-top: 12px;" });
  box.appendChild(el("strong", {}, "session"));
  const row = el("div", {});
  row.appendChild(el("span", {}, "source DOAs (deg): "));
  const doas = el("input", { id: "doas", type: "text", value: "40, 220", style: "width: 120px;" });
  row.appendChild(doas);
  const connect = el("button", {}, "create session");
  connect.addEventListener("click", () => void guarded(connectSession));
  row.appendChild(connect);
  box.appendChild(row);

  if (state.session) {
    box.appendChild(
      el(
        "div",
        {},
        `session ${state.session.session_id}: ${state.session.n_frames} frames, ` +
          `${state.session.num_sources} sources at [${state.session.doas_deg.map((d) => d.toFixed(0)).join(", ")}] deg`,
      ),
    );
    const methodRow = el("div", {});
    methodRow.appendChild(el("span", {}, "method: "));
    const select = el("select", {});
    for (const m of state.session.methods) {
      const opt = el("option", { value: m }, m);
      if (m === state.method) opt.setAttribute("selected", "selected");
      select.appendChild(opt);
    }
    select.addEventListener("change", () => {
      state.method = select.value;
    });
    methodRow.appendChild(select);
    const render = el("button", {}, "sync and render");
    render.addEventListener("click", () => void guarded(syncAndRender));
    methodRow.appendChild(render);
    box.appendChild(methodRow);
  }
  container.appendChild(box);
}

function drawPlayback(container: HTMLElement): void {
  if (!state.render || !state.session) return;
  const box = el("div", { style: "margin-top: 12px;" });
  box.appendChild(el("strong", {}, "playback"));

  const seconds = segmentBoundarySeconds(state.timeline, state.render.hop, state.render.sample_rate);
  const total = state.session.num_samples / state.render.sample_rate;
  const bar = svgEl("svg", { viewBox: "0 0 400 24", width: "400", height: "24", style: "background:#eee;" });
  for (const t of seconds) {
    const x = (t / total) * 400;
    bar.appendChild(svgEl("line", { x1: String(x), y1: "0", x2: String(x), y2: "24", stroke: "#d2691e", "stroke-width": "2" }));
  }
  box.appendChild(bar as unknown as HTMLElement);

  const play = el("button", {}, "play processed");
  play.addEventListener("click", playRender);
  box.appendChild(play);

  if (state.metrics) {
    box.appendChild(
      el(
        "div",
        {},
        `sdr ${state.metrics.sdr_db.toFixed(2)} dB (unprocessed ${state.metrics.unprocessed_sdr_db.toFixed(2)} dB), ` +
          `loss ${state.metrics.loss.toFixed(4)}`,
      ),
    );
  }
  container.appendChild(box);
}

function drawSpectrograms(container: HTMLElement): void {
  if (!state.render) return;
  const box = el("div", { style: "margin-top: 12px;" });
  box.appendChild(el("strong", {}, "spectrograms (dB)"));
  for (const [label, frames] of [
    ["unprocessed", state.render.unprocessed_db],
    ["processed", state.render.processed_db],
  ] as const) {
    const canvas = el("canvas", { width: "400", height: "130" });
    paintSpectrogram(canvas, frames);
    box.appendChild(el("div", {}, label));
    box.appendChild(canvas);
  }
  container.appendChild(box);
}

function paintSpectrogram(canvas: HTMLCanvasElement, frames: number[][]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || frames.length === 0) return;
  const nT = frames.length;
  const nF = frames[0].length;
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of frames) {
    for (const v of row) {
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  lo = Math.max(lo, hi - 70); // 70 dB display range
  const img = ctx.createImageData(nT, nF);
  for (let t = 0; t < nT; t++) {
    for (let f = 0; f < nF; f++) {
      const v = (Math.max(frames[t][f], lo) - lo) / (hi - lo || 1);
      const px = ((nF - 1 - f) * nT + t) * 4;
      img.data[px] = 255 * v;
      img.data[px + 1] = 80 + 120 * v;
      img.data[px + 2] = 255 * (1 - v);
      img.data[px + 3] = 255;
    }
  }
  const off = document.createElement("canvas");
  off.width = nT;
  off.height = nF;
  off.getContext("2d")?.putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function redraw(): void {
  const root = document.querySelector<HTMLElement>("#app");
  if (!root) return;
  root.textContent = "";

  if (state.lastError) {
    const banner = el("div", { style: "background:#fdd; border:1px solid #c66; padding:8px; margin-bottom:8px;" });
    banner.appendChild(el("span", {}, state.lastError.message + " "));
    const retry = el("button", {}, "retry");
    const { retry: retryFn } = state.lastError;
    retry.addEventListener("click", () => {
      clearError();
      retryFn();
    });
    banner.appendChild(retry);
    root.appendChild(banner);
  }

  const scaleRow = el("div", {});
  scaleRow.appendChild(el("span", {}, "radial axis: "));
  for (const s of ["linear", "db"] as const) {
    const btn = el("button", {}, s + (state.scale === s ? " (active)" : ""));
    btn.addEventListener("click", () => {
      state.scale = s;
      redraw();
    });
    scaleRow.appendChild(btn);
  }
  root.appendChild(scaleRow);

  drawPolar(root);
  drawPrimitiveControls(root);
  drawTimeline(root);
  drawSessionControls(root);
  drawPlayback(root);
  drawSpectrograms(root);
}

window.addEventListener("DOMContentLoaded", redraw);
