// Browser wiring: canvas rendering, toolbar, timeline. All numbers shown
// come from server payloads; this file only draws them and relays clicks.

import { AnnotationApi, ApiError } from "./api.js";
import { heatmapToRgba, legendRange } from "./heatmap.js";
import {
  applyDecode,
  applyFrameUpdate,
  currentFrame,
  initialState,
  loadSession,
  selectFrame,
  selectLandmarkTool,
  setBanner,
  setHeatmapLandmark,
  toggleOverlay,
  ViewState,
} from "./state.js";
import { canvasToImage, fitTransform, imageToCanvas, insideImage, ViewTransform } from "./transform.js";
import type { FramePayload, HeatmapPayload } from "./types.js";

const api = new AnnotationApi("");
let state: ViewState = initialState();
let nPoints = 0;
let transform: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };
let frameBitmap: ImageBitmap | null = null;
let heatmapPayload: HeatmapPayload | null = null;
let lastTolerance: number | undefined;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const timeline = document.getElementById("timeline") as HTMLDivElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const legend = document.getElementById("legend") as HTMLSpanElement;
const landmarkSelect = document.getElementById("landmark") as HTMLSelectElement;
const heatmapSelect = document.getElementById("heatmap-landmark") as HTMLSelectElement;

function setState(next: ViewState): void {
  state = next;
  render();
}

async function loadVideo(videoId: string): Promise<void> {
  try {
    const payload = await api.createSession(videoId);
    const info = await api.modelInfo();
    nPoints = info.N;
    fillLandmarkSelectors();
    setState(loadSession(state, payload));
    await showFrame(0);
  } catch (err) {
    setState(setBanner(state, describe(err)));
  }
}

function fillLandmarkSelectors(): void {
  for (const sel of [landmarkSelect, heatmapSelect]) {
    sel.innerHTML = "<option value=''>none</option>";
    for (let j = 0; j < nPoints; j++) {
      const opt = document.createElement("option");
      opt.value = String(j);
      opt.textContent = `landmark ${j}`;
      sel.appendChild(opt);
    }
  }
}

async function showFrame(index: number): Promise<void> {
  setState(selectFrame(state, index));
  const frame = currentFrame(state);
  if (!frame || !state.sessionId) return;
  const resp = await fetch(api.frameImageUrl(state.sessionId, index));
  frameBitmap = await createImageBitmap(await resp.blob());
  transform = fitTransform(frameBitmap.width, frameBitmap.height, canvas.width, canvas.height);
  await refreshHeatmap();
  render();
}

async function refreshHeatmap(): Promise<void> {
  heatmapPayload = null;
  if (state.heatmapLandmark === null || !state.sessionId) {
    legend.textContent = "";
    return;
  }
  try {
    heatmapPayload = await api.heatmap(state.sessionId, state.current, state.heatmapLandmark, 48);
    const range = legendRange(heatmapPayload);
    legend.textContent = `density ${range.min.toExponential(2)} .. ${range.max.toExponential(2)}`;
  } catch (err) {
    setState(setBanner(state, `heatmap: ${describe(err)}`));
  }
}

function render(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const frame = currentFrame(state);
  if (frameBitmap) {
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(
      frameBitmap,
      transform.offsetX,
      transform.offsetY,
      frameBitmap.width * transform.scale,
      frameBitmap.height * transform.scale,
    );
  }
  if (!frame) {
    renderBanner();
    return;
  }
  if (heatmapPayload) renderHeatmap(heatmapPayload);
  if (state.showTopK) renderGhosts(frame);
  if (state.showLandmarks) renderLandmarks(frame);
  renderTimeline();
  renderBanner();
}

function renderHeatmap(payload: HeatmapPayload): void {
  const buf = heatmapToRgba(payload);
  const tile = document.createElement("canvas");
  tile.width = buf.width;
  tile.height = buf.height;
  const tileCtx = tile.getContext("2d")!;
  const img = tileCtx.createImageData(buf.width, buf.height);
  img.data.set(buf.data);
  tileCtx.putImageData(img, 0, 0);
  const a = imageToCanvas(transform, { x: payload.extent.x0, y: payload.extent.y0 });
  const b = imageToCanvas(transform, { x: payload.extent.x1, y: payload.extent.y1 });
  ctx.drawImage(tile, a.x, a.y, b.x - a.x, b.y - a.y);
}

function renderLandmarks(frame: FramePayload): void {
  ctx.fillStyle = "#28e06a";
  for (const [x, y] of frame.landmarks) {
    const p = imageToCanvas(transform, { x, y });
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (state.pendingLandmark !== null && frame.landmarks[state.pendingLandmark]) {
    const [x, y] = frame.landmarks[state.pendingLandmark];
    const p = imageToCanvas(transform, { x, y });
    ctx.strokeStyle = "#ffde37";
    ctx.lineWidth = 2;
    ctx.strokeRect(p.x - 6, p.y - 6, 12, 12);
  }
}

function renderGhosts(frame: FramePayload): void {
  for (const entry of frame.top_k) {
    ctx.fillStyle = `rgba(120, 180, 255, ${0.15 + 0.4 * entry.prob})`;
    for (const [x, y] of entry.landmarks) {
      const p = imageToCanvas(transform, { x, y });
      ctx.beginPath();
      ctx.arc(p.x, p.y, 2, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

function renderTimeline(): void {
  timeline.innerHTML = "";
  state.frames.forEach((frame, i) => {
    const cell = document.createElement("button");
    cell.className = "cell";
    cell.textContent = String(i);
    if (i === state.current) cell.classList.add("active");
    if (state.recentlyChanged.includes(i)) cell.classList.add("changed");
    if (frame.evidence_count > 0) cell.classList.add("annotated");
    cell.addEventListener("click", () => void showFrame(i));
    timeline.appendChild(cell);
  });
}

function renderBanner(): void {
  banner.textContent = state.banner ?? "";
  banner.style.display = state.banner ? "block" : "none";
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}

// ---- interactions ---------------------------------------------------------

canvas.addEventListener("click", (evt) => {
  void handleCanvasClick(evt);
});

async function handleCanvasClick(evt: MouseEvent): Promise<void> {
  const frame = currentFrame(state);
  if (!frame || !state.sessionId || state.pendingLandmark === null) return;
  if (!frameBitmap) return;
  const rect = canvas.getBoundingClientRect();
  const canvasPoint = { x: evt.clientX - rect.left, y: evt.clientY - rect.top };
  if (!insideImage(transform, frameBitmap.width, frameBitmap.height, canvasPoint)) return;
  const p = canvasToImage(transform, canvasPoint);
  try {
    const updated = await api.postEvidence(state.sessionId, state.current, {
      landmark: state.pendingLandmark,
      x: p.x,
      y: p.y,
      tolerance: lastTolerance,
      version: frame.version,
    });
    lastTolerance = undefined;
    setState(applyFrameUpdate(state, updated));
    await refreshHeatmap();
    render();
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      // rejection leaves overlays untouched; offer a bigger tolerance
      const base = lastTolerance ?? frame.bbox.w / 4;
      lastTolerance = base * 2;
      setState(setBanner(state, `${err.detail} (next click uses tolerance ${lastTolerance.toFixed(1)}px)`));
    } else {
      setState(setBanner(state, describe(err)));
    }
  }
}

async function propagateDecode(): Promise<void> {
  if (!state.sessionId) return;
  try {
    const decoded = await api.decode(state.sessionId);
    setState(applyDecode(state, decoded));
    await refreshHeatmap();
    render();
  } catch (err) {
    setState(setBanner(state, `decode: ${describe(err)}`));
  }
}

async function exportLabels(): Promise<void> {
  if (!state.sessionId) return;
  const bundle = await api.exportSession(state.sessionId);
  const blob = new Blob([JSON.stringify(bundle, null, 2)], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${state.sessionId}-labels.json`;
  link.click();
}

document.getElementById("load")!.addEventListener("click", () => {
  const videoId = (document.getElementById("video-id") as HTMLInputElement).value;
  void loadVideo(videoId);
});
document.getElementById("decode")!.addEventListener("click", () => void propagateDecode());
document.getElementById("export")!.addEventListener("click", () => void exportLabels());
document.getElementById("toggle-landmarks")!.addEventListener("click", () => {
  setState(toggleOverlay(state, "landmarks"));
});
document.getElementById("toggle-topk")!.addEventListener("click", () => {
  setState(toggleOverlay(state, "topk"));
});
landmarkSelect.addEventListener("change", () => {
  const v = landmarkSelect.value;
  setState(selectLandmarkTool(state, v === "" ? null : Number(v)));
});
heatmapSelect.addEventListener("change", () => {
  const v = heatmapSelect.value;
  setState(setHeatmapLandmark(state, v === "" ? null : Number(v)));
  void refreshHeatmap().then(render);
});
document.getElementById("prev")!.addEventListener("click", () => {
  if (state.current > 0) void showFrame(state.current - 1);
});
document.getElementById("next")!.addEventListener("click", () => {
  if (state.current < state.frames.length - 1) void showFrame(state.current + 1);
});
