// View state and its pure update functions. The client never derives
// numbers: frames hold the latest server payloads verbatim, and every
// update either swaps whole payloads in or changes UI-only flags.

import type { DecodePayload, FramePayload, SessionPayload } from "./types.js";

export interface ViewState {
  sessionId: string | null;
  frames: FramePayload[];
  current: number;
  showLandmarks: boolean;
  showTopK: boolean;
  heatmapLandmark: number | null;
  pendingLandmark: number | null; // selected click target (tool mode)
  recentlyChanged: number[]; // frames recolored after a decode
  banner: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    frames: [],
    current: 0,
    showLandmarks: true,
    showTopK: false,
    heatmapLandmark: null,
    pendingLandmark: null,
    recentlyChanged: [],
    banner: null,
  };
}

export function loadSession(state: ViewState, payload: SessionPayload): ViewState {
  return {
    ...initialState(),
    showLandmarks: state.showLandmarks,
    showTopK: state.showTopK,
    sessionId: payload.session_id,
    frames: payload.frames,
  };
}

export function selectFrame(state: ViewState, index: number): ViewState {
  if (index < 0 || index >= state.frames.length) return state;
  return { ...state, current: index };
}

export function selectLandmarkTool(state: ViewState, landmark: number | null): ViewState {
  return { ...state, pendingLandmark: landmark };
}

export function toggleOverlay(
  state: ViewState,
  which: "landmarks" | "topk",
): ViewState {
  if (which === "landmarks") return { ...state, showLandmarks: !state.showLandmarks };
  return { ...state, showTopK: !state.showTopK };
}

export function setHeatmapLandmark(state: ViewState, landmark: number | null): ViewState {
  return { ...state, heatmapLandmark: landmark };
}

export function setBanner(state: ViewState, banner: string | null): ViewState {
  return { ...state, banner };
}

/** Swap in an updated frame payload (after accepted evidence). */
export function applyFrameUpdate(state: ViewState, frame: FramePayload): ViewState {
  if (frame.index < 0 || frame.index >= state.frames.length) {
    throw new Error(`frame index ${frame.index} outside session`);
  }
  const frames = state.frames.slice();
  frames[frame.index] = frame;
  return { ...state, frames, banner: null };
}

/** Replace all frames after a decode and remember which ones changed. */
export function applyDecode(state: ViewState, decoded: DecodePayload): ViewState {
  return { ...state, frames: decoded.frames, recentlyChanged: decoded.changed_frames, banner: null };
}

export function currentFrame(state: ViewState): FramePayload | null {
  return state.frames[state.current] ?? null;
}

/** Versions currently displayed, by frame index; must mirror the server. */
export function displayedVersions(state: ViewState): number[] {
  return state.frames.map((f) => f.version);
}
