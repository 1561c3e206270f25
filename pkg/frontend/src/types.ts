// Payload shapes of the annotation service. All coordinates are image
// pixels; the frame's detection bbox is included for conversions.

export interface BBoxPayload {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface TopKEntry {
  class: number;
  prob: number;
  landmarks: [number, number][];
}

export interface FramePayload {
  index: number;
  frame_index: number | null;
  version: number;
  map_class: number;
  landmarks: [number, number][];
  top_k: TopKEntry[];
  bbox: BBoxPayload;
  evidence_count: number;
  consistent_classes: number[] | null;
}

export interface SessionPayload {
  session_id: string;
  frames: FramePayload[];
}

export interface HeatmapPayload {
  landmark: number;
  res: number;
  version: number;
  extent: { x0: number; x1: number; y0: number; y1: number };
  values: number[]; // row-major, res * res
}

export interface EvidenceRequest {
  landmark: number;
  x: number;
  y: number;
  tolerance?: number; // pixels
  version?: number;
}

export interface DecodePayload {
  path: number[];
  changed_frames: number[];
  frames: FramePayload[];
}

export interface ExportManifestEntry {
  frame: number;
  pts: string;
  evidence_count: number;
}

export interface ExportPayload {
  files: Record<string, string>;
  manifest: ExportManifestEntry[];
}

export interface ModelInfo {
  K: number;
  N: number;
  D: number;
  tau: number;
}
