// Canvas <-> image pixel transforms. The image is letterboxed into the
// canvas: uniform scale, centered offsets.

export interface ViewTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export interface Point {
  x: number;
  y: number;
}

export function fitTransform(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): ViewTransform {
  if (imageW <= 0 || imageH <= 0 || canvasW <= 0 || canvasH <= 0) {
    throw new Error(`degenerate fit: image ${imageW}x${imageH}, canvas ${canvasW}x${canvasH}`);
  }
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function imageToCanvas(t: ViewTransform, p: Point): Point {
  return { x: p.x * t.scale + t.offsetX, y: p.y * t.scale + t.offsetY };
}

export function canvasToImage(t: ViewTransform, p: Point): Point {
  return { x: (p.x - t.offsetX) / t.scale, y: (p.y - t.offsetY) / t.scale };
}

export function insideImage(t: ViewTransform, imageW: number, imageH: number, canvasPoint: Point): boolean {
  const p = canvasToImage(t, canvasPoint);
  return p.x >= 0 && p.x <= imageW && p.y >= 0 && p.y <= imageH;
}
