/**
 * Workspace ↔ screen mapping — the only geometry the client computes itself.
 * Uniform scale (no distortion), centered in the canvas, y flipped so the
 * workspace's +y points up on screen.
 */

import type { SceneView } from "./protocol";

export interface Camera {
  /** workspace bounds: [[xmin, xmax], [ymin, ymax]] */
  xr: readonly [number, number];
  yr: readonly [number, number];
  width: number;
  height: number;
  margin: number;
  scale: number;
  offsetX: number;
  offsetY: number;
}

export type Pt = readonly [number, number];

export function makeCamera(
  workspace: SceneView["workspace"],
  width: number,
  height: number,
  margin = 16,
): Camera {
  const [xr, yr] = workspace;
  const wx = Math.max(xr[1] - xr[0], 1e-12);
  const wy = Math.max(yr[1] - yr[0], 1e-12);
  const scale = Math.min((width - 2 * margin) / wx, (height - 2 * margin) / wy);
  const offsetX = (width - scale * wx) / 2;
  const offsetY = (height - scale * wy) / 2;
  return { xr, yr, width, height, margin, scale, offsetX, offsetY };
}

export function toScreen(cam: Camera, p: Pt): [number, number] {
  const sx = cam.offsetX + (p[0] - cam.xr[0]) * cam.scale;
  const sy = cam.height - cam.offsetY - (p[1] - cam.yr[0]) * cam.scale;
  return [sx, sy];
}

export function toWorkspace(cam: Camera, s: Pt): [number, number] {
  const x = cam.xr[0] + (s[0] - cam.offsetX) / cam.scale;
  const y = cam.yr[0] + (cam.height - cam.offsetY - s[1]) / cam.scale;
  return [x, y];
}

export function clampToWorkspace(cam: Camera, p: Pt): [number, number] {
  return [
    Math.min(Math.max(p[0], cam.xr[0]), cam.xr[1]),
    Math.min(Math.max(p[1], cam.yr[0]), cam.yr[1]),
  ];
}

/** Pixels per workspace unit — for sizing markers in workspace terms. */
export function pixelsPerUnit(cam: Camera): number {
  return cam.scale;
}
