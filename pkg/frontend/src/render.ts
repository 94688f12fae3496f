/**
 * Canvas drawing. Every function is a pure projection of already-validated
 * server state through the camera transform — no simulation, no physics.
 * Functions take a minimal 2D-context interface so tests can substitute a
 * recording fake and count exactly what was drawn.
 */

import type { AutomatonView, CutView, GridView, SceneView, SnapshotView } from "./protocol";
import { type Camera, toScreen } from "./transform";
import { type Pt, splitTrajectory, type ViewModel } from "./viewmodel";

/** Subset of CanvasRenderingContext2D the renderer uses. */
export interface Ctx2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  globalAlpha: number;
  font: string;
  textAlign: CanvasTextAlign;
  textBaseline: CanvasTextBaseline;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
  save(): void;
  restore(): void;
}

/** Stable palette: region colors keyed by the region's own name when it is a
 * color word, else by its index in the scene listing. */
const NAMED_COLORS: Record<string, string> = {
  yellow: "#e6c229",
  blue: "#3a86c8",
  green: "#5aa85a",
  orange: "#e08a3c",
  pink: "#d473a8",
};

const INDEX_COLORS = [
  "#7fb3d5",
  "#a9dfbf",
  "#f9e79f",
  "#f5b7b1",
  "#d2b4de",
  "#aed6f1",
  "#fad7a0",
  "#abebc6",
  "#f5cba7",
  "#d98880",
  "#85c1e9",
  "#82e0aa",
];

export function regionColor(name: string, index: number): string {
  return NAMED_COLORS[name] ?? INDEX_COLORS[index % INDEX_COLORS.length] ?? "#cccccc";
}

function tracePolygon(ctx: Ctx2D, cam: Camera, vertices: readonly Pt[]): void {
  ctx.beginPath();
  vertices.forEach((v, i) => {
    const [sx, sy] = toScreen(cam, v);
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
}

export function drawScene(
  ctx: Ctx2D,
  cam: Camera,
  scene: SceneView,
  activeMode: string | null,
): void {
  scene.regions.forEach((region, i) => {
    tracePolygon(ctx, cam, region.vertices);
    ctx.globalAlpha = 0.35;
    ctx.fillStyle = regionColor(region.name, i);
    ctx.fill();
    ctx.globalAlpha = 1.0;
    ctx.lineWidth = region.name === activeMode ? 3 : 1;
    ctx.strokeStyle = region.name === activeMode ? "#1f3a5f" : "#8395a7";
    ctx.stroke();
    const [lx, ly] = toScreen(cam, centroid(region.vertices));
    ctx.fillStyle = "#2d3436";
    ctx.font = "14px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(region.name, lx, ly);
  });
}

export function centroid(vertices: readonly Pt[]): Pt {
  let sx = 0;
  let sy = 0;
  for (const v of vertices) {
    sx += v[0];
    sy += v[1];
  }
  const n = Math.max(vertices.length, 1);
  return [sx / n, sy / n];
}

export function drawTrajectory(
  ctx: Ctx2D,
  cam: Camera,
  points: readonly Pt[],
  jumpThreshold = 0.08,
): void {
  const { segments, jumps } = splitTrajectory(points, jumpThreshold);
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#2c3e50";
  ctx.setLineDash([]);
  for (const seg of segments) {
    if (seg.length < 2) continue;
    ctx.beginPath();
    seg.forEach((p, i) => {
      const [sx, sy] = toScreen(cam, p);
      if (i === 0) ctx.moveTo(sx, sy);
      else ctx.lineTo(sx, sy);
    });
    ctx.stroke();
  }
  // perturbation gaps: dashed red connectors, visually distinct from motion
  ctx.strokeStyle = "#c0392b";
  ctx.lineWidth = 1.5;
  ctx.setLineDash([4, 4]);
  for (const [a, b] of jumps) {
    const [ax, ay] = toScreen(cam, a);
    const [bx, by] = toScreen(cam, b);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

export function drawRobot(ctx: Ctx2D, cam: Camera, x: Pt): void {
  const [sx, sy] = toScreen(cam, x);
  ctx.beginPath();
  ctx.arc(sx, sy, 7, 0, 2 * Math.PI);
  ctx.fillStyle = "#e74c3c";
  ctx.fill();
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#922b21";
  ctx.stroke();
}

export function drawAttractor(ctx: Ctx2D, cam: Camera, attractor: Pt): void {
  const [sx, sy] = toScreen(cam, attractor);
  const r = 6;
  ctx.strokeStyle = "#0e6655";
  ctx.lineWidth = 2;
  ctx.setLineDash([]);
  ctx.beginPath();
  ctx.moveTo(sx - r, sy);
  ctx.lineTo(sx + r, sy);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(sx, sy - r);
  ctx.lineTo(sx, sy + r);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(sx, sy, r, 0, 2 * Math.PI);
  ctx.stroke();
}

/** Half-length of a drawn cut segment, in workspace units. */
export const CUT_HALF_LENGTH = 0.06;

/**
 * Each learned boundary is drawn as one straight segment through its fit
 * point, perpendicular to the outward normal.
 */
export function drawCuts(ctx: Ctx2D, cam: Camera, cuts: readonly CutView[]): void {
  for (const cut of cuts) {
    const [wx, wy] = cut.normal;
    const norm = Math.hypot(wx, wy) || 1;
    const tx = -wy / norm;
    const ty = wx / norm;
    const p = cut.point;
    const a: Pt = [p[0] - tx * CUT_HALF_LENGTH, p[1] - ty * CUT_HALF_LENGTH];
    const b: Pt = [p[0] + tx * CUT_HALF_LENGTH, p[1] + ty * CUT_HALF_LENGTH];
    const [ax, ay] = toScreen(cam, a);
    const [bx, by] = toScreen(cam, b);
    ctx.strokeStyle = cut.perturbed ? "#8e44ad" : "#6c3483";
    ctx.lineWidth = 3;
    ctx.setLineDash([]);
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }
}

function drawArrow(ctx: Ctx2D, x0: number, y0: number, x1: number, y1: number): void {
  ctx.beginPath();
  ctx.moveTo(x0, y0);
  ctx.lineTo(x1, y1);
  ctx.stroke();
  const angle = Math.atan2(y1 - y0, x1 - x0);
  const head = 4;
  ctx.beginPath();
  ctx.moveTo(x1, y1);
  ctx.lineTo(x1 - head * Math.cos(angle - 0.5), y1 - head * Math.sin(angle - 0.5));
  ctx.moveTo(x1, y1);
  ctx.lineTo(x1 - head * Math.cos(angle + 0.5), y1 - head * Math.sin(angle + 0.5));
  ctx.stroke();
}

/** Raw vs. modulated velocity probes at each cut's fit point. */
export function drawCutProbes(
  ctx: Ctx2D,
  cam: Camera,
  cuts: readonly CutView[],
  probeScale = 0.06,
): void {
  for (const cut of cuts) {
    const [px, py] = toScreen(cam, cut.point);
    for (const [vel, color] of [
      [cut.v_raw, "#95a5a6"],
      [cut.v_mod, "#117864"],
    ] as const) {
      if (vel === null) continue;
      const mag = Math.hypot(vel[0], vel[1]);
      if (mag < 1e-12) continue;
      const k = (probeScale / mag) * cam.scale;
      ctx.strokeStyle = color;
      ctx.lineWidth = 1.5;
      drawArrow(ctx, px, py, px + vel[0] * k, py - vel[1] * k);
    }
  }
}

/** One small velocity glyph per grid cell; raw or modulated field. */
export function drawGrid(
  ctx: Ctx2D,
  cam: Camera,
  grid: GridView,
  modulated: boolean,
): void {
  const field = modulated ? grid.modulated : grid.raw;
  const cell = Math.min(
    (cam.xr[1] - cam.xr[0]) / Math.max(grid.xs.length, 1),
    (cam.yr[1] - cam.yr[0]) / Math.max(grid.ys.length, 1),
  );
  const glyph = 0.4 * cell;
  ctx.strokeStyle = modulated ? "#1a6d5c" : "#7f8c8d";
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.8;
  ctx.setLineDash([]);
  let k = 0;
  for (const y of grid.ys) {
    for (const x of grid.xs) {
      const v = field[k];
      k += 1;
      if (v === undefined) continue;
      const [vx, vy] = v;
      const mag = Math.hypot(vx ?? 0, vy ?? 0);
      if (mag < 1e-12) continue;
      const ux = ((vx ?? 0) / mag) * glyph;
      const uy = ((vy ?? 0) / mag) * glyph;
      const [sx, sy] = toScreen(cam, [x, y]);
      drawArrow(ctx, sx, sy, sx + ux * cam.scale, sy - uy * cam.scale);
    }
  }
  ctx.globalAlpha = 1.0;
}

export function dragPreview(ctx: Ctx2D, cam: Camera, from: Pt, to: Pt): void {
  const [ax, ay] = toScreen(cam, from);
  const [bx, by] = toScreen(cam, to);
  ctx.strokeStyle = "#e67e22";
  ctx.lineWidth = 2;
  ctx.setLineDash([6, 4]);
  drawArrow(ctx, ax, ay, bx, by);
  ctx.setLineDash([]);
}

// ---------------------------------------------------------------------------
// automaton panel

export interface NodeLayout {
  name: string;
  x: number;
  y: number;
}

/** Nodes evenly spaced on a circle, in listing order (stable for ≤12 modes). */
export function automatonLayout(
  nodes: readonly string[],
  width: number,
  height: number,
): NodeLayout[] {
  const cx = width / 2;
  const cy = height / 2;
  const r = Math.max(Math.min(width, height) / 2 - 28, 10);
  const n = Math.max(nodes.length, 1);
  return nodes.map((name, i) => {
    const angle = -Math.PI / 2 + (2 * Math.PI * i) / n;
    return { name, x: cx + r * Math.cos(angle), y: cy + r * Math.sin(angle) };
  });
}

export const NODE_RADIUS = 14;

export function drawAutomaton(
  ctx: Ctx2D,
  automaton: AutomatonView,
  commanded: readonly [string, string] | null,
  width: number,
  height: number,
): void {
  const layout = automatonLayout(automaton.nodes, width, height);
  const at = new Map(layout.map((n) => [n.name, n]));
  const isCommanded = (a: string, b: string) =>
    commanded !== null && commanded[0] === a && commanded[1] === b;

  for (const [a, b] of automaton.edges) {
    const pa = at.get(a);
    const pb = at.get(b);
    if (pa === undefined || pb === undefined) continue;
    if (a === b) {
      // self-loop: a small circle tangent to the node, away from center
      const dx = pa.x - width / 2;
      const dy = pa.y - height / 2;
      const d = Math.hypot(dx, dy) || 1;
      const lx = pa.x + (dx / d) * (NODE_RADIUS + 7);
      const ly = pa.y + (dy / d) * (NODE_RADIUS + 7);
      ctx.strokeStyle = "#b2bec3";
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.arc(lx, ly, 7, 0, 2 * Math.PI);
      ctx.stroke();
      continue;
    }
    const ux = (pb.x - pa.x) / (Math.hypot(pb.x - pa.x, pb.y - pa.y) || 1);
    const uy = (pb.y - pa.y) / (Math.hypot(pb.x - pa.x, pb.y - pa.y) || 1);
    const x0 = pa.x + ux * NODE_RADIUS;
    const y0 = pa.y + uy * NODE_RADIUS;
    const x1 = pb.x - ux * NODE_RADIUS;
    const y1 = pb.y - uy * NODE_RADIUS;
    const hot = isCommanded(a, b);
    ctx.strokeStyle = hot ? "#d35400" : "#b2bec3";
    ctx.lineWidth = hot ? 2.5 : 1;
    drawArrow(ctx, x0, y0, x1, y1);
  }

  const goals = new Set(automaton.goals);
  for (const node of layout) {
    ctx.beginPath();
    ctx.arc(node.x, node.y, NODE_RADIUS, 0, 2 * Math.PI);
    ctx.fillStyle = node.name === automaton.active ? "#2e86c1" : "#ecf0f1";
    ctx.fill();
    ctx.strokeStyle = "#34495e";
    ctx.lineWidth = 1.5;
    ctx.stroke();
    if (goals.has(node.name)) {
      ctx.beginPath();
      ctx.arc(node.x, node.y, NODE_RADIUS + 4, 0, 2 * Math.PI);
      ctx.strokeStyle = "#1e8449";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    }
    ctx.fillStyle = node.name === automaton.active ? "#ffffff" : "#2d3436";
    ctx.font = "12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(node.name, node.x, node.y);
  }
}

// ---------------------------------------------------------------------------
// full frame

export function renderFrame(
  ctx: Ctx2D,
  cam: Camera,
  vm: ViewModel,
): void {
  ctx.clearRect(0, 0, cam.width, cam.height);
  const snap: SnapshotView | null = vm.snapshot;
  if (vm.scene !== null) {
    drawScene(ctx, cam, vm.scene, snap?.mode ?? null);
  }
  if (snap === null) return;
  if (vm.showGrid && snap.grid !== null) {
    drawGrid(ctx, cam, snap.grid, vm.showModulated);
  }
  drawTrajectory(ctx, cam, snap.trajectory);
  drawCuts(ctx, cam, snap.cuts);
  drawCutProbes(ctx, cam, snap.cuts);
  if (snap.attractor !== null) {
    drawAttractor(ctx, cam, snap.attractor);
  }
  drawRobot(ctx, cam, snap.x);
  if (vm.drag !== null) {
    dragPreview(ctx, cam, vm.drag.from, vm.drag.to);
  }
}
