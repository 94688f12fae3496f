/**
 * Derived presentation state. Everything here is a pure projection of the
 * latest server snapshot — the client never simulates, predicts, or
 * extrapolates; between messages the picture simply stands still.
 */

import type { SceneView, SnapshotView } from "./protocol";

export type BannerKind = "none" | "info" | "success" | "warning";

export interface Banner {
  kind: BannerKind;
  text: string;
}

export function banner(snapshot: SnapshotView | null): Banner {
  if (snapshot === null) return { kind: "none", text: "" };
  switch (snapshot.verdict) {
    case "Running":
      return snapshot.paused
        ? { kind: "info", text: "Paused" }
        : { kind: "none", text: "" };
    case "Success":
      return {
        kind: "success",
        text: `Success — task satisfied in ${snapshot.steps} steps`,
      };
    case "Looping":
      return {
        kind: "warning",
        text:
          `Looping — replan budget exhausted after ${snapshot.replans} replans; ` +
          "the same boundary keeps failing",
      };
    case "StepBudgetExhausted":
      return { kind: "info", text: "Step budget exhausted" };
    case "AssumptionViolation":
      return {
        kind: "warning",
        text: "Environment broke a modeled assumption — run aborted",
      };
    default:
      return { kind: "info", text: snapshot.verdict };
  }
}

export type Pt = readonly [number, number];

export interface TrajectoryView {
  /** Contiguous motion polylines, in time order. */
  segments: Pt[][];
  /** Teleport gaps: [last point before, first point after]. */
  jumps: Array<[Pt, Pt]>;
}

/**
 * Split the recorded trajectory wherever consecutive points are farther
 * apart than any integration step could move — those gaps are perturbation
 * teleports and get drawn as breaks, not motion.
 */
export function splitTrajectory(points: readonly Pt[], jumpThreshold = 0.08): TrajectoryView {
  const segments: Pt[][] = [];
  const jumps: Array<[Pt, Pt]> = [];
  let current: Pt[] = [];
  for (const p of points) {
    const prev = current[current.length - 1];
    if (prev !== undefined) {
      const dx = p[0] - prev[0];
      const dy = p[1] - prev[1];
      if (Math.hypot(dx, dy) > jumpThreshold) {
        segments.push(current);
        jumps.push([prev, p]);
        current = [];
      }
    }
    current.push(p);
  }
  if (current.length > 0) segments.push(current);
  return { segments, jumps };
}

export type ConnectionState = "idle" | "connecting" | "live" | "closed" | "error";

/** Everything the render pass needs, in one place. */
export interface ViewModel {
  snapshot: SnapshotView | null;
  scene: SceneView | null;
  specText: string | null;
  sessionId: string | null;
  connection: ConnectionState;
  showGrid: boolean;
  showModulated: boolean;
  /** In-progress drag, in workspace coordinates. */
  drag: { from: Pt; to: Pt } | null;
  statusNote: string;
}

export function emptyViewModel(): ViewModel {
  return {
    snapshot: null,
    scene: null,
    specText: null,
    sessionId: null,
    connection: "idle",
    showGrid: true,
    showModulated: true,
    drag: null,
    statusNote: "",
  };
}

export function statusLine(vm: ViewModel): string {
  const s = vm.snapshot;
  if (s === null) return "no session";
  const commanded = s.commanded ? `${s.commanded[0]}→${s.commanded[1]}` : "—";
  return (
    `tick ${s.tick} · step ${s.steps} · mode ${s.mode} · commanded ${commanded} · ` +
    `verdict ${s.verdict} · replans ${s.replans} · cuts ${s.cut_count} · ` +
    `mod ${s.modulation_enabled ? "on" : "off"} · cut-learn ${s.cutting_enabled ? "on" : "off"}`
  );
}
