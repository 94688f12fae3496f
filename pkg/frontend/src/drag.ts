/**
 * Drag-to-perturb. A drag that starts on the canvas and releases at a new
 * point asks the server to teleport the robot there — the client only
 * translates pixels to workspace coordinates; the server decides everything
 * that follows.
 */

import type { CommandBody } from "./protocol";
import { type Camera, clampToWorkspace, toWorkspace } from "./transform";
import type { Pt } from "./viewmodel";

export interface DragState {
  startScreen: Pt;
  currentScreen: Pt;
}

/** Releases closer than this (in pixels) are clicks, not drags. */
export const MIN_DRAG_PX = 3;

export function startDrag(screen: Pt): DragState {
  return { startScreen: screen, currentScreen: screen };
}

export function moveDrag(state: DragState, screen: Pt): DragState {
  return { ...state, currentScreen: screen };
}

/** Workspace-space preview of the pending perturbation. */
export function dragPreviewPoints(cam: Camera, state: DragState): { from: Pt; to: Pt } {
  return {
    from: toWorkspace(cam, state.startScreen),
    to: clampToWorkspace(cam, toWorkspace(cam, state.currentScreen)),
  };
}

/**
 * Finish a drag: a real displacement becomes a Perturb command targeting the
 * release point (clamped into the workspace); a zero-length release is a
 * click and produces no command.
 */
export function endDrag(cam: Camera, state: DragState, releaseScreen: Pt): CommandBody | null {
  const dx = releaseScreen[0] - state.startScreen[0];
  const dy = releaseScreen[1] - state.startScreen[1];
  if (Math.hypot(dx, dy) < MIN_DRAG_PX) return null;
  const target = clampToWorkspace(cam, toWorkspace(cam, releaseScreen));
  return { cmd: "Perturb", args: { point: [target[0], target[1]] } };
}
