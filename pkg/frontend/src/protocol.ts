/**
 * Wire schemas for the session service, mirrored field-for-field from the
 * server's response models. Every schema is strict: a payload with unknown
 * or missing fields fails loudly instead of rendering garbage. The UI never
 * computes simulation state of its own — these parsed payloads are the only
 * source of truth it draws from.
 */

import { z } from "zod";

const vec2 = z.tuple([z.number(), z.number()]);
const point = vec2;
const polyline = z.array(point);

export const AssetListing = z
  .object({
    scenes: z.array(z.string()),
    specs: z.array(z.string()),
    variants: z.array(z.string()),
  })
  .strict();
export type AssetListing = z.infer<typeof AssetListing>;

export const RegionView = z
  .object({
    name: z.string(),
    vertices: polyline,
    valuation: z.array(z.number().int()),
  })
  .strict();
export type RegionView = z.infer<typeof RegionView>;

export const AliasView = z
  .object({ mode: z.string(), shares_policy_of: z.string() })
  .strict();
export type AliasView = z.infer<typeof AliasView>;

export const SceneView = z
  .object({
    name: z.string(),
    n: z.number().int(),
    workspace: z.tuple([vec2, vec2]),
    aps_env: z.array(z.string()),
    regions: z.array(RegionView),
    background_valuation: z.array(z.number().int()),
    aliases: z.array(AliasView),
  })
  .strict();
export type SceneView = z.infer<typeof SceneView>;

export const SpecTextView = z
  .object({ name: z.string(), text: z.string() })
  .strict();
export type SpecTextView = z.infer<typeof SpecTextView>;

export const AutomatonView = z
  .object({
    nodes: z.array(z.string()),
    edges: z.array(z.tuple([z.string(), z.string()])),
    goals: z.array(z.string()),
    active: z.string(),
    strategy: z.record(z.string(), z.string()),
  })
  .strict();
export type AutomatonView = z.infer<typeof AutomatonView>;

export const CutView = z
  .object({
    mode: z.string(),
    target: z.string().nullable(),
    normal: point,
    point: point,
    perturbed: z.boolean(),
    v_raw: point.nullable(),
    v_mod: point.nullable(),
  })
  .strict();
export type CutView = z.infer<typeof CutView>;

export const GridView = z
  .object({
    size: z.number().int(),
    xs: z.array(z.number()),
    ys: z.array(z.number()),
    raw: polyline, // one [vx, vy] per cell, row-major over ys × xs
    modulated: polyline,
  })
  .strict();
export type GridView = z.infer<typeof GridView>;

export const SnapshotView = z
  .object({
    scene: z.string(),
    spec: z.string(),
    variant: z.string(),
    tick: z.number().int(),
    steps: z.number().int(),
    paused: z.boolean(),
    verdict: z.string(),
    x: point,
    alpha: z.array(z.number().int()),
    mode: z.string(),
    attractor: point.nullable(),
    commanded: z.tuple([z.string(), z.string()]).nullable(),
    automaton: AutomatonView,
    cuts: z.array(CutView),
    cut_count: z.number().int(),
    trajectory: polyline,
    grid: GridView.nullable(),
    replans: z.number().int(),
    redundant_failures: z.number().int(),
    skipped_cuts: z.number().int(),
    goal_visits_seen: z.number().int(),
    modulation_enabled: z.boolean(),
    cutting_enabled: z.boolean(),
  })
  .strict();
export type SnapshotView = z.infer<typeof SnapshotView>;

export const AckView = z
  .object({
    status: z.literal("accepted"),
    cmd: z.string(),
    applies_at_tick: z.number().int(),
  })
  .strict();
export type AckView = z.infer<typeof AckView>;

export const CreateSessionResponse = z
  .object({ id: z.string(), snapshot: SnapshotView })
  .strict();
export type CreateSessionResponse = z.infer<typeof CreateSessionResponse>;

export const CloseSessionResponse = z
  .object({ id: z.string(), closed: z.boolean() })
  .strict();
export type CloseSessionResponse = z.infer<typeof CloseSessionResponse>;

/** Body of every non-2xx REST response. */
export const ErrorDetail = z.object({ detail: z.unknown() }).strict();
export type ErrorDetail = z.infer<typeof ErrorDetail>;

// ---------------------------------------------------------------------------
// WebSocket framing

export const WsAckPayload = z
  .object({
    id: z.union([z.string(), z.number()]).nullable(),
    status: z.literal("accepted"),
    cmd: z.string(),
    applies_at_tick: z.number().int(),
  })
  .strict();
export type WsAckPayload = z.infer<typeof WsAckPayload>;

export const WsErrorPayload = z.object({ message: z.string() }).strict();
export type WsErrorPayload = z.infer<typeof WsErrorPayload>;

/**
 * Server → client envelope. The payload is validated against the schema the
 * `type` tag selects; `seq` increases by one per message on a connection.
 */
export const WsEnvelope = z.discriminatedUnion("type", [
  z.object({ type: z.literal("snapshot"), seq: z.number().int(), payload: SnapshotView }).strict(),
  z.object({ type: z.literal("ack"), seq: z.number().int(), payload: WsAckPayload }).strict(),
  z.object({ type: z.literal("error"), seq: z.number().int(), payload: WsErrorPayload }).strict(),
]);
export type WsEnvelope = z.infer<typeof WsEnvelope>;

export type CommandName =
  | "Perturb"
  | "Pause"
  | "Resume"
  | "Reset"
  | "ToggleModulation"
  | "ToggleCutting";

export interface CommandBody {
  cmd: CommandName;
  args?: Record<string, unknown>;
}

/** Client → server WebSocket command frame. */
export interface WsCommand extends CommandBody {
  type: "command";
  id?: string | number;
}

export interface SessionConfigBody {
  seed?: number;
  tick_rate?: number;
  steps_per_tick?: number | null;
  dt?: number;
  window?: number;
  grid_size?: number;
  loop_budget?: number;
  max_steps?: number;
  goal_visits?: number;
  cutting?: boolean;
  demo_count?: number;
  demo_seed?: number;
}

export interface CreateSessionBody {
  scene: string;
  spec: string;
  variant?: string;
  config?: SessionConfigBody;
}
