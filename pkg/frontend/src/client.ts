/**
 * Stateless service client: thin REST calls plus a WebSocket subscription.
 * Every byte received is validated against the wire schemas before any code
 * touches it, and the per-connection `seq` counter is checked to be gapless
 * so a dropped frame cannot go unnoticed.
 */

import {
  AckView,
  AssetListing,
  CloseSessionResponse,
  type CommandBody,
  type CreateSessionBody,
  CreateSessionResponse,
  ErrorDetail,
  SceneView,
  SnapshotView,
  SpecTextView,
  type WsAckPayload,
  type WsCommand,
  WsEnvelope,
  type WsErrorPayload,
} from "./protocol";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`HTTP ${status}: ${JSON.stringify(detail)}`);
  }
}

export class ProtocolError extends Error {}

type FetchFn = typeof fetch;

async function request<T>(
  fetchFn: FetchFn,
  url: string,
  parse: (body: unknown) => T,
  init?: RequestInit,
): Promise<T> {
  const res = await fetchFn(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body: unknown = await res.json();
  if (!res.ok) {
    throw new ApiError(res.status, ErrorDetail.parse(body).detail);
  }
  return parse(body);
}

export class Api {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  listAssets(): Promise<AssetListing> {
    return request(this.fetchFn, `${this.baseUrl}/assets`, (b) => AssetListing.parse(b));
  }

  scene(name: string): Promise<SceneView> {
    return request(this.fetchFn, `${this.baseUrl}/assets/scenes/${name}`, (b) =>
      SceneView.parse(b),
    );
  }

  specText(name: string): Promise<SpecTextView> {
    return request(this.fetchFn, `${this.baseUrl}/assets/specs/${name}`, (b) =>
      SpecTextView.parse(b),
    );
  }

  createSession(body: CreateSessionBody): Promise<CreateSessionResponse> {
    return request(
      this.fetchFn,
      `${this.baseUrl}/sessions`,
      (b) => CreateSessionResponse.parse(b),
      { method: "POST", body: JSON.stringify(body) },
    );
  }

  snapshot(id: string): Promise<SnapshotView> {
    return request(this.fetchFn, `${this.baseUrl}/sessions/${id}/snapshot`, (b) =>
      SnapshotView.parse(b),
    );
  }

  command(id: string, body: CommandBody): Promise<AckView> {
    return request(
      this.fetchFn,
      `${this.baseUrl}/sessions/${id}/command`,
      (b) => AckView.parse(b),
      { method: "POST", body: JSON.stringify(body) },
    );
  }

  /** Debug/test driver: advance the session clock without a WebSocket. */
  tick(id: string, count = 1): Promise<SnapshotView> {
    return request(
      this.fetchFn,
      `${this.baseUrl}/sessions/${id}/tick`,
      (b) => SnapshotView.parse(b),
      { method: "POST", body: JSON.stringify({ count }) },
    );
  }

  closeSession(id: string): Promise<CloseSessionResponse> {
    return request(
      this.fetchFn,
      `${this.baseUrl}/sessions/${id}`,
      (b) => CloseSessionResponse.parse(b),
      { method: "DELETE" },
    );
  }
}

// ---------------------------------------------------------------------------
// live subscription

/** The slim subset of the WebSocket API the client uses (browser or `ws`). */
export interface WsLike {
  send(data: string): void;
  close(code?: number): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WsFactory = (url: string) => WsLike;

export interface LiveHandlers {
  onSnapshot?: (snap: SnapshotView, seq: number) => void;
  onError?: (err: WsErrorPayload, seq: number) => void;
  onClose?: () => void;
  /** Protocol violations (bad schema, seq gap) — connection is failed. */
  onProtocolError?: (err: ProtocolError) => void;
}

let nextCommandId = 1;

/**
 * One session's push stream. Snapshots arrive at the server's tick rate;
 * commands are acked asynchronously and matched back by their `id`.
 */
export class LiveSession {
  private ws: WsLike;
  private expectedSeq = 0;
  private pending = new Map<
    string | number,
    { resolve: (ack: WsAckPayload) => void; reject: (err: Error) => void }
  >();
  private opened: Promise<void>;

  constructor(
    baseUrl: string,
    readonly sessionId: string,
    private readonly handlers: LiveHandlers,
    wsFactory: WsFactory,
  ) {
    const wsBase = baseUrl.replace(/^http/, "ws");
    this.ws = wsFactory(`${wsBase}/sessions/${sessionId}/ws`);
    this.opened = new Promise((resolve, reject) => {
      this.ws.onopen = () => resolve();
      this.ws.onerror = (ev) => reject(new Error(`websocket error: ${String(ev)}`));
    });
    this.ws.onmessage = (ev) => this.receive(ev.data);
    this.ws.onclose = () => {
      for (const { reject } of this.pending.values()) {
        reject(new Error("connection closed before ack"));
      }
      this.pending.clear();
      handlers.onClose?.();
    };
  }

  ready(): Promise<void> {
    return this.opened;
  }

  private fail(message: string): void {
    const err = new ProtocolError(message);
    this.handlers.onProtocolError?.(err);
    this.ws.close();
  }

  private receive(data: unknown): void {
    const parsed = WsEnvelope.safeParse(JSON.parse(String(data)));
    if (!parsed.success) {
      this.fail(`malformed server message: ${parsed.error.message}`);
      return;
    }
    const env = parsed.data;
    if (env.seq !== this.expectedSeq) {
      this.fail(`sequence gap: expected ${this.expectedSeq}, got ${env.seq}`);
      return;
    }
    this.expectedSeq += 1;
    switch (env.type) {
      case "snapshot":
        this.handlers.onSnapshot?.(env.payload, env.seq);
        break;
      case "ack": {
        const waiter = env.payload.id === null ? undefined : this.pending.get(env.payload.id);
        if (waiter && env.payload.id !== null) {
          this.pending.delete(env.payload.id);
          waiter.resolve(env.payload);
        }
        break;
      }
      case "error":
        this.handlers.onError?.(env.payload, env.seq);
        break;
    }
  }

  /** Send a command; resolves with its ack (correlated by generated id). */
  command(cmd: WsCommand["cmd"], args?: Record<string, unknown>): Promise<WsAckPayload> {
    const id = nextCommandId++;
    const frame: WsCommand = { type: "command", id, cmd, ...(args ? { args } : {}) };
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.ws.send(JSON.stringify(frame));
    });
  }

  close(): void {
    this.ws.close();
  }
}
