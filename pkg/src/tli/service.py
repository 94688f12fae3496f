"""Live closed-loop sessions over HTTP and WebSocket.

A session wraps one incremental executor: a scene, a task formula, a fitted
policy library, and the learned boundary estimates. Clients create sessions,
send commands (perturb, pause/resume, reset, toggle modulation or cutting),
and read immutable snapshots. A WebSocket connection streams snapshots at the
session's tick rate.

Concurrency model: every mutation of a session happens inside `tick`, which
drains the session's command queue and then advances the simulation by a
fixed batch of integration steps. Commands never touch executor state
directly — they are enqueued and applied at the next tick boundary, so two
sessions fed identical command timelines (by tick index) evolve identically.
"""

from __future__ import annotations

import asyncio
import contextlib
import threading
import uuid
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import InvalidCommand, UnknownAsset, UnknownSession, WorkbenchError
from .executor import Executor, ExecutorConfig
from .ltl import Gr1Spec, parse_spec, synthesize
from .modulation import modulate, modulate_batch
from .pipeline import PolicyLibrary, build_policy_library
from .sim import (
    Scene,
    builtin_scene,
    builtin_scene_names,
    builtin_spec_names,
    builtin_spec_text,
    demos_for_scene,
    interior_point,
    load_scene,
    scene_to_dict,
    sense,
)

VARIANTS: tuple[str, ...] = ("bc", "bc+mod", "ds", "ds+mod")

CommandName = Literal[
    "Perturb", "Pause", "Resume", "Reset", "ToggleModulation", "ToggleCutting"
]


# ---------------------------------------------------------------------------
# asset source


@dataclass(frozen=True)
class AssetStore:
    """Named scenes and task formulas, from a directory and/or the built-ins.

    A directory must hold `scenes/*.json` and `specs/*.ltl`. Directory
    entries shadow built-in ones with the same name; listings are the union.
    """

    root: Optional[Path] = None

    def _dir_names(self, sub: str, suffix: str) -> list[str]:
        if self.root is None:
            return []
        d = Path(self.root) / sub
        if not d.is_dir():
            return []
        return [p.name[: -len(suffix)] for p in d.iterdir() if p.name.endswith(suffix)]

    def scene_names(self) -> list[str]:
        return sorted(set(builtin_scene_names()) | set(self._dir_names("scenes", ".json")))

    def spec_names(self) -> list[str]:
        return sorted(set(builtin_spec_names()) | set(self._dir_names("specs", ".ltl")))

    def scene(self, name: str) -> Scene:
        if self.root is not None:
            p = Path(self.root) / "scenes" / f"{name}.json"
            if p.is_file():
                return load_scene(str(p))
        return builtin_scene(name)  # raises UnknownAsset

    def spec_text(self, name: str) -> str:
        if self.root is not None:
            p = Path(self.root) / "specs" / f"{name}.ltl"
            if p.is_file():
                return p.read_text()
        return builtin_spec_text(name)  # raises UnknownAsset


# ---------------------------------------------------------------------------
# request / response schemas


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SessionConfig(_Strict):
    seed: int = 0
    tick_rate: float = Field(default=30.0, gt=0.0, le=1000.0)
    steps_per_tick: Optional[int] = Field(default=None, ge=1, le=10_000)
    dt: float = Field(default=0.02, gt=0.0)
    window: int = Field(default=200, ge=1, le=100_000)
    grid_size: int = Field(default=12, ge=2, le=64)
    loop_budget: int = Field(default=50, ge=0)
    max_steps: int = Field(default=20_000, ge=1)
    goal_visits: int = Field(default=1, ge=1)
    cutting: bool = True
    demo_count: int = Field(default=5, ge=1, le=50)
    demo_seed: int = 0

    def batch(self) -> int:
        """Integration steps per tick: real-time unless overridden."""
        if self.steps_per_tick is not None:
            return self.steps_per_tick
        return max(1, round(1.0 / (self.tick_rate * self.dt)))


class CreateSessionRequest(_Strict):
    scene: str
    spec: str
    variant: Literal["bc", "bc+mod", "ds", "ds+mod"] = "ds+mod"
    config: SessionConfig = Field(default_factory=SessionConfig)


class PerturbArgs(_Strict):
    """Exactly one of: a relative displacement, an absolute point, a mode name."""

    vector: Optional[list[float]] = Field(default=None, min_length=2, max_length=2)
    point: Optional[list[float]] = Field(default=None, min_length=2, max_length=2)
    mode: Optional[str] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "PerturbArgs":
        given = sum(v is not None for v in (self.vector, self.point, self.mode))
        if given != 1:
            raise ValueError("give exactly one of vector, point, or mode")
        return self


class ResetArgs(_Strict):
    seed: Optional[int] = None
    forget: bool = False


class EmptyArgs(_Strict):
    pass


_ARG_MODELS: dict[str, type[_Strict]] = {
    "Perturb": PerturbArgs,
    "Reset": ResetArgs,
    "Pause": EmptyArgs,
    "Resume": EmptyArgs,
    "ToggleModulation": EmptyArgs,
    "ToggleCutting": EmptyArgs,
}


class CommandRequest(_Strict):
    cmd: CommandName
    args: dict = Field(default_factory=dict)


class TickRequest(_Strict):
    count: int = Field(default=1, ge=1, le=100_000)


class WsCommand(_Strict):
    type: Literal["command"]
    id: Optional[Union[str, int]] = None
    cmd: CommandName
    args: dict = Field(default_factory=dict)


class AckView(_Strict):
    status: Literal["accepted"] = "accepted"
    cmd: str
    applies_at_tick: int


class AssetListing(_Strict):
    scenes: list[str]
    specs: list[str]
    variants: list[str]


class RegionView(_Strict):
    name: str
    vertices: list[list[float]]
    valuation: list[int]


class AliasView(_Strict):
    mode: str
    shares_policy_of: str


class SceneView(_Strict):
    name: str
    n: int
    workspace: list[list[float]]
    aps_env: list[str]
    regions: list[RegionView]
    background_valuation: list[int]
    aliases: list[AliasView]


class SpecTextView(_Strict):
    name: str
    text: str


class AutomatonView(_Strict):
    nodes: list[str]
    edges: list[list[str]]
    goals: list[str]
    active: str
    strategy: dict[str, str]


class CutView(_Strict):
    mode: str
    target: Optional[str]
    normal: list[float]
    point: list[float]
    perturbed: bool
    v_raw: Optional[list[float]]
    v_mod: Optional[list[float]]


class GridView(_Strict):
    size: int
    xs: list[float]
    ys: list[float]
    raw: list[list[float]]  # row-major over ys × xs, one [vx, vy] per cell
    modulated: list[list[float]]


class SnapshotView(_Strict):
    scene: str
    spec: str
    variant: str
    tick: int
    steps: int
    paused: bool
    verdict: str  # "Running" until the run resolves
    x: list[float]
    alpha: list[int]
    mode: str
    attractor: Optional[list[float]]
    commanded: Optional[list[str]]
    automaton: AutomatonView
    cuts: list[CutView]
    cut_count: int
    trajectory: list[list[float]]
    grid: Optional[GridView]
    replans: int
    redundant_failures: int
    skipped_cuts: int
    goal_visits_seen: int
    modulation_enabled: bool
    cutting_enabled: bool


class CreateSessionResponse(_Strict):
    id: str
    snapshot: SnapshotView


class CloseSessionResponse(_Strict):
    id: str
    closed: bool = True


# ---------------------------------------------------------------------------
# sessions


@dataclass
class Session:
    id: str
    scene_name: str
    spec_name: str
    variant: str
    config: SessionConfig
    scene: Scene
    pristine_spec: Gr1Spec
    library: PolicyLibrary
    executor: Executor
    paused: bool = True
    tick_index: int = 0
    queue: deque = field(default_factory=deque)
    lock: threading.RLock = field(default_factory=threading.RLock)


def _initial_mode_name(spec: Gr1Spec) -> str:
    for f in spec.sys_init:
        if hasattr(f, "name"):
            return f.name
    return synthesize(spec).modes[0].name


def _sample_start(
    scene: Scene, spec: Gr1Spec, library: PolicyLibrary, seed: int
) -> np.ndarray:
    name = _initial_mode_name(spec)
    region = scene.region_named(library.base_of(name))
    rng = np.random.default_rng(seed)
    return interior_point(region, rng)


class SessionManager:
    """Owns every live session and is the only writer of their state."""

    def __init__(self, assets: Optional[AssetStore] = None):
        self.assets = assets or AssetStore()
        self.sessions: dict[str, Session] = {}
        self._libraries: dict[tuple, PolicyLibrary] = {}
        self._lock = threading.Lock()

    # -- lookup -------------------------------------------------------------

    def session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no session with id {session_id!r}") from None

    def _library(self, scene_name: str, scene: Scene, kind: str, cfg: SessionConfig):
        key = (scene_name, kind, cfg.demo_count, cfg.demo_seed)
        with self._lock:
            if key not in self._libraries:
                demos = demos_for_scene(
                    scene, scene_name, count=cfg.demo_count, seed=cfg.demo_seed
                )
                self._libraries[key] = build_policy_library(scene, demos, kind=kind)
            return self._libraries[key]

    # -- lifecycle ------------------------------------------------------------

    def create_session(self, request: CreateSessionRequest) -> Session:
        scene = self.assets.scene(request.scene)
        spec = parse_spec(self.assets.spec_text(request.spec))
        kind = "bc" if request.variant.startswith("bc") else "ds"
        library = self._library(request.scene, scene, kind, request.config)
        cfg = request.config
        exe_cfg = ExecutorConfig(
            dt=cfg.dt,
            max_steps=cfg.max_steps,
            loop_budget=cfg.loop_budget,
            modulation_enabled=request.variant.endswith("+mod"),
            online_cutting_enabled=cfg.cutting,
            goal_visits=cfg.goal_visits,
            seed=cfg.seed,
        )
        x0 = _sample_start(scene, spec, library, cfg.seed)
        executor = Executor(scene, spec, library, config=exe_cfg, x0=x0)
        session = Session(
            id=uuid.uuid4().hex[:12],
            scene_name=request.scene,
            spec_name=request.spec,
            variant=request.variant,
            config=cfg,
            scene=scene,
            pristine_spec=spec,
            library=library,
            executor=executor,
        )
        self.sessions[session.id] = session
        return session

    def close_session(self, session_id: str) -> None:
        self.session(session_id)
        del self.sessions[session_id]

    # -- commands -------------------------------------------------------------

    def command(self, session_id: str, request: CommandRequest) -> AckView:
        session = self.session(session_id)
        try:
            args = _ARG_MODELS[request.cmd].model_validate(request.args)
        except ValidationError as e:
            raise InvalidCommand(
                f"bad arguments for {request.cmd}: {e.errors()[0]['msg']}"
            ) from None
        if isinstance(args, PerturbArgs) and args.mode is not None:
            base = session.library.base_of(args.mode)
            if not any(r.name == base for r in session.scene.regions):
                raise InvalidCommand(f"no mode region named {args.mode!r}")
        with session.lock:
            session.queue.append((request.cmd, args))
            return AckView(cmd=request.cmd, applies_at_tick=session.tick_index + 1)

    def _apply(self, session: Session, cmd: str, args: _Strict) -> None:
        ex = session.executor
        if cmd == "Pause":
            session.paused = True
        elif cmd == "Resume":
            session.paused = False
        elif cmd == "ToggleModulation":
            ex.config.modulation_enabled = not ex.config.modulation_enabled
        elif cmd == "ToggleCutting":
            ex.config.online_cutting_enabled = not ex.config.online_cutting_enabled
        elif cmd == "Perturb":
            assert isinstance(args, PerturbArgs)
            if args.vector is not None:
                ex.displace(vector=np.asarray(args.vector, dtype=float))
            elif args.point is not None:
                ex.displace(point=np.asarray(args.point, dtype=float))
            else:
                base = session.library.base_of(args.mode)
                ex.displace(point=session.scene.region_named(base).centroid)
        elif cmd == "Reset":
            assert isinstance(args, ResetArgs)
            self._reset(session, args)

    def _reset(self, session: Session, args: ResetArgs) -> None:
        old = session.executor
        seed = args.seed if args.seed is not None else old.config.seed
        estimates = None if args.forget else dict(old.estimates)
        x0 = _sample_start(session.scene, session.pristine_spec, session.library, seed)
        session.executor = Executor(
            session.scene,
            session.pristine_spec,
            session.library,
            config=replace(old.config, seed=seed),
            x0=x0,
            estimates=estimates,
        )
        session.tick_index = 0
        session.paused = True

    # -- time -----------------------------------------------------------------

    def tick(self, session_id: str, count: int = 1) -> SnapshotView:
        """Advance the session: drain queued commands, then integrate one batch.

        All state changes happen here, so identical command timelines (by
        tick index) yield identical snapshots.
        """
        session = self.session(session_id)
        with session.lock:
            for _ in range(count):
                while session.queue:
                    cmd, args = session.queue.popleft()
                    self._apply(session, cmd, args)
                if not session.paused and session.executor.verdict is None:
                    for _ in range(session.config.batch()):
                        session.executor.step()
                        if session.executor.verdict is not None:
                            break
                session.tick_index += 1
            return self.snapshot(session_id)

    # -- snapshots ------------------------------------------------------------

    def snapshot(self, session_id: str) -> SnapshotView:
        session = self.session(session_id)
        with session.lock:
            return _build_snapshot(session)


def _cut_views(session: Session) -> tuple[list[CutView], int]:
    views: list[CutView] = []
    total = 0
    ex = session.executor
    for key in sorted(ex.estimates, key=lambda k: (k[0], k[1] or "")):
        estimate = ex.estimates[key]
        total += estimate.cut_count
        policy = session.library.policies.get(key)
        for cut in estimate.cuts:
            v_raw = policy.velocity(cut.point) if policy is not None else None
            v_mod = (
                modulate(estimate, cut.point, v_raw) if v_raw is not None else None
            )
            views.append(
                CutView(
                    mode=key[0],
                    target=key[1],
                    normal=[float(v) for v in cut.normal],
                    point=[float(v) for v in cut.point],
                    perturbed=cut.perturbed,
                    v_raw=None if v_raw is None else [float(v) for v in v_raw],
                    v_mod=None if v_mod is None else [float(v) for v in v_mod],
                )
            )
    return views, total


def _grid_view(session: Session) -> Optional[GridView]:
    ex = session.executor
    if ex.policy is None:
        return None
    g = session.config.grid_size
    ws = session.scene.workspace
    xs = np.linspace(ws[0, 0], ws[0, 1], g)
    ys = np.linspace(ws[1, 0], ws[1, 1], g)
    pts = np.stack(np.meshgrid(xs, ys, indexing="xy"), axis=-1).reshape(-1, 2)
    raw = ex.policy.velocity_batch(pts)
    estimate = ex.estimate
    mod = raw if estimate is None else modulate_batch(estimate, pts, raw)
    return GridView(
        size=g,
        xs=[float(v) for v in xs],
        ys=[float(v) for v in ys],
        raw=[[float(a), float(b)] for a, b in raw],
        modulated=[[float(a), float(b)] for a, b in mod],
    )


def _build_snapshot(session: Session) -> SnapshotView:
    ex = session.executor
    alpha = sense(session.scene, ex.x)
    keep = session.config.window - 1
    history = [s.x for s in ex.trace.steps[-keep:]] if keep > 0 else []
    trajectory = [[float(p[0]), float(p[1])] for p in history]
    trajectory.append([float(ex.x[0]), float(ex.x[1])])
    automaton = ex.automaton
    cuts, cut_count = _cut_views(session)
    return SnapshotView(
        scene=session.scene_name,
        spec=session.spec_name,
        variant=session.variant,
        tick=session.tick_index,
        steps=ex.steps_taken,
        paused=session.paused,
        verdict=ex.verdict.value if ex.verdict is not None else "Running",
        x=[float(v) for v in ex.x],
        alpha=[int(b) for b in alpha],
        mode=ex.current.name,
        attractor=(
            None if ex.policy is None else [float(v) for v in ex.policy.x_star]
        ),
        commanded=(
            None
            if ex.commanded is None
            else [ex.current.name, ex.commanded.name]
        ),
        automaton=AutomatonView(
            nodes=[m.name for m in sorted(automaton.modes, key=lambda m: m.id)],
            edges=sorted([i.name, j.name] for i, j in automaton.edges),
            goals=sorted(m.name for m in automaton.goal_modes),
            active=ex.current.name,
            strategy={i.name: j.name for i, j in automaton.strategy},
        ),
        cuts=cuts,
        cut_count=cut_count,
        trajectory=trajectory,
        grid=_grid_view(session),
        replans=ex.replans,
        redundant_failures=ex.redundant_failures,
        skipped_cuts=ex.skipped_cuts,
        goal_visits_seen=ex.goal_visits_seen,
        modulation_enabled=ex.config.modulation_enabled,
        cutting_enabled=ex.config.online_cutting_enabled,
    )


# ---------------------------------------------------------------------------
# HTTP + WebSocket wiring


def build_app(
    assets_dir: Optional[Union[str, Path]] = None,
    static_dir: Optional[Union[str, Path]] = None,
):
    """FastAPI app exposing asset listing, session CRUD, and snapshot streams."""
    store = AssetStore(root=Path(assets_dir) if assets_dir else None)
    manager = SessionManager(store)
    app = FastAPI(title="mode workbench", version="1.0")
    app.state.manager = manager

    @app.exception_handler(UnknownAsset)
    async def _unknown_asset(_, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(UnknownSession)
    async def _unknown_session(_, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(InvalidCommand)
    async def _invalid_command(_, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(WorkbenchError)
    async def _workbench_error(_, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/assets", response_model=AssetListing)
    def list_assets():
        return AssetListing(
            scenes=store.scene_names(),
            specs=store.spec_names(),
            variants=list(VARIANTS),
        )

    @app.get("/assets/scenes/{name}", response_model=SceneView)
    def get_scene(name: str):
        payload = scene_to_dict(store.scene(name))
        return SceneView(name=name, **payload)

    @app.get("/assets/specs/{name}", response_model=SpecTextView)
    def get_spec(name: str):
        return SpecTextView(name=name, text=store.spec_text(name))

    @app.post("/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(request: CreateSessionRequest):
        session = manager.create_session(request)
        return CreateSessionResponse(
            id=session.id, snapshot=manager.snapshot(session.id)
        )

    @app.get("/sessions/{session_id}/snapshot", response_model=SnapshotView)
    def get_snapshot(session_id: str):
        return manager.snapshot(session_id)

    @app.post("/sessions/{session_id}/command", response_model=AckView)
    def post_command(session_id: str, request: CommandRequest):
        return manager.command(session_id, request)

    @app.post("/sessions/{session_id}/tick", response_model=SnapshotView)
    def post_tick(session_id: str, request: Optional[TickRequest] = None):
        count = request.count if request is not None else 1
        return manager.tick(session_id, count=count)

    @app.delete("/sessions/{session_id}", response_model=CloseSessionResponse)
    def delete_session(session_id: str):
        manager.close_session(session_id)
        return CloseSessionResponse(id=session_id)

    @app.websocket("/sessions/{session_id}/ws")
    async def session_ws(websocket: WebSocket, session_id: str):
        await websocket.accept()
        seq = 0

        async def send(kind: str, payload: dict) -> None:
            nonlocal seq
            await websocket.send_json({"type": kind, "seq": seq, "payload": payload})
            seq += 1

        try:
            session = manager.session(session_id)
        except UnknownSession as e:
            await send("error", {"message": str(e)})
            await websocket.close(code=4404)
            return
        period = 1.0 / session.config.tick_rate
        with contextlib.suppress(WebSocketDisconnect, RuntimeError):
            await send("snapshot", manager.snapshot(session_id).model_dump())
            loop = asyncio.get_event_loop()
            deadline = loop.time() + period
            while True:
                timeout = max(0.0, deadline - loop.time())
                try:
                    raw = await asyncio.wait_for(
                        websocket.receive_text(), timeout=timeout
                    )
                except asyncio.TimeoutError:
                    await send("snapshot", manager.tick(session_id).model_dump())
                    deadline += period
                    continue
                try:
                    msg = WsCommand.model_validate_json(raw)
                    ack = manager.command(
                        session_id, CommandRequest(cmd=msg.cmd, args=msg.args)
                    )
                    await send("ack", {"id": msg.id, **ack.model_dump()})
                except (ValidationError, InvalidCommand) as e:
                    await send("error", {"message": str(e)})

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(
    host: str = "127.0.0.1",
    port: int = 8000,
    assets_dir: Optional[str] = None,
    static_dir: Optional[str] = None,
):
    """Run the service under uvicorn until interrupted."""
    import uvicorn

    uvicorn.run(build_app(assets_dir, static_dir), host=host, port=port)
