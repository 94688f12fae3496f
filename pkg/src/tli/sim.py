"""Planar polytope environments, sensing, and synthetic demonstrations.

A scene is a set of disjoint convex regions inside a rectangular workspace.
Each region carries a sensor valuation; everything else reads as the
background valuation. Demonstrations are generated by integrating a guide
field through a requested region sequence with smooth low-amplitude noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .core import BitVector, Demonstration
from .errors import GenerationFailed, UnknownAsset

_EDGE_TOL = 1e-12


def polygon_area(vertices: np.ndarray) -> float:
    """Signed area (positive for counterclockwise vertex order)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_centroid(vertices: np.ndarray) -> np.ndarray:
    x, y = vertices[:, 0], vertices[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * np.sum(cross)
    cx = np.sum((x + np.roll(x, -1)) * cross) / (6.0 * area)
    cy = np.sum((y + np.roll(y, -1)) * cross) / (6.0 * area)
    return np.array([cx, cy])


def point_in_convex(vertices: np.ndarray, x: np.ndarray, tol: float = _EDGE_TOL) -> bool:
    """Half-plane membership test for a counterclockwise convex polygon.

    Points exactly on an edge count as inside.
    """
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    edge = b - a
    rel = x[None, :] - a
    cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
    return bool(np.all(cross >= -tol))


def points_in_convex(vertices: np.ndarray, pts: np.ndarray, tol: float = _EDGE_TOL) -> np.ndarray:
    """Vectorized membership test: pts has shape (N, 2)."""
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    edge = b - a
    rel = pts[:, None, :] - a[None, :, :]
    cross = edge[None, :, 0] * rel[:, :, 1] - edge[None, :, 1] * rel[:, :, 0]
    return np.all(cross >= -tol, axis=1)


def _is_convex_ccw(vertices: np.ndarray) -> bool:
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    c = np.roll(vertices, -2, axis=0)
    e1 = b - a
    e2 = c - b
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return bool(np.all(cross >= -1e-12)) and polygon_area(vertices) > 0


@dataclass(frozen=True)
class Region:
    name: str
    vertices: np.ndarray
    valuation: BitVector

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("region vertices must be a (k, 2) array, k >= 3")
        if not _is_convex_ccw(v):
            raise ValueError(f"region {self.name!r} must be convex and counterclockwise")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "valuation", tuple(int(b) for b in self.valuation))

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.vertices)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    def contains(self, x: np.ndarray) -> bool:
        return point_in_convex(self.vertices, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Scene:
    """Immutable planar task environment."""

    n: int
    workspace: np.ndarray  # shape (2, 2): [[xmin, xmax], [ymin, ymax]]
    aps_env: tuple[str, ...]
    regions: tuple[Region, ...]
    background_valuation: BitVector
    aliases: tuple[tuple[str, str], ...] = ()  # (mode name, region it shares a policy with)

    def __post_init__(self):
        ws = np.asarray(self.workspace, dtype=float)
        if ws.shape != (2, 2) or np.any(ws[:, 1] <= ws[:, 0]):
            raise ValueError("workspace must be [[xmin, xmax], [ymin, ymax]]")
        object.__setattr__(self, "workspace", ws)
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(
            self, "background_valuation", tuple(int(b) for b in self.background_valuation)
        )
        object.__setattr__(self, "aliases", tuple(tuple(a) for a in self.aliases))
        m = len(self.aps_env)
        seen = set()
        for r in self.regions:
            if len(r.valuation) != m:
                raise ValueError(f"region {r.name!r} valuation width mismatch")
            if r.valuation in seen:
                raise ValueError(f"duplicate region valuation {r.valuation}")
            seen.add(r.valuation)
        if len(self.background_valuation) != m:
            raise ValueError("background valuation width mismatch")

    def region_named(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(f"no region named {name!r}")

    def region_index(self, x: np.ndarray) -> int:
        """Index of the first region containing x, or -1 for background."""
        x = np.asarray(x, dtype=float)
        for i, r in enumerate(self.regions):
            if point_in_convex(r.vertices, x):
                return i
        return -1

    def region_indexes(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized region_index over pts of shape (N, 2)."""
        pts = np.asarray(pts, dtype=float)
        out = np.full(len(pts), -1, dtype=int)
        unassigned = np.ones(len(pts), dtype=bool)
        for i, r in enumerate(self.regions):
            if not np.any(unassigned):
                break
            hit = unassigned & points_in_convex(r.vertices, pts)
            out[hit] = i
            unassigned &= ~hit
        return out

    def alias_map(self) -> dict[str, str]:
        return {m: r for m, r in self.aliases}

    @property
    def span(self) -> float:
        """Largest workspace side length, the scale for noise magnitudes."""
        return float(np.max(self.workspace[:, 1] - self.workspace[:, 0]))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.workspace[:, 0], self.workspace[:, 1])


def sense(scene: Scene, x: np.ndarray) -> BitVector:
    """Sensor valuation at x; boundary ties go to the lowest region index."""
    i = scene.region_index(x)
    if i < 0:
        return scene.background_valuation
    return scene.regions[i].valuation


def sense_batch(scene: Scene, pts: np.ndarray) -> list[BitVector]:
    idx = scene.region_indexes(pts)
    vals = [r.valuation for r in scene.regions]
    return [vals[i] if i >= 0 else scene.background_valuation for i in idx]


# ---------------------------------------------------------------------------
# scene serialization


def scene_to_dict(scene: Scene) -> dict:
    return {
        "n": scene.n,
        "workspace": scene.workspace.tolist(),
        "aps_env": list(scene.aps_env),
        "regions": [
            {
                "name": r.name,
                "vertices": r.vertices.tolist(),
                "valuation": list(r.valuation),
            }
            for r in scene.regions
        ],
        "background_valuation": list(scene.background_valuation),
        "aliases": [
            {"mode": m, "shares_policy_of": r} for m, r in scene.aliases
        ],
    }


def scene_from_dict(data: dict) -> Scene:
    return Scene(
        n=int(data["n"]),
        workspace=np.asarray(data["workspace"], dtype=float),
        aps_env=tuple(data["aps_env"]),
        regions=tuple(
            Region(
                name=r["name"],
                vertices=np.asarray(r["vertices"], dtype=float),
                valuation=tuple(r["valuation"]),
            )
            for r in data["regions"]
        ),
        background_valuation=tuple(data["background_valuation"]),
        aliases=tuple(
            (a["mode"], a["shares_policy_of"]) for a in data.get("aliases", [])
        ),
    )


def load_scene(path: str) -> Scene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))


def save_scene(path: str, scene: Scene):
    with open(path, "w") as fh:
        json.dump(scene_to_dict(scene), fh, indent=2)
        fh.write("\n")


def builtin_scene_names() -> list[str]:
    root = resources.files("tli").joinpath("assets/scenes")
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def builtin_scene(name: str) -> Scene:
    path = resources.files("tli").joinpath(f"assets/scenes/{name}.json")
    if not path.is_file():
        raise UnknownAsset(f"no scene named {name!r}")
    return scene_from_dict(json.loads(path.read_text()))


def builtin_spec_names() -> list[str]:
    root = resources.files("tli").joinpath("assets/specs")
    return sorted(p.name[: -len(".ltl")] for p in root.iterdir() if p.name.endswith(".ltl"))


def builtin_spec_text(name: str) -> str:
    path = resources.files("tli").joinpath(f"assets/specs/{name}.ltl")
    if not path.is_file():
        raise UnknownAsset(f"no task formula named {name!r}")
    return path.read_text()


# ---------------------------------------------------------------------------
# random convex mode generation


def random_convex_mode(
    seed: int,
    vertex_count: int,
    workspace: Optional[np.ndarray] = None,
    min_area_frac: float = 0.05,
) -> np.ndarray:
    """Random convex polygon sampled on an ellipse, resampled until it fits.

    The result lies inside the workspace and covers at least min_area_frac of
    its area. Vertices come out counterclockwise.
    """
    if vertex_count < 3:
        raise ValueError("vertex_count must be at least 3")
    ws = (
        np.array([[0.0, 1.0], [0.0, 1.0]])
        if workspace is None
        else np.asarray(workspace, dtype=float)
    )
    rng = np.random.default_rng(seed)
    side = ws[:, 1] - ws[:, 0]
    ws_area = float(side[0] * side[1])
    while True:
        center = ws[:, 0] + side * rng.uniform(0.25, 0.75, size=2)
        axes = side * rng.uniform(0.15, 0.4, size=2)
        theta = rng.uniform(0.0, np.pi)
        rot = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=vertex_count))
        if np.min(np.diff(angles)) < 0.15:
            continue
        ring = np.stack([axes[0] * np.cos(angles), axes[1] * np.sin(angles)], axis=1)
        verts = center + ring @ rot.T
        inside = np.all(verts >= ws[:, 0]) and np.all(verts <= ws[:, 1])
        if not inside:
            continue
        if polygon_area(verts) < min_area_frac * ws_area:
            continue
        return verts


def interior_point(region: Region, rng: np.random.Generator, pull: float = 0.5) -> np.ndarray:
    """Random point in the region, blended toward the centroid by pull."""
    lo = region.vertices.min(axis=0)
    hi = region.vertices.max(axis=0)
    c = region.centroid
    for _ in range(256):
        p = rng.uniform(lo, hi)
        p = pull * c + (1.0 - pull) * p
        if region.contains(p):
            return p
    return c


# ---------------------------------------------------------------------------
# demonstration generation


def _collapse(seq: Sequence) -> list:
    out = []
    for item in seq:
        if not out or out[-1] != item:
            out.append(item)
    return out


def generate_demos(
    scene: Scene,
    mode_sequence: Sequence[str],
    count: int,
    seed: int,
    dt: float = 0.02,
    speed: float = 0.5,
    noise_amp: float = 0.015,
    via: Optional[dict[str, np.ndarray]] = None,
    max_retries: int = 60,
    max_steps: int = 6000,
) -> list[Demonstration]:
    """Synthesize demonstrations walking the given region sequence.

    Each demo integrates a guide field: straight runs toward one waypoint per
    region (a blend of the centroid and a random interior point, or a caller
    supplied via-point) with a smooth sinusoidal lateral wobble. Recorded
    velocities are the finite differences actually realized, so a learned
    policy reproduces the demonstrated travel. The sensed valuation sequence
    is validated against the requested walk; bad draws are retried.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    names = list(mode_sequence)
    if not names:
        raise ValueError("mode_sequence must be nonempty")
    regions = [scene.region_named(nm) for nm in names]
    expected = _collapse([r.valuation for r in regions])
    via = via or {}
    rng = np.random.default_rng(seed)
    demos: list[Demonstration] = []
    failures = 0
    while len(demos) < count:
        if failures >= max_retries:
            raise GenerationFailed(
                f"could not realize walk {names} after {max_retries} attempts"
            )
        attempt = _one_demo(
            scene, regions, names, via, rng, dt, speed, noise_amp, max_steps
        )
        if attempt is None:
            failures += 1
            continue
        alphas = [s[2] for s in attempt.samples]
        if _collapse(alphas) != expected:
            failures += 1
            continue
        demos.append(attempt)
    return demos


def _one_demo(scene, regions, names, via, rng, dt, speed, noise_amp, max_steps):
    waypoints = []
    for r in regions:
        if r.name in via:
            waypoints.append(np.asarray(via[r.name], dtype=float))
        else:
            waypoints.append(interior_point(r, rng, pull=0.55))
    x = interior_point(regions[0], rng, pull=0.35)
    freq = rng.uniform(0.5, 1.5)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    pts = [x.copy()]
    j = 0
    switch_radius = 0.04 * scene.span
    stop_radius = 0.008 * scene.span
    t = 0.0
    for _ in range(max_steps):
        target = waypoints[j]
        delta = target - x
        dist = float(np.linalg.norm(delta))
        if j < len(waypoints) - 1 and dist < switch_radius:
            j += 1
            continue
        if j == len(waypoints) - 1 and dist < stop_radius:
            break
        direction = delta / max(dist, 1e-12)
        perp = np.array([-direction[1], direction[0]])
        # taper the wobble near waypoints so switches stay clean
        taper = min(1.0, dist / (4.0 * switch_radius))
        wobble = noise_amp * scene.span * np.sin(2.0 * np.pi * freq * t + phase) * taper
        v = speed * direction + wobble * perp
        step_speed = min(speed, dist / dt)
        v = v / max(np.linalg.norm(v), 1e-12) * step_speed
        x = scene.clip(x + v * dt)
        pts.append(x.copy())
        t += dt
    else:
        return None
    arr = np.array(pts)
    vel = np.zeros_like(arr)
    vel[:-1] = (arr[1:] - arr[:-1]) / dt
    samples = tuple(
        (arr[i], vel[i], sense(scene, arr[i])) for i in range(len(arr))
    )
    return Demonstration(samples=samples, dt=dt)


# waypoints keep guard crossings away from the three-region corners of the
# cooking scene at (0.35, 0.65) and (0.35, 0.35)
_COOKING_VIA = {
    "w": (0.15, 0.75),
    "y": (0.60, 0.85),
    "d": (0.50, 0.50),
    "g": (0.42, 0.08),
}

DEMO_ROUTES: dict[str, tuple[tuple[tuple[str, ...], dict], ...]] = {
    "scooping": ((("a", "b", "c", "d"), {}),),
    # two walks so every transition a strategy can command has data entering
    # the mode the same way the executor will
    "cooking": (
        (("w", "y", "d", "w", "g", "d"), _COOKING_VIA),
        (("w", "y", "d", "w", "y", "d"), _COOKING_VIA),
    ),
}


def demo_route(scene_name: str) -> list[tuple[list[str], dict[str, np.ndarray]]]:
    """Canonical demonstration walks and via-points for a builtin scene."""
    if scene_name not in DEMO_ROUTES:
        raise UnknownAsset(f"no demonstration route for scene {scene_name!r}")
    walks = []
    for sequence, via in DEMO_ROUTES[scene_name]:
        walks.append(
            (
                list(sequence),
                {k: np.asarray(v, dtype=float) for k, v in via.items()},
            )
        )
    return walks


def demos_for_scene(
    scene: Scene, scene_name: str, count: int, seed: int
) -> list[Demonstration]:
    """Generate `count` demonstrations per canonical walk of a builtin scene."""
    demos: list[Demonstration] = []
    for offset, (sequence, via) in enumerate(demo_route(scene_name)):
        demos.extend(
            generate_demos(
                scene, sequence, count=count, seed=seed + offset, via=via
            )
        )
    return demos


def sample_initial_states(
    demos: Sequence[Demonstration],
    noise_pct: float,
    count: int,
    seed: int,
    workspace: Optional[np.ndarray] = None,
) -> list[np.ndarray]:
    """Demo states plus isotropic Gaussian noise scaled by the workspace span."""
    if noise_pct < 0:
        raise ValueError("noise_pct must be nonnegative")
    ws = (
        np.array([[0.0, 1.0], [0.0, 1.0]])
        if workspace is None
        else np.asarray(workspace, dtype=float)
    )
    span = float(np.max(ws[:, 1] - ws[:, 0]))
    rng = np.random.default_rng(seed)
    pool = np.concatenate([d.positions() for d in demos], axis=0)
    out = []
    for _ in range(count):
        base = pool[rng.integers(0, len(pool))]
        x = base + rng.normal(scale=noise_pct * span, size=base.shape)
        out.append(np.clip(x, ws[:, 0], ws[:, 1]))
    return out


# ---------------------------------------------------------------------------
# perturbations


class PerturbationKind(Enum):
    DISPLACE = "Displace"
    TELEPORT = "Teleport"


@dataclass(frozen=True)
class Perturbation:
    step: int
    kind: PerturbationKind
    vector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=float))
        if self.step < 0:
            raise ValueError("step must be nonnegative")

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.kind is PerturbationKind.TELEPORT:
            return self.vector.copy()
        return x + self.vector


@dataclass(frozen=True)
class PerturbationSchedule:
    events: tuple[Perturbation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def at(self, step: int) -> list[Perturbation]:
        return [e for e in self.events if e.step == step]

    @property
    def last_step(self) -> int:
        return max((e.step for e in self.events), default=-1)


def schedule_to_json(schedule: PerturbationSchedule) -> str:
    return json.dumps(
        [
            {"step": e.step, "kind": e.kind.value, "vector": e.vector.tolist()}
            for e in schedule.events
        ]
    )


def schedule_from_json(blob: str) -> PerturbationSchedule:
    data = json.loads(blob)
    return PerturbationSchedule(
        events=tuple(
            Perturbation(
                step=int(e["step"]),
                kind=PerturbationKind(e["kind"]),
                vector=np.asarray(e["vector"], dtype=float),
            )
            for e in data
        )
    )
