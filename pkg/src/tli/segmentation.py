"""Sensor-driven demonstration segmentation and attractor extraction.

Demonstrations are split into contiguous runs of constant sensor valuation.
Each run becomes a segment labeled with its mode and the mode that follows.
Attractors are the mean final states of the segments sharing a
(mode, next mode) key, optionally nudged just past the guard surface so a
simulated sensor is guaranteed to flip when the attractor is reached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import BitVector, Demonstration, ModeId, label_mode
from .sim import Scene

TransitionKey = tuple[ModeId, Optional[ModeId]]


@dataclass(frozen=True)
class Segment:
    mode: ModeId
    next_mode: Optional[ModeId]  # None marks the end of a demonstration
    samples: tuple
    demo_index: int
    start: int
    stop: int  # exclusive

    def __post_init__(self):
        if not self.samples:
            raise ValueError("segment must contain at least one sample")
        alphas = {s[2] for s in self.samples}
        if len(alphas) != 1:
            raise ValueError("segment samples must share one sensor valuation")

    @property
    def last_state(self) -> np.ndarray:
        return np.asarray(self.samples[-1][0], dtype=float)

    @property
    def last_velocity(self) -> np.ndarray:
        return np.asarray(self.samples[-1][1], dtype=float)

    def positions(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    def velocities(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


def segment(
    demos: Sequence[Demonstration],
    label_map: Sequence[tuple[BitVector, ModeId]],
) -> list[Segment]:
    """Split demos into maximal runs of constant sensor valuation."""
    out: list[Segment] = []
    for d, demo in enumerate(demos):
        labels = [label_mode(s[2], label_map) for s in demo.samples]
        start = 0
        for i in range(1, len(labels) + 1):
            if i == len(labels) or labels[i] != labels[start]:
                nxt = labels[i] if i < len(labels) else None
                out.append(
                    Segment(
                        mode=labels[start],
                        next_mode=nxt,
                        samples=tuple(demo.samples[start:i]),
                        demo_index=d,
                        start=start,
                        stop=i,
                    )
                )
                start = i
    return out


@dataclass(frozen=True)
class AttractorSet:
    """Attractors keyed by (mode, next mode); next mode None = demo end."""

    attractors: tuple[tuple[TransitionKey, np.ndarray], ...]
    dispersion: tuple[tuple[TransitionKey, float], ...] = ()
    flagged: tuple[TransitionKey, ...] = ()

    def as_dict(self) -> dict[TransitionKey, np.ndarray]:
        return {k: v.copy() for k, v in self.attractors}

    def get(self, key: TransitionKey) -> np.ndarray:
        for k, v in self.attractors:
            if k == key:
                return v.copy()
        raise KeyError(key)

    def keys(self) -> list[TransitionKey]:
        return [k for k, _ in self.attractors]

    def with_attractor(self, key: TransitionKey, value: np.ndarray) -> "AttractorSet":
        items = tuple(
            (k, np.asarray(value, dtype=float) if k == key else v)
            for k, v in self.attractors
        )
        return AttractorSet(items, self.dispersion, self.flagged)


def attractors(
    segments: Sequence[Segment],
    dispersion_threshold: float = 0.1,
) -> AttractorSet:
    """Mean final state per (mode, next mode) key, in first-seen order.

    Keys whose contributing final states scatter beyond dispersion_threshold
    (max distance from the mean) are flagged for diagnostics.
    """
    if not segments:
        raise ValueError("segments must be nonempty")
    order: list[TransitionKey] = []
    groups: dict[TransitionKey, list[np.ndarray]] = {}
    for seg in segments:
        key = (seg.mode, seg.next_mode)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(seg.last_state)
    items = []
    disp = []
    flagged = []
    for key in order:
        pts = np.array(groups[key])
        mean = pts.mean(axis=0)
        spread = float(np.max(np.linalg.norm(pts - mean, axis=1))) if len(pts) > 1 else 0.0
        items.append((key, mean))
        disp.append((key, spread))
        if spread > dispersion_threshold:
            flagged.append(key)
    return AttractorSet(tuple(items), tuple(disp), tuple(flagged))


def mean_exit_velocity(segments: Sequence[Segment], key: TransitionKey) -> np.ndarray:
    vels = [s.last_velocity for s in segments if (s.mode, s.next_mode) == key]
    if not vels:
        raise KeyError(key)
    return np.mean(np.array(vels), axis=0)


def _cross_into(
    scene: Scene,
    x: np.ndarray,
    direction: np.ndarray,
    current_idx: int,
    max_travel: float,
) -> Optional[float]:
    """Distance along direction at which the region index first changes."""
    norm = float(np.linalg.norm(direction))
    if norm < 1e-12:
        return None
    d = direction / norm
    steps = 400
    ts = np.linspace(0.0, max_travel, steps + 1)[1:]
    pts = x[None, :] + ts[:, None] * d[None, :]
    idxs = scene.region_indexes(pts)
    changed = np.nonzero(idxs != current_idx)[0]
    if len(changed) == 0:
        return None
    hi = ts[changed[0]]
    lo = ts[changed[0]] - (ts[1] - ts[0])
    # bisect to the guard crossing
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if scene.region_index(x + mid * d) == current_idx:
            lo = mid
        else:
            hi = mid
    return hi


def place_attractors(
    aset: AttractorSet,
    segments: Sequence[Segment],
    scene: Scene,
    eps_attr: float = 1e-3,
) -> AttractorSet:
    """Nudge transition attractors just past their guard surfaces.

    Each (mode, next) attractor is pushed eps_attr beyond the point where the
    scene's sensor flips, along the mean exit velocity (falling back to the
    direction toward the next region's centroid). The nudge is kept only if
    the displaced point actually reads as the next mode's region; otherwise
    the raw mean is retained. End-of-demo attractors are never moved.
    """
    out = aset
    for key in aset.keys():
        mode, nxt = key
        if nxt is None:
            continue
        x = aset.get(key)
        try:
            next_region = scene.region_named(nxt.name)
        except KeyError:
            continue
        current_idx = scene.region_index(x)
        next_idx = list(scene.regions).index(next_region)
        if current_idx == next_idx:
            continue  # already reads as the next region
        candidates = [mean_exit_velocity(segments, key)]
        candidates.append(next_region.centroid - x)
        placed = None
        for direction in candidates:
            t = _cross_into(scene, x, direction, current_idx, max_travel=0.25 * scene.span)
            if t is None:
                continue
            d = direction / np.linalg.norm(direction)
            cand = x + (t + eps_attr) * d
            if scene.region_index(cand) == next_idx:
                placed = cand
                break
        if placed is not None:
            out = out.with_attractor(key, placed)
    return out
