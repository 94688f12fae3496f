"""Shared domain types: states, modes, demonstrations, and execution traces.

The robot state is an abstract real vector x of length n; the sensor state is
a bitvector alpha of length m ordered by the scene's declared AP order. The
workspace is the unit box [0, 1]^n unless a scene declares otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import UnknownSensorState

BitVector = tuple[int, ...]


@dataclass(frozen=True)
class ModeId:
    """Index plus short label into a scene's mode table."""

    id: int
    name: str

    def __repr__(self):
        return f"ModeId({self.id}, {self.name!r})"


@dataclass(frozen=True)
class SystemState:
    """Tuple of robot state x and sensor bitvector alpha."""

    x: np.ndarray
    alpha: BitVector

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("x must be a nonempty 1-D vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite in every coordinate")
        if len(self.alpha) < 1:
            raise ValueError("alpha must be nonempty")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "alpha", tuple(int(b) for b in self.alpha))


@dataclass(frozen=True)
class Demonstration:
    """One recorded demonstration: (x, xdot, alpha) samples at period dt."""

    samples: tuple[tuple[np.ndarray, np.ndarray, BitVector], ...]
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if len(self.samples) == 0:
            raise ValueError("demonstration must contain at least one sample")
        n = len(self.samples[0][0])
        m = len(self.samples[0][2])
        clean = []
        for x, xdot, alpha in self.samples:
            x = np.asarray(x, dtype=float)
            xdot = np.asarray(xdot, dtype=float)
            if x.shape != (n,) or xdot.shape != (n,):
                raise ValueError("all samples must share the state dimension")
            if len(alpha) != m:
                raise ValueError("all samples must share the sensor dimension")
            clean.append((x, xdot, tuple(int(b) for b in alpha)))
        object.__setattr__(self, "samples", tuple(clean))

    @property
    def n(self) -> int:
        return len(self.samples[0][0])

    @property
    def m(self) -> int:
        return len(self.samples[0][2])

    def positions(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    def velocities(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])


class TraceEvent(Enum):
    NONE = "None"
    PLANNED_TRANSITION = "PlannedTransition"
    UNEXPECTED_EXIT = "UnexpectedExit"
    PERTURBATION = "Perturbation"


@dataclass(frozen=True)
class TraceStep:
    x: np.ndarray
    alpha: BitVector
    mode: ModeId
    commanded_transition: Optional[tuple[ModeId, ModeId]]
    event: TraceEvent = TraceEvent.NONE


@dataclass
class Trace:
    """Ordered (x, alpha, mode) record of one closed-loop run.

    Consecutive steps keep the same mode unless the later step carries a
    PlannedTransition or UnexpectedExit event.
    """

    steps: list[TraceStep] = field(default_factory=list)

    def append(self, step: TraceStep):
        if self.steps:
            prev = self.steps[-1]
            if prev.mode != step.mode and step.event not in (
                TraceEvent.PLANNED_TRANSITION,
                TraceEvent.UNEXPECTED_EXIT,
            ):
                raise ValueError(
                    "mode changed without a transition event "
                    f"({prev.mode.name} -> {step.mode.name})"
                )
        self.steps.append(step)

    def __len__(self):
        return len(self.steps)

    def mode_sequence(self) -> list[ModeId]:
        """Modes visited, with consecutive duplicates collapsed."""
        seq: list[ModeId] = []
        for step in self.steps:
            if not seq or seq[-1] != step.mode:
                seq.append(step.mode)
        return seq

    def as_pairs(self) -> list[tuple[BitVector, ModeId]]:
        """(alpha, mode) pairs as consumed by trace checking."""
        return [(s.alpha, s.mode) for s in self.steps]


@dataclass(frozen=True)
class GuardRecord:
    """States observed while crossing from one mode's region into another's."""

    from_mode: ModeId
    to_mode: ModeId
    crossing_states: tuple[np.ndarray, ...]


def label_mode(alpha: Sequence[int], scene_label_map: Sequence[tuple[BitVector, ModeId]]) -> ModeId:
    """Map a sensor valuation to the mode it defines.

    scene_label_map lists (valuation, mode) rows in scene order. When several
    modes share a valuation the first row wins; context-aware resolution for
    such scenes lives in the executor.
    """
    key = tuple(int(b) for b in alpha)
    for valuation, mode in scene_label_map:
        if valuation == key:
            return mode
    raise UnknownSensorState(f"no mode defined for sensor valuation {key}")


# ---------------------------------------------------------------------------
# file formats


def save_demonstrations(path: str, demos: Sequence[Demonstration]):
    """Write demos as comma-separated records: t, x_1..x_n, xdot_1..xdot_n, a_1..a_m.

    Demonstrations are separated by a blank line.
    """
    lines: list[str] = []
    for d, demo in enumerate(demos):
        if d > 0:
            lines.append("")
        for i, (x, xdot, alpha) in enumerate(demo.samples):
            t = i * demo.dt
            fields = [repr(float(t))]
            fields += [repr(float(v)) for v in x]
            fields += [repr(float(v)) for v in xdot]
            fields += [str(int(b)) for b in alpha]
            lines.append(",".join(fields))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_demonstrations(path: str, n: int, m: int) -> list[Demonstration]:
    """Read demonstrations written by save_demonstrations.

    n and m give the state and sensor dimensions; the sampling period is
    recovered from the time column.
    """
    blocks: list[list[str]] = [[]]
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                if blocks[-1]:
                    blocks.append([])
                continue
            blocks[-1].append(line)
    if blocks and not blocks[-1]:
        blocks.pop()
    demos = []
    for block in blocks:
        samples = []
        times = []
        for line in block:
            parts = line.split(",")
            if len(parts) != 1 + 2 * n + m:
                raise ValueError(
                    f"expected {1 + 2 * n + m} fields per record, got {len(parts)}"
                )
            times.append(float(parts[0]))
            x = np.array([float(v) for v in parts[1 : 1 + n]])
            xdot = np.array([float(v) for v in parts[1 + n : 1 + 2 * n]])
            alpha = tuple(int(v) for v in parts[1 + 2 * n :])
            samples.append((x, xdot, alpha))
        dt = times[1] - times[0] if len(times) > 1 else 1.0
        demos.append(Demonstration(samples=tuple(samples), dt=dt))
    return demos


def trace_to_json(trace: Trace) -> str:
    """Serialize a trace with its fields verbatim."""
    payload = {
        "steps": [
            {
                "x": [float(v) for v in s.x],
                "alpha": list(s.alpha),
                "mode": {"id": s.mode.id, "name": s.mode.name},
                "commanded_transition": (
                    None
                    if s.commanded_transition is None
                    else [
                        {"id": s.commanded_transition[0].id, "name": s.commanded_transition[0].name},
                        {"id": s.commanded_transition[1].id, "name": s.commanded_transition[1].name},
                    ]
                ),
                "event": s.event.value,
            }
            for s in trace.steps
        ]
    }
    return json.dumps(payload)


def trace_from_json(text: str) -> Trace:
    payload = json.loads(text)
    trace = Trace()
    for raw in payload["steps"]:
        mode = ModeId(raw["mode"]["id"], raw["mode"]["name"])
        ct = raw["commanded_transition"]
        commanded = (
            None
            if ct is None
            else (ModeId(ct[0]["id"], ct[0]["name"]), ModeId(ct[1]["id"], ct[1]["name"]))
        )
        trace.append(
            TraceStep(
                x=np.array(raw["x"], dtype=float),
                alpha=tuple(raw["alpha"]),
                mode=mode,
                commanded_transition=commanded,
                event=TraceEvent(raw["event"]),
            )
        )
    return trace
