"""Closed-loop execution: sense, label, replan, modulate, integrate.

The executor couples a mode automaton with a per-transition policy library.
Each step senses the scene, resolves the discrete mode (context-aware for
scenes where several automaton modes share a sensor valuation), reacts to
unexpected mode exits by learning a boundary cut and replanning, then
integrates the (optionally modulated) policy velocity. Perturbations are
applied between steps, as instantaneous displacements or teleports.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .boundary import (
    BoundaryEstimate,
    gamma,
    protect_point,
    record_failure,
)
from .core import ModeId, Trace, TraceEvent, TraceStep
from .errors import (
    DegenerateCut,
    DegenerateFailure,
    InfeasibleCut,
    RedundantFailure,
    UnknownSensorState,
)
from .ltl import (
    Gr1Spec,
    ModeAutomaton,
    check_trace,
    extend_spec,
    mode_valuations,
    next_mode,
    synthesize,
)
from .modulation import modulate
from .pipeline import PolicyLibrary
from .sim import Perturbation, PerturbationSchedule, Scene, sense


class RunVerdict(Enum):
    SUCCESS = "Success"
    LOOPING = "Looping"
    STEP_BUDGET_EXHAUSTED = "StepBudgetExhausted"
    ASSUMPTION_VIOLATION = "AssumptionViolation"


@dataclass
class ExecutorConfig:
    dt: float = 0.02
    max_steps: int = 20000
    loop_budget: int = 50
    modulation_enabled: bool = True
    online_cutting_enabled: bool = True
    extend_formula: bool = True
    stop_radius: float = 0.02
    speed_cap: float = 50.0
    goal_visits: int = 1  # for specs whose goal mode is not absorbing
    seed: int = 0


@dataclass
class RunOutcome:
    verdict: RunVerdict
    trace: Trace
    steps: int
    replans: int
    cuts_added: dict[str, int]
    redundant_failures: int
    skipped_cuts: int
    estimates: dict[tuple[str, Optional[str]], BoundaryEstimate]
    spec: Gr1Spec
    automaton: ModeAutomaton

    @property
    def discrete_trace(self) -> list:
        return discrete_pairs(self.trace)


def discrete_pairs(trace: Trace) -> list:
    """(alpha, mode) per mode visit: consecutive same-mode steps collapsed."""
    pairs = []
    for step in trace.steps:
        if not pairs or pairs[-1][1] != step.mode:
            pairs.append((step.alpha, step.mode))
    return pairs


class Executor:
    """Incremental closed-loop stepper over one scene and specification."""

    def __init__(
        self,
        scene: Scene,
        spec: Gr1Spec,
        library: PolicyLibrary,
        config: Optional[ExecutorConfig] = None,
        x0: Optional[np.ndarray] = None,
        estimates: Optional[dict] = None,
    ):
        self.scene = scene
        self.spec = spec
        self.config = config or ExecutorConfig()
        self.library = library
        self.automaton = synthesize(spec)
        self.valuations = mode_valuations(spec)
        self.estimates: dict = dict(estimates) if estimates else {}
        self.trace = Trace()
        self.verdict: Optional[RunVerdict] = None
        self.replans = 0
        self.steps_taken = 0
        self.redundant_failures = 0
        self.skipped_cuts = 0
        self.cuts_added: dict[str, int] = {}
        self.goal_visits_seen = 0
        self._queue: dict[int, list[Perturbation]] = {}
        self._perturbed = False

        init_name = self._init_mode_name()
        if x0 is None:
            region = scene.region_named(self.library.base_of(init_name))
            x0 = region.centroid
        self.x = np.asarray(x0, dtype=float)
        alpha = sense(scene, self.x)
        self.current = self._label(alpha, prefer=init_name)
        self.commanded: Optional[ModeId] = next_mode(self.automaton, self.current)
        if self.commanded == self.current:
            self.commanded = None  # already at an absorbing goal
        self.x_entry = self.x.copy()
        self._last_sensed = self.x.copy()
        self._refresh_policy()

    # -- setup helpers ----------------------------------------------------

    def _init_mode_name(self) -> str:
        for f in self.spec.sys_init:
            if hasattr(f, "name"):
                return f.name
        return self.automaton.modes[0].name

    def _label(self, alpha, prefer: Optional[str] = None) -> ModeId:
        candidates = [
            m for m in self.automaton.modes
            if self.valuations[m.name] == tuple(alpha)
        ]
        if not candidates:
            raise UnknownSensorState(
                f"no automaton mode matches valuation {tuple(alpha)}"
            )
        if prefer is not None:
            for m in candidates:
                if m.name == prefer:
                    return m
        current = getattr(self, "current", None)
        if current is not None:
            if current in candidates:
                return current
            if self.commanded is not None and self.commanded in candidates:
                return self.commanded
            reachable = [
                m for m in candidates if (current, m) in self.automaton.edges
            ]
            if reachable:
                return min(reachable, key=lambda m: m.id)
        return min(candidates, key=lambda m: m.id)

    def _refresh_policy(self):
        try:
            self.policy = self.library.resolve(self.current, self.commanded)
        except KeyError:
            self.policy = None  # terminal mode with nothing left to drive
            self.policy_key = None
            return
        self.policy_key = self.policy.key
        if self.policy_key not in self.estimates:
            self.estimates[self.policy_key] = BoundaryEstimate(
                mode=self.current, x_r=self.policy.x_star
            )

    @property
    def estimate(self) -> Optional[BoundaryEstimate]:
        if self.policy_key is None:
            return None
        return self.estimates[self.policy_key]

    # -- perturbations -----------------------------------------------------

    def schedule(self, schedule: PerturbationSchedule):
        for p in schedule.events:
            self._queue.setdefault(p.step, []).append(p)

    def inject(self, perturbation: Perturbation):
        """Queue a perturbation for the end of the current step."""
        self._queue.setdefault(
            max(perturbation.step, self.steps_taken), []
        ).append(perturbation)

    def displace(
        self,
        vector: Optional[np.ndarray] = None,
        point: Optional[np.ndarray] = None,
    ):
        """Move the state out-of-band, as a disturbance between steps.

        Exactly one of `vector` (relative) or `point` (absolute) must be
        given. The move lands immediately — before the next sensing — and
        the next recorded step carries the perturbation flag, so a failure
        it causes is attributed to the disturbance, not the policy.
        """
        if (vector is None) == (point is None):
            raise ValueError("give exactly one of vector or point")
        if vector is not None:
            target = self.x + np.asarray(vector, dtype=float)
        else:
            target = np.asarray(point, dtype=float)
        self.x = self.scene.clip(target)
        self._perturbed = True

    # -- failure bookkeeping ----------------------------------------------

    def _record_cut(self, x_fail: np.ndarray):
        est = self.estimates[self.policy_key]
        try:
            updated = record_failure(
                est,
                x_entry=self.x_entry,
                x_last=self._last_sensed,
                x_fail=x_fail,
                perturbed=self._perturbed,
            )
        except RedundantFailure:
            self.redundant_failures += 1
            return
        except (InfeasibleCut, DegenerateCut, DegenerateFailure):
            self.skipped_cuts += 1
            return
        self.estimates[self.policy_key] = updated
        label = f"{self.policy_key[0]}->{self.policy_key[1]}"
        self.cuts_added[label] = self.cuts_added.get(label, 0) + 1

    def _handle_transition(self, mode: ModeId) -> TraceEvent:
        if self.commanded is not None and mode == self.commanded:
            event = TraceEvent.PLANNED_TRANSITION
        else:
            event = TraceEvent.UNEXPECTED_EXIT
            if self.config.online_cutting_enabled:
                self._record_cut(self.x.copy())
            if (self.current, mode) not in self.automaton.edges:
                if self.config.extend_formula:
                    self.spec = extend_spec(self.spec, [(self.current, mode)])
                    self.automaton = synthesize(self.spec)
            self.replans += 1
            if self.replans > self.config.loop_budget:
                self.verdict = RunVerdict.LOOPING
        self.current = mode
        self.x_entry = self.x.copy()
        if self.current in self.automaton.goal_modes:
            self.goal_visits_seen += 1
            absorbing = (self.current, self.current) in self.automaton.edges
            if not absorbing and self.goal_visits_seen >= self.config.goal_visits:
                self.verdict = self.verdict or RunVerdict.SUCCESS
        self.commanded = next_mode(self.automaton, self.current)
        if self.commanded == self.current:
            self.commanded = None  # absorbing goal: nothing left to command
        self._refresh_policy()
        if (
            self.policy is not None
            and self.config.online_cutting_enabled
            and self.estimate.cuts
            and gamma(self.estimate, self.x) > 1.0
        ):
            # fresh in-mode evidence contradicting the estimate
            self.estimates[self.policy_key] = protect_point(
                self.estimate, self.x
            )
        return event

    # -- stepping -----------------------------------------------------------

    def step(self):
        if self.verdict is not None:
            return
        cfg = self.config
        alpha = sense(self.scene, self.x)
        try:
            mode = self._label(alpha)
        except UnknownSensorState:
            self.verdict = RunVerdict.ASSUMPTION_VIOLATION
            return
        event = TraceEvent.NONE
        if mode != self.current:
            event = self._handle_transition(mode)
        elif self._perturbed:
            event = TraceEvent.PERTURBATION
        self._perturbed = False
        commanded_pair = (
            (self.current, self.commanded) if self.commanded is not None else None
        )
        self.trace.append(
            TraceStep(
                x=self.x.copy(),
                alpha=tuple(alpha),
                mode=self.current,
                commanded_transition=commanded_pair,
                event=event,
            )
        )
        self._last_sensed = self.x.copy()
        if self.verdict is not None:
            return
        if self.current in self.automaton.goal_modes and (
            (self.current, self.current) in self.automaton.edges
        ):
            if len(self.automaton.modes) > 1:
                self.verdict = RunVerdict.SUCCESS
                return
            # single-mode task: stop inside the attractor ball
            if self.policy is not None and (
                np.linalg.norm(self.x - self.policy.x_star) <= cfg.stop_radius
            ):
                self.verdict = RunVerdict.SUCCESS
                return
        if self.steps_taken >= cfg.max_steps:
            self.verdict = RunVerdict.STEP_BUDGET_EXHAUSTED
            return
        if self.policy is None:
            self.verdict = RunVerdict.STEP_BUDGET_EXHAUSTED
            return
        v = self.policy.velocity(self.x)
        if cfg.modulation_enabled:
            v = modulate(self.estimate, self.x, v)
        speed = float(np.linalg.norm(v))
        if speed > cfg.speed_cap:
            v = v * (cfg.speed_cap / speed)
        self.x = self.scene.clip(self.x + cfg.dt * v)
        for p in self._queue.pop(self.steps_taken, []):
            self.x = self.scene.clip(p.apply(self.x))
            self._perturbed = True
        self.steps_taken += 1

    def run(
        self, schedule: Optional[PerturbationSchedule] = None
    ) -> RunOutcome:
        if schedule is not None:
            self.schedule(schedule)
        while self.verdict is None:
            self.step()
        return RunOutcome(
            verdict=self.verdict,
            trace=self.trace,
            steps=self.steps_taken,
            replans=self.replans,
            cuts_added=dict(self.cuts_added),
            redundant_failures=self.redundant_failures,
            skipped_cuts=self.skipped_cuts,
            estimates=dict(self.estimates),
            spec=self.spec,
            automaton=self.automaton,
        )


def run_task(
    scene: Scene,
    spec: Gr1Spec,
    library: PolicyLibrary,
    config: Optional[ExecutorConfig] = None,
    x0: Optional[np.ndarray] = None,
    schedule: Optional[PerturbationSchedule] = None,
    estimates: Optional[dict] = None,
) -> RunOutcome:
    """One closed-loop run from construction to verdict."""
    executor = Executor(
        scene, spec, library, config=config, x0=x0, estimates=estimates
    )
    return executor.run(schedule)


def trace_satisfies(spec: Gr1Spec, trace: Trace) -> bool:
    """Check the collapsed mode-visit sequence against the specification."""
    return check_trace(spec, discrete_pairs(trace)).satisfied
