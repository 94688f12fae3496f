"""Closed-loop executor: policy library resolution, nominal runs, reactions
to perturbations, formula extension, and loop detection."""

from __future__ import annotations

import numpy as np
import pytest

from tli.boundary import gamma
from tli.core import ModeId, TraceEvent
from tli.executor import (
    Executor,
    ExecutorConfig,
    RunVerdict,
    discrete_pairs,
    run_task,
    trace_satisfies,
)
from tli.ltl import check_trace, parse_spec, synthesize
from tli.pipeline import PolicyLibrary, build_policy_library, contraction_policy
from tli.sim import (
    Perturbation,
    PerturbationKind,
    PerturbationSchedule,
    builtin_scene,
    builtin_spec_text,
    demos_for_scene,
    generate_demos,
)

pytestmark = pytest.mark.filterwarnings("ignore::sklearn.exceptions.ConvergenceWarning")


@pytest.fixture(scope="module")
def scooping():
    scene = builtin_scene("scooping")
    spec = parse_spec(builtin_spec_text("scooping_full"))
    demos = generate_demos(scene, ["a", "b", "c", "d"], count=5, seed=4)
    library = build_policy_library(scene, demos, kind="ds")
    return scene, spec, demos, library


@pytest.fixture(scope="module")
def cooking_library():
    scene = builtin_scene("cooking")
    demos = demos_for_scene(scene, "cooking", count=5, seed=9)
    library = build_policy_library(scene, demos, kind="ds")
    return scene, demos, library


# ---------------------------------------------------------------------------
# policy library


def test_library_has_one_policy_per_observed_transition(scooping):
    _, _, _, library = scooping
    keys = set(library.policies)
    assert ("a", "b") in keys
    assert ("b", "c") in keys
    assert ("c", "d") in keys
    assert ("d", None) in keys


def test_library_covers_full_automaton(scooping):
    scene, spec, _, library = scooping
    automaton = synthesize(spec)
    assert library.covers(automaton)


def test_policy_attractor_reads_as_next_region(scooping):
    scene, _, _, library = scooping
    for (mode, nxt), policy in library.policies.items():
        if nxt is None:
            continue
        names = [r.name for r in scene.regions]
        assert names[scene.region_index(policy.x_star)] == nxt


def test_alias_resolution_maps_automaton_modes_to_regions(cooking_library):
    scene, _, library = cooking_library
    w1 = ModeId(0, "w1")
    y = ModeId(2, "y")
    policy = library.resolve(w1, y)
    assert policy.key == ("w", "y")


def test_same_mode_fallback_when_transition_missing(cooking_library):
    scene, _, library = cooking_library
    d1 = ModeId(3, "d1")
    g = ModeId(4, "g")
    policy = library.resolve(d1, g)
    # no demo ever goes d -> g directly; the d -> w policy stands in
    assert policy.key == ("d", "w")


def test_contraction_fallback_for_unknown_mode(cooking_library):
    scene, _, library = cooking_library
    fake_from = ModeId(7, "y")
    fake_to = ModeId(8, "g")
    # remove every y policy to force synthesis
    stripped = PolicyLibrary(
        scene=scene,
        policies={k: v for k, v in library.policies.items() if k[0] != "y"},
    )
    policy = stripped.resolve(fake_from, fake_to)
    assert policy.kind == "contraction"
    np.testing.assert_allclose(
        policy.x_star, scene.region_named("g").centroid
    )


def test_contraction_policy_contracts():
    target = np.array([0.3, 0.7])
    policy = contraction_policy(("m", "t"), target)
    x = np.array([0.9, 0.1])
    v = policy.velocity(x)
    np.testing.assert_allclose(v, target - x, atol=1e-12)


# ---------------------------------------------------------------------------
# nominal closed-loop runs


def test_nominal_scooping_run_succeeds(scooping):
    scene, spec, _, library = scooping
    outcome = run_task(scene, spec, library, x0=np.array([0.2, 0.5]))
    assert outcome.verdict is RunVerdict.SUCCESS
    assert outcome.replans == 0
    assert outcome.cuts_added == {}
    modes = [m.name for _, m in outcome.discrete_trace]
    assert modes == ["a", "b", "c", "d"]
    assert check_trace(spec, outcome.discrete_trace).satisfied
    assert trace_satisfies(spec, outcome.trace)


def test_run_is_deterministic(scooping):
    scene, spec, _, library = scooping
    o1 = run_task(scene, spec, library, x0=np.array([0.25, 0.4]))
    o2 = run_task(scene, spec, library, x0=np.array([0.25, 0.4]))
    assert o1.steps == o2.steps
    assert o1.verdict is o2.verdict
    xs1 = np.array([s.x for s in o1.trace.steps])
    xs2 = np.array([s.x for s in o2.trace.steps])
    np.testing.assert_array_equal(xs1, xs2)


def test_trace_events_mark_planned_transitions(scooping):
    scene, spec, _, library = scooping
    outcome = run_task(scene, spec, library, x0=np.array([0.2, 0.5]))
    events = [s.event for s in outcome.trace.steps]
    assert events.count(TraceEvent.PLANNED_TRANSITION) == 3
    assert TraceEvent.UNEXPECTED_EXIT not in events


def test_cooking_partial_spec_reaches_goal(cooking_library):
    scene, _, library = cooking_library
    spec = parse_spec(builtin_spec_text("cooking_cb"))
    outcome = run_task(
        scene, spec, library, x0=np.array([0.15, 0.5]),
        config=ExecutorConfig(max_steps=40000),
    )
    assert outcome.verdict is RunVerdict.SUCCESS
    modes = [m.name for _, m in outcome.discrete_trace]
    assert modes[0] == "w1"
    assert modes[-1] == "d2"
    assert check_trace(spec, outcome.discrete_trace).satisfied


# ---------------------------------------------------------------------------
# perturbations and replanning


def test_displacement_perturbation_triggers_replan_and_cut(scooping):
    scene, spec, _, library = scooping
    # wait until the run is inside mode b, then push it back into a
    probe = Executor(scene, spec, library, x0=np.array([0.2, 0.5]))
    while probe.current.name != "b":
        probe.step()
    push_step = probe.steps_taken + 5
    schedule = PerturbationSchedule(
        events=(
            Perturbation(
                step=push_step,
                kind=PerturbationKind.DISPLACE,
                vector=np.array([-0.3, 0.0]),
            ),
        )
    )
    outcome = run_task(
        scene, spec, library, x0=np.array([0.2, 0.5]), schedule=schedule
    )
    assert outcome.verdict is RunVerdict.SUCCESS
    assert outcome.replans >= 1
    assert sum(outcome.cuts_added.values()) >= 1
    events = [s.event for s in outcome.trace.steps]
    assert TraceEvent.UNEXPECTED_EXIT in events
    assert check_trace(spec, outcome.discrete_trace).satisfied
    # the failure state of the recorded cut sits outside the estimate
    est = outcome.estimates[("b", "c")]
    assert est.cut_count >= 1
    assert est.history[0].perturbed is True
    assert gamma(est, est.history[0].x_fail) > 1.0


def test_teleport_perturbation_is_tagged(scooping):
    scene, spec, _, library = scooping
    schedule = PerturbationSchedule(
        events=(
            Perturbation(
                step=3,
                kind=PerturbationKind.TELEPORT,
                vector=np.array([0.5, 0.5]),
            ),
        )
    )
    outcome = run_task(
        scene, spec, library, x0=np.array([0.2, 0.5]), schedule=schedule
    )
    assert outcome.verdict is RunVerdict.SUCCESS
    events = [s.event for s in outcome.trace.steps]
    # landing in mode b while commanding b counts as the planned transition
    assert (
        TraceEvent.PLANNED_TRANSITION in events
        or TraceEvent.UNEXPECTED_EXIT in events
    )
    assert check_trace(outcome.spec, outcome.discrete_trace).satisfied


def test_unmodeled_edge_extends_formula(scooping):
    scene, _, _, library = scooping
    spec = parse_spec(builtin_spec_text("scooping_partial"))
    automaton = synthesize(spec)
    b = automaton.mode_named("b")
    a = automaton.mode_named("a")
    assert (b, a) not in automaton.edges
    probe = Executor(scene, spec, library, x0=np.array([0.2, 0.5]))
    while probe.current.name != "b":
        probe.step()
    schedule = PerturbationSchedule(
        events=(
            Perturbation(
                step=probe.steps_taken + 5,
                kind=PerturbationKind.DISPLACE,
                vector=np.array([-0.35, 0.0]),
            ),
        )
    )
    outcome = run_task(
        scene, spec, library, x0=np.array([0.2, 0.5]), schedule=schedule
    )
    assert outcome.verdict is RunVerdict.SUCCESS
    final = synthesize(outcome.spec)
    assert (b, a) in final.edges  # the observed exit is now modeled
    assert check_trace(outcome.spec, outcome.discrete_trace).satisfied


def test_extension_disabled_keeps_spec(scooping):
    scene, _, _, library = scooping
    spec = parse_spec(builtin_spec_text("scooping_partial"))
    probe = Executor(scene, spec, library, x0=np.array([0.2, 0.5]))
    while probe.current.name != "b":
        probe.step()
    schedule = PerturbationSchedule(
        events=(
            Perturbation(
                step=probe.steps_taken + 5,
                kind=PerturbationKind.DISPLACE,
                vector=np.array([-0.35, 0.0]),
            ),
        )
    )
    cfg = ExecutorConfig(extend_formula=False)
    outcome = run_task(
        scene, spec, library, x0=np.array([0.2, 0.5]),
        schedule=schedule, config=cfg,
    )
    assert outcome.spec is spec
    # the trace contains the unmodeled b -> a hop, so checking must fail
    assert outcome.verdict is RunVerdict.SUCCESS
    assert not check_trace(spec, outcome.discrete_trace).satisfied


def test_repeated_adversary_without_modulation_loops(scooping):
    scene, spec, _, library = scooping
    # adaptive adversary: teleport back into a whenever the run reaches c
    cfg = ExecutorConfig(
        modulation_enabled=False, loop_budget=10, max_steps=100000
    )
    ex = Executor(scene, spec, library, x0=np.array([0.2, 0.5]), config=cfg)
    prev = ex.current.name
    while ex.verdict is None:
        if ex.current.name == "c" and prev != "c":
            ex.inject(
                Perturbation(
                    step=ex.steps_taken,
                    kind=PerturbationKind.TELEPORT,
                    vector=np.array([0.1, 0.5]),
                )
            )
        prev = ex.current.name
        ex.step()
    assert ex.verdict is RunVerdict.LOOPING
    assert ex.replans > cfg.loop_budget


def test_success_requires_reaching_goal_mode(scooping):
    scene, spec, _, library = scooping
    cfg = ExecutorConfig(max_steps=5)
    outcome = run_task(
        scene, spec, library, x0=np.array([0.2, 0.5]), config=cfg
    )
    assert outcome.verdict is RunVerdict.STEP_BUDGET_EXHAUSTED


def test_non_absorbing_goal_counts_visits(cooking_library):
    scene, _, library = cooking_library
    spec = parse_spec(builtin_spec_text("cooking_cc"))
    cfg = ExecutorConfig(goal_visits=2, max_steps=60000)
    outcome = run_task(
        scene, spec, library, x0=np.array([0.15, 0.5]), config=cfg
    )
    assert outcome.verdict is RunVerdict.SUCCESS
    modes = [m.name for _, m in outcome.discrete_trace]
    assert modes.count("d") == 2
    assert modes[-1] == "d"
    assert check_trace(spec, outcome.discrete_trace).satisfied


def test_discrete_pairs_collapse_consecutive_modes(scooping):
    scene, spec, _, library = scooping
    outcome = run_task(scene, spec, library, x0=np.array([0.2, 0.5]))
    pairs = discrete_pairs(outcome.trace)
    assert len(pairs) == 4
    for (a1, m1), (a2, m2) in zip(pairs, pairs[1:]):
        assert m1 != m2
