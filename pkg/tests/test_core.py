"""State, demonstration, and trace container tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tli.core import (
    Demonstration,
    ModeId,
    SystemState,
    Trace,
    TraceEvent,
    TraceStep,
    label_mode,
    load_demonstrations,
    save_demonstrations,
    trace_from_json,
    trace_to_json,
)
from tli.errors import UnknownSensorState


def make_demo(n=2, steps=5, dt=0.1, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(steps):
        samples.append((rng.normal(size=n), rng.normal(size=n), (0, 1)))
    return Demonstration(samples=tuple(samples), dt=dt)


def test_system_state_rejects_nonfinite():
    with pytest.raises(ValueError):
        SystemState(x=np.array([np.nan, 0.0]), alpha=(0,))
    with pytest.raises(ValueError):
        SystemState(x=np.array([np.inf, 0.0]), alpha=(0,))


def test_demonstration_shape_accessors():
    demo = make_demo(n=3, steps=7)
    assert demo.n == 3
    assert demo.m == 2
    assert demo.positions().shape == (7, 3)
    assert demo.velocities().shape == (7, 3)


def test_trace_requires_event_on_mode_change():
    t = Trace()
    a, b = ModeId(0, "a"), ModeId(1, "b")
    t.append(TraceStep(np.zeros(2), (0,), a, None, TraceEvent.NONE))
    with pytest.raises(ValueError):
        t.append(TraceStep(np.ones(2), (1,), b, None, TraceEvent.NONE))
    t.append(
        TraceStep(np.ones(2), (1,), b, (a, b), TraceEvent.PLANNED_TRANSITION)
    )
    assert [m.name for m in t.mode_sequence()] == ["a", "b"]


def test_trace_as_pairs():
    t = Trace()
    a = ModeId(0, "a")
    t.append(TraceStep(np.zeros(2), (0, 1), a, None, TraceEvent.NONE))
    assert t.as_pairs() == [((0, 1), a)]


def test_label_mode_first_match_and_unknown():
    a, b = ModeId(0, "a"), ModeId(1, "b")
    table = [((0, 0), a), ((1, 0), b), ((0, 0), b)]
    assert label_mode((0, 0), table) == a
    assert label_mode((1, 0), table) == b
    with pytest.raises(UnknownSensorState):
        label_mode((1, 1), table)


def test_demonstration_csv_round_trip(tmp_path):
    demos = [make_demo(seed=1), make_demo(steps=3, seed=2)]
    path = tmp_path / "demos.csv"
    save_demonstrations(path, demos)
    back = load_demonstrations(path, n=2, m=2)
    assert len(back) == 2
    for orig, rt in zip(demos, back):
        assert rt.dt == orig.dt
        assert np.array_equal(rt.positions(), orig.positions())
        assert np.array_equal(rt.velocities(), orig.velocities())
        assert [s[2] for s in rt.samples] == [s[2] for s in orig.samples]


@settings(max_examples=25, deadline=None)
@given(
    arrays(np.float64, (4, 2), elements=st.floats(-1e6, 1e6, allow_nan=False)),
    st.floats(1e-3, 1.0, allow_nan=False),
)
def test_csv_round_trip_is_bit_faithful(mat, dt):
    import tempfile

    samples = tuple((mat[i], mat[(i + 1) % 4], (1,)) for i in range(4))
    demo = Demonstration(samples=samples, dt=dt)
    with tempfile.TemporaryDirectory() as tmp:
        path = f"{tmp}/d.csv"
        save_demonstrations(path, [demo])
        back = load_demonstrations(path, n=2, m=1)[0]
    assert back.dt == demo.dt
    assert np.array_equal(back.positions(), demo.positions())


def test_trace_json_round_trip():
    t = Trace()
    a, b = ModeId(0, "a"), ModeId(1, "b")
    t.append(TraceStep(np.array([0.1, 0.2]), (0,), a, None, TraceEvent.NONE))
    t.append(
        TraceStep(
            np.array([0.3, 0.4]), (1,), b, (a, b), TraceEvent.PLANNED_TRANSITION
        )
    )
    blob = trace_to_json(t)
    back = trace_from_json(blob)
    assert len(back.steps) == 2
    assert np.array_equal(back.steps[0].x, t.steps[0].x)
    assert back.steps[1].mode == b
    assert back.steps[1].event == TraceEvent.PLANNED_TRANSITION
    assert back.steps[1].commanded_transition == (a, b)
