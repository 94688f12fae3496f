"""Stable blended-linear dynamical system tests.

Oracles: Gaussian densities recomputed from scratch for mixing, a plain
per-sample evaluator for velocity, an unconstrained least-squares linear fit
for the constrained-fit quality bound, and central finite differences for the
Jacobian.
"""

from __future__ import annotations

import numpy as np
import pytest

from tli.errors import DegenerateData
from tli.lpvds import (
    FitConfig,
    GaussianComponent,
    LpvDsModel,
    fit,
    jacobian,
    lyapunov_rate,
    lyapunov_value,
    mixing,
    model_from_json,
    model_to_json,
    rollout,
    velocity,
)


def identity_model(n=2, x_star=None, eps=1e-2):
    x_star = np.zeros(n) if x_star is None else np.asarray(x_star, dtype=float)
    comp = GaussianComponent(1.0, np.zeros(n), np.eye(n))
    return LpvDsModel(
        components=(comp,), A=(-np.eye(n),), x_star=x_star, epsilon_stab=eps
    )


def two_component_model(sep=6.0):
    c1 = GaussianComponent(0.5, np.array([-sep / 2, 0.0]), np.eye(2))
    c2 = GaussianComponent(0.5, np.array([sep / 2, 0.0]), np.eye(2))
    A = (-np.eye(2), np.array([[-1.0, 0.5], [-0.5, -1.0]]))
    return LpvDsModel(components=(c1, c2), A=A, x_star=np.zeros(2), epsilon_stab=1e-2)


def s_curve_pairs(samples=200, seed=0):
    """Two S-shaped demos ending at the origin, velocities along the tangent."""
    pairs = []
    for phase in (0.0, 0.15):
        t = np.linspace(1.0, 0.0, samples)
        x = np.stack([t, np.sin(2.0 * np.pi * t + phase) / 3.0 * t], axis=1)
        v = np.zeros_like(x)
        v[:-1] = (x[1:] - x[:-1]) / 0.01
        pairs += [(x[i], v[i]) for i in range(samples - 1)]
    return pairs


# ---------------------------------------------------------------------------
# construction invariants


def test_unstable_matrix_rejected():
    comp = GaussianComponent(1.0, np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        LpvDsModel(
            components=(comp,),
            A=(np.array([[0.1, 0.0], [0.0, -1.0]]),),
            x_star=np.zeros(2),
            epsilon_stab=1e-2,
        )


def test_weights_must_sum_to_one():
    c = GaussianComponent(0.7, np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        LpvDsModel(components=(c,), A=(-np.eye(2),), x_star=np.zeros(2), epsilon_stab=1e-2)


def test_degenerate_covariance_rejected():
    with pytest.raises(ValueError):
        GaussianComponent(1.0, np.zeros(2), np.zeros((2, 2)))


def test_equilibrium_offset_is_derived():
    A = -np.eye(2)
    m = identity_model(x_star=np.array([1.0, 2.0]))
    assert np.array_equal(m.b(0), -A @ np.array([1.0, 2.0]))


# ---------------------------------------------------------------------------
# mixing


def test_mixing_single_component_is_one():
    m = identity_model()
    for x in np.random.default_rng(0).normal(size=(20, 2)):
        g = mixing(m, x)
        assert g.shape == (1,)
        assert g[0] == pytest.approx(1.0, abs=1e-12)


def test_mixing_matches_direct_density_computation():
    m = two_component_model()
    rng = np.random.default_rng(1)
    for x in rng.normal(scale=3.0, size=(50, 2)):
        dens = []
        for c in m.components:
            diff = x - c.mean
            quad = diff @ np.linalg.inv(c.covariance) @ diff
            norm = np.sqrt((2 * np.pi) ** 2 * np.linalg.det(c.covariance))
            dens.append(c.weight * np.exp(-0.5 * quad) / norm)
        expect = np.array(dens) / np.sum(dens)
        got = mixing(m, x)
        assert np.allclose(got, expect, atol=1e-12)
        assert got.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(got >= 0)


def test_mixing_at_component_mean_dominates():
    m = two_component_model(sep=8.0)
    g = mixing(m, np.array([-4.0, 0.0]))
    assert g[0] > 0.99


def test_mixing_symmetric_midpoint():
    m = two_component_model()
    g = mixing(m, np.array([0.0, 0.0]))
    assert np.allclose(g, [0.5, 0.5], atol=1e-12)


# ---------------------------------------------------------------------------
# velocity


def test_velocity_zero_at_attractor():
    m = two_component_model()
    assert np.linalg.norm(velocity(m, m.x_star)) < 1e-10
    shifted = identity_model(x_star=np.array([0.3, -0.4]))
    assert np.linalg.norm(velocity(shifted, shifted.x_star)) < 1e-10


def test_velocity_linear_case():
    m = identity_model()
    assert np.allclose(velocity(m, np.array([1.0, 2.0])), [-1.0, -2.0])


def test_velocity_matches_independent_evaluator():
    m = two_component_model()
    rng = np.random.default_rng(2)
    for x in rng.normal(scale=2.0, size=(30, 2)):
        g = mixing(m, x)
        expect = sum(
            g[k] * (m.A[k] @ x + m.b(k)) for k in range(m.K)
        )
        assert np.allclose(velocity(m, x), expect, atol=1e-12)


# ---------------------------------------------------------------------------
# fitting


def test_fit_recovers_linear_contraction():
    rng = np.random.default_rng(3)
    x_star = np.array([0.5, -0.25])
    X = rng.uniform(-1.0, 1.0, size=(200, 2))
    pairs = [(x, -(x - x_star)) for x in X]
    m = fit(pairs, x_star, FitConfig(k_max=1, seed=0))
    assert m.K == 1
    mean_speed = float(np.mean([np.linalg.norm(v) for _, v in pairs]))
    assert m.training_rmse <= 1e-3 * mean_speed


def test_fit_beats_twice_unconstrained_least_squares_on_s_curve():
    pairs = s_curve_pairs()
    x_star = np.zeros(2)
    m = fit(pairs, x_star, FitConfig(seed=0))
    # oracle: unconstrained least squares with the same mixing weights
    from tli.lpvds import mixing_batch

    X = np.array([p[0] for p in pairs])
    Xdot = np.array([p[1] for p in pairs])
    gamma = mixing_batch(m, X)
    E = X - x_star
    K, n = m.K, 2
    design = np.concatenate(
        [gamma[:, k : k + 1] * E for k in range(K)], axis=1
    )  # (N, K*n)
    pred = np.zeros_like(Xdot)
    for d in range(n):
        coef, *_ = np.linalg.lstsq(design, Xdot[:, d], rcond=None)
        pred[:, d] = design @ coef
    oracle_rmse = float(np.sqrt(np.mean(np.sum((pred - Xdot) ** 2, axis=1))))
    assert m.training_rmse <= 2.0 * oracle_rmse


def test_fit_outward_field_still_stable():
    rng = np.random.default_rng(4)
    X = rng.uniform(-1.0, 1.0, size=(100, 2))
    pairs = [(x, +x) for x in X]  # velocities point away from the attractor
    m = fit(pairs, np.zeros(2), FitConfig(k_max=2, seed=0, iterations=500))
    for a in m.A:
        assert np.linalg.eigvalsh(a + a.T).max() <= -m.epsilon_stab + 1e-9
    mean_speed = float(np.mean([np.linalg.norm(v) for _, v in pairs]))
    assert m.training_rmse > 0.5 * mean_speed


def test_fit_rejects_degenerate_data():
    pairs = [(np.array([1.0, 1.0]), np.zeros(2))] * 10
    with pytest.raises(DegenerateData):
        fit(pairs, np.zeros(2))
    with pytest.raises(DegenerateData):
        fit(pairs[:2], np.zeros(2))


def test_fit_is_deterministic():
    pairs = s_curve_pairs(samples=60)
    m1 = fit(pairs, np.zeros(2), FitConfig(seed=7, iterations=300))
    m2 = fit(pairs, np.zeros(2), FitConfig(seed=7, iterations=300))
    assert model_to_json(m1) == model_to_json(m2)


def test_fit_stability_invariant_all_components():
    pairs = s_curve_pairs(samples=120)
    m = fit(pairs, np.zeros(2), FitConfig(seed=1, iterations=800))
    for a in m.A:
        assert np.linalg.eigvalsh(a + a.T).max() <= -m.epsilon_stab + 1e-9


# ---------------------------------------------------------------------------
# rollout


def test_rollout_from_attractor_is_single_point():
    m = identity_model()
    path = rollout(m, m.x_star, dt=0.01, max_steps=100, stop_radius=1e-3)
    assert len(path) == 1


def test_rollout_converges_from_random_starts():
    pairs = s_curve_pairs(samples=100)
    m = fit(pairs, np.zeros(2), FitConfig(seed=2, iterations=500))
    rng = np.random.default_rng(5)
    for x0 in rng.uniform(0.0, 1.0, size=(100, 2)):
        path = rollout(m, x0, dt=1e-2, max_steps=10_000, stop_radius=1e-3)
        assert np.linalg.norm(path[-1] - m.x_star) <= 1e-3


def test_rollout_rejects_zero_dt():
    m = identity_model()
    with pytest.raises(ValueError):
        rollout(m, np.ones(2), dt=0.0, max_steps=10, stop_radius=1e-3)


# ---------------------------------------------------------------------------
# Lyapunov function


def test_lyapunov_examples():
    m = identity_model()
    assert lyapunov_value(m, m.x_star) == 0.0
    assert lyapunov_rate(m, m.x_star) == 0.0
    assert lyapunov_value(m, np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert lyapunov_rate(m, np.array([1.0, 0.0])) == pytest.approx(-2.0)


def test_lyapunov_rate_negative_everywhere_on_fitted_model():
    pairs = s_curve_pairs(samples=100)
    m = fit(pairs, np.zeros(2), FitConfig(seed=3, iterations=500))
    rng = np.random.default_rng(6)
    pts = rng.uniform(-2.0, 2.0, size=(10_000, 2))
    for x in pts:
        if np.linalg.norm(x - m.x_star) < 1e-9:
            continue
        assert lyapunov_rate(m, x) < 0


# ---------------------------------------------------------------------------
# Jacobian


def test_jacobian_matches_finite_differences():
    m = two_component_model()
    rng = np.random.default_rng(7)
    h = 1e-6
    for x in rng.normal(scale=2.0, size=(20, 2)):
        J = jacobian(m, x)
        fd = np.zeros((2, 2))
        for j in range(2):
            dx = np.zeros(2)
            dx[j] = h
            fd[:, j] = (velocity(m, x + dx) - velocity(m, x - dx)) / (2 * h)
        denom = max(1.0, np.abs(fd).max())
        assert np.abs(J - fd).max() / denom < 1e-4


# ---------------------------------------------------------------------------
# serialization


def test_json_round_trip_bit_faithful():
    pairs = s_curve_pairs(samples=80)
    m = fit(pairs, np.zeros(2), FitConfig(seed=4, iterations=300))
    blob = model_to_json(m)
    back = model_from_json(blob)
    assert np.array_equal(back.x_star, m.x_star)
    for a1, a2 in zip(m.A, back.A):
        assert np.array_equal(a1, a2)
    for c1, c2 in zip(m.components, back.components):
        assert c1.weight == c2.weight
        assert np.array_equal(c1.mean, c2.mean)
        assert np.array_equal(c1.covariance, c2.covariance)
    rng = np.random.default_rng(8)
    for x in rng.normal(size=(10, 2)):
        assert np.array_equal(velocity(m, x), velocity(back, x))
