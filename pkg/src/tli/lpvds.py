"""Globally stable linear-parameter-varying dynamical systems.

The velocity field is a Gaussian-mixture-weighted blend of linear systems,
x_dot = sum_k gamma_k(x) (A_k x + b_k), with b_k = -A_k x_star so the
attractor is a shared equilibrium. Every A_k satisfies
A_k + A_k^T <= -epsilon_stab * I, which makes V(x) = ||x - x_star||^2 a
Lyapunov function for the blended field and yields global asymptotic
convergence to x_star.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.mixture import GaussianMixture

from .errors import DegenerateData
from .optim import Adam

_EIG_TOL = 1e-9


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if self.weight <= 0:
            raise ValueError("component weight must be positive")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(
            self, "_logdet", 2.0 * float(np.sum(np.log(np.diag(chol))))
        )

    def log_density(self, x: np.ndarray) -> float:
        return float(self.log_density_batch(x[None, :])[0])

    def log_density_batch(self, pts: np.ndarray) -> np.ndarray:
        n = len(self.mean)
        diff = pts - self.mean
        sol = np.linalg.solve(self._chol, diff.T)
        maha = np.sum(sol * sol, axis=0)
        return -0.5 * (maha + self._logdet + n * np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LpvDsModel:
    components: tuple[GaussianComponent, ...]
    A: tuple[np.ndarray, ...]
    x_star: np.ndarray
    epsilon_stab: float
    training_rmse: float = float("nan")

    def __post_init__(self):
        x_star = np.asarray(self.x_star, dtype=float)
        A = tuple(np.asarray(a, dtype=float) for a in self.A)
        if len(A) != len(self.components) or not A:
            raise ValueError("need one linear system per mixture component")
        if self.epsilon_stab <= 0:
            raise ValueError("epsilon_stab must be positive")
        n = len(x_star)
        for a in A:
            if a.shape != (n, n):
                raise ValueError("system matrices must be n x n")
            sym_eigs = np.linalg.eigvalsh(a + a.T)
            if sym_eigs.max() > -self.epsilon_stab + _EIG_TOL:
                raise ValueError(
                    "A + A^T must have eigenvalues <= -epsilon_stab; got "
                    f"{sym_eigs.max():.3e}"
                )
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "x_star", x_star)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return len(self.x_star)

    def b(self, k: int) -> np.ndarray:
        return -self.A[k] @ self.x_star


def mixing(model: LpvDsModel, x: np.ndarray) -> np.ndarray:
    return mixing_batch(model, np.asarray(x, dtype=float)[None, :])[0]


def mixing_batch(model: LpvDsModel, pts: np.ndarray) -> np.ndarray:
    """Posterior responsibilities, shape (N, K); rows sum to 1."""
    pts = np.asarray(pts, dtype=float)
    logs = np.stack(
        [np.log(c.weight) + c.log_density_batch(pts) for c in model.components],
        axis=1,
    )
    logs -= logs.max(axis=1, keepdims=True)
    w = np.exp(logs)
    return w / w.sum(axis=1, keepdims=True)


def velocity(model: LpvDsModel, x: np.ndarray) -> np.ndarray:
    return velocity_batch(model, np.asarray(x, dtype=float)[None, :])[0]


def velocity_batch(model: LpvDsModel, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    gamma = mixing_batch(model, pts)  # (N, K)
    E = pts - model.x_star  # (N, n)
    A = np.stack(model.A)  # (K, n, n)
    return np.einsum("nk,kij,nj->ni", gamma, A, E)


def jacobian(model: LpvDsModel, x: np.ndarray) -> np.ndarray:
    """Analytic velocity Jacobian: sum_k [gamma_k A_k + (A_k e)(grad gamma_k)^T]."""
    x = np.asarray(x, dtype=float)
    gamma = mixing(model, x)
    e = x - model.x_star
    # grad gamma_k = gamma_k (s_k - sum_j gamma_j s_j), s_k = -Sigma_k^{-1}(x - mu_k)
    s = np.stack(
        [
            -np.linalg.solve(c.covariance, x - c.mean)
            for c in model.components
        ]
    )  # (K, n)
    s_bar = gamma @ s  # (n,)
    J = np.zeros((model.n, model.n))
    for k in range(model.K):
        grad_gamma = gamma[k] * (s[k] - s_bar)
        J += gamma[k] * model.A[k] + np.outer(model.A[k] @ e, grad_gamma)
    return J


def lyapunov_value(model: LpvDsModel, x: np.ndarray) -> float:
    e = np.asarray(x, dtype=float) - model.x_star
    return float(e @ e)


def lyapunov_rate(model: LpvDsModel, x: np.ndarray) -> float:
    e = np.asarray(x, dtype=float) - model.x_star
    return float(2.0 * e @ velocity(model, x))


@dataclass(frozen=True)
class FitConfig:
    epsilon_stab: float = 1e-2
    iterations: int = 3000
    learning_rate: float = 1e-2
    k_max: int = 6
    seed: int = 0
    speed_cap: float = 50.0


def _select_mixture(X: np.ndarray, config: FitConfig) -> tuple:
    best = None
    upper = max(1, min(config.k_max, len(X) // 2))
    for k in range(1, upper + 1):
        gm = GaussianMixture(
            n_components=k,
            covariance_type="full",
            random_state=config.seed,
            n_init=1,
            reg_covar=1e-6,
        )
        try:
            gm.fit(X)
        except ValueError:
            continue
        score = gm.bic(X)
        if best is None or score < best[0]:
            best = (score, gm)
    if best is None:
        raise DegenerateData("mixture fitting failed for all component counts")
    gm = best[1]
    comps = tuple(
        GaussianComponent(
            weight=float(w), mean=m.copy(), covariance=c.copy()
        )
        for w, m, c in zip(gm.weights_, gm.means_, gm.covariances_)
    )
    # renormalize defensively so the stored weights sum to exactly 1
    total = sum(c.weight for c in comps)
    comps = tuple(
        GaussianComponent(c.weight / total, c.mean, c.covariance) for c in comps
    )
    return comps


def fit(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    x_star: np.ndarray,
    config: Optional[FitConfig] = None,
) -> LpvDsModel:
    """Fit a stable blended-linear velocity field to (x, x_dot) pairs.

    Mixture structure comes from expectation-maximization with the component
    count chosen by the Bayesian information criterion. Each A_k is
    parameterized as W - W^T - L L^T - epsilon_stab I, which spans exactly
    the matrices with A + A^T <= -2 epsilon_stab I, and optimized by Adam on
    the mean squared velocity error.
    """
    config = config or FitConfig()
    X = np.array([np.asarray(p[0], dtype=float) for p in pairs])
    Xdot = np.array([np.asarray(p[1], dtype=float) for p in pairs])
    x_star = np.asarray(x_star, dtype=float)
    if not np.all(np.isfinite(x_star)):
        raise ValueError("x_star must be finite")
    n = X.shape[1] if X.ndim == 2 else 0
    if len(X) < n + 1:
        raise DegenerateData(f"need at least {n + 1} samples, got {len(X)}")
    if np.allclose(X, X[0]):
        raise DegenerateData("all demonstration states are identical")

    components = _select_mixture(X, config)
    probe = LpvDsModel(
        components=components,
        A=tuple(-np.eye(n) for _ in components),
        x_star=x_star,
        epsilon_stab=config.epsilon_stab,
    )
    gamma = mixing_batch(probe, X)  # (N, K), fixed during the A-step
    K = len(components)
    E = X - x_star
    N = len(X)

    W = [np.zeros((n, n)) for _ in range(K)]
    L = [np.eye(n) for _ in range(K)]
    opt = Adam(W + L, lr=config.learning_rate)

    def assemble():
        return np.stack(
            [W[k] - W[k].T - L[k] @ L[k].T - config.epsilon_stab * np.eye(n) for k in range(K)]
        )

    for it in range(config.iterations):
        # cosine decay drives the full-batch loss to a sharp minimum
        opt.lr = config.learning_rate * 0.5 * (1.0 + np.cos(np.pi * it / config.iterations))
        A = assemble()
        pred = np.einsum("nk,kij,nj->ni", gamma, A, E)
        R = pred - Xdot
        G = 2.0 / N * np.einsum("nk,ni,nj->kij", gamma, R, E)
        grads_W = [G[k] - G[k].T for k in range(K)]
        grads_L = [-(G[k] + G[k].T) @ L[k] for k in range(K)]
        opt.step(W + L, grads_W + grads_L)

    A = assemble()
    pred = np.einsum("nk,kij,nj->ni", gamma, A, E)
    rmse = float(np.sqrt(np.mean(np.sum((pred - Xdot) ** 2, axis=1))))
    return LpvDsModel(
        components=components,
        A=tuple(A[k] for k in range(K)),
        x_star=x_star,
        epsilon_stab=config.epsilon_stab,
        training_rmse=rmse,
    )


def rollout(
    model: LpvDsModel,
    x0: np.ndarray,
    dt: float,
    max_steps: int,
    stop_radius: float,
    speed_cap: float = 50.0,
) -> list[np.ndarray]:
    """Forward-Euler integration until the attractor ball or the step budget."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=float).copy()
    path = [x.copy()]
    for _ in range(max_steps):
        if np.linalg.norm(x - model.x_star) <= stop_radius:
            break
        v = velocity(model, x)
        speed = np.linalg.norm(v)
        if speed > speed_cap:
            v = v / speed * speed_cap
        x = x + v * dt
        path.append(x.copy())
    return path


# ---------------------------------------------------------------------------
# serialization


def model_to_json(model: LpvDsModel) -> str:
    return json.dumps(
        {
            "kind": "lpvds",
            "components": [
                {
                    "weight": c.weight,
                    "mean": c.mean.tolist(),
                    "covariance": c.covariance.tolist(),
                }
                for c in model.components
            ],
            "A": [a.tolist() for a in model.A],
            "x_star": model.x_star.tolist(),
            "epsilon_stab": model.epsilon_stab,
            "training_rmse": model.training_rmse,
        }
    )


def model_from_json(blob: str) -> LpvDsModel:
    data = json.loads(blob)
    if data.get("kind") != "lpvds":
        raise ValueError("not a blended-linear model blob")
    return LpvDsModel(
        components=tuple(
            GaussianComponent(
                weight=c["weight"],
                mean=np.asarray(c["mean"], dtype=float),
                covariance=np.asarray(c["covariance"], dtype=float),
            )
            for c in data["components"]
        ),
        A=tuple(np.asarray(a, dtype=float) for a in data["A"]),
        x_star=np.asarray(data["x_star"], dtype=float),
        epsilon_stab=data["epsilon_stab"],
        training_rmse=data["training_rmse"],
    )
