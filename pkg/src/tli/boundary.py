"""Online mode-boundary estimation from invariance failures.

Each failure contributes one separating hyperplane (a cut) through the last
in-mode state, with the normal chosen by a small constrained program: keep
the attractor, the entry state, and all previously recorded in-mode states on
the inside, push the failure state outside by a margin, and among feasible
normals minimize the plane's tilt toward the attractor. The implicit
function Gamma over the cut set is < 1 inside, 1 on the nearest cut, and > 1
outside, growing linearly along rays from the reference point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ModeId
from .errors import (
    DegenerateCut,
    DegenerateFailure,
    InfeasibleCut,
    RedundantFailure,
)

_UNIT_TOL = 1e-9
_DENOM_TOL = 1e-9
_FEAS_TOL = 1e-9
_GRID_STEP = 1e-4

DEFAULT_EPS_SEP = 1e-2
DEFAULT_EPS_REF = 0.05


@dataclass(frozen=True)
class Cut:
    normal: np.ndarray  # unit vector pointing out of the mode
    point: np.ndarray  # the last in-mode state the plane passes through
    perturbed: bool = False  # True when the exit was externally forced

    def __post_init__(self):
        w = np.asarray(self.normal, dtype=float)
        p = np.asarray(self.point, dtype=float)
        if abs(np.linalg.norm(w) - 1.0) > _UNIT_TOL:
            raise ValueError("cut normal must be a unit vector")
        object.__setattr__(self, "normal", w)
        object.__setattr__(self, "point", p)


@dataclass(frozen=True)
class FailureRecord:
    x_entry: np.ndarray
    x_last: np.ndarray
    x_fail: np.ndarray
    perturbed: bool = False

    def __post_init__(self):
        for name in ("x_entry", "x_last", "x_fail"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class BoundaryEstimate:
    mode: ModeId
    x_r: np.ndarray
    cuts: tuple[Cut, ...] = ()
    history: tuple[FailureRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "x_r", np.asarray(self.x_r, dtype=float))
        object.__setattr__(self, "cuts", tuple(self.cuts))
        object.__setattr__(self, "history", tuple(self.history))
        for cut in self.cuts:
            denom = float(cut.normal @ (cut.point - self.x_r))
            if denom < _DENOM_TOL:
                raise DegenerateCut(
                    "cut plane passes through or behind the reference point"
                )

    @property
    def cut_count(self) -> int:
        return len(self.cuts)


def gamma(estimate: BoundaryEstimate, x: np.ndarray) -> float:
    """Max over cuts of the clamped projection ratio; 0 when no cuts exist."""
    if not estimate.cuts:
        return 0.0
    return float(gamma_batch(estimate, np.asarray(x, dtype=float)[None, :])[0])


def per_cut_gamma(estimate: BoundaryEstimate, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    vals = []
    for cut in estimate.cuts:
        denom = float(cut.normal @ (cut.point - estimate.x_r))
        vals.append(max(0.0, float(cut.normal @ (x - estimate.x_r)) / denom))
    return np.array(vals)


def gamma_batch(estimate: BoundaryEstimate, pts: np.ndarray) -> np.ndarray:
    if not estimate.cuts:
        return np.zeros(len(pts))
    pts = np.asarray(pts, dtype=float)
    W = np.stack([c.normal for c in estimate.cuts])  # (F, n)
    denoms = np.array([c.normal @ (c.point - estimate.x_r) for c in estimate.cuts])
    ratios = ((pts - estimate.x_r) @ W.T) / denoms  # (N, F)
    return np.maximum(ratios, 0.0).max(axis=1)


def active_cut(estimate: BoundaryEstimate, x: np.ndarray) -> int:
    """Index of the cut attaining Gamma (ties: lowest index)."""
    if not estimate.cuts:
        raise ValueError("estimate has no cuts")
    return int(np.argmax(per_cut_gamma(estimate, x)))


# ---------------------------------------------------------------------------
# cut fitting


def _constraints(x_star, x_entry, x_last, x_fail, prior_lasts, eps_sep, eps_ref):
    """All constraints in the uniform form w . a >= b."""
    cons: list[tuple[np.ndarray, float]] = []
    u_star = x_star - x_last
    cons.append((-u_star, 0.0))  # w . (x_star - x_last) <= 0
    cons.append((-(x_entry - x_last), 0.0))
    for p in prior_lasts:
        cons.append((-(np.asarray(p, dtype=float) - x_last), 0.0))
    s = x_fail - x_last
    cons.append((s, eps_sep * float(np.linalg.norm(s))))
    m = x_last - x_star
    nm = float(np.linalg.norm(m))
    if nm > 0.0:
        # keep the reference point strictly inside the cut so the implicit
        # function's denominator stays bounded away from zero
        cons.append((m, eps_ref * nm))
    return cons, s, m


def _feasible(W: np.ndarray, cons) -> np.ndarray:
    ok = np.ones(len(W), dtype=bool)
    for a, b in cons:
        tol = _FEAS_TOL * max(1.0, float(np.linalg.norm(a)))
        ok &= (W @ a) >= (b - tol)
    return ok


def _pick(W: np.ndarray, m: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Min objective, then max separation, then lexicographically largest."""
    obj = (W @ m) ** 2
    best = obj.min()
    mask = obj <= best + 1e-12
    W = W[mask]
    sep = W @ s
    mask2 = sep >= sep.max() - 1e-12
    W = W[mask2]
    order = np.lexsort(W.T[::-1])  # sort by w_0, then w_1, ...
    return W[order[-1]]


def _solve_2d(cons, m, s) -> np.ndarray:
    thetas = [np.arange(0.0, 2.0 * np.pi, _GRID_STEP)]
    # analytic candidates: constraint boundaries and objective critical angles
    extra = []
    for a, b in cons:
        na = float(np.linalg.norm(a))
        if na < 1e-15:
            continue
        phi = np.arctan2(a[1], a[0])
        ratio = b / na
        if abs(ratio) <= 1.0:
            delta = np.arccos(np.clip(ratio, -1.0, 1.0))
            extra += [phi - delta, phi + delta]
    if np.linalg.norm(m) > 0:
        phi_m = np.arctan2(m[1], m[0])
        extra += [phi_m, phi_m + np.pi, phi_m + np.pi / 2, phi_m - np.pi / 2]
    if extra:
        thetas.append(np.array(extra))
    theta = np.concatenate(thetas)
    W = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    ok = _feasible(W, cons)
    if not np.any(ok):
        raise InfeasibleCut("no unit normal satisfies the cut constraints")
    return _pick(W[ok], m, s)


def _solve_nd(cons, m, s, seed=0) -> np.ndarray:
    n = len(m)
    rng = np.random.default_rng(seed)
    starts = [s / max(np.linalg.norm(s), 1e-12)]
    if np.linalg.norm(m) > 0:
        starts.append(m / np.linalg.norm(m))
        blend = s / max(np.linalg.norm(s), 1e-12) + m / np.linalg.norm(m)
        if np.linalg.norm(blend) > 1e-9:
            starts.append(blend / np.linalg.norm(blend))
    while len(starts) < 8:
        v = rng.normal(size=n)
        starts.append(v / np.linalg.norm(v))

    def penalty_grad(w, rho):
        grad = 2.0 * (w @ m) * m
        val = (w @ m) ** 2
        for a, b in cons:
            slack = b - (w @ a)
            if slack > 0.0:
                val += rho * slack * slack
                grad += -2.0 * rho * slack * a
        return val, grad

    best: Optional[np.ndarray] = None
    for w0 in starts:
        w = w0.copy()
        for rho in (10.0, 1e3, 1e5, 1e7, 1e9):
            lr = 0.05
            for _ in range(400):
                _, g = penalty_grad(w, rho)
                g = g - (g @ w) * w  # tangent to the sphere
                w = w - lr * g
                w /= np.linalg.norm(w)
        # feasibility polish: project onto violated constraint boundaries
        for _ in range(200):
            worst_slack, worst_a, worst_b = 0.0, None, 0.0
            for a, b in cons:
                slack = b - (w @ a)
                if slack > worst_slack:
                    worst_slack, worst_a, worst_b = slack, a, b
            if worst_a is None or worst_slack <= 1e-12:
                break
            na2 = float(worst_a @ worst_a)
            w = w + (worst_b - (w @ worst_a)) / na2 * worst_a
            w /= np.linalg.norm(w)
        if not np.all([(w @ a) >= b - _FEAS_TOL for a, b in cons]):
            continue
        if best is None:
            best = w
        else:
            cand = np.stack([best, w])
            best = _pick(cand, m, s)
    if best is None:
        raise InfeasibleCut("no unit normal satisfies the cut constraints")
    return best


def fit_cut(
    x_star: np.ndarray,
    x_entry: np.ndarray,
    x_last: np.ndarray,
    x_fail: np.ndarray,
    prior_lasts: Sequence[np.ndarray] = (),
    eps_sep: float = DEFAULT_EPS_SEP,
    eps_ref: float = DEFAULT_EPS_REF,
    perturbed: bool = False,
    protected: Sequence[np.ndarray] = (),
) -> Cut:
    """Separating plane through x_last pushing x_fail out by a margin.

    The normal minimizes its projection onto the attractor direction subject
    to keeping x_star, x_entry, prior in-mode states (and any extra protected
    points) on the inside. Ties favor larger failure separation, then the
    lexicographically largest normal.
    """
    x_star = np.asarray(x_star, dtype=float)
    x_entry = np.asarray(x_entry, dtype=float)
    x_last = np.asarray(x_last, dtype=float)
    x_fail = np.asarray(x_fail, dtype=float)
    if np.array_equal(x_fail, x_last):
        raise DegenerateFailure("failure state equals the last in-mode state")
    priors = list(prior_lasts) + list(protected)
    cons, s, m = _constraints(
        x_star, x_entry, x_last, x_fail, priors, eps_sep, eps_ref
    )
    if len(x_star) == 2:
        w = _solve_2d(cons, m, s)
    else:
        w = _solve_nd(cons, m, s)
    w = w / np.linalg.norm(w)
    return Cut(normal=w, point=x_last.copy(), perturbed=perturbed)


def protect_point(
    estimate: BoundaryEstimate,
    x: np.ndarray,
    eps_sep: float = DEFAULT_EPS_SEP,
    eps_ref: float = DEFAULT_EPS_REF,
) -> BoundaryEstimate:
    """Refit any cut that excludes x so it lands back inside.

    Called when fresh in-mode evidence (a new entry state) contradicts the
    current estimate. Each offending cut is refit with x added to its
    protected set; its own failure state stays separated. Cuts that cannot
    be reconciled are kept unchanged.
    """
    x = np.asarray(x, dtype=float)
    if not estimate.cuts or gamma(estimate, x) <= 1.0 + 1e-9:
        return estimate
    protected_all = [estimate.x_r, x]
    for h in estimate.history:
        protected_all += [h.x_entry, h.x_last]
    cuts = list(estimate.cuts)
    for i, cut in enumerate(cuts):
        denom = float(cut.normal @ (cut.point - estimate.x_r))
        if float(cut.normal @ (x - estimate.x_r)) / denom <= 1.0 + 1e-9:
            continue
        rec = estimate.history[i]
        others = [
            q
            for q in protected_all
            if not (np.array_equal(q, rec.x_last) or np.array_equal(q, estimate.x_r))
        ]
        try:
            cuts[i] = fit_cut(
                estimate.x_r,
                rec.x_entry,
                rec.x_last,
                rec.x_fail,
                prior_lasts=others,
                eps_sep=eps_sep,
                eps_ref=eps_ref,
                perturbed=rec.perturbed,
            )
        except InfeasibleCut:
            pass
    return BoundaryEstimate(
        mode=estimate.mode, x_r=estimate.x_r, cuts=tuple(cuts),
        history=estimate.history,
    )


def record_failure(
    estimate: BoundaryEstimate,
    x_entry: np.ndarray,
    x_last: np.ndarray,
    x_fail: np.ndarray,
    eps_sep: float = DEFAULT_EPS_SEP,
    eps_ref: float = DEFAULT_EPS_REF,
    perturbed: bool = False,
) -> BoundaryEstimate:
    """Add one cut for a fresh invariance failure.

    Raises RedundantFailure when the failure state is already excluded by the
    current cut set, and DegenerateFailure for zero-length exits. All prior
    in-mode evidence (entry and last states) stays protected; cuts that a new
    protected point invalidates are refit against the full evidence set.
    """
    x_entry = np.asarray(x_entry, dtype=float)
    x_last = np.asarray(x_last, dtype=float)
    x_fail = np.asarray(x_fail, dtype=float)
    if np.array_equal(x_fail, x_last):
        raise DegenerateFailure("failure state equals the last in-mode state")
    if estimate.cuts and gamma(estimate, x_fail) >= 1.0:
        raise RedundantFailure("failure state is already outside the cut set")

    history = estimate.history + (
        FailureRecord(x_entry, x_last, x_fail, perturbed),
    )
    cuts = list(estimate.cuts)
    new_cut = fit_cut(
        estimate.x_r,
        x_entry,
        x_last,
        x_fail,
        prior_lasts=[h.x_last for h in estimate.history],
        eps_sep=eps_sep,
        eps_ref=eps_ref,
        perturbed=perturbed,
        protected=[h.x_entry for h in estimate.history],
    )
    cuts.append(new_cut)

    # repair pass: a new in-mode point may fall outside an older cut (e.g. a
    # perturbed entry far from previous evidence); refit such cuts with the
    # full protected set so recorded in-mode states keep Gamma <= 1
    protected_all = [estimate.x_r]
    for h in history:
        protected_all += [h.x_entry, h.x_last]
    for i, cut in enumerate(cuts):
        rec = history[i]
        denom = float(cut.normal @ (cut.point - estimate.x_r))
        violated = any(
            float(cut.normal @ (q - estimate.x_r)) / denom > 1.0 + 1e-9
            for q in protected_all
        )
        if not violated:
            continue
        others = [
            q
            for q in protected_all
            if not (np.array_equal(q, rec.x_last) or np.array_equal(q, estimate.x_r))
        ]
        try:
            cuts[i] = fit_cut(
                estimate.x_r,
                rec.x_entry,
                rec.x_last,
                rec.x_fail,
                prior_lasts=others,
                eps_sep=eps_sep,
                eps_ref=eps_ref,
                perturbed=rec.perturbed,
            )
        except InfeasibleCut:
            pass  # keep the original cut; better one plane than none
    return BoundaryEstimate(
        mode=estimate.mode, x_r=estimate.x_r, cuts=tuple(cuts), history=history
    )
