"""Velocity modulation against learned mode boundaries.

Inside the cut set the nominal velocity is reshaped so its component along
the ray from the reference point vanishes as the nearest cut is approached:
the field never penetrates a cut, and the quadratic Lyapunov rate around the
reference can only improve. Outside the cut set, at the reference itself,
and when moving inward, the velocity passes through untouched.
"""

from __future__ import annotations

import numpy as np

from .boundary import BoundaryEstimate, active_cut, gamma

EPS_SINGULAR = 1e-6


def modulate(
    estimate: BoundaryEstimate,
    x: np.ndarray,
    v: np.ndarray,
    eps_singular: float = EPS_SINGULAR,
) -> np.ndarray:
    """Reshape v at x against the estimate's cuts.

    Identity when there are no cuts, when x is outside the cut set
    (Gamma > 1), at the reference point, and when the radial component
    already points inward. Near-tangential rays fall back to removing the
    outward normal component directly.
    """
    v = np.asarray(v, dtype=float)
    if not estimate.cuts:
        return v
    x = np.asarray(x, dtype=float)
    g = gamma(estimate, x)
    if g > 1.0 or g == 0.0:
        return v
    e = x - estimate.x_r
    norm_e = np.linalg.norm(e)
    if norm_e == 0.0:
        return v
    w = estimate.cuts[active_cut(estimate, x)].normal
    r = e / norm_e
    wr = float(w @ r)
    wv = float(w @ v)
    if abs(wr) < eps_singular:
        # ray nearly tangent to the cut: damp the outward normal component
        return v - g * max(wv, 0.0) * w
    ratio = wv / wr
    if ratio < 0.0:
        return v
    return v - g * ratio * r


def modulation_matrix(
    estimate: BoundaryEstimate,
    x: np.ndarray,
    eps_singular: float = EPS_SINGULAR,
) -> np.ndarray:
    """The linear map applied by modulate at x, built explicitly.

    Basis: the ray direction r, then the standard basis orthonormalized
    against the active cut normal (skipping the axis most parallel to it).
    The first basis direction is scaled by 1 - Gamma(x); the rest pass
    through. Falls back to the identity in every gated case.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    ident = np.eye(n)
    if not estimate.cuts:
        return ident
    g = gamma(estimate, x)
    if g > 1.0 or g == 0.0:
        return ident
    e = x - estimate.x_r
    norm_e = np.linalg.norm(e)
    if norm_e == 0.0:
        return ident
    w = estimate.cuts[active_cut(estimate, x)].normal
    r = e / norm_e
    if abs(float(w @ r)) < eps_singular:
        return ident  # closed form handles this case separately
    cols = [r]
    skip = int(np.argmax(np.abs(w)))
    for axis in range(n):
        if axis == skip:
            continue
        u = ident[axis].copy()
        u -= (u @ w) * w
        for c in cols[1:]:
            u -= (u @ c) * c
        norm_u = np.linalg.norm(u)
        if norm_u < 1e-12:
            continue
        cols.append(u / norm_u)
    E = np.stack(cols, axis=1)
    D = np.eye(n)
    D[0, 0] = 1.0 - g
    return E @ D @ np.linalg.inv(E)


def modulate_batch(
    estimate: BoundaryEstimate,
    pts: np.ndarray,
    V: np.ndarray,
    eps_singular: float = EPS_SINGULAR,
) -> np.ndarray:
    """Vectorized modulate over rows of pts/V for one estimate."""
    V = np.asarray(V, dtype=float)
    if not estimate.cuts:
        return V.copy()
    pts = np.asarray(pts, dtype=float)
    W = np.stack([c.normal for c in estimate.cuts])  # (F, n)
    denoms = np.array([c.normal @ (c.point - estimate.x_r) for c in estimate.cuts])
    ratios = np.maximum(((pts - estimate.x_r) @ W.T) / denoms, 0.0)  # (N, F)
    g = ratios.max(axis=1)
    active = ratios.argmax(axis=1)
    E = pts - estimate.x_r
    norm_e = np.linalg.norm(E, axis=1)
    out = V.copy()
    mask = (g > 0.0) & (g <= 1.0) & (norm_e > 0.0)
    if not np.any(mask):
        return out
    idx = np.nonzero(mask)[0]
    Wa = W[active[idx]]  # (M, n)
    R = E[idx] / norm_e[idx, None]
    wr = np.einsum("ij,ij->i", Wa, R)
    wv = np.einsum("ij,ij->i", Wa, V[idx])
    sing = np.abs(wr) < eps_singular
    ratio = np.where(sing, 0.0, wv / np.where(sing, 1.0, wr))
    apply = ~sing & (ratio >= 0.0)
    sub = idx[apply]
    out[sub] = V[sub] - (g[idx][apply] * ratio[apply])[:, None] * R[apply]
    sub_s = idx[sing]
    out[sub_s] = V[sub_s] - (
        g[idx][sing] * np.maximum(wv[sing], 0.0)
    )[:, None] * Wa[sing]
    return out
