"""Geometry of the lifted simplex: the regularizer psi, its Bregman divergence,
and an independent block-coordinate solver used as an equivalence oracle.

Points live in the lifted simplex { y : y[k] > 0, sum(y) <= 1 }.  With
S = sum(y) the regularizer is

    psi(y) = -(alpha/eta) * ln(S) + (1/(eta*S)) * sum_k y[k] * ln(y[k]).

Its Hessian dominates (1/(2*eta)) * diag(1/(y[k]*S)), which is what gives the
dynamics their path-length control.
"""

from __future__ import annotations

import math

import numpy as np

from cautious.rate_control import RateControlParams

__all__ = [
    "psi",
    "grad_psi",
    "bregman",
    "bregman_decomposed",
    "hessian_quadform_fd",
    "hessian_lower_bound",
    "hessian_check",
    "kl_divergence",
    "neg_entropy",
    "oftrl_lifted_solve",
]

_INTERIOR_MIN = 0.0  # strict positivity is the domain requirement


def _check_interior(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if (y <= _INTERIOR_MIN).any():
        raise ValueError("point must have strictly positive coordinates")
    if float(y.sum()) > 1.0 + 1e-12:
        raise ValueError("point must have coordinate sum <= 1")
    return y


def neg_entropy(p) -> float:
    """sum_k p[k] ln p[k] with the 0*ln(0) = 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask])))


def kl_divergence(p, q) -> float:
    """KL(p || q), 0*ln(0) = 0; infinite when p puts mass where q has none."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    if (q[mask] <= 0).any():
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def psi(y, params: RateControlParams) -> float:
    y = _check_interior(y)
    s = float(y.sum())
    return (-params.alpha * math.log(s) + float(np.sum(y * np.log(y))) / s) / params.eta


def grad_psi(y, params: RateControlParams) -> np.ndarray:
    y = _check_interior(y)
    s = float(y.sum())
    x = y / s
    ent = neg_entropy(x)
    return (-(params.alpha - 1.0) / s - ent / s + np.log(x) / s) / params.eta


def bregman(y, z, params: RateControlParams) -> float:
    """D_psi(y || z) from the definition psi(y) - psi(z) - <grad psi(z), y - z>."""
    y = _check_interior(y)
    z = _check_interior(z)
    return psi(y, params) - psi(z, params) - float(np.dot(grad_psi(z, params), y - z))


def bregman_decomposed(y, z, params: RateControlParams) -> float:
    """D_psi(y || z) via its closed decomposition; must agree with `bregman`.

    With S_y = sum(y), S_z = sum(z), x = y/S_y, theta = z/S_z and w = S_y/S_z:

        eta * D = (alpha - 1) * D_log(S_y || S_z)
                  + w * KL(x || theta) + (1 - w) * (H(x) - H(theta))

    where D_log(a || b) = -ln(a/b) + a/b - 1 and H is the *negative* entropy
    sum p ln p.
    """
    y = _check_interior(y)
    z = _check_interior(z)
    sy = float(y.sum())
    sz = float(z.sum())
    x = y / sy
    theta = z / sz
    w = sy / sz
    d_log = -math.log(w) + w - 1.0
    val = (params.alpha - 1.0) * d_log + w * kl_divergence(x, theta)
    val += (1.0 - w) * (neg_entropy(x) - neg_entropy(theta))
    return val / params.eta


def hessian_lower_bound(y, v, params: RateControlParams) -> float:
    """The guaranteed quadratic form (1/(2 eta)) sum_k v[k]^2 / (y[k] * sum(y))."""
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    s = float(y.sum())
    return float(np.sum(v * v / y)) / (2.0 * params.eta * s)


def hessian_quadform_fd(y, v, params: RateControlParams, step: float | None = None) -> float:
    """v' Hess(psi)(y) v by a central second difference along v."""
    y = _check_interior(y)
    v = np.asarray(v, dtype=np.float64)
    vmax = float(np.abs(v).max())
    if vmax == 0.0:
        return 0.0
    if step is None:
        # keep y +- step*v strictly interior and the sum below 1
        room = float(np.min(y / np.maximum(np.abs(v), 1e-300)))
        sum_room = (1.0 - float(y.sum())) / max(abs(float(v.sum())), 1e-300)
        step = min(1e-4 * float(y.min()) / vmax, 0.25 * room, 0.25 * abs(sum_room))
    f0 = psi(y, params)
    fp = psi(y + step * v, params)
    fm = psi(y - step * v, params)
    return (fp - 2.0 * f0 + fm) / (step * step)


def hessian_check(y, params: RateControlParams, directions=None, rng=None,
                  n_dirs: int = 8, rel_tol: float = 1e-4) -> bool:
    """Spot-check Hess(psi)(y) >= (1/(2 eta)) diag(1/(y[k] sum(y))) along directions."""
    y = _check_interior(y)
    if directions is None:
        if rng is None:
            rng = np.random.Generator(np.random.Philox(key=np.uint64(0)))
        directions = rng.uniform(-1.0, 1.0, size=(n_dirs, y.size))
    for v in np.atleast_2d(np.asarray(directions, dtype=np.float64)):
        if not np.abs(v).max():
            continue
        quad = hessian_quadform_fd(y, v, params)
        bound = hessian_lower_bound(y, v, params)
        if quad < bound * (1.0 - rel_tol) - 1e-9:
            return False
    return True


def oftrl_lifted_solve(r, params: RateControlParams, tol: float = 1e-12,
                       max_sweeps: int = 10_000) -> np.ndarray:
    """Independent solver for the joint rate/strategy program; returns y = lam * x.

    Maximizes  lam * <r, x> + (alpha - 1) * ln(lam) - sum_k x[k] ln x[k]  over
    lam in (0, eta] and x in the simplex by alternating exact block updates:
    x <- softmax(lam * r) at fixed lam, and lam <- min(eta, (alpha-1)/(-<r,x>))
    (or eta when <r,x> >= 0) at fixed x.  Both blocks are exact maximizers, so
    the sweep is an ascent; the joint stationary point is unique.
    """
    r = np.asarray(r, dtype=np.float64)
    if not np.isfinite(r).all():
        raise ValueError("regret vector must be finite")
    a1 = params.alpha - 1.0
    lam = params.eta
    x = None
    for _ in range(max_sweeps):
        z = lam * r
        w = np.exp(z - z.max())
        x_new = w / w.sum()
        rx = float(np.dot(r, x_new))
        lam_new = min(params.eta, a1 / (-rx)) if rx < 0 else params.eta
        done = abs(lam_new - lam) <= tol * lam
        if x is not None:
            done = done and float(np.abs(x_new - x).max()) <= tol
        lam, x = lam_new, x_new
        if done:
            return lam * x
    raise ArithmeticError(f"block-coordinate solver did not converge in {max_sweeps} sweeps")
