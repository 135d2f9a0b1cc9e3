"""The 1-D concave rate-control objective and its safeguarded Newton solver.

The learner's rate is the maximizer over (0, eta] of

    f(lam) = (alpha - 1) * ln(lam) + ln(sum_k exp(lam * r[k]))

for the current vector r of optimistically corrected per-action regrets.  f is
strongly concave and self-concordant once alpha exceeds 1 + ln^2(d), so the
interior root of f' is found by Newton from an analytic initializer, with a
bracketing bisection safeguard for global convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RateControlParams",
    "RateSolution",
    "default_eta",
    "objective_derivatives",
    "analytic_init",
    "solve_rate",
    "solve_rate_details",
    "newton_1d",
]

THEOREM_ETA_CAP = 1.0 / 50.0
THEOREM_BETA_MIN = 70.0


def default_eta(n: int, smoothness: float = 1.0) -> float:
    """Theorem-mode learning rate min{1/50, 1/(12*sqrt(2)*L*n)}."""
    return min(THEOREM_ETA_CAP, 1.0 / (12.0 * math.sqrt(2.0) * smoothness * n))


@dataclass(frozen=True)
class RateControlParams:
    """Hyperparameters of the rate-control objective for a d-action learner.

    alpha is derived as 2 + 2*ln(d) + beta*ln(d)^2; beta >= 2 keeps the
    objective strongly concave and self-concordant.  Theorem-grade guarantees
    additionally want beta >= 70 and eta <= 1/50, which callers enforce for
    theorem-mode runs.
    """

    eta: float
    beta: float = 70.0
    d: int = 2
    rel_tol: float = 1e-10
    max_iter: int = 100

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2 (the alpha formula degenerates at d=1)")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.beta < 2:
            raise ValueError("beta must be >= 2 for strong concavity and self-concordance")
        if not 0 < self.rel_tol < 1e-2:
            raise ValueError("rel_tol must be in (0, 1e-2)")

    @property
    def log_d(self) -> float:
        return math.log(self.d)

    @property
    def alpha(self) -> float:
        ld = self.log_d
        return 2.0 + 2.0 * ld + self.beta * ld * ld

    @property
    def threshold(self) -> float:
        """Regret level -beta*ln(d)^2 below which the rate drops under eta."""
        ld = self.log_d
        return -self.beta * ld * ld

    def is_theorem_mode(self) -> bool:
        return self.eta <= THEOREM_ETA_CAP + 1e-15 and self.beta >= THEOREM_BETA_MIN


@dataclass(frozen=True)
class RateSolution:
    lam: float
    newton_iters: int
    branch: str  # "threshold" | "cap" | "newton"


def objective_derivatives(lam: float, r, params: RateControlParams):
    """f and its first three lambda-derivatives at `lam`.

    Uses softmax moments of r with a max shift inside the log-sum-exp, so the
    evaluation is overflow safe for any magnitude of lam * r.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    r = np.asarray(r, dtype=np.float64)
    z = lam * r
    m = float(z.max())
    w = np.exp(z - m)
    s = float(w.sum())
    p = w / s
    lse = m + math.log(s)
    m1 = float(p @ r)
    # central moments: the raw-moment forms m2 - m1^2 and m3 - 3 m1 m2 + 2 m1^3
    # cancel catastrophically once the softmax concentrates
    dev = r - m1
    c2 = float(p @ (dev * dev))
    c3 = float(p @ (dev * dev * dev))
    a1 = params.alpha - 1.0
    f = a1 * math.log(lam) + lse
    f1 = m1 + a1 / lam
    f2 = c2 - a1 / (lam * lam)
    f3 = c3 + 2.0 * a1 / lam ** 3
    return f, f1, f2, f3


def analytic_init(r, params: RateControlParams) -> float:
    """Initializer (alpha - 1) / (-max_k r[k]); needs all regrets negative."""
    rmax = float(np.max(r))
    if rmax >= 0:
        raise ValueError(
            "analytic initializer needs max(r) < 0; above the threshold the rate is eta"
        )
    return (params.alpha - 1.0) / (-rmax)


def newton_1d(deriv, lam0: float, hi_cap: float, rel_tol: float, max_iter: int):
    """Maximize a strictly concave 1-D function by safeguarded Newton on its root.

    `deriv(lam) -> (f1, f2)` with f2 < 0 everywhere; the caller must have
    verified f1(hi_cap) < 0, so the root lies in (0, hi_cap).  A bracket
    [lo, hi] with f1(lo) > 0 > f1(hi) is maintained (lo found by halving the
    start point, hi by the cap); Newton steps leaving the bracket are replaced
    by bisection.  Stops once |f1| <= rel_tol * |f2| * lam, i.e. at relative
    accuracy rel_tol.  Returns (root, evaluations).
    """
    evals = 0

    def ev(x):
        nonlocal evals
        evals += 1
        return deriv(x)

    x = min(lam0, hi_cap)
    f1, f2 = ev(x)
    if f1 > 0.0:
        lo, hi = x, hi_cap
    else:
        # probe downward for the lower bracket end; keep iterating from the
        # start point, whose Newton step is the informed guess
        lo, hi = None, x
        probe = x
        while lo is None:
            probe *= 0.5
            if probe < 1e-300:
                raise ArithmeticError("bracketing failed: no positive derivative above 1e-300")
            p1, _ = ev(probe)
            if p1 > 0.0:
                lo = probe
            else:
                hi = probe

    for _ in range(max_iter):
        if abs(f1) <= rel_tol * abs(f2) * x:
            return x, evals
        xn = x - f1 / f2
        if not lo < xn < hi:
            xn = 0.5 * (lo + hi)
        if xn == x:
            return x, evals
        x = xn
        f1, f2 = ev(x)
        if f1 > 0.0:
            lo = x
        else:
            hi = x

    # Iteration cap hit: finish with plain bisection on the bracket.
    for _ in range(200):
        xn = 0.5 * (lo + hi)
        if xn == x or hi - lo <= rel_tol * xn:
            return xn, evals
        x = xn
        f1, f2 = ev(x)
        if abs(f1) <= rel_tol * abs(f2) * x:
            return x, evals
        if f1 > 0.0:
            lo = x
        else:
            hi = x
    return x, evals


def solve_rate_details(r, params: RateControlParams) -> RateSolution:
    """Like solve_rate but reports the branch taken and Newton evaluation count."""
    r = np.asarray(r, dtype=np.float64)
    if not np.isfinite(r).all():
        raise ValueError("regret vector must be finite")
    rmax = float(r.max())
    if rmax >= params.threshold:
        return RateSolution(params.eta, 0, "threshold")
    # f' >= 0 at eta means the unconstrained root is at or above the cap.
    _, f1_eta, _, _ = objective_derivatives(params.eta, r, params)
    if f1_eta >= 0.0:
        return RateSolution(params.eta, 1, "cap")

    def d1d2(lam):
        _, f1, f2, _ = objective_derivatives(lam, r, params)
        return f1, f2

    lam0 = analytic_init(r, params)
    lam, evals = newton_1d(d1d2, lam0, params.eta, params.rel_tol, params.max_iter)
    return RateSolution(min(lam, params.eta), evals + 1, "newton")


def solve_rate(r, params: RateControlParams) -> float:
    """Maximizer of the rate-control objective over (0, eta].

    Equals eta exactly whenever max_k r[k] >= -beta*ln(d)^2 (and more generally
    whenever f'(eta) >= 0); otherwise it is the unique interior root of f',
    solved to relative accuracy rel_tol.
    """
    return solve_rate_details(r, params).lam
