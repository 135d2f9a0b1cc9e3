"""Sampling-based property suites behind `cautious verify`.

Each suite draws seeded samples, evaluates one family of inequalities or
identities, and reports the worst normalized violation (0 when everything
holds).  The same functions back the test suite at smaller sample counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cautious.kernels import (
    ExplicitVertices,
    Hypercube,
    KernelLearner,
    MSet,
    Simplex,
    kdlrc_step,
    kernel_rate_derivatives,
    moment1,
    moment2,
)
from cautious.learners import softmax
from cautious.lifted import (
    bregman,
    bregman_decomposed,
    grad_psi,
    hessian_lower_bound,
    hessian_quadform_fd,
    kl_divergence,
    neg_entropy,
    oftrl_lifted_solve,
    psi,
)
from cautious.rate_control import RateControlParams, objective_derivatives, solve_rate, solve_rate_details

__all__ = ["SuiteResult", "SUITES", "run_suite", "run_suites", "sample_regrets", "bisect_rate_oracle"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    max_violation: float
    samples: int
    note: str = ""

    def row(self) -> str:
        state = "pass" if self.passed else "FAIL"
        return f"{self.name:<18} {state:<5} max violation {self.max_violation:.3e}  ({self.samples} samples{'; ' + self.note if self.note else ''})"


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def sample_regrets(rng, d: int, params: RateControlParams) -> np.ndarray:
    """Regret vectors spanning threshold, cap, and deep interior-root regimes."""
    kind = rng.integers(0, 3)
    if kind == 0:
        # shallow: above or near the threshold
        mx = rng.uniform(params.threshold - 2.0, 10.0)
    elif kind == 1:
        # straddling the threshold
        mx = params.threshold + rng.uniform(-5.0, 5.0)
    else:
        # deep: interior root, spanning lam* from ~1e-4*eta to ~2*eta
        target = params.eta * 10 ** rng.uniform(-4, 0.3)
        mx = -(params.alpha - 1.0) / target
    r = mx - rng.uniform(0.0, abs(mx) + 10.0, d)
    r[rng.integers(0, d)] = mx
    return r


def bisect_rate_oracle(r, params: RateControlParams, iters: int = 200) -> float:
    """Independent bisection solve of the rate problem (no Newton, no threshold)."""

    def f1(lam):
        return objective_derivatives(lam, r, params)[1]

    lo, hi = 1e-14, params.eta
    if f1(hi) >= 0:
        return params.eta
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f1(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _interior_point(rng, d: int) -> np.ndarray:
    x = rng.dirichlet(np.ones(d))
    y = x * rng.uniform(1e-2, 1.0 - 1e-6)
    y = np.maximum(y, 1e-6)
    s = float(y.sum())
    if s > 1.0 - 1e-6:
        y *= (1.0 - 1e-6) / s
    return y


# ---------------------------------------------------------------------------
# rate-control suites


def suite_concavity(samples=1000, seed=0, d=None, eta=1.0, beta=70.0) -> SuiteResult:
    """f'' <= -(alpha - ln^2 d - 1)/lam^2 (up to 1e-9 relative)."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5, 20]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        lam = 10 ** rng.uniform(-4, 0.5)
        r = sample_regrets(rng, dd, p)
        _, _, f2, _ = objective_derivatives(lam, r, p)
        bound = -(p.alpha - p.log_d ** 2 - 1.0) / lam ** 2
        worst = max(worst, (f2 - bound - 1e-9 * abs(f2)) / abs(bound))
    return SuiteResult("concavity", worst <= 0, max(0.0, worst), samples)


def suite_self_concordance(samples=1000, seed=0, d=None, eta=1.0, beta=70.0) -> SuiteResult:
    """(f''')^2 <= -4 f''^3 (up to 1e-6 relative)."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5, 20]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        lam = 10 ** rng.uniform(-4, 0.5)
        r = sample_regrets(rng, dd, p)
        _, _, f2, f3 = objective_derivatives(lam, r, p)
        lhs = f3 * f3
        rhs = -4.0 * f2 ** 3
        worst = max(worst, (lhs - rhs * (1.0 + 1e-6)) / rhs)
    return SuiteResult("self-concordance", worst <= 0, max(0.0, worst), samples)


def suite_stability(samples=10000, seed=0, d=None, eta=None, beta=70.0) -> SuiteResult:
    """Solved rates of regret vectors within ell_inf distance 2 stay within [0.7, 1.4]."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5]
    etas = [eta] if eta else [1.0 / 50, 1.0]
    lo_ratio, hi_ratio = math.inf, -math.inf
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=float(rng.choice(etas)), beta=beta, d=dd)
        spread = 10 ** rng.uniform(0.5, 4.0)
        mx = p.threshold + rng.uniform(-spread, min(spread, -p.threshold))
        r = mx - rng.uniform(0.0, spread, dd)
        r[rng.integers(0, dd)] = mx
        rp = r + rng.uniform(-2.0, 2.0, dd)
        ratio = solve_rate(r, p) / solve_rate(rp, p)
        lo_ratio = min(lo_ratio, ratio)
        hi_ratio = max(hi_ratio, ratio)
    worst = max(0.0, 0.7 - lo_ratio, hi_ratio - 1.4)
    note = f"ratios in [{lo_ratio:.4f}, {hi_ratio:.4f}]"
    return SuiteResult("stability", worst <= 0, worst, samples, note)


def suite_monotonicity(samples=500, seed=0, d=None, eta=1.0 / 50, beta=70.0) -> SuiteResult:
    """The solved rate never decreases as regrets rise: non-decreasing under a
    uniform shift of all regrets and under raising the maximal coordinate.

    (Coordinate-wise monotonicity fails for coordinates far below the max,
    e.g. d=2, r=(-3000,-3300) vs (-3000,-3250); only these two forms hold.)
    """
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        r = sample_regrets(rng, dd, p)
        lam = solve_rate(r, p)
        shift = rng.uniform(0.0, 50.0)
        lam_shift = solve_rate(r + shift, p)
        rp = r.copy()
        rp[int(np.argmax(r))] += rng.uniform(0.0, 50.0)
        lam_top = solve_rate(rp, p)
        # 1e-8 relative allowance for the solver's own tolerance
        worst = max(worst, (lam - lam_shift) / lam - 1e-8, (lam - lam_top) / lam - 1e-8)
    return SuiteResult("monotonicity", worst <= 0, max(0.0, worst), samples)


def suite_lse_sandwich(samples=1000, seed=0, d=None, eta=1.0, beta=70.0) -> SuiteResult:
    """max r <= lse(lam r)/lam <= max r + ln(d)/lam."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5, 20]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        lam = 10 ** rng.uniform(-4, 1)
        r = rng.uniform(-100.0, 100.0, dd)
        f, _, _, _ = objective_derivatives(lam, r, p)
        lse = f - (p.alpha - 1.0) * math.log(lam)
        val = lse / lam
        mx = float(r.max())
        scale = max(1.0, abs(mx))
        worst = max(worst, (mx - val) / scale, (val - mx - p.log_d / lam) / scale)
    return SuiteResult("lse-sandwich", worst <= 1e-12, max(0.0, worst), samples)


def suite_solver(samples=1000, seed=0, d=None, eta=1.0 / 50, beta=70.0) -> SuiteResult:
    """Newton agrees with the bisection oracle to 1e-8 relative, <= 30 evaluations."""
    rng = _rng(seed)
    dims = [d] if d else [2, 5, 20, 100]
    worst = 0.0
    max_evals = 0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        r = sample_regrets(rng, dd, p)
        sol = solve_rate_details(r, p)
        ref = bisect_rate_oracle(r, p)
        worst = max(worst, abs(sol.lam - ref) / ref - 1e-8)
        max_evals = max(max_evals, sol.newton_iters)
    passed = worst <= 0 and max_evals <= 30
    return SuiteResult("solver", passed, max(0.0, worst), samples, f"max evals {max_evals}")


# ---------------------------------------------------------------------------
# lifted-geometry suites


def suite_spectral(samples=1000, seed=0, d=None, eta=1.0 / 50, beta=70.0) -> SuiteResult:
    """psi gradient matches finite differences; Hessian quadratic forms dominate
    the diagonal bound."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        y = _interior_point(rng, dd)
        g = grad_psi(y, p)
        fd = np.empty(dd)
        for k in range(dd):
            h = 1e-5 * max(y[k], 1e-3)
            h = min(h, 0.5 * y[k], 0.5 * (1.0 - float(y.sum())) + 1e-12)
            e = np.zeros(dd)
            e[k] = h
            fd[k] = (psi(y + e, p) - psi(y - e, p)) / (2 * h)
        worst = max(worst, float(np.abs(g - fd).max() / np.abs(fd).max()) - 1e-6)
        v = rng.uniform(-1.0, 1.0, dd)
        quad = hessian_quadform_fd(y, v, p)
        bound = hessian_lower_bound(y, v, p)
        worst = max(worst, (bound * (1.0 - 1e-4) - quad) / bound)
    return SuiteResult("spectral", worst <= 0, max(0.0, worst), samples)


def suite_bregman(samples=1000, seed=0, d=None, eta=1.0 / 50, beta=70.0) -> SuiteResult:
    """Dual-path agreement, nonnegativity, and both curvature lower bounds."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        y = _interior_point(rng, dd)
        z = _interior_point(rng, dd)
        a = bregman(y, z, p)
        b = bregman_decomposed(y, z, p)
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-12) - 1e-9)
        worst = max(worst, -a)
        # curvature in the lifted space
        lifted_bound = float(np.abs(y - z).sum()) ** 2 / (2.0 * p.eta)
        if lifted_bound > 0:
            worst = max(worst, (lifted_bound * (1.0 - 1e-9) - a) / lifted_bound)
        # curvature in the action simplex under the sum-ratio constraint
        omega = rng.uniform(0.62, 1.38)
        z2 = z * min(omega * float(y.sum()) / float(z.sum()), (1.0 - 1e-6) / float(z.sum()))
        omega_eff = float(z2.sum()) / float(y.sum())
        eps = abs(omega_eff - 1.0)
        if 0 < eps < 0.4:
            x = y / y.sum()
            theta = z2 / z2.sum()
            lhs = p.eta * bregman(z2, y, p)
            rhs = 0.25 * (1.0 - eps) * float(np.abs(theta - x).sum()) ** 2
            if rhs > 0:
                worst = max(worst, (rhs * (1.0 - 1e-9) - lhs) / rhs)
        # information inequalities behind the curvature bound: Pinsker, and the
        # entropy-difference bound h(T) + T ln(d-1) at T = half the l1 distance
        # (the plain ln(d) sqrt(2 KL) form fails near the boundary for d=2)
        pp = rng.dirichlet(np.ones(dd)) + 1e-9
        qq = rng.dirichlet(np.ones(dd)) + 1e-9
        pp /= pp.sum()
        qq /= qq.sum()
        kl = kl_divergence(pp, qq)
        tv = 0.5 * float(np.abs(pp - qq).sum())
        worst = max(worst, (2.0 * tv) ** 2 - 2.0 * kl - 1e-12)
        tc = min(tv, 1.0 - 1.0 / dd)
        h_tc = 0.0 if tc == 0.0 else -tc * math.log(tc) - (1 - tc) * math.log(1 - tc)
        ent_bound = h_tc + tc * math.log(dd - 1)
        worst = max(worst, abs(neg_entropy(pp) - neg_entropy(qq)) - ent_bound - 1e-12)
    return SuiteResult("bregman", worst <= 0, max(0.0, worst), samples)


def suite_viewpoints(samples=100, seed=0, d=None, eta=1.0 / 50, beta=70.0) -> SuiteResult:
    """lam*softmax(lam*r) from the rate solver matches the block-coordinate oracle."""
    rng = _rng(seed)
    dims = [d] if d else [2, 3, 5]
    worst = 0.0
    for _ in range(samples):
        dd = int(rng.choice(dims))
        p = RateControlParams(eta=eta, beta=beta, d=dd)
        r = sample_regrets(rng, dd, p)
        lam = solve_rate(r, p)
        y = lam * softmax(lam * r)
        y_oracle = oftrl_lifted_solve(r, p)
        worst = max(worst, float(np.abs(y - y_oracle).sum()) - 1e-6)
    return SuiteResult("viewpoints", worst <= 0, max(0.0, worst), samples)


# ---------------------------------------------------------------------------
# kernel suites


def _brute_kernel(poly, x1, x2):
    """Enumerated kernel value plus the absolute mass of its terms.

    Signed inputs make the vertex sum cancel, so comparisons are scaled by the
    absolute mass (the sum's conditioning), not the net value.
    """
    V = poly.vertices()
    prod = np.asarray(x1) * np.asarray(x2)
    terms = np.where(V == 1.0, prod[None, :], 1.0).prod(axis=1)
    return float(terms.sum()), float(np.abs(terms).sum())


def _brute_moments(poly, b):
    V = poly.vertices()
    w = np.where(V == 1.0, np.asarray(b)[None, :], 1.0).prod(axis=1)
    chi = w / w.sum()
    return chi @ V, (V * chi[:, None]).T @ V


def suite_kernel(samples=50, seed=0, d=None, eta=1.0 / 50, beta=70.0) -> SuiteResult:
    """Closed-form kernels vs enumeration, moments vs brute force, the simplex
    reduction to the coordinate objective, and the evaluation budget."""
    rng = _rng(seed)
    worst = 0.0
    big = [Hypercube(12), MSet(10, 4)] if d is None else [Hypercube(min(d, 12)), MSet(max(d, 3), 2)]
    for poly in big:
        for _ in range(samples):
            x1 = rng.uniform(-1.5, 1.5, poly.d)
            x2 = rng.uniform(-1.5, 1.5, poly.d)
            a = poly.kernel(x1, x2)
            b, mass = _brute_kernel(poly, x1, x2)
            worst = max(worst, abs(a - b) / max(mass, 1e-30) - 1e-9)
    small = [Simplex(5), Hypercube(3), MSet(5, 2),
             ExplicitVertices([[1, 0, 1], [0, 1, 1], [1, 1, 0], [0, 0, 1]])]
    for poly in small:
        for _ in range(samples):
            b = np.exp(rng.uniform(-3.0, 3.0, poly.d))
            m1 = moment1(poly, b)
            m2 = moment2(poly, b)
            e1, e2 = _brute_moments(poly, b)
            worst = max(worst, float(np.abs(m1 - e1).max()) - 1e-12)
            worst = max(worst, float(np.abs(m2 - e2).max()) - 1e-12)
            worst = max(worst, float(np.abs(m2 - m2.T).max()) - 1e-15)
            eig = float(np.linalg.eigvalsh((m2 + m2.T) / 2).min())
            worst = max(worst, -eig - 1e-10)
    # simplex reduction: vertex-space derivatives equal the coordinate objective
    poly = Simplex(5)
    pp = RateControlParams(eta=eta, beta=beta, d=5)
    for _ in range(samples):
        mu = rng.uniform(-50.0, 5.0, 5)
        sigma = float(rng.uniform(-10.0, 10.0))
        lam = 10 ** rng.uniform(-3, 0)
        f1k, f2k = kernel_rate_derivatives(lam, mu, sigma, poly, pp)
        _, f1, f2, _ = objective_derivatives(lam, mu + sigma, pp)
        scale = max(abs(f1), abs(f2), 1.0)
        worst = max(worst, abs(f1k - f1) / scale - 1e-9, abs(f2k - f2) / scale - 1e-9)
    # budget: one step costs (d+1) plays plus (d^2+1) per Newton evaluation
    poly = Hypercube(3)
    kl = KernelLearner(poly, eta=eta, beta=beta)
    poly.reset_calls()
    for t in range(30):
        kdlrc_step(kl, rng.uniform(-1.0, 1.0, 3))
    expected = kl.rounds_played * (poly.d + 1) + kl.total_newton_evals * (poly.d ** 2 + 1)
    worst = max(worst, float(abs(poly.kernel_calls - expected)))
    return SuiteResult("kernel", worst <= 0, max(0.0, worst), samples)


SUITES = {
    "concavity": suite_concavity,
    "self-concordance": suite_self_concordance,
    "stability": suite_stability,
    "monotonicity": suite_monotonicity,
    "lse": suite_lse_sandwich,
    "solver": suite_solver,
    "spectral": suite_spectral,
    "bregman": suite_bregman,
    "viewpoints": suite_viewpoints,
    "kernel": suite_kernel,
}


def run_suite(name: str, **kwargs) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(sorted(SUITES))}, all")
    return SUITES[name](**kwargs)


def run_suites(names, **kwargs) -> list[SuiteResult]:
    return [run_suite(name, **kwargs) for name in names]
