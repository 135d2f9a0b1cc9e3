"""0/1-polyhedral feature maps, kernels, moments, and the kernelized learner.

A polytope here is a convex set whose vertices are 0/1 vectors.  The feature
map phi sends x to the vector of products prod_{k: v[k]=1} x[k] over vertices
v, and the kernel K(x1, x2) = <phi(x1), phi(x2)>.  Playing multiplicative
weights over the (possibly exponential) vertex set reduces to d+1 kernel
evaluations per round, and each Newton step of the rate solver to d^2+1.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from cautious.rate_control import RateControlParams, newton_1d

__all__ = [
    "Polytope",
    "Simplex",
    "Hypercube",
    "MSet",
    "ExplicitVertices",
    "make_polytope",
    "kernel",
    "moment1",
    "moment2",
    "kernel_rate_derivatives",
    "KernelLearner",
    "kdlrc_step",
]

_ENUM_LIMIT = 1 << 20


class Polytope:
    """Base class: a 0/1-polytope with a counted kernel evaluation contract."""

    d: int
    uniform_degree: int | None = None  # common vertex support size, if any

    def __init__(self):
        self.kernel_calls = 0

    def reset_calls(self) -> None:
        self.kernel_calls = 0

    def kernel(self, x1, x2) -> float:
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        if x1.shape != (self.d,) or x2.shape != (self.d,):
            raise ValueError(f"kernel arguments must have shape ({self.d},)")
        self.kernel_calls += 1
        return self._kernel(x1 * x2)

    def _kernel(self, p: np.ndarray) -> float:
        raise NotImplementedError

    @property
    def num_vertices(self) -> int:
        raise NotImplementedError

    def vertices(self) -> np.ndarray:
        """Dense 0/1 vertex matrix; only for enumeration-sized instances."""
        raise NotImplementedError

    def linear_max(self, mu) -> float:
        """max over vertices of <mu, v>, computed greedily (no kernel calls)."""
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__


class Simplex(Polytope):
    """Vertices are the d basis vectors."""

    def __init__(self, d: int):
        super().__init__()
        if d < 2:
            raise ValueError("simplex needs d >= 2")
        self.d = int(d)
        self.uniform_degree = 1

    def _kernel(self, p):
        return float(p.sum())

    @property
    def num_vertices(self):
        return self.d

    def vertices(self):
        return np.eye(self.d)

    def linear_max(self, mu):
        return float(np.max(mu))

    def describe(self):
        return f"Simplex(d={self.d})"


class Hypercube(Polytope):
    """Vertices are all 2^d binary vectors; K(x1, x2) = prod_k (1 + x1[k] x2[k])."""

    def __init__(self, d: int):
        super().__init__()
        if d < 1:
            raise ValueError("hypercube needs d >= 1")
        self.d = int(d)

    def _kernel(self, p):
        return float(np.prod(1.0 + p))

    @property
    def num_vertices(self):
        return 1 << self.d

    def vertices(self):
        if self.num_vertices > _ENUM_LIMIT:
            raise ValueError("hypercube too large to enumerate")
        return np.indices((2,) * self.d).reshape(self.d, -1).T.astype(np.float64)

    def linear_max(self, mu):
        return float(np.sum(np.maximum(np.asarray(mu), 0.0)))

    def describe(self):
        return f"Hypercube(d={self.d})"


class MSet(Polytope):
    """Vertices are the binary vectors with exactly m ones (choose-m sets).

    The kernel is the elementary symmetric polynomial e_m of the coordinate
    products, evaluated by the standard degree-m dynamic program.
    """

    def __init__(self, d: int, m: int):
        super().__init__()
        if not 1 <= m <= d - 1:
            raise ValueError("m-set needs 1 <= m <= d-1 (at least two vertices)")
        self.d = int(d)
        self.m = int(m)
        self.uniform_degree = self.m

    def _kernel(self, p):
        dp = np.zeros(self.m + 1)
        dp[0] = 1.0
        for pk in p:
            for j in range(self.m, 0, -1):
                dp[j] += dp[j - 1] * pk
        return float(dp[self.m])

    @property
    def num_vertices(self):
        return math.comb(self.d, self.m)

    def vertices(self):
        if self.num_vertices > _ENUM_LIMIT:
            raise ValueError("m-set too large to enumerate")
        out = np.zeros((self.num_vertices, self.d))
        for row, idx in enumerate(combinations(range(self.d), self.m)):
            out[row, list(idx)] = 1.0
        return out

    def linear_max(self, mu):
        mu = np.asarray(mu, dtype=np.float64)
        return float(np.sort(mu)[::-1][: self.m].sum())

    def describe(self):
        return f"MSet(d={self.d}, m={self.m})"


class ExplicitVertices(Polytope):
    """A polytope given by an explicit, duplicate-free list of 0/1 vertices."""

    def __init__(self, vertices):
        super().__init__()
        V = np.asarray(vertices, dtype=np.float64)
        if V.ndim != 2 or V.shape[0] < 2:
            raise ValueError("need a 2-D array with at least two vertices")
        if not np.isin(V, (0.0, 1.0)).all():
            raise ValueError("vertices must be 0/1 vectors")
        if len({tuple(row) for row in V.astype(int)}) != V.shape[0]:
            raise ValueError("vertex list has duplicates")
        self._V = V
        self._mask = V == 1.0
        self.d = V.shape[1]
        degrees = V.sum(axis=1).astype(int)
        self.uniform_degree = int(degrees[0]) if (degrees == degrees[0]).all() else None

    def _kernel(self, p):
        return float(np.where(self._mask, p[None, :], 1.0).prod(axis=1).sum())

    @property
    def num_vertices(self):
        return self._V.shape[0]

    def vertices(self):
        return self._V.copy()

    def linear_max(self, mu):
        return float(np.max(self._V @ np.asarray(mu, dtype=np.float64)))

    def describe(self):
        return f"ExplicitVertices({self.num_vertices} vertices, d={self.d})"


def make_polytope(variant: str, d: int, m: int | None = None) -> Polytope:
    variant = variant.lower()
    if variant == "simplex":
        return Simplex(d)
    if variant == "hypercube":
        return Hypercube(d)
    if variant == "mset":
        if m is None:
            raise ValueError("mset needs m")
        return MSet(d, m)
    raise ValueError(f"unsupported polytope {variant!r}; choose simplex, hypercube, or mset")


def kernel(polytope: Polytope, x1, x2) -> float:
    return polytope.kernel(x1, x2)


def _ones_masked(d: int, zero_at) -> np.ndarray:
    e = np.ones(d)
    e[list(zero_at)] = 0.0
    return e


def moment1(polytope: Polytope, b) -> np.ndarray:
    """Mean vertex E[v] under the distribution chi[v] ~ prod_{k in v} b[k].

    E[v]_i = 1 - K(b, ones_without_i) / K(b, ones); d+1 kernel evaluations.
    """
    b = np.asarray(b, dtype=np.float64)
    d = polytope.d
    k_all = polytope.kernel(b, np.ones(d))
    return np.array([1.0 - polytope.kernel(b, _ones_masked(d, (i,))) / k_all for i in range(d)])


def moment2(polytope: Polytope, b) -> np.ndarray:
    """Second moment matrix E[v v'] under the same vertex distribution.

    Off-diagonal entries come from inclusion-exclusion over the events
    {i not in v}, {j not in v}:

        E[v_i v_j] = 1 - K(e_i)/K - K(e_j)/K + K(e_ij)/K

    and the diagonal is E[v_i^2] = E[v_i] since v is 0/1.  Uses
    1 + d + d*(d-1) kernel evaluations.
    """
    b = np.asarray(b, dtype=np.float64)
    d = polytope.d
    ones = np.ones(d)
    k_all = polytope.kernel(b, ones)
    k_i = np.array([polytope.kernel(b, _ones_masked(d, (i,))) for i in range(d)]) / k_all
    out = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            if i == j:
                out[i, i] = 1.0 - k_i[i]
            else:
                k_ij = polytope.kernel(b, _ones_masked(d, (i, j))) / k_all
                out[i, j] = 1.0 - k_i[i] - k_i[j] + k_ij
    return out


def _embedding(polytope: Polytope, lam: float, mu: np.ndarray) -> np.ndarray:
    """b[k] = exp(lam * mu[k]), max-shifted when the shift cancels exactly.

    For polytopes whose vertices share a support size the common factor
    exp(-lam * max(mu) * degree) cancels in every kernel ratio, so the shift
    is free overflow protection.  Otherwise b is used as is, which is safe
    whenever lam * |mu| stays within floating-point exp range.
    """
    if polytope.uniform_degree is not None:
        return np.exp(lam * (mu - mu.max()))
    return np.exp(lam * mu)


def _moments(polytope: Polytope, b: np.ndarray):
    """E[v] and E[vv'] sharing kernel calls: exactly d^2 + 1 evaluations."""
    d = polytope.d
    k_all = polytope.kernel(b, np.ones(d))
    k_i = np.array([polytope.kernel(b, _ones_masked(d, (i,))) for i in range(d)]) / k_all
    ev = 1.0 - k_i
    evv = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            if i == j:
                evv[i, i] = ev[i]
            else:
                k_ij = polytope.kernel(b, _ones_masked(d, (i, j))) / k_all
                evv[i, j] = 1.0 - k_i[i] - k_i[j] + k_ij
    return ev, evv


def kernel_rate_derivatives(lam: float, mu, sigma: float, polytope: Polytope,
                            params: RateControlParams):
    """First and second derivative of the vertex-space rate objective at lam.

    The vertex regrets are R[v] = <mu, v> + sigma, so with moments of the
    induced vertex distribution:

        f'  = mu' E[v] + sigma + (alpha - 1)/lam
        f'' = mu' E[vv'] mu - (mu' E[v])^2 - (alpha - 1)/lam^2

    `params.d` must be the vertex count of the polytope.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    mu = np.asarray(mu, dtype=np.float64)
    b = _embedding(polytope, lam, mu)
    ev, evv = _moments(polytope, b)
    mean = float(mu @ ev)
    a1 = params.alpha - 1.0
    f1 = mean + sigma + a1 / lam
    f2 = float(mu @ evv @ mu) - mean * mean - a1 / (lam * lam)
    return f1, f2


def vertex_params(polytope: Polytope, eta: float, beta: float = 70.0,
                  rel_tol: float = 1e-10, max_iter: int = 100) -> RateControlParams:
    """Rate-control parameters with the vertex count as the action count."""
    return RateControlParams(eta=eta, beta=beta, d=polytope.num_vertices,
                             rel_tol=rel_tol, max_iter=max_iter)


class KernelLearner:
    """Adaptive-rate multiplicative weights over a 0/1-polytope via its kernel.

    Plays x_t in the polytope whose coordinates are vertex-mean marginals; the
    rate is solved by warm-started Newton whose derivatives come from kernel
    moments.  All state is in coordinate space (size d), never vertex space.
    """

    def __init__(self, polytope: Polytope, eta: float, beta: float = 70.0,
                 rel_tol: float = 1e-10, max_iter: int = 100):
        self.polytope = polytope
        self.params = vertex_params(polytope, eta, beta, rel_tol, max_iter)
        d = polytope.d
        self.mu_cum = np.zeros(d)       # sum of observed utility vectors
        self.sigma_cum = 0.0            # -(sum of realized utilities)
        self.nu_prev = np.zeros(d)
        self.x_prev = np.zeros(d)
        self.lambda_prev = eta
        self.lambda_t = None
        self.x_t = None
        self.t = 1
        self.rounds_played = 0
        self.total_newton_evals = 0
        self.last_newton_evals = 0

    def _solve_lambda(self, mu, sigma) -> float:
        params = self.params
        r_max = self.polytope.linear_max(mu) + sigma
        if r_max >= params.threshold:
            self.last_newton_evals = 0
            return params.eta

        def deriv(lam):
            return kernel_rate_derivatives(lam, mu, sigma, self.polytope, params)

        evals = 1
        f1_eta, _ = deriv(params.eta)
        if f1_eta >= 0.0:
            self.last_newton_evals = evals
            return params.eta
        warm = min(max(self.lambda_prev, 1e-300), params.eta)
        try:
            lam, used = newton_1d(deriv, warm, params.eta, params.rel_tol, params.max_iter)
        except ArithmeticError:
            lam, used = self._dense_bisect(deriv, params.eta, params.rel_tol)
        self.last_newton_evals = evals + used
        return min(lam, params.eta)

    @staticmethod
    def _dense_bisect(deriv, eta, rel_tol, grid_size: int = 200):
        """Fallback: locate a sign change of f' on a log-spaced grid, then bisect."""
        grid = np.logspace(-12, math.log10(eta), grid_size)
        evals = 0
        prev_lam, prev_sign = None, None
        for lam in grid:
            f1, _ = deriv(lam)
            evals += 1
            sign = f1 > 0
            if prev_sign is True and not sign:
                lo, hi = prev_lam, lam
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    f1m, _ = deriv(mid)
                    evals += 1
                    if f1m > 0:
                        lo = mid
                    else:
                        hi = mid
                    if hi - lo <= rel_tol * mid:
                        break
                return 0.5 * (lo + hi), evals
            prev_lam, prev_sign = lam, sign
        raise ArithmeticError("no sign change of f' found on (0, eta]")

    def play(self) -> np.ndarray:
        """Choose the round-t point; d+1 kernel evaluations plus the rate solve."""
        mu = self.mu_cum + self.nu_prev
        sigma = self.sigma_cum - float(np.dot(self.nu_prev, self.x_prev))
        lam = self._solve_lambda(mu, sigma)
        b = _embedding(self.polytope, lam, mu)
        d = self.polytope.d
        k_all = self.polytope.kernel(b, np.ones(d))
        x = np.array([
            1.0 - self.polytope.kernel(b, _ones_masked(d, (i,))) / k_all for i in range(d)
        ])
        self.lambda_t = lam
        self.x_t = x
        self.total_newton_evals += self.last_newton_evals
        self.rounds_played += 1
        return x

    def observe(self, nu) -> None:
        if self.x_t is None:
            raise RuntimeError("observe() before play()")
        nu = np.asarray(nu, dtype=np.float64)
        if nu.shape != (self.polytope.d,):
            raise ValueError("utility vector has wrong shape")
        self.mu_cum = self.mu_cum + nu
        self.sigma_cum -= float(np.dot(nu, self.x_t))
        self.nu_prev = nu
        self.x_prev = self.x_t
        self.lambda_prev = self.lambda_t
        self.t += 1


def kdlrc_step(learner: KernelLearner, nu) -> np.ndarray:
    """One full round against a scripted utility vector: play, then observe `nu`."""
    x = learner.play()
    learner.observe(nu)
    return x
