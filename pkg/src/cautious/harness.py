"""Simulation harness: self-play and adversarial runs, metrics logging, and the
theorem-level inequality checks evaluated on the resulting logs."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from cautious.games import NormalFormGame, gradient_utility
from cautious.learners import Learner
from cautious.rate_control import RateControlParams, default_eta

__all__ = [
    "MetricsLog",
    "InequalityCheck",
    "self_play",
    "adversarial_run",
    "check_rvu_bound",
    "check_path_length",
    "check_regret_ceiling",
    "check_selfplay_safeguard_quiet",
    "cce_gap",
    "geometric_checkpoints",
    "write_metrics_csv",
    "parallel_map",
    "ADVERSARIES",
]

_EMPIRICAL_LIMIT = 4096  # joint-profile tensor tracked only at desk scale

CSV_HEADER = "t,player,regret,pos_regret,lambda,path_len_sq,util_var_sq,exp_util"


@dataclass
class MetricsLog:
    """Per-round, per-player record of one run.

    Column conventions (0-based round index t = 0..T-1):
      lam[t, i]          rate used by player i in round t+1
      regret[t, i]       external regret of player i after t+1 rounds
      exp_util[t, i]     realized expected utility in round t+1
      path_len_sq[t, i]  ||x^{t+2} - x^{t+1}||_1^2   (length T-1)
      util_var_sq[t, i]  ||nu^{t+2} - nu^{t+1}||_inf^2 (length T-1)

    The two difference columns cover exactly the T-1 consecutive transitions
    that the theorem sums run over; the transition out of the final round does
    not exist and is not logged.
    """

    algo: str
    T: int
    n: int
    actions: tuple[int, ...]
    eta: float
    beta: float
    seed: int
    smoothness: float
    safeguard: bool
    lam: np.ndarray
    regret: np.ndarray
    exp_util: np.ndarray
    path_len_sq: np.ndarray
    util_var_sq: np.ndarray
    x_hist: np.ndarray
    nu_hist: np.ndarray
    empirical: np.ndarray | None = None
    switch_rounds: list = field(default_factory=list)
    game_name: str = ""
    unbounded_utility: bool = False  # warning: some ||nu||_inf exceeded 1

    @property
    def pos_regret(self) -> np.ndarray:
        return np.maximum(self.regret, 0.0)

    def params_for(self, player: int) -> RateControlParams:
        return RateControlParams(eta=self.eta, beta=self.beta, d=self.actions[player])

    def player_strategies(self, player: int) -> np.ndarray:
        return self.x_hist[:, player, : self.actions[player]]

    def player_utilities(self, player: int) -> np.ndarray:
        return self.nu_hist[:, player, : self.actions[player]]


@dataclass(frozen=True)
class InequalityCheck:
    """Outcome of one theorem inequality: rows of (label, lhs, rhs)."""

    name: str
    rows: tuple

    @property
    def passed(self) -> bool:
        return all(lhs <= rhs for _, lhs, rhs in self.rows)

    @property
    def min_slack(self) -> float:
        return min(rhs - lhs for _, lhs, rhs in self.rows)

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {state} (min slack {self.min_slack:.6g} over {len(self.rows)} rows)"


def geometric_checkpoints(T: int) -> list[int]:
    """Powers of 10 up to T, with T itself always included."""
    pts = []
    p = 10
    while p < T:
        pts.append(p)
        p *= 10
    pts.append(T)
    return pts


# ---------------------------------------------------------------------------
# self-play


def _selfplay_numpy(game, algo, T, eta, beta, smoothness, safeguard, rel_tol, track_emp):
    n = game.n
    dmax = max(game.actions)
    learners = [
        Learner(
            RateControlParams(eta=eta, beta=beta, d=game.actions[i], rel_tol=rel_tol),
            mode=algo,
            safeguard=safeguard,
            n_players=n,
            smoothness=smoothness,
        )
        for i in range(n)
    ]
    lam = np.zeros((T, n))
    regret = np.zeros((T, n))
    exp_util = np.zeros((T, n))
    path = np.zeros((max(T - 1, 0), n))
    var = np.zeros((max(T - 1, 0), n))
    x_hist = np.zeros((T, n, dmax))
    nu_hist = np.zeros((T, n, dmax))
    emp = np.zeros(game.num_profiles) if track_emp else None
    profile = [None] * n
    for t in range(T):
        for i, ln in enumerate(learners):
            profile[i] = ln.next_strategy()
            lam[t, i] = ln.lambda_t
            x_hist[t, i, : game.actions[i]] = profile[i]
        if emp is not None:
            joint = profile[0]
            for i in range(1, n):
                joint = np.multiply.outer(joint, profile[i])
            emp += joint.ravel()
        for i, ln in enumerate(learners):
            nu = gradient_utility(game, profile, i, validate=False)
            nu_hist[t, i, : game.actions[i]] = nu
            exp_util[t, i] = float(np.dot(nu, profile[i]))
            ln.observe(nu)
            regret[t, i] = float(ln.U.max())
            if t > 0:
                path[t - 1, i] = float(np.abs(x_hist[t, i] - x_hist[t - 1, i]).sum()) ** 2
                var[t - 1, i] = float(np.abs(nu_hist[t, i] - nu_hist[t - 1, i]).max()) ** 2
    if emp is not None:
        emp /= T
    return lam, regret, exp_util, path, var, x_hist, nu_hist, emp, [
        ln.switch_round for ln in learners
    ], any(ln.unbounded_utility_seen for ln in learners)


def _selfplay_jit(game, algo, T, eta, beta, smoothness, rel_tol, track_emp):
    from cautious._fast import MODE_CODES, run_selfplay

    n = game.n
    dmax = max(game.actions)
    dims = np.asarray(game.actions, dtype=np.int64)
    payoffs = np.concatenate([t.ravel(order="C") for t in game.payoffs])
    offsets = np.arange(n, dtype=np.int64) * game.num_profiles
    alphas = np.empty(n)
    thresholds = np.empty(n)
    for i in range(n):
        p = RateControlParams(eta=eta, beta=beta, d=game.actions[i])
        alphas[i] = p.alpha
        thresholds[i] = p.threshold
    lam = np.zeros((T, n))
    regret = np.zeros((T, n))
    exp_util = np.zeros((T, n))
    path = np.zeros((max(T - 1, 0), n))
    var = np.zeros((max(T - 1, 0), n))
    x_hist = np.zeros((T, n, dmax))
    nu_hist = np.zeros((T, n, dmax))
    emp = np.zeros(game.num_profiles if track_emp else 1)
    run_selfplay(
        payoffs, offsets, dims, T, eta, alphas, thresholds, MODE_CODES[algo], rel_tol,
        100, x_hist, nu_hist, lam, regret, exp_util, path, var, emp, track_emp,
    )
    emp = emp / T if track_emp else None
    return lam, regret, exp_util, path, var, x_hist, nu_hist, emp, [None] * n, False


def self_play(game: NormalFormGame, algo: str = "dlrc", T: int = 1000, eta: float | None = None,
              beta: float = 70.0, seed: int = 0, smoothness: float = 1.0,
              safeguard: bool = False, rel_tol: float = 1e-10,
              engine: str = "auto") -> MetricsLog:
    """Run all players of `game` under the same learner for T rounds.

    The dynamics are deterministic; `seed` is recorded so a log can be traced
    back to the instance generator that produced `game`.  engine "auto" uses
    the compiled loop when available (safeguarded runs always use the plain
    one, which carries the switching logic).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if algo not in ("dlrc", "omwu", "mwu"):
        raise ValueError("algo must be dlrc, omwu, or mwu")
    if eta is None:
        eta = default_eta(game.n, smoothness)
    track_emp = game.num_profiles <= _EMPIRICAL_LIMIT
    use_jit = engine == "jit"
    if engine == "auto" and not safeguard:
        try:
            import cautious._fast  # noqa: F401

            use_jit = True
        except ImportError:
            use_jit = False
    if use_jit and safeguard:
        raise ValueError("the compiled engine does not implement the safeguard switch")
    if use_jit:
        out = _selfplay_jit(game, algo, T, eta, beta, smoothness, rel_tol, track_emp)
    else:
        out = _selfplay_numpy(game, algo, T, eta, beta, smoothness, safeguard, rel_tol, track_emp)
    lam, regret, exp_util, path, var, x_hist, nu_hist, emp, switches, unbounded = out
    return MetricsLog(
        algo=algo, T=T, n=game.n, actions=game.actions, eta=eta, beta=beta, seed=seed,
        smoothness=smoothness, safeguard=safeguard, lam=lam, regret=regret,
        exp_util=exp_util, path_len_sq=path, util_var_sq=var, x_hist=x_hist,
        nu_hist=nu_hist, empirical=emp, switch_rounds=switches, game_name=game.name,
        unbounded_utility=unbounded,
    )


# ---------------------------------------------------------------------------
# theorem checks


def check_rvu_bound(log: MetricsLog) -> InequalityCheck:
    """Nonnegative RVU inequality at every geometric checkpoint, per player:

        max{0, Reg^T'} <= 3 + (alpha ln T' + ln d)/eta
                          + 6 eta sum_{t<T'} ||nu^{t+1}-nu^t||_inf^2
                          - 1/(24 eta) sum_{t<T'} ||x^{t+1}-x^t||_1^2
    """
    rows = []
    eta = log.eta
    cum_var = np.vstack([np.zeros(log.n), np.cumsum(log.util_var_sq, axis=0)])
    cum_path = np.vstack([np.zeros(log.n), np.cumsum(log.path_len_sq, axis=0)])
    for ck in geometric_checkpoints(log.T):
        for i in range(log.n):
            p = log.params_for(i)
            lhs = max(0.0, float(log.regret[ck - 1, i]))
            rhs = (
                3.0
                + (p.alpha * math.log(ck) + p.log_d) / eta
                + 6.0 * eta * float(cum_var[ck - 1, i])
                - float(cum_path[ck - 1, i]) / (24.0 * eta)
            )
            rows.append((f"T={ck} player={i}", lhs, rhs))
    return InequalityCheck("nonnegative-rvu", tuple(rows))


def check_path_length(log: MetricsLog) -> InequalityCheck:
    """Total squared path length against 144 n eta + 48 sum_i (alpha_i ln T + ln d_i)."""
    lhs = float(log.path_len_sq.sum())
    rhs = 144.0 * log.n * log.eta
    for i in range(log.n):
        p = log.params_for(i)
        rhs += 48.0 * (p.alpha * math.log(log.T) + p.log_d)
    return InequalityCheck("path-length", ((f"T={log.T}", lhs, rhs),))


def check_regret_ceiling(log: MetricsLog, checkpoints=None) -> InequalityCheck:
    """Per-player regret against 6 + max{50 + 12 sqrt2 L n, 24 sqrt2 L n}(alpha ln T + ln d)."""
    rows = []
    factor = max(
        50.0 + 12.0 * math.sqrt(2.0) * log.smoothness * log.n,
        24.0 * math.sqrt(2.0) * log.smoothness * log.n,
    )
    for ck in checkpoints or geometric_checkpoints(log.T):
        for i in range(log.n):
            p = log.params_for(i)
            lhs = float(log.regret[ck - 1, i])
            rhs = 6.0 + factor * (p.alpha * math.log(ck) + p.log_d)
            rows.append((f"T={ck} player={i}", lhs, rhs))
    return InequalityCheck("regret-ceiling", tuple(rows))


def check_selfplay_safeguard_quiet(log: MetricsLog) -> InequalityCheck:
    """In conforming self-play the utility-variation budget is never exceeded."""
    if log.T < 2:
        return InequalityCheck("selfplay-safeguard-quiet", (("T<2", 0.0, 1.0),))
    rows = []
    cum_var = np.cumsum(log.util_var_sq, axis=0)
    t_arr = np.arange(2, log.T + 1)  # variation through nu^t vs the budget at t
    ln2 = (log.smoothness * log.n) ** 2
    for i in range(log.n):
        p = log.params_for(i)
        rhs = 144.0 * ln2 * log.eta + 48.0 * ln2 * (p.alpha * np.log(t_arr) + p.log_d)
        margin = rhs - cum_var[:, i]
        worst = int(np.argmin(margin))
        rows.append(
            (f"player={i} worst t={t_arr[worst]}", float(cum_var[worst, i]), float(rhs[worst]))
        )
    return InequalityCheck("selfplay-safeguard-quiet", tuple(rows))


def cce_gap(log: MetricsLog, game: NormalFormGame | None = None, check_tol: float = 1e-10) -> float:
    """Equilibrium gap max_i Reg_i^T / T of the empirical distribution of play.

    When the joint-profile tensor was tracked and the game is supplied, the
    deviation gap of the empirical distribution is computed independently from
    that tensor and must agree to `check_tol`.
    """
    gap = float(log.regret[-1].max()) / log.T
    if game is not None and log.empirical is not None:
        sigma = log.empirical.reshape(game.actions)
        worst = -math.inf
        for i in range(game.n):
            base = float((sigma * game.payoffs[i]).sum())
            others = sigma.sum(axis=i)  # marginal over everyone but i
            payoff_i_first = np.moveaxis(game.payoffs[i], i, 0)
            for k in range(game.actions[i]):
                worst = max(worst, float((payoff_i_first[k] * others).sum()) - base)
        if abs(worst - gap) > check_tol:
            raise AssertionError(
                f"empirical deviation gap {worst!r} disagrees with max regret/T {gap!r}"
            )
    return gap


# ---------------------------------------------------------------------------
# adversarial runs


def _adv_alternating(d):
    base = np.array([1.0 if k % 2 == 0 else -1.0 for k in range(d)])

    def nu(t, x, rng):
        return base if t % 2 == 0 else -base

    return nu


def _adv_best_response(d):
    def nu(t, x, rng):
        out = np.full(d, -1.0)
        out[int(np.argmin(x))] = 1.0
        return out

    return nu


def _adv_random(d):
    def nu(t, x, rng):
        return rng.uniform(-1.0, 1.0, d)

    return nu


ADVERSARIES = {
    "alternating": _adv_alternating,
    "best_response": _adv_best_response,
    "random": _adv_random,
}


def adversarial_run(d: int, adversary: str = "alternating", T: int = 1000,
                    eta: float | None = None, beta: float = 70.0, seed: int = 0,
                    algo: str = "dlrc", safeguard: bool = True, n_bound: int = 1,
                    smoothness: float = 1.0, rel_tol: float = 1e-10) -> MetricsLog:
    """Single learner against a scripted adversary, safeguard enabled by default.

    `n_bound` is the player count the safeguard budget assumes (a lone learner
    uses 1).  Returns a one-player MetricsLog whose switch_rounds records the
    round from which the safeguard took over, if it fired.
    """
    if adversary not in ADVERSARIES:
        raise ValueError(f"adversary must be one of {sorted(ADVERSARIES)}")
    if eta is None:
        eta = default_eta(max(n_bound, 1), smoothness)
    params = RateControlParams(eta=eta, beta=beta, d=d, rel_tol=rel_tol)
    learner = Learner(params, mode=algo, safeguard=safeguard, n_players=n_bound,
                      smoothness=smoothness)
    feed = ADVERSARIES[adversary](d)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    lam = np.zeros((T, 1))
    regret = np.zeros((T, 1))
    exp_util = np.zeros((T, 1))
    path = np.zeros((max(T - 1, 0), 1))
    var = np.zeros((max(T - 1, 0), 1))
    x_hist = np.zeros((T, 1, d))
    nu_hist = np.zeros((T, 1, d))
    for t in range(T):
        x = learner.next_strategy()
        lam[t, 0] = learner.lambda_t
        x_hist[t, 0] = x
        nu = np.asarray(feed(t, x, rng), dtype=np.float64)
        nu_hist[t, 0] = nu
        exp_util[t, 0] = float(np.dot(nu, x))
        learner.observe(nu)
        regret[t, 0] = float(learner.U.max())
        if t > 0:
            path[t - 1, 0] = float(np.abs(x_hist[t, 0] - x_hist[t - 1, 0]).sum()) ** 2
            var[t - 1, 0] = float(np.abs(nu_hist[t, 0] - nu_hist[t - 1, 0]).max()) ** 2
    return MetricsLog(
        algo=algo, T=T, n=1, actions=(d,), eta=eta, beta=beta, seed=seed,
        smoothness=smoothness, safeguard=safeguard, lam=lam, regret=regret,
        exp_util=exp_util, path_len_sq=path, util_var_sq=var, x_hist=x_hist,
        nu_hist=nu_hist, empirical=None, switch_rounds=[learner.switch_round],
        game_name=f"adversary:{adversary}", unbounded_utility=learner.unbounded_utility_seen,
    )


# ---------------------------------------------------------------------------
# output and parallel cells


def write_metrics_csv(log: MetricsLog, path, log_every: int = 1) -> None:
    """Write the per-round, per-player metrics table.

    Rows appear at t = log_every, 2*log_every, ... and always at t = T.  The
    difference columns at row t hold the transition into round t
    (||x^t - x^{t-1}||_1^2 etc.), zero at t = 1.  Floats are written with repr
    so identical runs produce byte-identical files.
    """
    if log_every < 1:
        raise ValueError("log_every must be >= 1")
    rounds = list(range(log_every, log.T + 1, log_every))
    if not rounds or rounds[-1] != log.T:
        rounds.append(log.T)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for t in rounds:
            for i in range(log.n):
                reg = float(log.regret[t - 1, i])
                pl = float(log.path_len_sq[t - 2, i]) if t >= 2 else 0.0
                uv = float(log.util_var_sq[t - 2, i]) if t >= 2 else 0.0
                fh.write(
                    f"{t},{i},{reg!r},{max(0.0, reg)!r},{float(log.lam[t - 1, i])!r},"
                    f"{pl!r},{uv!r},{float(log.exp_util[t - 1, i])!r}\n"
                )


def parallel_map(fn, items):
    """Map over independent simulation cells; CAUTIOUS_THREADS caps the pool."""
    items = list(items)
    cap = os.environ.get("CAUTIOUS_THREADS", "")
    try:
        workers = max(1, int(cap)) if cap else min(len(items), os.cpu_count() or 1)
    except ValueError:
        workers = 1
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
