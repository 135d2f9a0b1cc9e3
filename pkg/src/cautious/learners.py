"""Online learners over the simplex: adaptive-rate optimistic MWU and baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cautious.rate_control import RateControlParams, solve_rate

__all__ = [
    "Learner",
    "RegretReport",
    "regret_report",
    "safeguard_check",
    "safeguard_bound",
    "softmax",
    "MODES",
]

MODES = ("dlrc", "omwu", "mwu")


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically safe softmax (subtracts the max before exponentiating)."""
    w = np.exp(z - z.max())
    return w / w.sum()


def safeguard_bound(params: RateControlParams, smoothness: float, n: int, t: int) -> float:
    """Utility-variation budget 144*L^2*n^2*eta + 48*L^2*n^2*(alpha*ln t + ln d).

    Self-play of the adaptive dynamics by all n players keeps the observed
    variation under this bound; exceeding it certifies non-conforming
    (adversarial) feedback.
    """
    ln2 = (smoothness * n) ** 2
    return 144.0 * ln2 * params.eta + 48.0 * ln2 * (params.alpha * math.log(t) + params.log_d)


def safeguard_check(utility_history, params: RateControlParams, smoothness: float, n: int, t: int) -> bool:
    """True iff the observed utility variation up to round t exceeds the self-play budget."""
    total = 0.0
    for prev, cur in zip(utility_history[: t - 1], utility_history[1:t]):
        total += float(np.abs(np.asarray(cur) - np.asarray(prev)).max()) ** 2
    return total > safeguard_bound(params, smoothness, n, t)


class Learner:
    """A single player's no-regret update rule.

    mode selects the dynamics:
      dlrc  -- optimistic MWU, rate solved from the current corrected regrets
      omwu  -- optimistic MWU at the constant rate eta
      mwu   -- plain MWU at the constant rate eta (no optimism term)

    With `safeguard=True` the learner monitors its observed utility variation
    and flips permanently to mode "safeguard_mwu" (anytime MWU restarted at the
    switch round) once the variation exceeds the self-play budget.
    """

    def __init__(self, params: RateControlParams, mode: str = "dlrc",
                 safeguard: bool = False, n_players: int = 1, smoothness: float = 1.0):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.params = params
        self.mode = mode
        self.safeguard_enabled = safeguard
        self.n_players = n_players
        self.smoothness = smoothness
        d = params.d
        self.U = np.zeros(d)
        self.u_prev = np.zeros(d)
        self.t = 1
        self.lambda_t = None
        self.x_t = None
        self.switch_round = None
        self.unbounded_utility_seen = False
        self._nu_prev = None
        self._var_sum = 0.0
        self._Q = None  # post-switch cumulative utility

    # -- round t, phase 1: choose a strategy -------------------------------

    def next_strategy(self) -> np.ndarray:
        if self.mode == "safeguard_mwu":
            tau = self.t - self.switch_round + 1
            rate = math.sqrt(self.params.log_d / tau)
            x = softmax(rate * self._Q)
            lam = rate
        else:
            r = self.U if self.mode == "mwu" else self.U + self.u_prev
            if self.mode == "dlrc":
                lam = solve_rate(r, self.params)
            else:
                lam = self.params.eta
            x = softmax(lam * r)
        self.lambda_t = lam
        self.x_t = x
        return x

    # -- round t, phase 2: digest the revealed utility vector --------------

    def observe(self, nu) -> None:
        if self.x_t is None:
            raise RuntimeError("observe() before next_strategy()")
        nu = np.asarray(nu, dtype=np.float64)
        if nu.shape != (self.params.d,):
            raise ValueError(f"utility vector has shape {nu.shape}, expected ({self.params.d},)")
        if np.abs(nu).max() > 1.0 + 1e-12:
            self.unbounded_utility_seen = True
        u = nu - float(np.dot(nu, self.x_t))
        self.U = self.U + u
        self.u_prev = u
        if self.mode == "safeguard_mwu":
            self._Q = self._Q + nu
        if self.safeguard_enabled and self.mode != "safeguard_mwu":
            if self._nu_prev is not None:
                self._var_sum += float(np.abs(nu - self._nu_prev).max()) ** 2
            if self._var_sum > safeguard_bound(self.params, self.smoothness, self.n_players, self.t):
                self.mode = "safeguard_mwu"
                self.switch_round = self.t + 1
                self._Q = np.zeros(self.params.d)
        self._nu_prev = nu
        self.t += 1


@dataclass(frozen=True)
class RegretReport:
    reg: float
    pos_reg: float
    per_action_cum: np.ndarray
    best_action: int


def regret_report(strategy_history, utility_history) -> RegretReport:
    """External regret of a play/feedback trace against the best fixed action.

    per_action_cum[k] = sum_t (nu_t[k] - <nu_t, x_t>); the regret is its max
    (ties resolved to the lowest action index).
    """
    if len(strategy_history) != len(utility_history):
        raise ValueError("histories must have equal length")
    xs = np.asarray(strategy_history, dtype=np.float64)
    nus = np.asarray(utility_history, dtype=np.float64)
    gained = np.einsum("tk,tk->t", nus, xs)
    cum = nus.sum(axis=0) - gained.sum()
    best = int(np.argmax(cum))
    reg = float(cum[best])
    return RegretReport(reg=reg, pos_reg=max(0.0, reg), per_action_cum=cum, best_action=best)
