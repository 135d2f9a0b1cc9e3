import math

import numpy as np
import pytest

from cautious.learners import Learner, regret_report, safeguard_bound, safeguard_check, softmax
from cautious.rate_control import RateControlParams

P2 = RateControlParams(eta=1 / 50, beta=70.0, d=2)


def make(mode="dlrc", d=2, eta=1 / 50, **kw):
    return Learner(RateControlParams(eta=eta, beta=70.0, d=d), mode=mode, **kw)


class TestNextStrategy:
    def test_first_round_uniform_at_cap_rate(self):
        ln = make()
        x = ln.next_strategy()
        assert np.array_equal(x, [0.5, 0.5])
        assert ln.lambda_t == P2.eta

    def test_softmax_three_to_one(self):
        assert np.allclose(softmax(np.array([math.log(3), 0.0])), [0.75, 0.25], atol=1e-15)

    def test_deep_regret_round(self):
        ln = make(eta=1.0)
        ln.U = np.array([-3000.0, -4000.0])
        x = ln.next_strategy()
        assert ln.lambda_t == pytest.approx(0.0120060, abs=1e-6)
        z = ln.lambda_t * np.array([-3000.0, -4000.0])
        assert x[0] == pytest.approx(0.999994, abs=1e-6)
        assert x[1] == pytest.approx(math.exp(z[1] - z[0]) / (1 + math.exp(z[1] - z[0])), rel=1e-9)

    def test_optimism_uses_corrected_signal(self):
        ln = make()
        ln.next_strategy()
        ln.observe(np.array([1.0, 0.0]))
        # r = U + u_prev = 2 * u_1
        u1 = np.array([0.5, -0.5])
        expect = softmax(P2.eta * 2 * u1)
        assert np.allclose(ln.next_strategy(), expect, atol=1e-15)


class TestObserve:
    def test_zero_expected_utility_keeps_vector(self):
        ln = make()
        ln.next_strategy()
        ln.x_t = np.array([0.5, 0.5])
        ln.observe(np.array([1.0, -1.0]))
        assert np.array_equal(ln.u_prev, [1.0, -1.0])

    def test_pure_strategy_correction(self):
        ln = make()
        ln.next_strategy()
        ln.x_t = np.array([1.0, 0.0])
        ln.observe(np.array([1.0, 0.0]))
        assert np.array_equal(ln.u_prev, [0.0, -1.0])

    def test_orthogonality(self, rng):
        ln = make(d=5)
        for _ in range(50):
            x = ln.next_strategy()
            nu = rng.uniform(-1, 1, 5)
            ln.observe(nu)
            assert abs(float(np.dot(ln.u_prev, x))) <= 1e-12

    def test_running_sum_invariant(self, rng):
        ln = make(d=3)
        total = np.zeros(3)
        for _ in range(20):
            ln.next_strategy()
            nu = rng.uniform(-1, 1, 3)
            ln.observe(nu)
            total += ln.u_prev
        assert np.allclose(ln.U, total, atol=1e-12)

    def test_unbounded_utility_flagged(self):
        ln = make()
        ln.next_strategy()
        ln.observe(np.array([2.0, 0.0]))
        assert ln.unbounded_utility_seen

    def test_shift_invariance_of_dynamics(self, rng):
        # adding c * ones to every utility leaves the play unchanged (up to
        # float rounding of the inner product)
        a, b = make(d=3), make(d=3)
        for t in range(50):
            xa = a.next_strategy()
            xb = b.next_strategy()
            assert np.allclose(xa, xb, atol=1e-12)
            nu = rng.uniform(-0.5, 0.5, 3)
            a.observe(nu)
            b.observe(nu + 0.25)


class TestModes:
    def test_mwu_first_round_uniform(self):
        ln = make("mwu")
        assert np.array_equal(ln.next_strategy(), [0.5, 0.5])

    def test_mwu_omits_optimism(self, rng):
        m, o = make("mwu", d=3), make("omwu", d=3)
        nu = rng.uniform(-1, 1, 3)
        for ln in (m, o):
            ln.next_strategy()
            ln.observe(nu)
        xm, xo = m.next_strategy(), o.next_strategy()
        assert np.allclose(xm, softmax(m.params.eta * m.U), atol=1e-15)
        assert np.allclose(xo, softmax(o.params.eta * (o.U + o.u_prev)), atol=1e-15)
        assert not np.allclose(xm, xo)

    def test_omwu_equals_adaptive_above_threshold(self, rng):
        a, o = make("dlrc", d=3), make("omwu", d=3)
        for _ in range(200):
            xa, xo = a.next_strategy(), o.next_strategy()
            assert np.array_equal(xa, xo)
            nu = rng.uniform(-1, 1, 3)
            a.observe(nu)
            o.observe(nu)
        assert a.lambda_t == a.params.eta

    def test_traces_diverge_below_threshold(self):
        # constructed state: every optimistic regret far below -beta ln^2 d
        a, o = make("dlrc", eta=1.0), make("omwu", eta=1.0)
        deep = np.array([-3000.0, -3500.0])
        a.U = deep.copy()
        o.U = deep.copy()
        xa, xo = a.next_strategy(), o.next_strategy()
        assert a.lambda_t < 1.0 and o.lambda_t == 1.0
        assert float(np.abs(xa - xo).max()) > 1e-3

    def test_invalid_mode_rejected(self):
        with pytest.raises(ValueError):
            make("hedge")


class TestSafeguard:
    def test_constant_utilities_never_trigger(self):
        p = RateControlParams(eta=1 / 50, beta=70.0, d=3)
        hist = [np.array([0.3, -0.2, 0.1])] * 500
        for t in (2, 10, 100, 500):
            assert not safeguard_check(hist[:t], p, 1.0, 1, t)

    def test_alternating_extremes_trigger_at_crossing(self):
        p = RateControlParams(eta=1 / 50, beta=70.0, d=2)
        base = np.array([1.0, -1.0])
        T = 6000
        hist = [base if t % 2 == 0 else -base for t in range(T)]
        # variation sum is 4(t-1); find the analytic crossing of the budget
        crossing = None
        for t in range(2, T + 1):
            if 4.0 * (t - 1) > safeguard_bound(p, 1.0, 1, t):
                crossing = t
                break
        assert crossing is not None
        assert not safeguard_check(hist[: crossing - 1], p, 1.0, 1, crossing - 1)
        assert safeguard_check(hist[:crossing], p, 1.0, 1, crossing)

    def test_learner_switches_permanently(self):
        ln = make(safeguard=True, n_players=1)
        base = np.array([1.0, -1.0])
        switched = None
        for t in range(1, 6000):
            ln.next_strategy()
            ln.observe(base if t % 2 == 0 else -base)
            if ln.mode == "safeguard_mwu":
                switched = ln.switch_round
                break
        assert switched is not None
        for t in range(50):
            ln.next_strategy()
            ln.observe(base)
        assert ln.mode == "safeguard_mwu" and ln.switch_round == switched


class TestRegretReport:
    def test_best_action_played_gives_zero(self):
        rep = regret_report([np.array([1.0, 0.0])], [np.array([1.0, 0.0])])
        assert rep.reg == 0.0 and rep.pos_reg == 0.0

    def test_worst_action_played(self):
        rep = regret_report([np.array([0.0, 1.0])], [np.array([1.0, 0.0])])
        assert rep.reg == 1.0

    def test_matches_exhaustive_comparator(self, rng):
        T, d = 100, 4
        xs = [rng.dirichlet(np.ones(d)) for _ in range(T)]
        nus = [rng.uniform(-1, 1, d) for _ in range(T)]
        rep = regret_report(xs, nus)
        gained = sum(float(nu @ x) for nu, x in zip(nus, xs))
        brute = max(sum(float(nu[k]) for nu in nus) - gained for k in range(d))
        assert rep.reg == pytest.approx(brute, abs=1e-10)
        assert rep.pos_reg == max(0.0, rep.reg)

    def test_tie_resolved_to_lowest_index(self):
        rep = regret_report([np.array([0.5, 0.5])], [np.array([0.3, 0.3])])
        assert rep.best_action == 0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            regret_report([np.ones(2) / 2], [])


class TestCorrectionBound:
    def test_u_difference_bounded_by_utility_and_path(self, rng):
        # ||u^t - u^{t-1}||_inf^2 <= 6 ||nu^t - nu^{t-1}||_inf^2 + 4 ||x^t - x^{t-1}||_1^2
        for _ in range(500):
            d = int(rng.integers(2, 6))
            nu1, nu0 = rng.uniform(-1, 1, d), rng.uniform(-1, 1, d)
            x1, x0 = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
            u1 = nu1 - float(nu1 @ x1)
            u0 = nu0 - float(nu0 @ x0)
            lhs = float(np.abs(u1 - u0).max()) ** 2
            rhs = 6 * float(np.abs(nu1 - nu0).max()) ** 2 + 4 * float(np.abs(x1 - x0).sum()) ** 2
            assert lhs <= rhs + 1e-12
