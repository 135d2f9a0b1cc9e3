import numpy as np
import pytest

from cautious.games import NormalFormGame, named_game, random_game
from cautious.harness import (
    adversarial_run,
    cce_gap,
    check_path_length,
    check_regret_ceiling,
    check_rvu_bound,
    check_selfplay_safeguard_quiet,
    geometric_checkpoints,
    parallel_map,
    self_play,
    write_metrics_csv,
)
from cautious.learners import regret_report


class TestSelfPlay:
    def test_log_shapes_and_rows(self):
        g = named_game("matching_pennies")
        log = self_play(g, "dlrc", T=10, eta=1 / 50)
        assert log.lam.shape == (10, 2)
        assert log.path_len_sq.shape == (9, 2)
        assert (log.lam == 1 / 50).all()  # regrets never cross the threshold that fast

    def test_t1_pos_regret_nonnegative(self):
        g = random_game(2, 2, seed=3)
        log = self_play(g, "dlrc", T=1)
        assert (log.pos_regret >= 0).all()
        assert log.path_len_sq.shape == (0, 2)

    def test_identical_seeds_identical_logs(self, tmp_path):
        g = random_game(2, 3, seed=9)
        a = self_play(g, "dlrc", T=500, seed=9)
        b = self_play(g, "dlrc", T=500, seed=9)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_metrics_csv(a, pa)
        write_metrics_csv(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    @pytest.mark.parametrize("algo", ["dlrc", "omwu", "mwu"])
    def test_engines_agree(self, algo):
        g = random_game(3, 3, seed=4)
        a = self_play(g, algo, T=300, engine="jit")
        b = self_play(g, algo, T=300, engine="numpy")
        assert np.abs(a.x_hist - b.x_hist).max() <= 1e-11
        assert np.abs(a.regret - b.regret).max() <= 1e-11
        assert np.array_equal(a.lam, b.lam)

    def test_regret_column_matches_report(self):
        g = random_game(2, 4, seed=6)
        log = self_play(g, "dlrc", T=200)
        for i in range(2):
            rep = regret_report(log.player_strategies(i), log.player_utilities(i))
            assert rep.reg == pytest.approx(float(log.regret[-1, i]), abs=1e-9)

    def test_heterogeneous_action_counts(self):
        g = NormalFormGame((2, 3), (np.zeros((2, 3)), np.full((2, 3), 0.5)))
        log = self_play(g, "dlrc", T=50)
        assert log.x_hist.shape == (50, 2, 3)
        assert np.allclose(log.x_hist[:, 0, :2].sum(axis=1), 1.0)
        assert log.x_hist[:, 0, 2].max() == 0.0

    def test_bad_config_rejected(self):
        g = random_game(2, 2, seed=0)
        with pytest.raises(ValueError):
            self_play(g, "dlrc", T=0)
        with pytest.raises(ValueError):
            self_play(g, "follow", T=10)
        with pytest.raises(ValueError):
            self_play(g, "dlrc", T=10, safeguard=True, engine="jit")


class TestChecks:
    def test_checkpoints(self):
        assert geometric_checkpoints(1) == [1]
        assert geometric_checkpoints(10) == [10]
        assert geometric_checkpoints(50000) == [10, 100, 1000, 10000, 50000]
        assert geometric_checkpoints(100000) == [10, 100, 1000, 10000, 100000]

    def test_rvu_holds_on_short_runs(self):
        for seed in range(3):
            g = random_game(2, 2, seed=seed)
            log = self_play(g, "dlrc", T=2000, eta=1 / 50)
            check = check_rvu_bound(log)
            assert check.passed, check.summary()

    def test_rvu_t1_trivial(self):
        g = random_game(2, 2, seed=1)
        log = self_play(g, "dlrc", T=1)
        check = check_rvu_bound(log)
        assert check.passed
        for _, lhs, rhs in check.rows:
            assert rhs >= 3.0 >= 1.0 >= lhs

    def test_path_length_holds(self):
        g = random_game(3, 4, seed=2)
        log = self_play(g, "dlrc", T=2000)
        assert check_path_length(log).passed

    def test_three_player_checks_at_long_horizon(self):
        log3 = self_play(random_game(3, 3, seed=13), "dlrc", T=10000)
        assert check_rvu_bound(log3).passed
        assert check_path_length(log3).passed
        log4 = self_play(random_game(3, 4, seed=14), "dlrc", T=10000)
        assert check_path_length(log4).passed

    def test_path_length_t1(self):
        g = random_game(2, 2, seed=0)
        log = self_play(g, "dlrc", T=1)
        check = check_path_length(log)
        assert check.passed and check.rows[0][1] == 0.0

    def test_regret_ceiling_holds(self):
        g = random_game(2, 3, seed=5)
        log = self_play(g, "dlrc", T=1000)
        assert check_regret_ceiling(log).passed

    def test_safeguard_quiet_in_selfplay(self):
        g = random_game(3, 3, seed=8)
        log = self_play(g, "dlrc", T=3000)
        assert check_selfplay_safeguard_quiet(log).passed


class TestCceGap:
    def test_zero_game_has_zero_gap(self):
        g = NormalFormGame((2, 2), (np.zeros((2, 2)), np.zeros((2, 2))))
        log = self_play(g, "dlrc", T=1)
        assert cce_gap(log, g) == 0.0

    def test_identity_with_max_regret(self):
        g = random_game(2, 3, seed=12)
        log = self_play(g, "dlrc", T=500)
        gap = cce_gap(log, g)  # raises if the two routes disagree beyond 1e-10
        assert gap == pytest.approx(float(log.regret[-1].max()) / 500, abs=1e-15)

    def test_gap_shrinks_with_horizon(self):
        # symmetric named games start at their uniform equilibrium (gap 0), so
        # a random game exercises the decay
        g = random_game(2, 3, seed=21)
        small = cce_gap(self_play(g, "dlrc", T=100), g)
        large = cce_gap(self_play(g, "dlrc", T=10000), g)
        assert 0 <= large < small


class TestAdversarial:
    def test_alternating_triggers_safeguard(self):
        log = adversarial_run(d=2, adversary="alternating", T=6000, eta=1 / 50)
        assert log.switch_rounds[0] is not None
        assert log.util_var_sq.max() == pytest.approx(4.0)

    def test_random_adversary_is_deterministic(self):
        a = adversarial_run(d=3, adversary="random", T=200, seed=5)
        b = adversarial_run(d=3, adversary="random", T=200, seed=5)
        assert np.array_equal(a.nu_hist, b.nu_hist)
        c = adversarial_run(d=3, adversary="random", T=200, seed=6)
        assert not np.array_equal(a.nu_hist, c.nu_hist)

    def test_best_response_bounded_regret(self):
        log = adversarial_run(d=3, adversary="best_response", T=2000, eta=1 / 50)
        assert log.regret[-1, 0] <= 100.0

    def test_unknown_adversary(self):
        with pytest.raises(ValueError):
            adversarial_run(d=2, adversary="nemesis", T=10)


class TestOutput:
    def test_csv_header_and_stride(self, tmp_path):
        g = random_game(2, 2, seed=0)
        log = self_play(g, "dlrc", T=95)
        path = tmp_path / "m.csv"
        write_metrics_csv(log, path, log_every=10)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,player,regret,pos_regret,lambda,path_len_sq,util_var_sq,exp_util"
        ts = sorted({int(l.split(",")[0]) for l in lines[1:]})
        assert ts == [10, 20, 30, 40, 50, 60, 70, 80, 90, 95]
        assert len(lines) == 1 + 2 * len(ts)

    def test_csv_columns_nonnegative_where_required(self, tmp_path):
        g = random_game(2, 3, seed=4)
        log = self_play(g, "dlrc", T=60)
        path = tmp_path / "m.csv"
        write_metrics_csv(log, path)
        for line in path.read_text().strip().split("\n")[1:]:
            f = line.split(",")
            assert float(f[3]) >= 0.0  # pos_regret
            assert float(f[3]) == max(0.0, float(f[2]))
            assert float(f[5]) >= 0.0 and float(f[6]) >= 0.0

    def test_parallel_map_respects_env(self, monkeypatch):
        monkeypatch.setenv("CAUTIOUS_THREADS", "2")
        assert parallel_map(lambda v: v * v, range(7)) == [v * v for v in range(7)]
        monkeypatch.setenv("CAUTIOUS_THREADS", "1")
        assert parallel_map(lambda v: v + 1, range(3)) == [1, 2, 3]
