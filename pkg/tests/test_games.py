import itertools

import numpy as np
import pytest

from cautious.games import (
    GameFormatError,
    NormalFormGame,
    check_profile,
    expected_utility,
    gradient_utility,
    load_game,
    named_game,
    pure_profile,
    random_game,
    save_game,
    uniform_profile,
)


def brute_gradient(game, profile, player):
    """Exhaustive expectation over all joint actions of the other players."""
    nu = np.zeros(game.actions[player])
    ranges = [range(d) for d in game.actions]
    for joint in itertools.product(*ranges):
        prob = 1.0
        for j, a in enumerate(joint):
            if j != player:
                prob *= profile[j][a]
        nu[joint[player]] += game.payoffs[player][joint] * prob
    return nu


def brute_expected(game, profile, player):
    total = 0.0
    for joint in itertools.product(*[range(d) for d in game.actions]):
        prob = 1.0
        for j, a in enumerate(joint):
            prob *= profile[j][a]
        total += game.payoffs[player][joint] * prob
    return total


class TestGradientUtility:
    def test_pure_opponent_selects_column(self):
        g = named_game("matching_pennies")
        nu = gradient_utility(g, [np.array([0.5, 0.5]), np.array([1.0, 0.0])], 0)
        assert np.array_equal(nu, [1.0, -1.0])

    def test_antisymmetric_rows_cancel(self):
        g = named_game("matching_pennies")
        nu = gradient_utility(g, [np.array([0.5, 0.5]), np.array([0.5, 0.5])], 0)
        assert np.allclose(nu, 0.0, atol=1e-15)

    def test_three_player_matches_brute_force(self):
        g = random_game(3, 2, seed=0)
        profile = uniform_profile(g)
        for player in range(3):
            nu = gradient_utility(g, profile, player)
            assert np.allclose(nu, brute_gradient(g, profile, player), atol=1e-14)

    def test_dimension_mismatch_rejected(self):
        g = random_game(2, 3, seed=1)
        with pytest.raises(ValueError):
            gradient_utility(g, [np.ones(3) / 3, np.ones(4) / 4], 0)
        with pytest.raises(ValueError):
            gradient_utility(g, [np.ones(3) / 3], 0)

    def test_inner_product_recovers_expected_utility(self, rng):
        g = random_game(2, 3, seed=5)
        x = [rng.dirichlet(np.ones(3)) for _ in range(2)]
        for i in range(2):
            nu = gradient_utility(g, x, i)
            assert abs(float(x[i] @ nu) - expected_utility(g, x, i)) <= 1e-12


class TestExpectedUtility:
    def test_symmetric_mix_is_zero(self):
        g = named_game("matching_pennies")
        assert abs(expected_utility(g, uniform_profile(g), 0)) <= 1e-15

    def test_pure_profile_reads_entry(self):
        g = named_game("matching_pennies")
        assert expected_utility(g, pure_profile(g, (0, 0)), 0) == 1.0

    def test_random_profile_matches_triple_sum(self, rng):
        g = NormalFormGame(
            (2, 3, 2), tuple(rng.uniform(-1, 1, (2, 3, 2)) for _ in range(3))
        )
        profile = [rng.dirichlet(np.ones(d)) for d in g.actions]
        for player in range(3):
            assert abs(
                expected_utility(g, profile, player) - brute_expected(g, profile, player)
            ) <= 1e-13

    def test_invalid_profile_rejected(self):
        g = random_game(2, 2, seed=0)
        with pytest.raises(ValueError):
            check_profile(g, [np.array([0.6, 0.6]), np.array([0.5, 0.5])])
        with pytest.raises(ValueError):
            check_profile(g, [np.array([-0.1, 1.1]), np.array([0.5, 0.5])])


class TestSerialization:
    def test_minimal_round_trip(self, tmp_path):
        g = named_game("matching_pennies")
        path = tmp_path / "mp.json"
        save_game(g, path)
        g2 = load_game(path)
        assert g2.n == 2 and g2.actions == (2, 2)
        for a, b in zip(g.payoffs, g2.payoffs):
            assert np.array_equal(a, b)

    def test_random_game_round_trip_bit_exact(self, tmp_path):
        g = random_game(3, 3, seed=11)
        path = tmp_path / "g.json"
        save_game(g, path)
        g2 = load_game(path)
        for a, b in zip(g.payoffs, g2.payoffs):
            assert np.array_equal(a, b)

    def test_out_of_range_payoff_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 2, "actions": [2, 2], "payoffs": [[1.5, 0, 0, 0], [0, 0, 0, 0]]}')
        with pytest.raises(GameFormatError, match="outside"):
            load_game(path)

    @pytest.mark.parametrize(
        "doc,field",
        [
            ('{"actions": [2, 2], "payoffs": [[], []]}', "n"),
            ('{"n": 2, "payoffs": [[], []]}', "actions"),
            ('{"n": 2, "actions": [2, 2]}', "payoffs"),
            ('{"n": 2, "actions": [2], "payoffs": [[], []]}', "actions"),
            ('{"n": 2, "actions": [2, 2], "payoffs": [[0, 0, 0], [0, 0, 0, 0]]}', "payoffs[0]"),
        ],
    )
    def test_malformed_file_names_field(self, tmp_path, doc, field):
        path = tmp_path / "bad.json"
        path.write_text(doc)
        with pytest.raises(GameFormatError, match=field.replace("[", "\\[")):
            load_game(path)

    def test_not_json_is_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json {")
        with pytest.raises(GameFormatError, match="JSON"):
            load_game(path)


class TestInstances:
    def test_random_game_deterministic(self):
        a = random_game(2, 2, seed=0)
        b = random_game(2, 2, seed=0)
        for t1, t2 in zip(a.payoffs, b.payoffs):
            assert np.array_equal(t1, t2)
        c = random_game(2, 2, seed=1)
        assert not np.array_equal(a.payoffs[0], c.payoffs[0])

    def test_random_game_entries_in_range(self):
        g = random_game(3, 4, seed=7)
        for t in g.payoffs:
            assert t.shape == (4, 4, 4)
            assert np.abs(t).max() <= 1.0

    def test_matching_pennies_definition(self):
        g = named_game("matching_pennies")
        assert np.array_equal(g.payoffs[0], [[1, -1], [-1, 1]])
        assert np.array_equal(g.payoffs[1], -g.payoffs[0])

    def test_unknown_name_lists_valid(self):
        with pytest.raises(ValueError, match="matching_pennies"):
            named_game("nope")

    def test_all_named_games_valid(self):
        for name in ("matching_pennies", "prisoners_dilemma", "rock_paper_scissors", "shapley"):
            g = named_game(name)
            assert g.n == 2
            for t in g.payoffs:
                assert np.abs(t).max() <= 1.0

    def test_construction_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            NormalFormGame((2, 2), (np.zeros((2, 3)), np.zeros((2, 2))))
        with pytest.raises(ValueError):
            NormalFormGame((2,), (np.zeros(2),))
        with pytest.raises(GameFormatError):
            NormalFormGame((2, 2), (np.full((2, 2), 2.0), np.zeros((2, 2))))


class TestInvariants:
    def test_gradient_and_utility_bounded(self, rng):
        for seed in range(5):
            g = random_game(int(rng.integers(2, 4)), int(rng.integers(2, 4)), seed=seed)
            profile = [rng.dirichlet(np.ones(d)) for d in g.actions]
            for i in range(g.n):
                nu = gradient_utility(g, profile, i)
                assert np.abs(nu).max() <= 1.0 + 1e-12
                assert abs(expected_utility(g, profile, i)) <= 1.0 + 1e-12

    def test_unit_smoothness(self, rng):
        # ||nu_i(x) - nu_i(x')||_inf <= sum_j ||x_j - x'_j||_1 under unit payoffs
        g = random_game(3, 3, seed=2)
        for _ in range(50):
            a = [rng.dirichlet(np.ones(d)) for d in g.actions]
            b = [rng.dirichlet(np.ones(d)) for d in g.actions]
            total = sum(float(np.abs(x - y).sum()) for x, y in zip(a, b))
            for i in range(g.n):
                diff = gradient_utility(g, a, i) - gradient_utility(g, b, i)
                assert float(np.abs(diff).max()) <= total + 1e-12
