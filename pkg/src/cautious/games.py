"""n-player normal-form games with bounded payoffs and multilinear utility gradients."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GameFormatError",
    "NormalFormGame",
    "gradient_utility",
    "expected_utility",
    "uniform_profile",
    "pure_profile",
    "check_profile",
    "save_game",
    "load_game",
    "random_game",
    "named_game",
    "NAMED_GAMES",
    "payoff_rng",
]

PROFILE_SUM_TOL = 1e-12


class GameFormatError(ValueError):
    """Raised when a game file is malformed or violates the payoff bounds."""


@dataclass(frozen=True)
class NormalFormGame:
    """An n-player game given by one dense payoff tensor per player.

    `payoffs[i]` has shape `actions` (one axis per player, player 0 first) and
    holds player i's payoff for each joint deterministic strategy.  All entries
    must lie in [-1, 1].
    """

    actions: tuple[int, ...]
    payoffs: tuple[np.ndarray, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.actions) < 2:
            raise ValueError("a game needs at least 2 players")
        if any(d < 2 for d in self.actions):
            raise ValueError("every player needs at least 2 actions")
        if len(self.payoffs) != len(self.actions):
            raise ValueError("one payoff tensor per player is required")
        shape = tuple(self.actions)
        frozen = []
        for i, tensor in enumerate(self.payoffs):
            arr = np.asarray(tensor, dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(
                    f"payoff tensor of player {i} has shape {arr.shape}, expected {shape}"
                )
            if not np.isfinite(arr).all():
                raise GameFormatError(f"payoff tensor of player {i} has non-finite entries")
            if np.abs(arr).max() > 1.0:
                bad = np.unravel_index(np.argmax(np.abs(arr)), shape)
                raise GameFormatError(
                    f"payoff of player {i} at joint action {tuple(int(b) for b in bad)} is "
                    f"{arr[bad]!r}, outside [-1, 1]"
                )
            arr = arr.copy()
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "actions", tuple(int(d) for d in self.actions))
        object.__setattr__(self, "payoffs", tuple(frozen))

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def num_profiles(self) -> int:
        return int(np.prod(self.actions))


def check_profile(game: NormalFormGame, profile) -> list[np.ndarray]:
    """Validate a mixed-strategy profile against a game and return it as arrays."""
    if len(profile) != game.n:
        raise ValueError(f"profile has {len(profile)} strategies for {game.n} players")
    out = []
    for i, x in enumerate(profile):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (game.actions[i],):
            raise ValueError(
                f"strategy of player {i} has shape {x.shape}, expected ({game.actions[i]},)"
            )
        if (x < 0).any() or abs(float(x.sum()) - 1.0) > PROFILE_SUM_TOL:
            raise ValueError(f"strategy of player {i} is not a probability vector")
        out.append(x)
    return out


def uniform_profile(game: NormalFormGame) -> list[np.ndarray]:
    return [np.full(d, 1.0 / d) for d in game.actions]


def pure_profile(game: NormalFormGame, indices) -> list[np.ndarray]:
    out = []
    for d, k in zip(game.actions, indices):
        x = np.zeros(d)
        x[k] = 1.0
        out.append(x)
    return out


def gradient_utility(game: NormalFormGame, profile, player: int, validate: bool = True) -> np.ndarray:
    """Per-action expected payoff of `player` against the other players' mixtures.

    Returns the vector whose k-th entry is the expected payoff of playing
    action k while everyone else plays their mixed strategy, i.e. the gradient
    of the multilinear expected utility in the player's own strategy.
    """
    if validate:
        profile = check_profile(game, profile)
    if not 0 <= player < game.n:
        raise ValueError(f"player index {player} out of range")
    t = game.payoffs[player]
    # Contract the highest axis first so remaining axis numbers stay valid.
    for j in reversed(range(game.n)):
        if j == player:
            continue
        t = np.tensordot(t, profile[j], axes=([j], [0]))
    return t


def expected_utility(game: NormalFormGame, profile, player: int, validate: bool = True) -> float:
    if validate:
        profile = check_profile(game, profile)
    nu = gradient_utility(game, profile, player, validate=False)
    return float(np.dot(profile[player], nu))


# ---------------------------------------------------------------------------
# serialization
#
# File format: UTF-8 JSON object {"n": int, "actions": [d_1,...,d_n],
# "payoffs": [flat, ...]} with one flat row-major array per player (player-1
# action index slowest).  Floats are written with repr so a save/load round
# trip is bit exact.


def save_game(game: NormalFormGame, path) -> None:
    doc = {
        "n": game.n,
        "actions": list(game.actions),
        "payoffs": [t.ravel(order="C").tolist() for t in game.payoffs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_game(path) -> NormalFormGame:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GameFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise GameFormatError(f"{path}: top-level value must be an object")
    for key in ("n", "actions", "payoffs"):
        if key not in doc:
            raise GameFormatError(f"{path}: missing field '{key}'")
    n = doc["n"]
    actions = doc["actions"]
    if not isinstance(n, int) or n < 2:
        raise GameFormatError(f"{path}: field 'n' must be an integer >= 2, got {n!r}")
    if not isinstance(actions, list) or len(actions) != n:
        raise GameFormatError(f"{path}: field 'actions' must list {n} action counts")
    if not all(isinstance(d, int) and d >= 2 for d in actions):
        raise GameFormatError(f"{path}: field 'actions' entries must be integers >= 2")
    payoffs = doc["payoffs"]
    size = int(np.prod(actions))
    if not isinstance(payoffs, list) or len(payoffs) != n:
        raise GameFormatError(f"{path}: field 'payoffs' must list {n} flat arrays")
    tensors = []
    for i, flat in enumerate(payoffs):
        if not isinstance(flat, list) or len(flat) != size:
            raise GameFormatError(
                f"{path}: field 'payoffs[{i}]' must be a flat array of length {size}"
            )
        try:
            arr = np.asarray(flat, dtype=np.float64).reshape(actions)
        except (TypeError, ValueError) as exc:
            raise GameFormatError(f"{path}: field 'payoffs[{i}]' is not numeric") from exc
        tensors.append(arr)
    try:
        return NormalFormGame(tuple(actions), tuple(tensors))
    except GameFormatError as exc:
        raise GameFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# instance generation


def payoff_rng(seed: int) -> np.random.Generator:
    """Counter-based 64-bit generator (Philox 4x64) keyed by `seed`.

    Philox is stream- and platform-stable, so game instances and therefore
    whole simulation logs reproduce exactly from the seed alone.
    """
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def random_game(n: int, d, seed: int = 0) -> NormalFormGame:
    """Game with payoffs i.i.d. uniform on [-1, 1] from the Philox stream of `seed`.

    `d` is a single action count or one per player; tensors are drawn player by
    player in index order.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    actions = tuple([int(d)] * n) if np.isscalar(d) else tuple(int(v) for v in d)
    if len(actions) != n or any(v < 2 for v in actions):
        raise ValueError("need an action count >= 2 for each player")
    rng = payoff_rng(seed)
    payoffs = tuple(rng.uniform(-1.0, 1.0, size=actions) for _ in range(n))
    return NormalFormGame(actions, payoffs, name=f"random(n={n},d={list(actions)},seed={seed})")


def _bimatrix(a, b, name):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return NormalFormGame((a.shape[0], a.shape[1]), (a, b), name=name)


def _matching_pennies():
    a = [[1.0, -1.0], [-1.0, 1.0]]
    return _bimatrix(a, -np.asarray(a), "matching_pennies")


def _prisoners_dilemma():
    # Classic (R, S, T, P) = (3, 0, 5, 1), affinely rescaled from [0, 5] to [-1, 1].
    r, s, t, p = 0.2, -1.0, 1.0, -0.6
    a = [[r, s], [t, p]]
    b = [[r, t], [s, p]]
    return _bimatrix(a, b, "prisoners_dilemma")


def _rock_paper_scissors():
    a = [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]]
    return _bimatrix(a, -np.asarray(a), "rock_paper_scissors")


def _shapley():
    a = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    b = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]
    return _bimatrix(a, b, "shapley")


NAMED_GAMES = {
    "matching_pennies": _matching_pennies,
    "prisoners_dilemma": _prisoners_dilemma,
    "rock_paper_scissors": _rock_paper_scissors,
    "shapley": _shapley,
}


def named_game(name: str) -> NormalFormGame:
    try:
        return NAMED_GAMES[name]()
    except KeyError:
        valid = ", ".join(sorted(NAMED_GAMES))
        raise ValueError(f"unknown game {name!r}; valid names: {valid}") from None
