"""Optimistic multiplicative-weights learning with dynamic rate control.

Library layout:

- `games`: normal-form games, utility gradients, instance generation and I/O
- `rate_control`: the concave rate objective and its safeguarded Newton solver
- `learners`: the adaptive-rate learner, constant-rate baselines, and the
  adversarial safeguard
- `lifted`: the lifted-simplex regularizer, its Bregman geometry, and an
  independent solver used as an equivalence oracle
- `kernels`: 0/1-polyhedral feature maps, kernels, moments, and the kernelized
  learner
- `harness`: self-play / adversarial simulation, metrics logs, theorem checks
- `verify`: sampling-based property suites behind `cautious verify`
- `plots`: figure rendering for the CLI report path
- `cli`: the `cautious` command line front end
"""

from cautious.games import (
    NormalFormGame,
    expected_utility,
    gradient_utility,
    load_game,
    named_game,
    random_game,
    save_game,
)
from cautious.harness import (
    MetricsLog,
    adversarial_run,
    cce_gap,
    check_path_length,
    check_rvu_bound,
    self_play,
)
from cautious.learners import Learner, regret_report, safeguard_check
from cautious.rate_control import RateControlParams, default_eta, solve_rate

__version__ = "0.1.0"

__all__ = [
    "NormalFormGame",
    "expected_utility",
    "gradient_utility",
    "load_game",
    "named_game",
    "random_game",
    "save_game",
    "MetricsLog",
    "adversarial_run",
    "cce_gap",
    "check_path_length",
    "check_rvu_bound",
    "self_play",
    "Learner",
    "regret_report",
    "safeguard_check",
    "RateControlParams",
    "default_eta",
    "solve_rate",
    "__version__",
]
