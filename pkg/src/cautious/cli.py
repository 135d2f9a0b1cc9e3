"""Command line front end.

Subcommands:
  selfplay     run all players of a game under one learner, write metrics CSV
               (plus figures), and evaluate the theorem checks
  verify       run the sampling property suites and print a pass/fail table
  kernel-demo  run the kernelized learner on a polytope against a scripted
               utility stream and diff it against a reference implementation

Exit codes: 0 success, 1 property/check failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from cautious import __version__
from cautious.games import NAMED_GAMES, load_game, named_game, payoff_rng, random_game
from cautious.harness import (
    cce_gap,
    check_path_length,
    check_rvu_bound,
    parallel_map,
    self_play,
    write_metrics_csv,
)
from cautious.kernels import KernelLearner, Simplex, make_polytope
from cautious.learners import Learner
from cautious.rate_control import (
    THEOREM_BETA_MIN,
    THEOREM_ETA_CAP,
    RateControlParams,
    default_eta,
)
from cautious.verify import SUITES, run_suite

CONFIG_KEYS = (
    "named", "game", "random", "algo", "T", "eta", "beta", "seed", "L",
    "safeguard", "unsafe_params", "out", "log_every", "no_plots", "engine",
    "suite", "samples", "d", "m", "polytope",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cautious",
        description="Adaptive-rate optimistic multiplicative weights: runs and checks.",
    )
    parser.add_argument("--version", action="version", version=f"cautious {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("selfplay", help="simulate self-play and evaluate theorem checks")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--named", choices=sorted(NAMED_GAMES), help="built-in game")
    src.add_argument("--game", help="path to a game JSON file")
    src.add_argument("--random", metavar="N,D", help="random game with N players, D actions")
    sp.add_argument("--algo", default="dlrc", choices=["dlrc", "omwu", "mwu"])
    sp.add_argument("-T", type=int, default=10000, help="number of rounds")
    sp.add_argument("--eta", type=float, default=None, help="max learning rate")
    sp.add_argument("--beta", type=float, default=70.0, help="curvature hyperparameter")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--L", type=float, default=1.0, help="smoothness constant")
    sp.add_argument("--safeguard", action="store_true", help="enable the adversarial safeguard")
    sp.add_argument("--unsafe-params", action="store_true",
                    help="allow eta/beta outside the theorem-mode ranges")
    sp.add_argument("--out", help="metrics CSV path")
    sp.add_argument("--log-every", type=int, default=1, help="CSV row stride")
    sp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    sp.add_argument("--engine", default="auto", choices=["auto", "jit", "numpy"])
    sp.add_argument("--config", help="JSON config file (flags win)")

    vf = sub.add_parser("verify", help="run sampling property suites")
    vf.add_argument("--suite", default="all",
                    help="suite name or 'all' (%s)" % ", ".join(sorted(SUITES)))
    vf.add_argument("--samples", type=int, default=1000)
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--d", type=int, default=None, help="restrict to one action count")
    vf.add_argument("--eta", type=float, default=None)
    vf.add_argument("--beta", type=float, default=70.0)
    vf.add_argument("--config", help="JSON config file (flags win)")

    kd = sub.add_parser("kernel-demo", help="kernelized learner on a 0/1-polytope")
    kd.add_argument("--polytope", default="simplex",
                    help="simplex, hypercube, or mset (others unsupported)")
    kd.add_argument("--d", type=int, default=4)
    kd.add_argument("--m", type=int, default=None, help="set size for mset")
    kd.add_argument("-T", type=int, default=100)
    kd.add_argument("--eta", type=float, default=None)
    kd.add_argument("--beta", type=float, default=70.0)
    kd.add_argument("--seed", type=int, default=0)
    kd.add_argument("--unsafe-params", action="store_true")
    kd.add_argument("--out", help="trace CSV path")
    kd.add_argument("--no-plots", action="store_true")
    kd.add_argument("--config", help="JSON config file (flags win)")
    return parser


def _apply_config(parser, args, argv):
    """Fill unset flags from a JSON config file; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(doc, dict):
        parser.error(f"config {args.config} must be a JSON object")
    given = {a.lstrip("-").replace("-", "_").split("=")[0] for a in argv if a.startswith("-")}
    given |= {"T"} if "-T" in argv else set()
    for key, value in doc.items():
        attr = key.replace("-", "_")
        if attr not in CONFIG_KEYS:
            parser.error(f"config {args.config}: unknown key {key!r}")
        if hasattr(args, attr) and attr not in given:
            setattr(args, attr, value)
    return args


def _enforce_theorem_mode(parser, eta, beta, unsafe):
    if unsafe:
        return
    if eta is not None and eta > THEOREM_ETA_CAP + 1e-15:
        parser.error(
            f"eta={eta} exceeds the theorem-mode cap 1/50={THEOREM_ETA_CAP}; "
            "pass --unsafe-params to override"
        )
    if beta < THEOREM_BETA_MIN:
        parser.error(
            f"beta={beta} is below the theorem-mode minimum {THEOREM_BETA_MIN}; "
            "pass --unsafe-params to override"
        )


def _resolve_game(parser, args):
    if args.named:
        return named_game(args.named)
    if args.game:
        return load_game(args.game)
    spec = args.random or "2,2"
    try:
        n_str, d_str = spec.split(",")
        return random_game(int(n_str), int(d_str), seed=args.seed)
    except ValueError:
        parser.error(f"--random expects 'N,D', got {spec!r}")


def cmd_selfplay(parser, args) -> int:
    if args.T < 1:
        parser.error("-T must be >= 1")
    if args.log_every < 1:
        parser.error("--log-every must be >= 1")
    _enforce_theorem_mode(parser, args.eta, args.beta, args.unsafe_params)
    game = _resolve_game(parser, args)
    eta = args.eta if args.eta is not None else default_eta(game.n, args.L)
    log = self_play(game, algo=args.algo, T=args.T, eta=eta, beta=args.beta,
                    seed=args.seed, smoothness=args.L, safeguard=args.safeguard,
                    engine=args.engine)
    if args.out:
        write_metrics_csv(log, args.out, log_every=args.log_every)
        print(f"metrics written to {args.out}")
        if not args.no_plots:
            from cautious.plots import render_selfplay_plots

            stem = args.out[:-4] if args.out.endswith(".csv") else args.out
            for p in render_selfplay_plots(log, stem):
                print(f"figure written to {p}")
    print(f"game: {game.name or 'file'}  algo: {args.algo}  T={args.T}  "
          f"eta={eta:.6g}  beta={args.beta}")
    for i in range(game.n):
        print(f"player {i}: regret {log.regret[-1, i]:.6g}  "
              f"pos_regret {max(0.0, log.regret[-1, i]):.6g}  "
              f"min rate {log.lam[:, i].min():.6g}")
    gap = cce_gap(log, game)
    print(f"equilibrium gap (max regret / T): {gap:.6g}")
    failures = 0
    if args.algo == "dlrc" and not args.safeguard:
        for check in (check_rvu_bound(log), check_path_length(log)):
            print(check.summary())
            failures += 0 if check.passed else 1
    if any(sw is not None for sw in log.switch_rounds):
        print(f"safeguard switch rounds: {log.switch_rounds}")
    return 1 if failures else 0


def cmd_verify(parser, args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        if name not in SUITES:
            parser.error(f"unknown suite {args.suite!r}; choose from "
                         f"{', '.join(sorted(SUITES))}, all")
    kwargs = {"samples": args.samples, "seed": args.seed}
    if args.d is not None:
        kwargs["d"] = args.d
    if args.eta is not None:
        kwargs["eta"] = args.eta
    if args.beta is not None:
        kwargs["beta"] = args.beta
    failures = 0
    print(f"{'suite':<18} {'state':<5} detail")
    # suites are independent cells; CAUTIOUS_THREADS caps the pool
    for result in parallel_map(lambda name: run_suite(name, **kwargs), names):
        print(result.row())
        failures += 0 if result.passed else 1
    return 1 if failures else 0


def cmd_kernel_demo(parser, args) -> int:
    if args.T < 1:
        parser.error("-T must be >= 1")
    _enforce_theorem_mode(parser, args.eta, args.beta, args.unsafe_params)
    try:
        poly = make_polytope(args.polytope, args.d, args.m)
    except ValueError as exc:
        parser.error(str(exc))
    eta = args.eta if args.eta is not None else default_eta(2, 1.0)
    learner = KernelLearner(poly, eta=eta, beta=args.beta)
    reference = None
    ref_kind = "none"
    if isinstance(poly, Simplex):
        reference = Learner(RateControlParams(eta=eta, beta=args.beta, d=poly.d), mode="dlrc")
        ref_kind = "coordinate learner"
    elif poly.num_vertices <= 4096:
        from cautious.kernels import ExplicitVertices

        reference = KernelLearner(ExplicitVertices(poly.vertices()), eta=eta, beta=args.beta)
        ref_kind = "explicit-vertex learner"
    rng = payoff_rng(args.seed)
    stream = rng.uniform(-1.0, 1.0, (args.T, poly.d))
    rounds = np.arange(1, args.T + 1)
    lam_trace = np.zeros(args.T)
    deviation = np.zeros(args.T) if reference is not None else None
    xs = np.zeros((args.T, poly.d))
    for t in range(args.T):
        x = learner.play()
        xs[t] = x
        lam_trace[t] = learner.lambda_t
        if reference is not None:
            xr = reference.next_strategy() if ref_kind == "coordinate learner" else reference.play()
            deviation[t] = float(np.abs(x - xr).max())
            reference.observe(stream[t])
        learner.observe(stream[t])
    budget_ok = poly.kernel_calls == (
        learner.rounds_played * (poly.d + 1)
        + learner.total_newton_evals * (poly.d ** 2 + 1)
    )
    print(f"polytope: {poly.describe()}  vertices: {poly.num_vertices}  T={args.T}  eta={eta:.6g}")
    print(f"kernel evaluations: {poly.kernel_calls} "
          f"(budget {(poly.d + 1)}/round + {(poly.d ** 2 + 1)}/Newton eval: "
          f"{'exact' if budget_ok else 'MISMATCH'})")
    if deviation is not None:
        print(f"max deviation vs {ref_kind}: {deviation.max():.3e}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            cols = ",".join(f"x_{k}" for k in range(poly.d))
            fh.write(f"t,lambda,deviation,{cols}\n")
            for t in range(args.T):
                dev = deviation[t] if deviation is not None else float("nan")
                fh.write(f"{t + 1},{lam_trace[t]!r},{dev!r},"
                         + ",".join(repr(float(v)) for v in xs[t]) + "\n")
        print(f"trace written to {args.out}")
        if not args.no_plots:
            from cautious.plots import render_kernel_plots

            stem = args.out[:-4] if args.out.endswith(".csv") else args.out
            for p in render_kernel_plots(rounds, lam_trace, deviation, stem):
                print(f"figure written to {p}")
    if not budget_ok:
        return 1
    if deviation is not None and ref_kind == "coordinate learner" and deviation.max() > 1e-12:
        print("FAIL: simplex run deviates from the coordinate learner beyond 1e-12")
        return 1
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    args = _apply_config(parser, args, argv)
    if args.command == "selfplay":
        return cmd_selfplay(parser, args)
    if args.command == "verify":
        return cmd_verify(parser, args)
    return cmd_kernel_demo(parser, args)


if __name__ == "__main__":
    sys.exit(main())
