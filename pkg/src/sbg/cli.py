"""Command-line entry point ``sbg``.

Subcommands::

    sbg gen-game    draw a random GP game and write it as JSON
    sbg solve       run a solver on a game file; JSON result, query-log CSV
    sbg bounds      hardness terms and bounds of a game as JSON
    sbg spitfire    discretization experiment on the missile-versus-flare game; CSV
    sbg experiment  batch experiment from a TOML config

Every subcommand accepts ``--seed``, ``--out`` and ``--config``; a config file
supplies defaults for any long option (``round-cap = 5000`` or
``round_cap = 5000``). Exit status is 0 on success, 2 on invalid parameters
and 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import logging
import math
import sys

from sbg import complexity, games, harness, solvers
from sbg.errors import InfeasibleError, NumericError, ParameterError
from sbg.games import FiniteGame, GameSimulator
from sbg.gp import KernelSpec, ProfileGrid

EXIT_OK, EXIT_PARAM, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _kernel_args(p):
    p.add_argument("--kernel", choices=("se", "matern"), default="se")
    p.add_argument("--length-scale", type=float, default=0.1)
    p.add_argument("--nu", type=float, default=2.5, help="Matern smoothness")


def _kernel(args) -> KernelSpec:
    if args.kernel == "matern":
        return KernelSpec.matern(args.length_scale, args.nu)
    return KernelSpec.se(args.length_scale)


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise ParameterError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        yield fh


def _load_game(path) -> FiniteGame:
    try:
        return FiniteGame.load(path)
    except OSError as exc:
        raise ParameterError(f"cannot read game {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path} is not valid JSON: {exc}") from None


def _finite(v):
    return v if v is None or math.isfinite(v) else None


# ---------------------------------------------------------------------------


def cmd_gen_game(args) -> int:
    grid = ProfileGrid.equally_spaced(args.n, args.m)
    game = games.random_gp_game(grid, _kernel(args), args.seed)
    with _output(args.out) as fh:
        fh.write(game.to_json() + "\n")
    return EXIT_OK


def cmd_solve(args) -> int:
    game = _load_game(args.game)
    sim = GameSimulator(game, args.noise, args.seed)
    if args.algorithm == "m_gp_lucb":
        res = solvers.m_gp_lucb(sim, game.grid, args.eps, args.delta, _kernel(args), round_cap=args.round_cap)
    elif args.algorithm == "m_g_lucb":
        res = solvers.m_g_lucb(sim, game.grid, args.eps, args.delta, round_cap=args.round_cap)
    elif args.algorithm == "m_lucb":
        spread = args.utility_range or float(game.u.max() - game.u.min()) or 1.0
        res = solvers.m_lucb(sim, game.grid, args.eps, args.delta, spread, round_cap=args.round_cap)
    else:
        if args.budget is None:
            raise ParameterError("gp_se needs --budget")
        res = solvers.gp_se(sim, game.grid, args.budget, _kernel(args))
    doc = {"algorithm": args.algorithm, "x_index": res.profile[0], "y_index": res.profile[1],
           "x": res.point[0], "y": res.point[1], "rounds_used": res.rounds_used,
           "terminated": res.terminated, "correct": harness.is_correct(game, res.profile[0])}
    with _output(args.out) as fh:
        res.query_log.write_csv(fh)
    # the result goes to stdout unless stdout already carries the log
    dest = sys.stderr if args.out in (None, "-") else sys.stdout
    dest.write(json.dumps(doc) + "\n")
    return EXIT_OK


def cmd_bounds(args) -> int:
    if not 0 < args.delta < 1:
        raise ParameterError("delta must lie in (0, 1)")
    game = _load_game(args.game)
    n, m = game.shape
    prof = complexity.hardness(game)
    doc = {"h_star": prof.h_star, "h_one": prof.h_one, "h_two": prof.h_two}
    try:
        doc["t_delta"] = complexity.t_delta_bound(prof.h_star, args.noise, n, m, args.delta)
    except ParameterError:
        doc["t_delta"] = complexity.t_delta_inf(prof.h_star, args.noise, n, m, delta=args.delta)
    budget = args.budget if args.budget is not None else 10 * n * m * math.ceil(prof.h_two)
    doc["delta_T"] = complexity.clamp_probability(complexity.delta_T(budget, n * m, n, m, args.noise, prof.h_two))
    a, b = games.smoothness_constants(_kernel(args))
    a = args.a if args.a is not None else a
    b = args.b if args.b is not None else b
    doc["k_eps"] = games.k_epsilon(args.eps, args.delta, a, b)
    # the discretized game's H2 is unknown a priori; the supplied game's H2 stands in
    try:
        doc["delta_T_eps"] = complexity.delta_T_eps(budget, args.eps, args.delta, a, b, args.noise, prof.h_two)
    except ParameterError:
        doc["delta_T_eps"] = None
    try:
        doc["delta_opt"], _ = complexity.delta_opt(budget, args.eps, a, b, args.noise, lambda k: prof.h_two)
    except InfeasibleError:
        doc["delta_opt"] = None
    doc = {k: _finite(v) if isinstance(v, float) else v for k, v in doc.items()}
    with _output(args.out) as fh:
        fh.write(json.dumps(doc) + "\n")
    return EXIT_OK


def cmd_spitfire(args) -> int:
    cfg = harness.ExperimentConfig(
        source="spitfire", kernel=args.kernel, length_scale=args.length_scale, nu=args.nu,
        algorithm="m_gp_lucb", delta=args.delta, eps=0.0, round_cap=args.round_cap, noise=args.noise,
        runs=args.runs, seed=args.seed, a=args.a, b=args.b, instances=1)
    _, rows = harness.eps_table(cfg, args.k_eps)
    with _output(args.out) as fh:
        harness.write_run_rows(rows, fh)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config is None:
        raise ParameterError("experiment needs --config")
    over = {"seed": args.seed, "output": args.out, "workers": args.workers}
    cfg = harness.load_config(args.config, **over)
    records, summary = harness.run_experiment(cfg)
    if cfg.output:
        try:
            paths = harness.emit(records, summary, cfg.output)
        except OSError as exc:
            raise ParameterError(str(exc)) from None
        sys.stderr.write(f"wrote {', '.join(paths.values())}\n")
        sys.stdout.write(json.dumps(summary) + "\n")
    else:
        buf = io.StringIO()
        harness.write_records(records, buf)
        sys.stdout.write(buf.getvalue())
        sys.stderr.write(json.dumps(summary) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    common.add_argument("--out", default=None, help="output file or directory ('-' for stdout)")
    common.add_argument("--config", default=None, help="TOML file of option defaults")

    parser = _Parser(prog="sbg", description="Maximin learning in simulation-based games.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-game", parents=[common], help="draw a random GP game")
    _kernel_args(p)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=3)
    p.set_defaults(func=cmd_gen_game)

    p = sub.add_parser("solve", parents=[common], help="identify the maximin profile of a game")
    p.add_argument("--game", required=True)
    p.add_argument("--algorithm", choices=harness.ALGORITHMS, default="m_gp_lucb")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--round-cap", type=int, default=30_000)
    p.add_argument("--budget", type=int, default=None, help="query budget for gp_se")
    p.add_argument("--utility-range", type=float, default=None, help="m_lucb interval scale")
    _kernel_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bounds", parents=[common], help="hardness terms and bounds")
    p.add_argument("--game", required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--budget", type=int, default=None, help="defaults to 10 P ceil(H2)")
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    _kernel_args(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("spitfire", parents=[common], help="discretization experiment on the flare game")
    p.add_argument("--k-eps", type=int, nargs="+", default=[4, 8, 16])
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--round-cap", type=int, default=10_000)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    _kernel_args(p)
    p.set_defaults(func=cmd_spitfire)

    p = sub.add_parser("experiment", parents=[common], help="batch experiment from a config")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` (except for ``experiment``)."""
    args = parser.parse_args(argv)
    if args.command == "experiment":
        return args
    if args.config is None:
        return _default_seed(args)
    try:
        with open(args.config, "rb") as fh:
            doc = harness.tomllib.load(fh)
    except OSError as exc:
        raise ParameterError(f"cannot read config {args.config}: {exc.strerror}") from None
    except harness.tomllib.TOMLDecodeError as exc:
        raise ParameterError(f"bad config {args.config}: {exc}") from None
    defaults = {k.replace("-", "_"): v for k, v in doc.items()}
    known = vars(args)
    unknown = sorted(set(defaults) - set(known))
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**defaults)
    return _default_seed(parser.parse_args(argv))


def _default_seed(args):
    if args.seed is None:
        args.seed = 0
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ParameterError as exc:
        sys.stderr.write(f"sbg: error: {exc}\n")
        return EXIT_PARAM
    except (NumericError, ArithmeticError, FloatingPointError) as exc:
        sys.stderr.write(f"sbg: numeric error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
