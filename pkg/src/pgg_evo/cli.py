"""Command-line entry point: ``pgg-evo <command> [options]``.

Exit status is 0 on success, 1 on numeric failure, I/O failure or a failed
validation, and 2 on usage or domain errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import replace

from . import __version__
from .analytic import EXACT, GROUP, MODES, POOLS, PAPER, FocalContext, v_err
from .errors import DivergenceError, DomainError, NumericError
from .game import EnvParams, GameParams, PopulationProfile
from .sim import (
    GROUPINGS, IMITATION, KERNELS, RULES, UNIFORM, PARTITION, SimConfig,
    drift_experiment, estimate_v, evolve,
)
from .stability import (
    band_ordering_report, classify, ess_epsilon_band, sweep_delta_curves,
)
from .statespace import PAPER_ABSORBING, SEMANTICS

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _game_args(p: argparse.ArgumentParser, *, n=None, b=None, c=None, delta=None,
               epsilon: float | None = 0.0) -> None:
    p.add_argument("--n", type=int, default=n, help="group size")
    p.add_argument("--b", type=float, default=b, help="benefit scale")
    p.add_argument("--c", type=float, default=c, help="contribution cost")
    if delta is not False:
        p.add_argument("--delta", type=float, default=delta, help="continuation probability")
    if epsilon is not False:
        p.add_argument("--epsilon", type=float, default=epsilon, help="mistake probability")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgg-evo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with option values (CLI flags win)")
        p.add_argument("--out", help="write the main output here instead of stdout")
        return p

    p = command("payoff", "repeated-game value of a focal player among incumbents")
    _game_args(p)
    p.add_argument("--incumbent-k", type=int)
    p.add_argument("--focal-k", type=int)
    p.add_argument("--mode", choices=MODES, default=PAPER)
    p.add_argument("--pool", choices=POOLS, default=GROUP,
                   help="which mistakes end a mutant's cooperation")
    p.add_argument("--oracle", type=int, default=0, metavar="R",
                   help="also estimate by R Monte Carlo episodes")
    p.add_argument("--semantics", choices=SEMANTICS, default=PAPER_ABSORBING)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = command("stability", "classify the monomorphic T_k population")
    _game_args(p)
    p.add_argument("--k", type=int)

    p = command("band", "mistake-rate band in which T_k is evolutionarily stable")
    _game_args(p, epsilon=False)
    p.add_argument("--k", type=int, help="omit for every k plus the ordering checks")

    p = command("sweep", "discriminant curves for plotting")
    _game_args(p, n=10, b=10.0, c=5.0, delta=False, epsilon=False)
    p.add_argument("--deltas", type=_floats, default=[1.0, 0.9, 0.8])
    p.add_argument("--ks", type=_ints, default=None)
    p.add_argument("--points", type=int, default=999)
    p.add_argument("--eps-min", type=float, default=1e-4)
    p.add_argument("--eps-max", type=float, default=1.0 - 1e-4)
    p.add_argument("--gnuplot", help="also write a gnuplot script to this path")

    p = command("simulate", "population dynamics (or a paired drift experiment)")
    _game_args(p, n=10, b=10.0, c=5.0, delta=0.9)
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--rule", choices=RULES, default=IMITATION)
    p.add_argument("--selection", type=float, default=1.0)
    p.add_argument("--mutation-rate", type=float, default=1e-3)
    p.add_argument("--kernel", choices=KERNELS, default=UNIFORM)
    p.add_argument("--generations", type=int, default=1000)
    p.add_argument("--episodes-per-generation", type=int, default=10)
    p.add_argument("--grouping", choices=GROUPINGS, default=PARTITION)
    p.add_argument("--semantics", choices=SEMANTICS, default=PAPER_ABSORBING)
    p.add_argument("--initial", type=_ints, default=None,
                   help="initial strategies, equal shares (default: the hardest cooperator)")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drift", type=int, default=0, metavar="TRIALS",
                   help="run the paired drift experiment against epsilon = 0")
    p.add_argument("--summary", help="write the JSON summary to this path")

    p = command("validate", "check closed forms, bands and the Monte Carlo oracle")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--seed", type=int, default=2024)
    return parser


_INTERNAL = {"command", "config", "func"}


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {args.config} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    known = set(vars(args)) - _INTERNAL
    unknown = sorted(set(k.replace("-", "_") for k in data) - known)
    if unknown:
        raise UsageError(f"unknown config fields: {unknown}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in data.items()})
    return parser.parse_args(argv)


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError(f"missing required options: {', '.join(missing)}")


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _INTERNAL}


def _params(args) -> GameParams:
    _need(args, "n", "b", "c")
    return GameParams(args.n, args.b, args.c)


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _dump(obj, fh) -> None:
    fh.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def cmd_payoff(args) -> int:
    _need(args, "delta", "epsilon", "incumbent_k", "focal_k")
    params = _params(args)
    env = EnvParams(args.delta, args.epsilon)
    ctx = FocalContext(args.incumbent_k, args.focal_k, mode=args.mode, mistake_pool=args.pool)
    value = v_err(ctx, params, env)
    report = {"config": _resolved(args), "case": ctx.case(params.n), "value": value}
    if args.oracle:
        est = estimate_v(args.incumbent_k, args.focal_k, params, env, args.oracle,
                         semantics=args.semantics, seed=args.seed)
        report["oracle"] = {"mean": est.mean, "se": est.se, "replications": est.replications,
                            "z": est.z(value)}
    with _output(args.out) as fh:
        if args.format == "json":
            _dump(report, fh)
        else:
            fh.write(f"{value!r}\n")
            if args.oracle:
                o = report["oracle"]
                fh.write(f"oracle {o['mean']!r} se {o['se']!r} z {o['z']:.3f}\n")
    return EXIT_OK


def cmd_stability(args) -> int:
    _need(args, "delta", "epsilon", "k")
    verdict = classify(args.k, _params(args), EnvParams(args.delta, args.epsilon))
    with _output(args.out) as fh:
        _dump({"config": _resolved(args), **verdict.to_json()}, fh)
    return EXIT_OK


def cmd_band(args) -> int:
    _need(args, "delta")
    params = _params(args)
    if args.k is not None:
        report = {"config": _resolved(args), **ess_epsilon_band(args.k, params, args.delta).to_json()}
    else:
        report = {"config": _resolved(args), **band_ordering_report(params, args.delta).to_json()}
    with _output(args.out) as fh:
        _dump(report, fh)
    return EXIT_OK


def cmd_sweep(args) -> int:
    import numpy as np

    params = _params(args)
    if args.points < 2 or not 0.0 < args.eps_min < args.eps_max < 1.0:
        raise UsageError("need --points >= 2 and 0 < --eps-min < --eps-max < 1")
    grid = np.linspace(args.eps_min, args.eps_max, args.points)
    table = sweep_delta_curves(params.n, args.deltas, args.ks, grid, params)
    with _output(args.out) as fh:
        table.write_csv(fh)
    if args.gnuplot:
        with open(args.gnuplot, "w") as fh:
            fh.write(table.gnuplot_script(args.out or "sweep.csv"))
    return EXIT_OK


def _sim_config(args) -> SimConfig:
    params = _params(args)
    initial = None
    if args.initial:
        share = 1.0 / len(args.initial)
        weights: dict[int, float] = {}
        for k in args.initial:
            weights[k] = weights.get(k, 0.0) + share
        initial = PopulationProfile(weights)
    return SimConfig(
        size=args.size, params=params, env=EnvParams(args.delta, args.epsilon),
        rule=args.rule, selection=args.selection, mutation_rate=args.mutation_rate,
        kernel=args.kernel, generations=args.generations,
        episodes_per_generation=args.episodes_per_generation, seed=args.seed,
        semantics=args.semantics, initial=initial, grouping=args.grouping,
        record_every=args.record_every,
    )


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    if args.drift:
        summary = drift_experiment(replace(cfg, stop_at_takeover=True), args.drift)
        with _output(args.out) as fh:
            _dump({"config": _resolved(args), **summary.to_json()}, fh)
        return EXIT_OK
    trace = evolve(cfg)
    with _output(args.out) as fh:
        trace.write_csv(fh)
    if args.summary:
        with open(args.summary, "w") as fh:
            _dump({"cli": _resolved(args), **trace.summary()}, fh)
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validation import run_validation

    results = run_validation(quick=args.quick, seed=args.seed)
    failed = [r for r in results if not r.passed]
    with _output(args.out) as fh:
        for r in results:
            fh.write(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}\n")
        fh.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "payoff": cmd_payoff,
    "stability": cmd_stability,
    "band": cmd_band,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DivergenceError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        diagnostics = getattr(exc, "diagnostics", None)
        if diagnostics:
            print(json.dumps(diagnostics, default=str), file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
