"""
Command-line surface.

    python cli.py eval --formula "F[1,2] p" --trace path.csv --atoms atoms.cfg [--at t]
    python cli.py eval-discrete --formula ... --trace grid.csv --atoms ... [--n N] [--at t]
    python cli.py mc --semantics discrete --formula ... --atoms ... --sampler bm --n 8 --trials 10000
    python cli.py sweep --formula ... --atoms ... --ns 2,4,8,16 [--reference 4096]
    python cli.py repro counterexample [--trials N] [--seed S] [--out dir]
    python cli.py check-sde --sampler "ou(1)" --probe "[-10,10]"

Exit codes: 0 success (or verdict PASS), 1 verdict FAIL, 2 usage or input error.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from config import configure_logging, get_settings
from csem import eval_timeset, holds_at
from dsem import eval_all, eval_holds
from errors import MTLError
from formula import AtomMap, parse, temporal_depth, to_text
from harness import EXPERIMENTS, convergence_sweep, estimate_continuous_pl, estimate_discrete, run_experiment
from stochastic import parse_sampler, validate_sde_assumptions
from timeset import parse_interval
from traces import GridTrace, PLTrace, grid_project, load_trace

logger = logging.getLogger(__name__)

# Fix Windows encoding issue
if hasattr(sys.stdout, "reconfigure"):
    sys.stdout.reconfigure(encoding="utf-8")


def _banner(title):
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)


def load_atoms(value):
    """Atom map from a `name = <region>` file, or inline text with `;` between entries"""
    if value is None:
        return AtomMap()
    path = Path(value)
    if path.is_file():
        return AtomMap.load(path)
    return AtomMap.parse(value.replace(";", "\n"))


def _cmd_eval(args):
    phi = parse(args.formula)
    trace = load_trace(args.trace)
    if isinstance(trace, GridTrace):
        trace = trace.to_pl()
    atoms = load_atoms(args.atoms)
    if args.at is not None:
        result = holds_at(phi, trace, atoms, args.at)
        print(f"{to_text(phi)} at t={args.at}: {'true' if result else 'false'}")
        return 0
    horizon = args.horizon if args.horizon is not None else trace.horizon - temporal_depth(phi)
    result = eval_timeset(phi, trace, atoms, horizon)
    print(f"[[{to_text(phi)}]] on [0,{horizon:g}] = {result}")
    return 0


def _cmd_eval_discrete(args):
    phi = parse(args.formula)
    trace = load_trace(args.trace)
    if isinstance(trace, PLTrace):
        if args.n is None:
            raise MTLError("a PL trace needs --n to be projected onto a grid")
        trace = grid_project(trace, args.n)
    atoms = load_atoms(args.atoms)
    if args.at is not None:
        result = eval_holds(phi, trace, atoms, args.at)
        print(f"{to_text(phi)} at t={args.at} (n={trace.n}): {'true' if result else 'false'}")
        return 0
    truth = eval_all(phi, trace, atoms)
    cells = ["?" if m else ("T" if v else "F") for v, m in zip(truth.data, np.ma.getmaskarray(truth))]
    print(f"{to_text(phi)} on N/{trace.n}: {''.join(cells)}")
    return 0


def _cmd_mc(args):
    settings = get_settings()
    phi = parse(args.formula)
    atoms = load_atoms(args.atoms)
    sampler = parse_sampler(args.sampler, args.x0)
    seed = settings.seed if args.seed is None else args.seed
    pool = {"workers": args.workers, "chunk_size": args.chunk_size}
    if args.semantics == "discrete":
        estimate = estimate_discrete(phi, sampler, atoms, args.at, args.n, args.trials, seed, horizon=args.horizon, **pool)
    else:
        estimate = estimate_continuous_pl(phi, sampler, atoms, args.at, args.n, args.trials, seed, horizon=args.horizon, **pool)
    _banner(f"📊 {estimate.label}: {to_text(phi)}")
    print(f"   successes: {estimate.successes}/{estimate.trials}")
    print(f"   p_hat:     {estimate.p_hat:.6g}")
    print(f"   {estimate.confidence:.0%} CI:    [{estimate.ci_lo:.6g}, {estimate.ci_hi:.6g}]")
    return 0


def _cmd_sweep(args):
    settings = get_settings()
    phi = parse(args.formula)
    atoms = load_atoms(args.atoms)
    sampler = parse_sampler(args.sampler, args.x0)
    ns = [int(v) for v in args.ns.split(",") if v.strip()]
    seed = settings.seed if args.seed is None else args.seed
    sweep = convergence_sweep(
        phi, sampler, atoms, args.at, ns, args.trials, seed,
        reference_m=args.reference, horizon=args.horizon,
        workers=args.workers, chunk_size=args.chunk_size,
    )
    _banner(f"📊 Convergence sweep: {to_text(phi)}")
    print(sweep.frame().to_string(index=False))
    print(f"\nPaths losing a witness under refinement: {sweep.monotone_violations()}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        sweep.frame().to_csv(args.out, index=False, lineterminator="\n")
        print(f"✅ Wrote {args.out}")
    return 0


def _cmd_repro(args):
    report = run_experiment(
        args.name, trials=args.trials, seed=args.seed, out_dir=args.out,
        workers=args.workers, chunk_size=args.chunk_size,
    )
    _banner(f"EXPERIMENT: {report.experiment}  (seed {report.seed}, {report.trials} trials)")
    print(report.frame().to_string(index=False))
    print(f"\n{'✅' if report.success else '❌'} Verdict: {report.verdict}")
    return 0 if report.success else 1


def _cmd_check_sde(args):
    sampler = parse_sampler(args.sampler)
    report = validate_sde_assumptions(sampler.spec, parse_interval(args.probe), args.samples)
    _banner(f"SDE assumption spot-check: {sampler} on {args.probe}")
    for key, value in report.as_dict().items():
        if key != "warnings":
            print(f"   {key}: {value}")
    for message in report.warnings:
        print(f"   ⚠️ {message}")
    return 0 if report.passed else 1


def _add_pool(sub):
    sub.add_argument("--workers", type=int, default=None, help="worker processes (default MTL_WORKERS)")
    sub.add_argument("--chunk-size", type=int, default=None, help="paths per work item (default MTL_CHUNK_SIZE)")


def _add_model(sub):
    sub.add_argument("--formula", required=True)
    sub.add_argument("--atoms", help="atom map file, or inline 'p=[1,inf);q=(0,1)'")
    sub.add_argument("--sampler", default="bm", help="bm | ou(theta[,sigma]) | const-sigma(c) | ramp")
    sub.add_argument("--x0", type=float, default=0.0)
    sub.add_argument("--at", type=float, default=0.0, help="evaluation time t")
    sub.add_argument("--horizon", type=float, default=None)
    sub.add_argument("--trials", type=int, default=10_000)
    sub.add_argument("--seed", type=int, default=None)
    _add_pool(sub)


def build_parser():
    parser = argparse.ArgumentParser(prog="cli.py", description="MTL statistical model checking")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("eval", help="continuous semantics on a PL trace")
    sub.add_argument("--formula", required=True)
    sub.add_argument("--trace", required=True)
    sub.add_argument("--atoms")
    sub.add_argument("--at", type=float, default=None)
    sub.add_argument("--horizon", type=float, default=None)
    sub.set_defaults(run=_cmd_eval)

    sub = commands.add_parser("eval-discrete", help="discrete semantics on a grid trace")
    sub.add_argument("--formula", required=True)
    sub.add_argument("--trace", required=True)
    sub.add_argument("--atoms")
    sub.add_argument("--n", type=int, default=None, help="grid used to project a PL trace")
    sub.add_argument("--at", type=float, default=None)
    sub.set_defaults(run=_cmd_eval_discrete)

    sub = commands.add_parser("mc", help="Monte Carlo estimate of a satisfaction probability")
    sub.add_argument("--semantics", choices=["discrete", "continuous-pl"], default="discrete")
    sub.add_argument("--n", type=int, required=True, help="grid resolution (fine resolution m for continuous-pl)")
    _add_model(sub)
    sub.set_defaults(run=_cmd_mc)

    sub = commands.add_parser("sweep", help="discrete estimates along a list of resolutions")
    sub.add_argument("--ns", required=True, help="comma-separated resolutions, e.g. 2,4,8,16")
    sub.add_argument("--reference", type=int, default=None, help="continuous-PL reference resolution")
    sub.add_argument("--out", default=None, help="CSV file for the table")
    _add_model(sub)
    sub.set_defaults(run=_cmd_sweep)

    sub = commands.add_parser("repro", help="run a canned experiment")
    sub.add_argument("name", choices=sorted(EXPERIMENTS))
    sub.add_argument("--trials", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default=None)
    _add_pool(sub)
    sub.set_defaults(run=_cmd_repro)

    sub = commands.add_parser("check-sde", help="spot-check drift/diffusion assumptions")
    sub.add_argument("--sampler", required=True)
    sub.add_argument("--probe", default="[-10,10]")
    sub.add_argument("--samples", type=int, default=1001)
    sub.set_defaults(run=_cmd_check_sde)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        configure_logging()
        return args.run(args)
    except MTLError as e:
        logger.error("❌ %s", e)
        print(f"❌ Error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
