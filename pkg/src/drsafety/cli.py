"""Command-line interface.

Subcommands: validate, solve, sweep, oracle-check, reconcile, simulate.
Exit codes: 0 success (and, for solve/sweep, MDP certified safe at
every requested radius), 1 ran but not certified, 2 input error,
3 non-convergence.  All randomness is seeded through explicit flags.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .backup import robust_backup, robust_backup_epigraph
from .iteration import (
    InvalidP,
    IterationConfig,
    NotConverged,
    largest_certified_delta,
    sweep_delta,
)
from .metric import AmbiguitySpec, GroundMetric
from .model import ModelError
from .modelfile import ModelSyntaxError, ParsedModel, parse_model
from .oracle import (
    NoCandidate,
    monte_carlo_hitting,
    primal_inner_sup,
    reconcile_baseline,
    worst_case_kernel,
)
from .report import build_report_doc, input_digest, render_csv, render_json, render_table

EXIT_OK = 0
EXIT_UNSAFE = 1
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3

# Reference sweep shipped with the eleven-state example: the baseline
# row its reconcile subcommand explains, and the positive-radius rows
# candidates are scored against.
REFERENCE_SWEEP = {
    0.0: {1: 0.1734, 2: 0.0800, 3: 0.2669, 4: 0.1000, 5: 0.0500, 6: 0.1837, 7: 0.3500},
    0.05: {1: 0.2290, 2: 0.1301, 3: 0.3100, 4: 0.1345, 5: 0.1017, 6: 0.2267, 7: 0.3782},
    0.1: {1: 0.2844, 2: 0.1826, 3: 0.3522, 4: 0.1703, 5: 0.1555, 6: 0.2703, 7: 0.4068},
    0.15: {1: 0.3388, 2: 0.2371, 3: 0.3935, 4: 0.2077, 5: 0.2115, 6: 0.3147, 7: 0.4359},
    0.2: {1: 0.3917, 2: 0.2933, 3: 0.4338, 4: 0.2466, 5: 0.2698, 6: 0.3599, 7: 0.4655},
    0.25: {1: 0.4426, 2: 0.3509, 3: 0.4732, 4: 0.2870, 5: 0.3304, 6: 0.4059, 7: 0.4957},
    0.3: {1: 0.4912, 2: 0.4095, 3: 0.5116, 4: 0.3289, 5: 0.3934, 6: 0.4526, 7: 0.5263},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drsafety",
        description="Distributionally robust p-safety verification for finite MDPs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(sp):
        sp.add_argument("model", help="model document path")
        strict = sp.add_mutually_exclusive_group()
        strict.add_argument("--strict", dest="strict", action="store_true",
                            default=True, help="reject unknown directives (default)")
        strict.add_argument("--lax", dest="strict", action="store_false",
                            help="warn on unknown directives instead")

    def add_iteration(sp):
        sp.add_argument("--theta", type=float, default=1e-8,
                        help="convergence threshold (default 1e-8)")
        sp.add_argument("--max-sweeps", type=int, default=100_000)
        sp.add_argument("--scheme", choices=("jacobi", "gauss-seidel"),
                        default="jacobi")

    def add_format(sp):
        sp.add_argument("--format", choices=("table", "csv", "report"),
                        default="table")

    sp = sub.add_parser("validate", help="check a model document")
    add_model(sp)

    sp = sub.add_parser("solve", help="verify one ambiguity radius")
    add_model(sp)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--p", type=float, default=None)
    add_iteration(sp)
    add_format(sp)

    sp = sub.add_parser("sweep", help="verify a radius grid")
    add_model(sp)
    sp.add_argument("--deltas", default=None,
                    help="comma-separated ascending radii")
    sp.add_argument("--p", type=float, default=None)
    add_iteration(sp)
    add_format(sp)

    sp = sub.add_parser("oracle-check",
                        help="three-way agreement of backup routes on random instances")
    sp.add_argument("--instances", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-states", type=int, default=6)

    sp = sub.add_parser("reconcile",
                        help="search terminal rows matching a baseline row")
    add_model(sp)
    sp.add_argument("--targets", default=None,
                    help="comma-separated baseline per taboo state "
                         "(default: the bundled reference row)")
    sp.add_argument("--grid-step", type=float, default=0.05)
    sp.add_argument("--p", type=float, default=None)
    add_iteration(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo hitting estimate")
    add_model(sp)
    sp.add_argument("--start", type=int, default=None,
                    help="start state (default: every taboo state)")
    sp.add_argument("--trajectories", type=int, default=100_000)
    sp.add_argument("--step-cap", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--worst-case", action="store_true",
                    help="simulate the adversarial kernel at --delta")
    sp.add_argument("--delta", type=float, default=None)
    add_iteration(sp)
    return parser


def _load(args) -> tuple[ParsedModel, bytes]:
    data = Path(args.model).read_bytes()
    return parse_model(args.model, strict=args.strict), data


def _pick_p(args, parsed: ParsedModel) -> float:
    if args.p is not None:
        return args.p
    if parsed.defaults.p is not None:
        return parsed.defaults.p
    raise InvalidP("no safety level: pass --p or add a p line to the model file")


def _emit_reports(args, reports, digest) -> None:
    if args.format == "csv":
        sys.stdout.write(render_csv(reports))
    elif args.format == "report":
        sys.stdout.write(render_json(build_report_doc(reports, digest, __version__)))
    else:
        sys.stdout.write(render_table(reports))


def _cmd_validate(args) -> int:
    parsed, _ = _load(args)
    m = parsed.model
    n_goal = sum(1 for c in m.classes if c.value == "goal")
    n_forbidden = sum(1 for c in m.classes if c.value == "forbidden")
    sys.stdout.write(
        f"{args.model}: valid model with {m.n_states} states "
        f"({len(m.taboo_labels)} taboo, {n_goal} goal, {n_forbidden} forbidden), "
        f"{len(m.pairs())} kernel rows\n"
    )
    return EXIT_OK


def _cmd_solve(args) -> int:
    parsed, data = _load(args)
    delta = args.delta if args.delta is not None else parsed.defaults.delta
    if delta is None:
        raise ModelError("no radius: pass --delta or add a delta line to the file")
    p = _pick_p(args, parsed)
    cfg = IterationConfig(theta=args.theta, max_sweeps=args.max_sweeps,
                          update_scheme=args.scheme)
    reports = sweep_delta(parsed.model, parsed.policy, [delta], p, cfg,
                          metric=parsed.metric)
    _emit_reports(args, reports, input_digest(data))
    return EXIT_OK if reports[0].mdp_verdict else EXIT_UNSAFE


def _cmd_sweep(args) -> int:
    parsed, data = _load(args)
    if args.deltas is not None:
        deltas = [float(tok) for tok in args.deltas.split(",") if tok != ""]
    elif parsed.defaults.delta is not None:
        deltas = [parsed.defaults.delta]
    else:
        raise ModelError("no radii: pass --deltas or add a delta line to the file")
    if sorted(deltas) != deltas:
        raise ModelError("--deltas must be ascending")
    p = _pick_p(args, parsed)
    cfg = IterationConfig(theta=args.theta, max_sweeps=args.max_sweeps,
                          update_scheme=args.scheme)
    reports = sweep_delta(parsed.model, parsed.policy, deltas, p, cfg,
                          metric=parsed.metric)
    _emit_reports(args, reports, input_digest(data))
    return EXIT_OK if all(r.mdp_verdict for r in reports) else EXIT_UNSAFE


def _cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for i in range(args.instances):
        n = int(rng.integers(2, args.max_states + 1))
        labels = np.sort(rng.choice(np.arange(1, 4 * args.max_states),
                                    size=n, replace=False))
        spec = AmbiguitySpec(float(rng.random()), GroundMetric.abs_diff(labels))
        row = rng.dirichlet(np.ones(n))
        values = rng.random(n)
        a = robust_backup(row, values, spec).value
        b = robust_backup_epigraph(row, values, spec).value
        c = primal_inner_sup(row, values, spec).attained_value
        worst = max(worst, abs(a - b), abs(a - c), abs(b - c))
    ok = worst <= 1e-7
    sys.stdout.write(
        f"three-way agreement on {args.instances} instances: "
        f"max pairwise gap {worst:.3e} "
        f"({'PASS' if ok else 'FAIL'} at 1e-7)\n"
    )
    return EXIT_OK if ok else EXIT_UNSAFE


def _cmd_reconcile(args) -> int:
    parsed, _ = _load(args)
    model, policy = parsed.model, parsed.policy
    if args.targets is not None:
        values = [float(tok) for tok in args.targets.split(",") if tok != ""]
        if len(values) != len(model.taboo_labels):
            raise ModelError(
                f"--targets needs {len(model.taboo_labels)} values "
                f"(one per taboo state, ascending label order)")
        target = dict(zip(model.taboo_labels, values))
        reference = None
    else:
        target = REFERENCE_SWEEP[0.0]
        reference = REFERENCE_SWEEP
        if set(model.taboo_labels) != set(target):
            raise ModelError(
                "default reference targets fit the bundled model only; "
                "pass --targets for other models")
    p = _pick_p(args, parsed)
    cfg = IterationConfig(theta=args.theta, max_sweeps=args.max_sweeps,
                          update_scheme=args.scheme)
    candidates = reconcile_baseline(model, policy, target,
                                  grid_step=args.grid_step,
                                  reference_table=reference, p=p, cfg=cfg)
    sys.stdout.write(f"{len(candidates)} candidate kernel(s) match the "
                     f"baseline within 5e-4\n")
    for rank, cand in enumerate(candidates[:5], start=1):
        rows = "; ".join(
            f"({x},{a}): " + " ".join(f"{to}:{prob:g}" for to, prob in row.items())
            for (x, a), row in sorted(cand.adjusted_rows.items())
        )
        sys.stdout.write(f"#{rank} adjusted {rows}\n")
        if cand.reports:
            dev = cand.max_deviation
            best = largest_certified_delta(cand.reports)
            sys.stdout.write(
                f"#{rank} max |J - reference| over positive radii: {dev:.4f}; "
                f"largest certified radius at p = {p}: {best}\n"
            )
    return EXIT_OK


def _cmd_simulate(args) -> int:
    parsed, _ = _load(args)
    model, policy = parsed.model, parsed.policy
    if args.worst_case:
        delta = args.delta if args.delta is not None else parsed.defaults.delta
        if delta is None:
            raise ModelError("--worst-case needs --delta (or a delta line)")
        cfg = IterationConfig(theta=args.theta, max_sweeps=args.max_sweeps,
                              update_scheme=args.scheme)
        model = worst_case_kernel(model, policy,
                                  AmbiguitySpec(delta, parsed.metric), cfg)
        sys.stdout.write(f"simulating the worst-case kernel at radius {delta}\n")
    starts = [args.start] if args.start is not None else list(model.taboo_labels)
    for x0 in starts:
        est = monte_carlo_hitting(model, policy, x0, args.trajectories,
                                  step_cap=args.step_cap, seed=args.seed)
        sys.stdout.write(
            f"state {x0}: estimate {est.estimate:.6f} "
            f"stderr {est.stderr:.6f} censored {est.censored}\n"
        )
    return EXIT_OK


def run_cli(argv) -> int:
    """Dispatch a parsed command line; returns the process exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": _cmd_validate,
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "oracle-check": _cmd_oracle_check,
        "reconcile": _cmd_reconcile,
        "simulate": _cmd_simulate,
    }
    try:
        return handlers[args.command](args)
    except (ModelError, ModelSyntaxError, InvalidP, OSError, ValueError) as err:
        sys.stderr.write(f"error: {err}\n")
        return EXIT_INPUT
    except NoCandidate as err:
        sys.stderr.write(f"no candidate: {err}\n")
        return EXIT_UNSAFE
    except NotConverged as err:
        sys.stderr.write(f"not converged: {err}\n")
        return EXIT_NOT_CONVERGED


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
