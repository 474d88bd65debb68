"""Command-line entry point.

Exit codes: 0 success, 1 usage or I/O error, 2 infeasible bound,
3 failed verification.
"""
import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import bounds, simulator, sortition
from .errors import EstimabilityError, ParameterError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_REJECTED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _print_table(pairs, out=None):
    out = sys.stdout if out is None else out
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        print(f"{k.ljust(width)}  {_fmt(v)}", file=out)


# -- bound -------------------------------------------------------------------

def cmd_bound(args):
    result = bounds.bound(args.t, args.ve, args.F, R=args.R, exact=args.exact)
    data = result.as_dict()
    if args.format == "json":
        print(json.dumps(data, indent=2))
    else:
        _print_table(list(data.items()))
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


# -- sweep -------------------------------------------------------------------

def cmd_sweep(args):
    values = bounds.grid(args.start, args.stop, args.step)
    if args.kind == "t":
        if args.F is None or args.ve is None:
            raise UsageError("sweep --kind t needs --ve and --F")
        table = bounds.sweep_t(values, args.ve, args.F, R=args.R, exact=not args.no_exact)
    else:
        if args.t is None or args.ve is None:
            raise UsageError("sweep --kind failure needs --t and --ve")
        table = bounds.sweep_failure(values, args.t, args.ve, R=args.R)
    text = table.to_json() + "\n" if args.format == "json" else table.to_csv()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(table.rows)} rows to {args.out}")
    else:
        sys.stdout.write(text)
        print(f"{len(table.rows)} rows", file=sys.stderr)
    return EXIT_OK


# -- simulate ----------------------------------------------------------------

def bundled_scenario_path():
    return resources.files("committee_sortition") / "data" / "desk_scenario.json"


def cmd_simulate(args):
    if args.scenario is None:
        raise UsageError("give a scenario file or --bundled")
    path = bundled_scenario_path() if args.scenario == "bundled" else Path(args.scenario)
    try:
        config = simulator.ScenarioConfig.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read scenario: {exc}") from exc
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    if args.workers is not None:
        config.workers = args.workers
    report = simulator.compare_to_bounds(config)
    data = report.as_dict()
    data["scenario"] = {"seed": config.seed, "trials": config.trials, "R": config.params.R,
                        "c": config.population.c, "v_e": config.params.v_e,
                        "t": config.params.t, "t_h": config.params.t_h, "F": config.params.F}
    text = json.dumps(data, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    if args.format == "table":
        est = report.estimate
        _print_table([
            ("trials", est.trials),
            ("p1_hat", est.p1_hat), ("p1_interval", f"[{est.p1_interval[0]:.6g}, {est.p1_interval[1]:.6g}]"),
            ("exact_p1", report.exact_p1), ("chernoff_p1", report.chernoff_p1),
            ("p2_hat", est.p2_hat), ("p2_interval", f"[{est.p2_interval[0]:.6g}, {est.p2_interval[1]:.6g}]"),
            ("exact_p2", report.exact_p2), ("chernoff_p2", report.chernoff_p2),
            ("chernoff_ok", report.chernoff_ok_p1 and report.chernoff_ok_p2),
            ("ci_contains_exact", report.ci_contains_exact_p1 and report.ci_contains_exact_p2),
        ])
    elif not args.out:
        print(text)
    return EXIT_OK


# -- sortition ---------------------------------------------------------------

def cmd_select(args):
    count, proof = sortition.sortition_select(
        args.key.encode(), args.seed.encode(), args.role.encode(), args.resource, args.p
    )
    try:
        Path(args.out).write_bytes(proof.to_bytes())
    except OSError as exc:
        raise UsageError(f"cannot write proof: {exc}") from exc
    print(count)
    return EXIT_OK


def cmd_verify(args):
    try:
        data = Path(args.proof).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read proof: {exc}") from exc
    try:
        proof = sortition.SelectionProof.from_bytes(data)
    except ValueError as exc:
        raise UsageError(f"malformed proof file: {exc}") from exc
    ok = sortition.sortition_verify(proof, args.resource, args.p)
    print("true" if ok else "false")
    return EXIT_OK if ok else EXIT_REJECTED


# -- repro -------------------------------------------------------------------

def cmd_repro(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = bounds.bound(0.7, 4000, 1e-12, exact=True)
    (out / "bound.json").write_text(json.dumps(result.as_dict(), indent=2) + "\n")
    fig1 = bounds.sweep_t(bounds.grid(0.55, 0.90, 0.01), 4000, 1e-12)
    (out / "fig1_t_vs_c.csv").write_text(fig1.to_csv())
    fig2 = bounds.sweep_failure(bounds.grid(0.60, 1.00, 0.01), 0.7, 4000)
    (out / "fig2_malicious_vs_failure.csv").write_text(fig2.to_csv())
    x = fig2.column("malicious_fraction")
    y = fig2.column("log10_failure")
    lines = [
        f"c_approx (t=0.7, v_e=4000, F=1e-12): {result.c_approx:.6f}",
        f"c_exact  (t=0.7, v_e=4000, F=1e-12): {result.c_exact:.6f}",
    ]
    for frac in (0.20, 0.25):
        i = int(abs(x - frac).argmin())
        lines.append(f"log10 failure at malicious fraction {x[i]:.2f}: {y[i]:.3f}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"artifacts written to {out}")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="committee-sortition", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bound", help="lower bounds on the honest resource fraction")
    p.add_argument("--t", type=float, required=True, help="threshold ratio t_h / v_e")
    p.add_argument("--ve", type=float, required=True, help="expected committee size")
    p.add_argument("--F", type=float, required=True, help="acceptable failure probability")
    p.add_argument("--R", type=int, help="total resources (default: Poisson limit)")
    p.add_argument("--exact", action="store_true", help="also compute the exact-tail bound")
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", help="Figure-style parameter sweeps as CSV")
    p.add_argument("--kind", choices=["t", "failure"], required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--ve", type=float)
    p.add_argument("--F", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--R", type=int)
    p.add_argument("--no-exact", action="store_true", help="t sweep: skip the exact column")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo scenario against the exact model")
    p.add_argument("scenario", nargs="?", help="scenario JSON file, or 'bundled'")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sortition", help="verifiable seat selection")
    ssub = p.add_subparsers(dest="subop", required=True, parser_class=_Parser)
    s = ssub.add_parser("select")
    s.add_argument("--key", required=True, help="secret key (UTF-8 text)")
    s.add_argument("--seed", required=True, help="round seed (UTF-8 text)")
    s.add_argument("--role", default="committee")
    s.add_argument("--resource", type=int, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--out", required=True, help="proof file to write")
    s.set_defaults(func=cmd_select)
    v = ssub.add_parser("verify")
    v.add_argument("--proof", required=True)
    v.add_argument("--resource", type=int, required=True)
    v.add_argument("--p", type=float, required=True)
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("repro", help="reproduce the headline numbers and both sweeps")
    p.add_argument("--out-dir", default="repro")
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EstimabilityError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
