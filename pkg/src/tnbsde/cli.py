"""Command-line interface: seeded training runs, sweeps, and references.

Settings resolve in three layers: built-in defaults, then a YAML config file
given with --config, then explicitly passed flags. Every command prints a
plain-text summary; --output writes the per-run CSV (plus a .meta.yaml
sidecar with the resolved configuration) and --series-output the per-epoch
loss / y0 series.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    ExperimentError,
    ExperimentPlan,
    MatchReport,
    PROBLEM_KEYS,
    aggregate,
    best_dnn,
    bond_sweep_architectures,
    convergence_gap_pct,
    default_threshold,
    dnn_cohort,
    emit_csv,
    emit_series_csv,
    enumerate_dnn_matches,
    get_problem,
    match_dnn,
    reference_value,
    run_many,
    width_sweep_architectures,
    write_meta,
)
from .nn import ArchitectureSpec
from .training import ConvergenceParams

DEFAULTS = {
    "problem": "bsb",
    "seeds": "0-9",
    "epochs": 3000,
    "batch_size": 100,
    "lr": 1e-3,
    "loss": "hybrid",
    "activation": "tanh",
    "init": "auto",
    "resample_paths": True,
    "workers": 1,
    "alpha": 0.9,
    "window": 200,
    "det_batch": 50,
    "tol": 1e-4,
    "chis": "2,4,8,16",
    "epoch_slack": 0.10,
    "frac_slack": 0.10,
    "include_cohorts": True,
}


def parse_seeds(text: str) -> tuple[int, ...]:
    """Parse "0-9" / "0,1,2" / "0-3,7" into a tuple of distinct seeds."""
    seeds: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:  # allow a leading minus to fail int() below
            lo_text, hi_text = part.split("-", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ValueError(f"bad seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"no seeds in {text!r}")
    return tuple(seeds)


def parse_int_list(text: str) -> list[int]:
    return [int(p) for p in str(text).split(",") if p.strip()]


class Settings:
    """Layered lookup: explicit flag, then config file, then defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = {}
        if getattr(args, "config", None):
            import yaml

            with open(args.config) as handle:
                loaded = yaml.safe_load(handle) or {}
            if not isinstance(loaded, dict):
                raise SystemExit(f"config {args.config} must be a YAML mapping")
            self.config = loaded

    def get(self, key: str, fallback=None):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.config:
            return self.config[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        return fallback


def _convergence(settings: Settings, problem: str) -> ConvergenceParams:
    threshold = settings.get("threshold")
    if threshold is None:
        threshold = default_threshold(problem)
    return ConvergenceParams(
        threshold=float(threshold),
        alpha=float(settings.get("alpha")),
        window=int(settings.get("window")),
        batch=int(settings.get("det_batch")),
        tol=float(settings.get("tol")),
    )


def _plan(settings: Settings, architectures) -> ExperimentPlan:
    problem = settings.get("problem")
    return ExperimentPlan(
        problem=problem,
        architectures=tuple(architectures),
        seeds=parse_seeds(settings.get("seeds")),
        epochs=int(settings.get("epochs")),
        batch_size=int(settings.get("batch_size")),
        lr=float(settings.get("lr")),
        loss=str(settings.get("loss")),
        activation=str(settings.get("activation")),
        init=str(settings.get("init")),
        resample_paths=bool(settings.get("resample_paths")),
        convergence=_convergence(settings, problem),
        workers=int(settings.get("workers")),
        cache_dir=settings.get("cache_dir"),
    )


def _parse_archs(text: str, input_dim: int) -> list[ArchitectureSpec]:
    labels = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    # labels contain commas inside parens, so re-join number fragments
    merged: list[str] = []
    for piece in labels:
        if merged and "(" in merged[-1] and ")" not in merged[-1]:
            merged[-1] += "," + piece
        else:
            merged.append(piece)
    return [ArchitectureSpec.parse(label, input_dim) for label in merged]


def _emit(settings: Settings, plan: ExperimentPlan, results) -> None:
    output = settings.get("output")
    if output:
        emit_csv(results, output)
        write_meta(plan, output + ".meta.yaml")
        print(f"wrote {output} ({len(results)} runs)")
    series = settings.get("series_output")
    if series:
        emit_series_csv(results, series, alpha=float(settings.get("alpha")))
        print(f"wrote {series}")


def _print_summaries(summaries) -> None:
    header = (
        f"{'architecture':>12} {'params':>7} {'runs':>5} {'reached1%':>9} "
        f"{'median conv':>11} {'mean rel':>9} {'mean loss':>10}"
    )
    print(header)
    for s in summaries:
        conv = "-" if s.median_convergence is None else f"{s.median_convergence:.0f}"
        print(
            f"{s.arch.label:>12} {s.param_count:>7} {s.n_runs:>5} "
            f"{s.n_reached:>4}/{s.n_runs:<4} {conv:>11} "
            f"{s.mean_rel_error:>9.3%} {s.mean_final_loss:>10.4g}"
        )


def _gap_lines(summaries) -> None:
    tnn_rows = [s for s in summaries if s.arch.kind == "tnn"]
    for tnn in tnn_rows:
        cohort = [
            s
            for s in summaries
            if s.arch.kind == "dnn" and s.param_count == tnn.param_count
        ]
        best = best_dnn(cohort)
        if best is None or tnn.median_convergence is None:
            print(f"{tnn.arch.label}: no dense baseline reached the target")
            continue
        gap = convergence_gap_pct(tnn, best)
        print(
            f"{tnn.arch.label}: converges {gap:+.1f}% earlier than best dense "
            f"{best.arch.label} (medians {tnn.median_convergence:.0f} vs "
            f"{best.median_convergence:.0f})"
        )


def cmd_train(settings: Settings) -> int:
    problem = get_problem(settings.get("problem"))
    arch_text = settings.get("arch")
    if not arch_text:
        raise SystemExit("train needs --arch (e.g. --arch 'TNN(16,4)')")
    archs = _parse_archs(arch_text, problem.d + 1)
    plan = _plan(settings, archs)
    results = run_many(plan, progress=True)
    summaries = aggregate(results, plan.convergence)
    _print_summaries(summaries)
    _emit(settings, plan, results)
    return 0


def cmd_sweep_bond(settings: Settings) -> int:
    problem = get_problem(settings.get("problem"))
    width = settings.get("width")
    if width is None:
        raise SystemExit("sweep-bond needs --width")
    chis = parse_int_list(settings.get("chis"))
    archs = bond_sweep_architectures(
        int(width), chis, problem.d + 1, bool(settings.get("include_cohorts"))
    )
    plan = _plan(settings, archs)
    results = run_many(plan, progress=True)
    summaries = aggregate(results, plan.convergence)
    _print_summaries(summaries)
    _gap_lines(summaries)
    _emit(settings, plan, results)
    return 0


def cmd_sweep_width(settings: Settings) -> int:
    problem = get_problem(settings.get("problem"))
    widths_text = settings.get("widths")
    chi = settings.get("chi")
    if widths_text is None or chi is None:
        raise SystemExit("sweep-width needs --widths and --chi")
    archs = width_sweep_architectures(
        parse_int_list(widths_text), int(chi), problem.d + 1,
        bool(settings.get("include_cohorts")),
    )
    plan = _plan(settings, archs)
    results = run_many(plan, progress=True)
    summaries = aggregate(results, plan.convergence)
    _print_summaries(summaries)
    _gap_lines(summaries)
    _emit(settings, plan, results)
    return 0


def cmd_match_dnn(settings: Settings) -> int:
    problem = get_problem(settings.get("problem"))
    arch_text = settings.get("arch")
    if not arch_text:
        raise SystemExit("match-dnn needs --arch (the tensorized reference)")
    tnn = ArchitectureSpec.parse(arch_text, problem.d + 1)
    if tnn.kind != "tnn":
        raise SystemExit("match-dnn's --arch must be a TNN label")
    ladder_text = settings.get("ladder")
    ladder = _parse_archs(ladder_text, problem.d + 1) if ladder_text else dnn_cohort(tnn)
    if not ladder:
        raise SystemExit(f"no dense candidates to match {tnn.label} against")
    plan = _plan(settings, dict.fromkeys([tnn, *ladder]))
    results = run_many(plan, progress=True)
    summaries = aggregate(results, plan.convergence)
    report = match_dnn(
        summaries,
        tnn.label,
        epoch_slack=float(settings.get("epoch_slack")),
        frac_slack=float(settings.get("frac_slack")),
    )
    _print_summaries(summaries)
    _print_match(report)
    _emit(settings, plan, results)
    return 0


def _print_match(report: MatchReport) -> None:
    tnn = report.tnn
    if tnn.median_convergence is None:
        print(f"{tnn.arch.label} never converged; no dense match attempted")
        return
    if report.best is None:
        print(
            f"no dense candidate matched {tnn.arch.label} "
            f"(median {tnn.median_convergence:.0f}, reached {tnn.frac_reached:.0%})"
        )
        return
    best = report.best
    saved = 100.0 * (1.0 - tnn.param_count / best.param_count)
    print(
        f"smallest dense match for {tnn.arch.label} ({tnn.param_count} params): "
        f"{best.arch.label} with {best.param_count} params "
        f"(the tensorized layer saves {saved:.1f}%)"
    )


def cmd_enumerate(settings: Settings) -> int:
    params = settings.get("params")
    arch_text = settings.get("arch")
    problem_key = settings.get("problem")
    input_dim = settings.get("input_dim")
    if input_dim is None:
        input_dim = get_problem(problem_key).d + 1
    input_dim = int(input_dim)
    if params is None:
        if not arch_text:
            raise SystemExit("enumerate needs --params or --arch")
        params = ArchitectureSpec.parse(arch_text, input_dim).param_count()
    params = int(params)
    pairs = enumerate_dnn_matches(params, input_dim)
    print(f"dense (x, y) with exactly {params} parameters at input width {input_dim}:")
    for x, y in pairs:
        print(f"  DNN({x},{y})")
    if not pairs:
        print("  (none)")
    return 0


def cmd_reference(settings: Settings) -> int:
    key = settings.get("problem")
    value, stderr = reference_value(key)
    problem = get_problem(key)
    print(f"problem {key}: d={problem.d}, T={problem.T}, N={problem.N}")
    if stderr == 0.0:
        print(f"reference y0 = {value!r} (closed form)")
    else:
        print(f"reference y0 = {value!r} +/- {stderr!r} (Monte Carlo standard error)")
    print(f"default detector threshold h = {default_threshold(key)!r}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML file with defaults for any flag")
    parser.add_argument("--problem", choices=PROBLEM_KEYS)
    parser.add_argument("--seeds", help="e.g. '0-9' or '0,3,7'")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int, dest="batch_size")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--loss", choices=("hybrid", "mse"))
    parser.add_argument("--activation", choices=("tanh", "sine", "relu", "identity"))
    parser.add_argument("--init", choices=("auto", "glorot", "matched"))
    parser.add_argument(
        "--resample-paths",
        action=argparse.BooleanOptionalAction,
        dest="resample_paths",
        default=None,
        help="redraw the path batch each epoch (default: on)",
    )
    parser.add_argument("--threshold", type=float, help="detector level h")
    parser.add_argument("--alpha", type=float, help="detector smoothing factor")
    parser.add_argument("--window", type=int, help="detector window length")
    parser.add_argument("--det-batch", type=int, dest="det_batch",
                        help="detector head/tail batch size")
    parser.add_argument("--tol", type=float, help="detector drift tolerance")
    parser.add_argument("--workers", type=int, help="parallel worker processes")
    parser.add_argument("--cache-dir", dest="cache_dir",
                        help="directory for reusable run results")
    parser.add_argument("--output", help="write per-run CSV here")
    parser.add_argument("--series-output", dest="series_output",
                        help="write per-epoch series CSV here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tnbsde",
        description="Train dense and tensorized networks on FBSDE benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one or more architectures")
    _add_common(p_train)
    p_train.add_argument("--arch", help="labels like 'TNN(16,4)' or 'DNN(6,35),DNN(2,82)'")
    p_train.set_defaults(func=cmd_train)

    p_bond = sub.add_parser("sweep-bond", help="bond-dimension ladder at fixed width")
    _add_common(p_bond)
    p_bond.add_argument("--width", type=int, help="TN layer width (perfect square)")
    p_bond.add_argument("--chis", help="comma list of bond dimensions")
    p_bond.add_argument(
        "--include-cohorts",
        action=argparse.BooleanOptionalAction,
        dest="include_cohorts",
        default=None,
        help="also run the equal-parameter dense cohorts (default: on)",
    )
    p_bond.set_defaults(func=cmd_sweep_bond)

    p_width = sub.add_parser("sweep-width", help="width ladder at fixed bond dimension")
    _add_common(p_width)
    p_width.add_argument("--widths", help="comma list of TN layer widths")
    p_width.add_argument("--chi", type=int, help="bond dimension")
    p_width.add_argument(
        "--include-cohorts",
        action=argparse.BooleanOptionalAction,
        dest="include_cohorts",
        default=None,
    )
    p_width.set_defaults(func=cmd_sweep_width)

    p_match = sub.add_parser(
        "match-dnn", help="smallest dense network matching a tensorized one"
    )
    _add_common(p_match)
    p_match.add_argument("--arch", help="tensorized reference, e.g. 'TNN(16,4)'")
    p_match.add_argument("--ladder", help="dense candidates (default: equal-size cohort)")
    p_match.add_argument("--epoch-slack", type=float, dest="epoch_slack")
    p_match.add_argument("--frac-slack", type=float, dest="frac_slack")
    p_match.set_defaults(func=cmd_match_dnn)

    p_enum = sub.add_parser(
        "enumerate", help="dense (x, y) pairs with an exact parameter count"
    )
    p_enum.add_argument("--config", help="YAML file with defaults for any flag")
    p_enum.add_argument("--params", type=int, help="target parameter count")
    p_enum.add_argument("--arch", help="architecture whose count to match")
    p_enum.add_argument("--problem", choices=PROBLEM_KEYS)
    p_enum.add_argument("--input-dim", type=int, dest="input_dim")
    p_enum.set_defaults(func=cmd_enumerate)

    p_ref = sub.add_parser("reference", help="print a problem's reference value")
    p_ref.add_argument("--config", help="YAML file with defaults for any flag")
    p_ref.add_argument("--problem", choices=PROBLEM_KEYS)
    p_ref.set_defaults(func=cmd_reference)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings(args)
        return args.func(settings)
    except (ExperimentError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
