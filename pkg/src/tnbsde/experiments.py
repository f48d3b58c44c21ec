"""Seeded experiment runs, architecture cohorts, aggregation, and CSV output.

A run = (problem, architecture, seed, training config); results carry the
per-epoch loss / y0 series plus summary fields, are cached on disk keyed by
the resolved configuration, and aggregate into per-architecture rows with
convergence-epoch statistics. Sweeps build architecture ladders (bond
dimensions, widths, and dense cohorts of equal parameter count) and the
match report finds the cheapest dense network that keeps up with a given
tensorized one.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .fbsde import FBSDEProblem, sample_paths, simulate_forward
from .nn import ArchitectureSpec, build_network
from .problems import BSBParams, HJBParams, bsb_problem, hjb_exact_mc, hjb_problem
from .training import (
    ConvergenceParams,
    MetricsLog,
    TrainConfig,
    convergence_epoch,
    ema_smooth,
    train,
)

PROBLEM_BUILDERS: dict[str, Callable[[], FBSDEProblem]] = {
    "bsb": lambda: bsb_problem(),
    "hjb10": lambda: hjb_problem(HJBParams(d=10)),
    "hjb100": lambda: hjb_problem(),
}
PROBLEM_KEYS = tuple(sorted(PROBLEM_BUILDERS))

# Detector threshold h per problem: a pinned constant near one thirtieth of
# the first-epoch loss at batch 100 (measured means: bsb ~1200, hjb10 ~160,
# hjb100 ~390), which sits above the smoothed-loss plateau of architectures
# that do converge and below the early transient. Runs that never hold below
# h for a full window count as not converged.
BSB_PROBE_SCALE = 1.01
BSB_PROBE_SEED = 77_000
BSB_PROBE_BATCH = 100
DEFAULT_THRESHOLDS = {"bsb": 40.0, "hjb10": 5.0, "hjb100": 13.0}

REL_TARGET = 0.01  # "reached" = final y0 within 1% of the reference


class ExperimentError(ValueError):
    """Raised for unknown problem keys or malformed experiment requests."""


def get_problem(key: str) -> FBSDEProblem:
    try:
        builder = PROBLEM_BUILDERS[key]
    except KeyError:
        raise ExperimentError(
            f"unknown problem {key!r}; expected one of {PROBLEM_KEYS}"
        ) from None
    return builder()


def reference_value(key: str) -> tuple[float, float]:
    """Reference y0 at (0, x0) and its standard error (0 for closed forms)."""
    problem = get_problem(key)
    if problem.exact is None:
        raise ExperimentError(f"problem {key!r} has no reference solution")
    if key == "bsb":
        return problem.exact(0.0, problem.x0), 0.0
    est = hjb_exact_mc(0.0, problem.x0, T=problem.T)
    return est.estimate, est.stderr


def _ln_cosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def bsb_loss_probe(
    scale: float = BSB_PROBE_SCALE,
    m: int = BSB_PROBE_BATCH,
    seed: int = BSB_PROBE_SEED,
    params: BSBParams | None = None,
) -> float:
    """Hybrid loss of the scaled closed-form solution on one fixed path batch.

    At scale = 1 this measures the loss's irreducible floor: the exact
    solution still pays for the Euler discretization noise in the residuals.
    Scaling the solution up or down must strictly increase the probe; that
    anchors the loss's own optimum at the true solution and guards the
    relative weighting of the residual and terminal terms.
    """
    p = params or BSBParams()
    problem = bsb_problem(p)
    paths = sample_paths(problem, m, seed)
    x, sdw = simulate_forward(problem, paths)
    t_grid = problem.time_grid()
    decay = np.exp((p.r + p.sigma**2) * (p.T - t_grid))  # (N+1,)
    u = scale * decay[None, :] * (x * x).sum(axis=2)  # (m, N+1)
    z = 2.0 * scale * decay[None, :, None] * x  # (m, N+1, d)
    dt = problem.dt
    residuals = np.empty((m, p.n_steps))
    for n in range(p.n_steps):
        phi = problem.phi(t_grid[n], x[:, n], u[:, n : n + 1], z[:, n])
        z_dw = (z[:, n] * sdw[:, n]).sum(axis=1, keepdims=True)
        residuals[:, n] = (u[:, n + 1 : n + 2] - u[:, n : n + 1] - phi * dt - z_dw)[:, 0]
    terminal = u[:, -1] - problem.g(x[:, -1])
    return float((residuals**2).sum() + _ln_cosh(terminal).sum())


def default_threshold(key: str) -> float:
    try:
        return DEFAULT_THRESHOLDS[key]
    except KeyError:
        raise ExperimentError(f"no default threshold for problem {key!r}") from None


def default_convergence(key: str, **overrides) -> ConvergenceParams:
    """Detector with the problem's default threshold; kwargs override fields."""
    params = ConvergenceParams(threshold=default_threshold(key))
    return replace(params, **overrides) if overrides else params


@dataclass(frozen=True)
class ExperimentPlan:
    """A batch of runs: one problem, several architectures, several seeds."""

    problem: str
    architectures: tuple[ArchitectureSpec, ...]
    seeds: tuple[int, ...] = tuple(range(10))
    epochs: int = 3000
    batch_size: int = 100
    lr: float = 1e-3
    loss: str = "hybrid"
    activation: str = "tanh"
    init: str = "auto"
    resample_paths: bool = True
    convergence: ConvergenceParams | None = None  # None -> problem default
    workers: int = 1
    cache_dir: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEM_KEYS:
            raise ExperimentError(
                f"unknown problem {self.problem!r}; expected one of {PROBLEM_KEYS}"
            )
        if not self.architectures:
            raise ExperimentError("need at least one architecture")
        if not self.seeds:
            raise ExperimentError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ExperimentError(f"duplicate seeds in {self.seeds}")
        expected = get_problem(self.problem).d + 1
        for arch in self.architectures:
            if arch.input_dim != expected:
                raise ExperimentError(
                    f"{arch.label} has input_dim {arch.input_dim}, but problem "
                    f"{self.problem!r} feeds (t, x) rows of width {expected}"
                )
        if self.workers < 1:
            raise ExperimentError(f"workers must be >= 1, got {self.workers}")

    def resolved_convergence(self) -> ConvergenceParams:
        return self.convergence or default_convergence(self.problem)


@dataclass
class RunResult:
    """One trained run with its per-epoch series and summary statistics."""

    problem: str
    arch: ArchitectureSpec
    seed: int
    epochs_run: int
    convergence_epoch: int | None
    final_loss: float
    final_y0: float
    reference_y0: float
    rel_error: float
    wall_time_s: float
    loss_series: np.ndarray
    y0_series: np.ndarray

    @property
    def reached_target(self) -> bool:
        return self.rel_error <= REL_TARGET

    @property
    def param_count(self) -> int:
        return self.arch.param_count()


def _run_config_dict(plan: ExperimentPlan) -> dict:
    """The settings that shape the trained series (detector knobs excluded:
    the detector is pure post-processing, so cached runs survive threshold
    recalibration)."""
    return {
        "epochs": plan.epochs,
        "batch_size": plan.batch_size,
        "lr": plan.lr,
        "loss": plan.loss,
        "activation": plan.activation,
        "init": plan.init,
        "resample_paths": plan.resample_paths,
    }


def _conv_dict(conv: ConvergenceParams) -> dict:
    return {
        "threshold": conv.threshold,
        "alpha": conv.alpha,
        "window": conv.window,
        "batch": conv.batch,
        "tol": conv.tol,
    }


def _cache_key(problem: str, arch: ArchitectureSpec, seed: int, cfg: dict) -> str:
    blob = json.dumps(
        {"problem": problem, "arch": arch.label, "input_dim": arch.input_dim,
         "seed": seed, "cfg": cfg},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def _cache_load(cache_dir: str, key: str, conv: ConvergenceParams) -> RunResult | None:
    path = os.path.join(cache_dir, key + ".npz")
    if not os.path.exists(path):
        return None
    with np.load(path, allow_pickle=False) as payload:
        meta = json.loads(str(payload["meta"]))
        loss = payload["loss"]
        y0 = payload["y0"]
    return RunResult(
        problem=meta["problem"],
        arch=ArchitectureSpec.parse(meta["arch"], meta["input_dim"]),
        seed=meta["seed"],
        epochs_run=meta["epochs_run"],
        convergence_epoch=convergence_epoch(loss, conv) if loss.size else None,
        final_loss=meta["final_loss"],
        final_y0=meta["final_y0"],
        reference_y0=meta["reference_y0"],
        rel_error=meta["rel_error"],
        wall_time_s=meta["wall_time_s"],
        loss_series=loss,
        y0_series=y0,
    )


def _cache_store(cache_dir: str, key: str, result: RunResult) -> None:
    os.makedirs(cache_dir, exist_ok=True)
    meta = {
        "problem": result.problem,
        "arch": result.arch.label,
        "input_dim": result.arch.input_dim,
        "seed": result.seed,
        "epochs_run": result.epochs_run,
        "final_loss": result.final_loss,
        "final_y0": result.final_y0,
        "reference_y0": result.reference_y0,
        "rel_error": result.rel_error,
        "wall_time_s": result.wall_time_s,
    }
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            np.savez(
                handle,
                meta=np.array(json.dumps(meta)),
                loss=result.loss_series,
                y0=result.y0_series,
            )
        os.replace(tmp, os.path.join(cache_dir, key + ".npz"))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_single(
    problem_key: str,
    arch: ArchitectureSpec,
    seed: int,
    cfg: dict,
    conv: ConvergenceParams,
    cache_dir: str | None = None,
) -> RunResult:
    """Train one (architecture, seed) pair; serve from cache when possible.

    The cache key covers everything that shapes the trained series; detector
    parameters are applied afresh on load, so they can change cheaply.
    """
    key = _cache_key(problem_key, arch, seed, cfg)
    if cache_dir is not None:
        hit = _cache_load(cache_dir, key, conv)
        if hit is not None:
            return hit
    problem = get_problem(problem_key)
    network = build_network(arch, activation=cfg["activation"], init=cfg["init"], seed=seed)
    config = TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        loss=cfg["loss"],
        seed=seed,
        resample_paths=cfg["resample_paths"],
    )
    started = time.perf_counter()
    log = train(problem, network, config)
    wall = time.perf_counter() - started
    reference, _ = reference_value(problem_key)
    final_y0 = _final_y0(problem, network)
    result = RunResult(
        problem=problem_key,
        arch=arch,
        seed=seed,
        epochs_run=len(log.loss),
        convergence_epoch=convergence_epoch(log.loss, conv) if log.loss else None,
        final_loss=log.loss[-1] if log.loss else math.nan,
        final_y0=final_y0,
        reference_y0=reference,
        rel_error=abs(final_y0 - reference) / abs(reference),
        wall_time_s=wall,
        loss_series=np.asarray(log.loss, dtype=np.float64),
        y0_series=np.asarray(log.y0, dtype=np.float64),
    )
    if cache_dir is not None:
        _cache_store(cache_dir, key, result)
    return result


def _final_y0(problem: FBSDEProblem, network) -> float:
    """u(0, x0) of the trained network (after the last optimizer step)."""
    from .autodiff import ExprGraph
    from .nn import bind

    graph = ExprGraph()
    binding = bind(network, graph)
    row = np.concatenate([[0.0], np.asarray(problem.x0, dtype=np.float64)])
    out = binding.forward(graph.const(row.reshape(1, -1)))
    return float(out.value[0, 0])


def _pool_run(args: tuple) -> RunResult:
    problem_key, arch_label, input_dim, seed, cfg, conv_cfg, cache_dir = args
    arch = ArchitectureSpec.parse(arch_label, input_dim)
    return run_single(
        problem_key, arch, seed, cfg, ConvergenceParams(**conv_cfg), cache_dir
    )


def run_many(plan: ExperimentPlan, progress: bool = False) -> list[RunResult]:
    """All (architecture, seed) runs of the plan, in deterministic order."""
    cfg = _run_config_dict(plan)
    conv_cfg = _conv_dict(plan.resolved_convergence())
    tasks = [
        (plan.problem, arch.label, arch.input_dim, seed, cfg, conv_cfg, plan.cache_dir)
        for arch in plan.architectures
        for seed in plan.seeds
    ]
    results: list[RunResult] = []
    if plan.workers > 1:
        from multiprocessing import get_context

        with get_context("spawn").Pool(plan.workers) as pool:
            iterator = pool.imap(_pool_run, tasks)
            for i, result in enumerate(iterator):
                results.append(result)
                if progress:
                    _print_progress(i, len(tasks), result)
    else:
        for i, task in enumerate(tasks):
            result = _pool_run(task)
            results.append(result)
            if progress:
                _print_progress(i, len(tasks), result)
    return results


def _print_progress(i: int, total: int, r: RunResult) -> None:
    conv = "-" if r.convergence_epoch is None else str(r.convergence_epoch)
    print(
        f"[{i + 1}/{total}] {r.problem} {r.arch.label} seed={r.seed} "
        f"conv={conv} rel={r.rel_error:.3%} loss={r.final_loss:.4g} "
        f"({r.wall_time_s:.1f}s)",
        flush=True,
    )


# ---------------------------------------------------------------------------
# architecture enumeration and sweep ladders


def enumerate_dnn_matches(param_target: int, input_dim: int) -> list[tuple[int, int]]:
    """All (x, y) with (I+1)x + (x+1)y + (y+1) == param_target, ascending x.

    The count is (I+1)x + y(x+2) + 1, so for each first-layer width x the
    second width must be y = (target - (I+1)x - 1) / (x+2), an integer >= 1.
    Targets too small for any (x, y) simply yield an empty list.
    """
    matches = []
    for x in range(1, param_target + 1):
        remainder = param_target - (input_dim + 1) * x - 1
        if remainder < x + 2:  # even y = 1 no longer fits
            break
        y, leftover = divmod(remainder, x + 2)
        if leftover == 0:
            matches.append((x, y))
    return matches


def dnn_cohort(arch: ArchitectureSpec) -> list[ArchitectureSpec]:
    """All dense two-layer networks with exactly arch's parameter count."""
    pairs = enumerate_dnn_matches(arch.param_count(), arch.input_dim)
    return [
        ArchitectureSpec(kind="dnn", x=x, y=y, input_dim=arch.input_dim)
        for (x, y) in pairs
    ]


def bond_sweep_architectures(
    width: int, chis: list[int], input_dim: int, include_cohorts: bool = True
) -> list[ArchitectureSpec]:
    """TNN(width, chi) for each chi, each followed by its same-size cohort."""
    out: list[ArchitectureSpec] = []
    for chi in chis:
        tnn = ArchitectureSpec(kind="tnn", x=width, chi=chi, input_dim=input_dim)
        out.append(tnn)
        if include_cohorts:
            out.extend(dnn_cohort(tnn))
    return _dedup(out)


def width_sweep_architectures(
    widths: list[int], chi: int, input_dim: int, include_cohorts: bool = True
) -> list[ArchitectureSpec]:
    """TNN(width, chi) for each width, each followed by its same-size cohort."""
    out: list[ArchitectureSpec] = []
    for width in widths:
        tnn = ArchitectureSpec(kind="tnn", x=width, chi=chi, input_dim=input_dim)
        out.append(tnn)
        if include_cohorts:
            out.extend(dnn_cohort(tnn))
    return _dedup(out)


def _dedup(archs: list[ArchitectureSpec]) -> list[ArchitectureSpec]:
    seen = set()
    out = []
    for arch in archs:
        if arch.label not in seen:
            seen.add(arch.label)
            out.append(arch)
    return out


# ---------------------------------------------------------------------------
# aggregation


@dataclass
class ArchSummary:
    """Per-architecture statistics over seeds."""

    problem: str
    arch: ArchitectureSpec
    param_count: int
    n_runs: int
    n_converged: int
    n_reached: int
    frac_reached: float
    median_convergence: float | None  # over runs whose detector fired
    mean_convergence: float | None
    std_convergence: float | None
    mean_series_convergence: int | None  # detector on the seed-mean loss series
    median_rel_error: float
    mean_rel_error: float
    std_rel_error: float
    mean_final_loss: float
    mean_wall_time_s: float


def _sample_std(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(np.asarray(values, dtype=np.float64), ddof=1))


def aggregate(
    results: list[RunResult], convergence: ConvergenceParams | None = None
) -> list[ArchSummary]:
    """Group runs by (problem, architecture) and summarize across seeds.

    The mean-series convergence epoch runs the detector on the per-epoch
    mean of the seeds' loss series (truncated to the shortest run), which
    needs the detector parameters; with convergence=None that column is
    filled only when every run's problem has a default threshold.
    """
    groups: dict[tuple[str, str], list[RunResult]] = {}
    order: list[tuple[str, str]] = []
    for result in results:
        key = (result.problem, result.arch.label)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(result)
    summaries = []
    for key in order:
        runs = sorted(groups[key], key=lambda r: r.seed)
        conv_epochs = [float(r.convergence_epoch) for r in runs if r.convergence_epoch]
        rels = [r.rel_error for r in runs]
        params = convergence or default_convergence(runs[0].problem)
        mean_series_conv = None
        shortest = min(len(r.loss_series) for r in runs)
        if shortest > 0:
            stacked = np.stack([r.loss_series[:shortest] for r in runs])
            mean_series_conv = convergence_epoch(stacked.mean(axis=0), params)
        summaries.append(
            ArchSummary(
                problem=runs[0].problem,
                arch=runs[0].arch,
                param_count=runs[0].param_count,
                n_runs=len(runs),
                n_converged=len(conv_epochs),
                n_reached=sum(r.reached_target for r in runs),
                frac_reached=sum(r.reached_target for r in runs) / len(runs),
                median_convergence=float(np.median(conv_epochs)) if conv_epochs else None,
                mean_convergence=float(np.mean(conv_epochs)) if conv_epochs else None,
                std_convergence=_sample_std(conv_epochs) if conv_epochs else None,
                mean_series_convergence=mean_series_conv,
                median_rel_error=float(np.median(rels)),
                mean_rel_error=float(np.mean(rels)),
                std_rel_error=_sample_std(rels),
                mean_final_loss=float(np.mean([r.final_loss for r in runs])),
                mean_wall_time_s=float(np.mean([r.wall_time_s for r in runs])),
            )
        )
    return summaries


def best_dnn(
    summaries: list[ArchSummary], min_frac_reached: float = 0.5
) -> ArchSummary | None:
    """Fastest-converging dense architecture among those that are accurate.

    Eligible rows are dense, have a median convergence epoch, and reached the
    1% target on at least min_frac_reached of their seeds (the accuracy
    filter applied to architecture cohorts). Ties break toward the lower
    median relative error, then the smaller first-layer width.
    """
    eligible = [
        s
        for s in summaries
        if s.arch.kind == "dnn"
        and s.median_convergence is not None
        and s.frac_reached >= min_frac_reached
    ]
    if not eligible:
        return None
    return min(
        eligible,
        key=lambda s: (s.median_convergence, s.median_rel_error, s.arch.x),
    )


def convergence_gap_pct(tnn: ArchSummary, dnn: ArchSummary) -> float:
    """How much earlier (in %) the tensorized model converges than the dense one."""
    if tnn.median_convergence is None or dnn.median_convergence is None:
        raise ExperimentError("both summaries need a median convergence epoch")
    if dnn.median_convergence == 0:
        raise ExperimentError("dense median convergence epoch is zero")
    return 100.0 * (dnn.median_convergence - tnn.median_convergence) / dnn.median_convergence


@dataclass
class MatchReport:
    """Cheapest dense architecture keeping up with a tensorized reference."""

    tnn: ArchSummary
    best: ArchSummary | None
    epoch_slack: float
    frac_slack: float
    candidates: list[ArchSummary] = field(default_factory=list)


def match_dnn(
    summaries: list[ArchSummary],
    tnn_label: str,
    epoch_slack: float = 0.10,
    frac_slack: float = 0.10,
) -> MatchReport:
    """Smallest dense network matching the named tensorized architecture.

    A dense row matches when its median convergence epoch is within
    (1 + epoch_slack) of the tensorized one's and its reached-target fraction
    is no more than frac_slack below. Among matches the one with the fewest
    parameters wins; ties break toward the faster median, then smaller width.
    """
    tnn_rows = [s for s in summaries if s.arch.label == tnn_label]
    if not tnn_rows:
        raise ExperimentError(f"no summary for architecture {tnn_label!r}")
    tnn = tnn_rows[0]
    dense = [s for s in summaries if s.arch.kind == "dnn"]
    if tnn.median_convergence is None:
        return MatchReport(tnn=tnn, best=None, epoch_slack=epoch_slack, frac_slack=frac_slack)
    limit = tnn.median_convergence * (1.0 + epoch_slack) + 1e-9
    floor = tnn.frac_reached - frac_slack - 1e-12
    candidates = [
        s
        for s in dense
        if s.median_convergence is not None
        and s.median_convergence <= limit
        and s.frac_reached >= floor
    ]
    best = None
    if candidates:
        best = min(
            candidates,
            key=lambda s: (s.param_count, s.median_convergence, s.arch.x),
        )
    return MatchReport(
        tnn=tnn,
        best=best,
        epoch_slack=epoch_slack,
        frac_slack=frac_slack,
        candidates=sorted(candidates, key=lambda s: s.param_count),
    )


# ---------------------------------------------------------------------------
# CSV emission


RESULT_COLUMNS = (
    "problem",
    "arch_kind",
    "width_x",
    "width_y_or_chi",
    "param_count",
    "seed",
    "epochs_run",
    "convergence_epoch",
    "final_loss",
    "final_y0",
    "reference_y0",
    "rel_error",
    "reached_1pct",
    "wall_time_s",
)

SERIES_COLUMNS = ("run_id", "epoch", "loss", "smoothed_loss", "y0")


def _row_sort_key(r: RunResult):
    return (r.arch.kind, r.arch.x, r.arch.y_or_chi, r.seed)


def emit_csv(results: list[RunResult], path: str) -> None:
    """One row per run, sorted by architecture then seed; floats via repr."""
    rows = sorted(results, key=_row_sort_key)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.problem,
                    r.arch.kind,
                    r.arch.x,
                    r.arch.y_or_chi,
                    r.param_count,
                    r.seed,
                    r.epochs_run,
                    "" if r.convergence_epoch is None else r.convergence_epoch,
                    repr(r.final_loss),
                    repr(r.final_y0),
                    repr(r.reference_y0),
                    repr(r.rel_error),
                    "true" if r.reached_target else "false",
                    repr(r.wall_time_s),
                ]
            )


def emit_series_csv(results: list[RunResult], path: str, alpha: float = 0.9) -> None:
    """Per-epoch loss / smoothed loss / y0 rows for every run (epochs 1-based)."""
    rows = sorted(results, key=_row_sort_key)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SERIES_COLUMNS)
        for r in rows:
            if len(r.loss_series) == 0:
                continue
            run_id = f"{r.problem}|{r.arch.label}|s{r.seed}"
            smoothed = ema_smooth(r.loss_series, alpha)
            for i in range(len(r.loss_series)):
                writer.writerow(
                    [
                        run_id,
                        i + 1,
                        repr(float(r.loss_series[i])),
                        repr(float(smoothed[i])),
                        repr(float(r.y0_series[i])),
                    ]
                )


def load_results_csv(path: str) -> list[dict]:
    """Typed rows of a results CSV (inverse of emit_csv's formatting)."""
    out = []
    with open(path, newline="") as handle:
        for row in csv.DictReader(handle):
            out.append(
                {
                    "problem": row["problem"],
                    "arch_kind": row["arch_kind"],
                    "width_x": int(row["width_x"]),
                    "width_y_or_chi": int(row["width_y_or_chi"]),
                    "param_count": int(row["param_count"]),
                    "seed": int(row["seed"]),
                    "epochs_run": int(row["epochs_run"]),
                    "convergence_epoch": (
                        None if row["convergence_epoch"] == "" else int(row["convergence_epoch"])
                    ),
                    "final_loss": float(row["final_loss"]),
                    "final_y0": float(row["final_y0"]),
                    "reference_y0": float(row["reference_y0"]),
                    "rel_error": float(row["rel_error"]),
                    "reached_1pct": row["reached_1pct"] == "true",
                    "wall_time_s": float(row["wall_time_s"]),
                }
            )
    return out


def write_meta(plan: ExperimentPlan, path: str) -> None:
    """Sidecar YAML with the resolved run configuration (no timing data)."""
    import yaml

    reference, stderr = reference_value(plan.problem)
    payload = {
        "problem": plan.problem,
        "architectures": [a.label for a in plan.architectures],
        "seeds": list(plan.seeds),
        "epochs": plan.epochs,
        "batch_size": plan.batch_size,
        "lr": plan.lr,
        "loss": plan.loss,
        "activation": plan.activation,
        "init": plan.init,
        "resample_paths": plan.resample_paths,
        "convergence": _conv_dict(plan.resolved_convergence()),
        "reference_y0": reference,
        "reference_stderr": stderr,
        "rel_target": REL_TARGET,
    }
    with open(path, "w") as handle:
        yaml.safe_dump(payload, handle, sort_keys=False)


# ---------------------------------------------------------------------------
# spec-level experiment entry points


def experiment_train(plan: ExperimentPlan, progress: bool = False):
    """Run the plan as-is; returns (results, summaries)."""
    results = run_many(plan, progress=progress)
    return results, aggregate(results, plan.convergence)


def experiment_bond_sweep(
    plan: ExperimentPlan,
    width: int,
    chis: list[int],
    include_cohorts: bool = True,
    progress: bool = False,
):
    """Bond-dimension ladder at fixed width, with equal-size dense cohorts."""
    input_dim = get_problem(plan.problem).d + 1
    archs = tuple(bond_sweep_architectures(width, chis, input_dim, include_cohorts))
    full = replace(plan, architectures=archs)
    results = run_many(full, progress=progress)
    return results, aggregate(results, full.convergence)


def experiment_width_sweep(
    plan: ExperimentPlan,
    widths: list[int],
    chi: int,
    include_cohorts: bool = True,
    progress: bool = False,
):
    """Width ladder at fixed bond dimension, with equal-size dense cohorts."""
    input_dim = get_problem(plan.problem).d + 1
    archs = tuple(width_sweep_architectures(widths, chi, input_dim, include_cohorts))
    full = replace(plan, architectures=archs)
    results = run_many(full, progress=progress)
    return results, aggregate(results, full.convergence)


def experiment_match_dnn(
    plan: ExperimentPlan,
    tnn: ArchitectureSpec,
    ladder: list[ArchitectureSpec] | None = None,
    epoch_slack: float = 0.10,
    frac_slack: float = 0.10,
    progress: bool = False,
):
    """Find the smallest dense network matching the given tensorized one.

    With ladder=None the candidates are the dense cohort at the tensorized
    network's exact parameter count.
    """
    candidates = ladder if ladder is not None else dnn_cohort(tnn)
    archs = tuple(_dedup([tnn, *candidates]))
    full = replace(plan, architectures=archs)
    results = run_many(full, progress=progress)
    summaries = aggregate(results, full.convergence)
    report = match_dnn(summaries, tnn.label, epoch_slack, frac_slack)
    return results, summaries, report
