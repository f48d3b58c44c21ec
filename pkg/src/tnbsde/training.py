"""Training loop, Adam, and the loss-plateau convergence detector.

The detector answers "at which epoch had the loss settled?" and is what the
convergence-speed comparisons between architectures are measured with. It
smooths the raw loss with an exponential moving average

    s_1 = l_1,    s_i = alpha s_{i-1} + (1 - alpha) l_i,

slides a window of length w over the smoothed series, and fires at the first
window whose entries all sit below a problem-scale threshold h and whose drift

    Diff = |mean(first b entries)| - |mean(last b entries)|

has fallen below tol. The reported epoch is the 1-based index of the window's
first entry. No window qualifying, or the series being shorter than w, means
no convergence epoch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ExprGraph, grad
from .fbsde import DivergedRollout, FBSDEProblem, loss_hybrid, loss_mse, rollout, sample_paths
from .nn import Network, bind

LOSS_KINDS = ("hybrid", "mse")


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """First/second moment accumulators, one pair per parameter tensor."""

    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update; returns (new params, state).

    p <- p - lr * mhat / (sqrt(vhat) + eps). Parameter arrays are replaced,
    never mutated, so callers can hold on to old snapshots.
    """
    params = list(params)
    grads = list(grads)
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError(
            f"param/grad/state lengths differ: {len(params)}, {len(grads)}, {len(state.m)}"
        )
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * (g * g)
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out, state


# ---------------------------------------------------------------------------
# convergence detection


@dataclass(frozen=True)
class ConvergenceParams:
    """Detector knobs; threshold is the problem-scale loss level h."""

    threshold: float
    alpha: float = 0.9
    window: int = 200
    batch: int = 50
    tol: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.window < 1 or self.batch < 1 or self.batch > self.window:
            raise ValueError(
                f"need 1 <= batch <= window, got batch={self.batch}, window={self.window}"
            )
        if self.tol <= 0 or self.threshold <= 0:
            raise ValueError("threshold and tol must be positive")


def ema_smooth(series, alpha: float) -> np.ndarray:
    """Exponential moving average with s_1 = l_1."""
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError(f"need a nonempty 1-d series, got shape {values.shape}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    out = np.empty_like(values)
    acc = values[0]
    out[0] = acc
    one_minus = 1.0 - alpha
    for i in range(1, values.size):
        acc = alpha * acc + one_minus * values[i]
        out[i] = acc
    return out


def convergence_epoch(series, params: ConvergenceParams) -> int | None:
    """First epoch (1-based) at which the smoothed loss has plateaued.

    Candidate windows are found with an integer-exact running count of
    below-threshold entries; the drift test then evaluates np.mean on the
    actual window slices, so no floating-point shortcuts enter the decision.
    """
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"need a 1-d series, got shape {values.shape}")
    w, b = params.window, params.batch
    n = values.size
    if n <= w:
        return None
    smoothed = ema_smooth(values, params.alpha)
    below = smoothed < params.threshold
    counts = np.cumsum(np.concatenate([[0], below.astype(np.int64)]))
    # i is 0-based here; windows start at epochs 1 .. n - w (1-based).
    for i in range(n - w):
        if counts[i + w] - counts[i] != w:
            continue
        window = smoothed[i : i + w]
        diff = abs(np.mean(window[:b])) - abs(np.mean(window[w - b :]))
        if diff < params.tol:
            return i + 1
    return None


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 100
    lr: float = 1e-3
    loss: str = "hybrid"
    seed: int = 0
    resample_paths: bool = True
    rollout_mode: str = "auto"
    early_stop: ConvergenceParams | None = None
    early_stop_every: int = 50

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError(f"bad epochs={self.epochs} or batch_size={self.batch_size}")
        if not 0 <= self.seed < 2**32:
            raise ValueError(f"seed must fit in 32 bits, got {self.seed}")


@dataclass
class MetricsLog:
    """Per-epoch loss, y0 = u(0, x0), and wall time, plus the early-stop result."""

    loss: list = field(default_factory=list)
    y0: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    converged_epoch: int | None = None


def derive_path_seed(seed: int, epoch: int) -> int:
    """Distinct path seed per (run seed, epoch); both must fit in 32 bits."""
    if not 0 <= seed < 2**32 or not 0 <= epoch < 2**32:
        raise ValueError(f"seed and epoch must fit in 32 bits, got {seed}, {epoch}")
    return (seed << 32) | epoch


def train(problem: FBSDEProblem, network: Network, config: TrainConfig) -> MetricsLog:
    """Adam on the pathwise loss; logs pre-update loss and y0 each epoch.

    Paths are redrawn each epoch from (config.seed, epoch) unless
    resample_paths is off, in which case epoch 0's batch is reused throughout.
    With early_stop set, the detector runs every early_stop_every epochs and
    training halts once it fires.
    """
    loss_fn = loss_hybrid if config.loss == "hybrid" else loss_mse
    state = AdamState.init(network.parameters(), lr=config.lr)
    log = MetricsLog()
    fixed_paths = None
    if not config.resample_paths:
        fixed_paths = sample_paths(problem, config.batch_size, derive_path_seed(config.seed, 0))
    for epoch in range(config.epochs):
        started = time.perf_counter()
        paths = fixed_paths
        if paths is None:
            paths = sample_paths(problem, config.batch_size, derive_path_seed(config.seed, epoch))
        graph = ExprGraph()
        binding = bind(network, graph)
        try:
            roll = rollout(problem, network, paths, binding=binding, mode=config.rollout_mode)
        except DivergedRollout as err:
            raise DivergedRollout(f"epoch {epoch}: {err}", step=err.step, epoch=epoch) from err
        loss_ref = loss_fn(roll, problem)
        loss_value = float(loss_ref.value)
        if not np.isfinite(loss_value):
            raise DivergedRollout(f"epoch {epoch}: loss is not finite", epoch=epoch)
        grads = grad(graph, loss_ref, binding.params)
        grad_list = [grads[p] for p in binding.params]
        new_params, state = adam_step(network.parameters(), grad_list, state)
        network.set_parameters(new_params)
        log.loss.append(loss_value)
        log.y0.append(roll.y0)
        log.wall_time.append(time.perf_counter() - started)
        if (
            config.early_stop is not None
            and (epoch + 1) % config.early_stop_every == 0
        ):
            hit = convergence_epoch(log.loss, config.early_stop)
            if hit is not None:
                log.converged_epoch = hit
                break
    return log
