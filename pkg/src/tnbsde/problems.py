"""Benchmark terminal-value problems in FBSDE form.

Black-Scholes-Barenblatt (default d = 10):

    u_t = -1/2 sigma^2 |x|^2 Laplacian-diag term + r (u - x . grad u),
    u(T, x) = |x|^2,

with dynamics dX = sigma diag(X) dW, driver phi = r (y - z . x), and the
closed-form solution u(t, x) = exp((r + sigma^2)(T - t)) |x|^2.

Hamilton-Jacobi-Bellman (default d = 100):

    u_t = -Laplacian u + |grad u|^2,    u(T, x) = ln((1 + |x|^2) / 2),

with dX = sqrt(2) dW, phi = |z|^2, and the Cole-Hopf / Feynman-Kac reference

    u(t, x) = -ln E[ exp(-g(x + sqrt(2) sqrt(T - t) xi)) ],  xi ~ N(0, I),

estimated by plain Monte Carlo with a delta-method standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rng
from .fbsde import FBSDEProblem


@dataclass(frozen=True)
class BSBParams:
    d: int = 10
    T: float = 1.0
    sigma: float = 0.4
    r: float = 0.05
    n_steps: int = 50


def bsb_problem(params: BSBParams | None = None) -> FBSDEProblem:
    p = params or BSBParams()
    sig, r = p.sigma, p.r

    def sigma_mat(t, x, y=None):
        return sig * np.diag(np.asarray(x, dtype=np.float64))

    def sigma_dw(t, x, dw):
        return sig * x * dw

    def phi(t, x, y, z):
        return r * (y - (z * x).sum(axis=1, keepdims=True))

    def g(x):
        return (x * x).sum(axis=1)

    def g_op(x_ref):
        return x_ref.norm_sq(axis=1, keepdims=True)

    def exact(t, x):
        x = np.asarray(x, dtype=np.float64)
        return float(math.exp((r + sig * sig) * (p.T - t)) * (x @ x))

    return FBSDEProblem(
        name="bsb",
        d=p.d,
        T=p.T,
        N=p.n_steps,
        x0=np.ones(p.d),
        sigma=sigma_mat,
        phi=phi,
        g=g,
        g_op=g_op,
        sigma_dw=sigma_dw,
        exact=exact,
    )


@dataclass(frozen=True)
class HJBParams:
    d: int = 100
    T: float = 1.0
    sigma: float = math.sqrt(2.0)
    n_steps: int = 50
    mc_samples: int = 100_000
    mc_seed: int = 9000


class MCEstimate(NamedTuple):
    estimate: float
    stderr: float


_MC_CACHE: dict = {}


def hjb_exact_mc(
    t: float,
    x,
    samples: int = 100_000,
    seed: int = 9000,
    T: float = 1.0,
    sigma: float = math.sqrt(2.0),
) -> MCEstimate:
    """Monte-Carlo reference u(t, x) = -ln E[exp(-g(x + sigma sqrt(T-t) xi))].

    Deterministic for a fixed (t, x, samples, seed) and cached. The standard
    error is for the estimate itself (delta method: se(-ln m) = se(m) / m).
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if samples < 2:
        raise ValueError(f"need at least 2 samples, got {samples}")
    if t > T:
        raise ValueError(f"need t <= T, got t={t}, T={T}")
    key = (float(t), x.tobytes(), int(samples), int(seed), float(T), float(sigma))
    hit = _MC_CACHE.get(key)
    if hit is not None:
        return hit
    tau = T - t
    if tau == 0.0:
        result = MCEstimate(float(np.log(0.5 * (1.0 + x @ x))), 0.0)
    else:
        xi = rng.normal((samples, x.size), 0.0, 1.0, rng.stream_key(seed, rng.MC_STREAM))
        pts = x[None, :] + sigma * math.sqrt(tau) * xi
        # exp(-g) collapses to 2 / (1 + |x|^2), so no log-exp round trip.
        vals = 2.0 / (1.0 + (pts * pts).sum(axis=1))
        mean = float(vals.mean())
        se_mean = float(vals.std(ddof=1) / math.sqrt(samples))
        result = MCEstimate(-math.log(mean), se_mean / mean)
    _MC_CACHE[key] = result
    return result


def hjb_problem(params: HJBParams | None = None) -> FBSDEProblem:
    p = params or HJBParams()
    sig = p.sigma

    def sigma_mat(t, x, y=None):
        return sig * np.eye(len(x))

    def sigma_dw(t, x, dw):
        return sig * dw

    def phi(t, x, y, z):
        return (z * z).sum(axis=1, keepdims=True)

    def g(x):
        return np.log(0.5 * (1.0 + (x * x).sum(axis=1)))

    def exact(t, x):
        return hjb_exact_mc(t, x, samples=p.mc_samples, seed=p.mc_seed, T=p.T, sigma=sig).estimate

    return FBSDEProblem(
        name=f"hjb{p.d}",
        d=p.d,
        T=p.T,
        N=p.n_steps,
        x0=np.zeros(p.d),
        sigma=sigma_mat,
        phi=phi,
        g=g,
        g_op=None,  # ln is not a graph primitive; X carries no parameters here
        sigma_dw=sigma_dw,
        exact=exact,
    )
