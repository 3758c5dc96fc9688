"""Discrete particle integrators for accelerated information gradient flows.

Accelerated flows (W-AIG, KW-AIG, S-AIG) update velocities first and then
move positions with the new velocities.  Baselines are the plain gradient
flows (W-GF, KW-GF), unadjusted Langevin and SVGD with Adagrad.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from aigflow.core import Ensemble, NumericalFailure, RngLike, Schedule, alpha, as_generator
from aigflow.kernels import GaussianKernel, as_points, gram, grad_gram
from aigflow.score import BandwidthState, bm_bandwidth, gaussian_score, kde_score, med_bandwidth
from aigflow.targets import TargetModel

METRICS = ("wasserstein", "kalman-wasserstein", "stein", "langevin")
SCORES = ("kde", "gaussian")


@dataclass(frozen=True)
class FlowKind:
    """Which flow to run.

    ``lam`` is the Kalman-Wasserstein regularization (ignored for other
    metrics).  ``stein_kernel`` is the interaction kernel for S-AIG/SVGD;
    ``None`` means an unnormalized Gaussian with the median bandwidth of
    the current particles.
    """

    metric: str = "wasserstein"
    accelerated: bool = True
    restart: bool = True
    lam: float = 1.0
    stein_kernel: Optional[GaussianKernel] = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.metric == "langevin" and self.accelerated:
            raise ValueError("langevin is a baseline and has no accelerated form")

    @property
    def label(self) -> str:
        if self.metric == "langevin":
            return "MCMC"
        if self.metric == "stein" and not self.accelerated:
            return "SVGD"
        prefix = {"wasserstein": "W", "kalman-wasserstein": "KW", "stein": "S"}[self.metric]
        return f"{prefix}-{'AIG' if self.accelerated else 'GF'}"


@dataclass(frozen=True)
class StepRecord:
    iteration: int
    phi: float
    restarted: bool
    h: float
    alpha: float
    tau: float = float("nan")
    t: float = float("nan")


def _check_finite(arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr).all(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NumericalFailure(f"non-finite {what} at particle {idx}", particle=idx)


def _forces(ens: Ensemble, target: TargetModel, xi, rng) -> np.ndarray:
    g = target.grad(ens.positions, rng)
    _check_finite(g, "gradient")
    g = g + as_points(xi).reshape(g.shape)
    _check_finite(g, "score")
    return g


def kalman_covariance(positions, lam: float) -> np.ndarray:
    """Sample covariance (divisor N - 1) plus lam * I."""
    X = as_points(positions)
    if len(X) < 2:
        raise ValueError("Kalman-Wasserstein flows need at least two particles")
    C = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    return C + lam * np.eye(X.shape[1])


def interaction_kernel(kind: FlowKind, positions) -> GaussianKernel:
    if kind.stein_kernel is not None:
        return kind.stein_kernel
    return GaussianKernel(med_bandwidth(positions), normalized=False)


def restart_stat(kind: FlowKind, positions, v_new, forces, kernel: Optional[GaussianKernel] = None,
                 cov: Optional[np.ndarray] = None) -> float:
    """Discrete estimate of -dE/dt; a negative value triggers a restart.

    ``positions`` are the pre-step positions X_k, ``v_new`` the updated
    velocities V_{k+1} and ``forces`` grad f + xi at X_k.
    """
    V = as_points(v_new)
    g = as_points(forces)
    if V.shape != g.shape:
        raise ValueError(f"velocity {V.shape} and force {g.shape} shapes differ")
    if kind.metric == "wasserstein":
        return float(-np.sum(V * g))
    if kind.metric == "kalman-wasserstein":
        C = kalman_covariance(positions, kind.lam) if cov is None else cov
        return float(-np.sum((V @ C) * g))
    if kind.metric == "stein":
        kern = kernel if kernel is not None else interaction_kernel(kind, positions)
        K = gram(kern, positions, positions)
        # sum_ij k(X_j, X_i) <V_j, g_i>
        return float(-np.sum(K * (g @ V.T)))
    raise ValueError(f"no restart statistic for metric {kind.metric!r}")


def _step_params(schedule: Schedule, k: int, iteration: Optional[int]):
    tau = schedule.step_size(iteration or 0)
    return tau, alpha(schedule, k, tau)


def waig_step(ens: Ensemble, target: TargetModel, xi, schedule: Schedule, *,
              rng: Optional[np.random.Generator] = None, iteration: Optional[int] = None,
              h: float = float("nan")) -> Tuple[Ensemble, StepRecord]:
    tau, a = _step_params(schedule, ens.k, iteration)
    st = math.sqrt(tau)
    g = _forces(ens, target, xi, rng)
    V = a * ens.velocities - st * g
    X = ens.positions + st * V
    phi = restart_stat(FlowKind("wasserstein"), ens.positions, V, g)
    rec = StepRecord(iteration if iteration is not None else ens.k + 1, phi, False, h, a, tau)
    return Ensemble(X, V, ens.k + 1), rec


def kwaig_step(ens: Ensemble, target: TargetModel, xi, schedule: Schedule, lam: float, *,
               rng: Optional[np.random.Generator] = None, iteration: Optional[int] = None,
               h: float = float("nan")) -> Tuple[Ensemble, StepRecord]:
    if ens.n < 2:
        raise ValueError("KW-AIG needs at least two particles")
    tau, a = _step_params(schedule, ens.k, iteration)
    st = math.sqrt(tau)
    g = _forces(ens, target, xi, rng)
    X0, V0 = ens.positions, ens.velocities
    m = X0.mean(axis=0)
    C = kalman_covariance(X0, lam)
    M = V0.T @ V0 / ens.n
    V = a * V0 - st * (X0 - m) @ M - st * g
    X = X0 + st * V @ C
    phi = restart_stat(FlowKind("kalman-wasserstein", lam=lam), X0, V, g, cov=C)
    rec = StepRecord(iteration if iteration is not None else ens.k + 1, phi, False, h, a, tau)
    return Ensemble(X, V, ens.k + 1), rec


def saig_step(ens: Ensemble, target: TargetModel, xi, schedule: Schedule, kernel: GaussianKernel, *,
              rng: Optional[np.random.Generator] = None, iteration: Optional[int] = None,
              h: float = float("nan")) -> Tuple[Ensemble, StepRecord]:
    tau, a = _step_params(schedule, ens.k, iteration)
    st = math.sqrt(tau)
    g = _forces(ens, target, xi, rng)
    X0, V0 = ens.positions, ens.velocities
    n = ens.n
    K = gram(kernel, X0, X0)
    G = grad_gram(kernel, X0, X0)
    inner = V0 @ V0.T
    interaction = np.einsum("ij,ijk->ik", inner, G) / n
    V = a * V0 - st * interaction - st * g
    X = X0 + (st / n) * K @ V
    phi = restart_stat(FlowKind("stein"), X0, V, g, kernel=kernel)
    rec = StepRecord(iteration if iteration is not None else ens.k + 1, phi, False, h, a, tau)
    return Ensemble(X, V, ens.k + 1), rec


def wgf_step(ens: Ensemble, target: TargetModel, xi, tau: float, *,
             rng: Optional[np.random.Generator] = None) -> Ensemble:
    g = _forces(ens, target, xi, rng)
    return Ensemble(ens.positions - tau * g, ens.velocities, ens.k + 1)


def kwgf_step(ens: Ensemble, target: TargetModel, xi, tau: float, lam: float, *,
              rng: Optional[np.random.Generator] = None) -> Ensemble:
    g = _forces(ens, target, xi, rng)
    C = kalman_covariance(ens.positions, lam)
    return Ensemble(ens.positions - tau * g @ C, ens.velocities, ens.k + 1)


def langevin_step(ens: Ensemble, target: TargetModel, tau: float, rng: RngLike, *,
                  stochastic: bool = False) -> Ensemble:
    g_rng = as_generator(rng)
    grad = target.grad(ens.positions, g_rng if stochastic else None)
    _check_finite(grad, "gradient")
    noise = g_rng.standard_normal(ens.positions.shape)
    X = ens.positions - tau * grad + math.sqrt(2.0 * tau) * noise
    return Ensemble(X, ens.velocities, ens.k + 1)


ADAGRAD_EPS = 1e-6


def svgd_direction(positions, grad_f, kernel: GaussianKernel) -> np.ndarray:
    """(1/N) sum_j [k(X_j, X_i)(-grad f(X_j)) + grad_{X_j} k(X_j, X_i)]."""
    X = as_points(positions)
    K = gram(kernel, X, X)
    G = grad_gram(kernel, X, X)
    return (K @ (-grad_f) + G.sum(axis=0)) / len(X)


def svgd_step(ens: Ensemble, target: TargetModel, tau: float, kernel: GaussianKernel,
              accumulator: Optional[np.ndarray] = None, *,
              rng: Optional[np.random.Generator] = None) -> Tuple[Ensemble, np.ndarray]:
    """One SVGD step with per-coordinate Adagrad scaling.

    Returns the new ensemble and the updated squared-direction accumulator.
    """
    grad = target.grad(ens.positions, rng)
    _check_finite(grad, "gradient")
    phi = svgd_direction(ens.positions, grad, kernel)
    acc = phi ** 2 if accumulator is None else accumulator + phi ** 2
    X = ens.positions + tau * phi / (np.sqrt(acc) + ADAGRAD_EPS)
    return Ensemble(X, ens.velocities, ens.k + 1), acc


Callback = Callable[[int, Ensemble, StepRecord], None]


def run_flow(kind: FlowKind, ens: Ensemble, target: TargetModel, bandwidth: BandwidthState,
             schedule: Schedule, iters: int, rng: RngLike, *, score: str = "kde",
             stochastic: bool = False, callback: Optional[Callback] = None
             ) -> Tuple[Ensemble, List[StepRecord]]:
    """Run ``iters`` iterations of the chosen flow.

    The KDE bandwidth starts at the median heuristic and is refreshed every
    ``bandwidth.bm_refresh_period`` iterations by the configured method.
    With ``kind.restart`` an accelerated step whose restart statistic is
    negative is discarded: velocities and ``k`` are reset and the positions
    stay at X_k.  ``score="gaussian"`` replaces the KDE by the score of the
    fitted Gaussian (exact for Gaussian experiments).  ``stochastic`` uses
    the target's minibatch gradient.
    """
    if score not in SCORES:
        raise ValueError(f"unknown score estimator {score!r}")
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    g = as_generator(rng)
    grad_rng = g if stochastic else None
    records: List[StepRecord] = []
    if iters == 0:
        return ens, records

    uses_kde = score == "kde" and kind.metric != "langevin" and not (
        kind.metric == "stein" and not kind.accelerated)
    h = float("nan")
    if uses_kde:
        h = med_bandwidth(ens.positions) if ens.n >= 2 else bandwidth.h
    acc = None
    t = 0.0
    for l in range(iters):
        it = l + 1
        tau = schedule.step_size(l)
        if uses_kde and l % bandwidth.bm_refresh_period == 0:
            if bandwidth.method == "bm":
                s = math.sqrt(tau) if kind.accelerated else tau
                h = bm_bandwidth(h, ens.positions, s, g, evals=bandwidth.bm_search_evals)
            elif l > 0:
                h = med_bandwidth(ens.positions)
        if uses_kde:
            xi = kde_score(ens.positions, ens.positions, h)
        elif score == "gaussian":
            xi = gaussian_score(ens.positions, ens.positions)
        else:
            xi = None
        try:
            new, rec = _advance(kind, ens, target, xi, schedule, tau, l, h, grad_rng, g, acc)
        except NumericalFailure as exc:
            exc.iteration = it
            raise
        if isinstance(rec, tuple):
            rec, acc = rec
        t += math.sqrt(tau) if kind.accelerated else tau
        restarted = False
        if kind.accelerated and kind.restart and rec.phi < 0:
            restarted = True
            new = ens.restarted()
        rec = replace(rec, iteration=it, restarted=restarted, t=t)
        ens = new
        records.append(rec)
        if callback is not None:
            callback(it, ens, rec)
    return ens, records


def _advance(kind, ens, target, xi, schedule, tau, l, h, grad_rng, g, acc):
    nan = float("nan")
    if kind.accelerated:
        if kind.metric == "wasserstein":
            return waig_step(ens, target, xi, schedule, rng=grad_rng, iteration=l, h=h)
        if kind.metric == "kalman-wasserstein":
            return kwaig_step(ens, target, xi, schedule, kind.lam, rng=grad_rng, iteration=l, h=h)
        kern = interaction_kernel(kind, ens.positions)
        return saig_step(ens, target, xi, schedule, kern, rng=grad_rng, iteration=l, h=h)
    base = StepRecord(l, nan, False, h, 0.0, tau)
    if kind.metric == "wasserstein":
        return wgf_step(ens, target, xi, tau, rng=grad_rng), base
    if kind.metric == "kalman-wasserstein":
        return kwgf_step(ens, target, xi, tau, kind.lam, rng=grad_rng), base
    if kind.metric == "langevin":
        return langevin_step(ens, target, tau, g, stochastic=grad_rng is not None), base
    kern = interaction_kernel(kind, ens.positions)
    new, acc = svgd_step(ens, target, tau, kern, acc, rng=grad_rng)
    return new, (replace(base, h=kern.h), acc)
