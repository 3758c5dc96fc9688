"""Convergence diagnostics and closed-form oracles for Gaussian experiments."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from aigflow.core import NumericalFailure, Schedule, alpha
from aigflow.kernels import as_points, sq_dists


class DiagnosticWarning(RuntimeWarning):
    pass


def gaussian_kl(mean_p, cov_p, mean_q, cov_q) -> float:
    """KL(N(mean_p, cov_p) || N(mean_q, cov_q))."""
    mp = np.atleast_1d(np.asarray(mean_p, dtype=float))
    mq = np.atleast_1d(np.asarray(mean_q, dtype=float))
    Sp = np.atleast_2d(np.asarray(cov_p, dtype=float))
    Sq = np.atleast_2d(np.asarray(cov_q, dtype=float))
    d = mp.shape[0]
    if d == 1:
        # log1p keeps the variance term accurate near the optimum
        r = Sp[0, 0] / Sq[0, 0]
        dm = mp[0] - mq[0]
        return float(0.5 * ((r - 1.0) - math.log1p(r - 1.0) + dm * dm / Sq[0, 0]))
    Lq = np.linalg.cholesky(Sq)
    A = np.linalg.solve(Lq, Sp)
    tr = np.trace(np.linalg.solve(Lq.T, A))
    diff = np.linalg.solve(Lq, mp - mq)
    _, logdet_p = np.linalg.slogdet(Sp)
    logdet_q = 2.0 * np.log(np.diag(Lq)).sum()
    return float(max(0.0, 0.5 * (tr + diff @ diff - d + logdet_q - logdet_p)))


def gaussian_fit_kl(particles, mean, cov) -> float:
    """KL from the maximum-likelihood Gaussian fit of ``particles`` to N(mean, cov)."""
    X = as_points(particles)
    n, d = X.shape
    if n <= d:
        raise ValueError(f"need more particles than dimensions (N={n}, d={d})")
    m = X.mean(axis=0)
    C = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
    if np.linalg.eigvalsh(C).min() <= 0:
        warnings.warn("singular fitted covariance regularized by 1e-10 I", DiagnosticWarning,
                      stacklevel=2)
        C = C + 1e-10 * np.eye(d)
    return gaussian_kl(m, C, mean, cov)


@dataclass(frozen=True)
class MomentState:
    """Centred moments of a 1-D particle ensemble.

    ``a`` = Var X, ``b`` = Cov(X, V), ``c`` = Var V, ``m`` = mean X and
    ``mv`` = mean V.  ``k`` is the restart counter used by the damping.
    """

    a: float
    b: float = 0.0
    c: float = 0.0
    m: float = 0.0
    mv: float = 0.0
    k: int = 0

    @classmethod
    def from_particles(cls, x, v, k: int = 0) -> "MomentState":
        x = np.asarray(x, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        xc, vc = x - x.mean(), v - v.mean()
        return cls(float(np.mean(xc * xc)), float(np.mean(xc * vc)), float(np.mean(vc * vc)),
                   float(x.mean()), float(v.mean()), k)

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.m, self.mv])


def moment_recursion_step(state: MomentState, schedule: Schedule, target_precision: float,
                          target_mean: float = 0.0, iteration: int = 0) -> MomentState:
    """Exact moment update of one exact-score W-AIG step for a 1-D Gaussian target.

    With score -(x - m)/a the force on a centred particle is
    kappa * x with kappa = target_precision - 1/a, and the mean sees
    target_precision * (m - target_mean).
    """
    a, b, c = state.a, state.b, state.c
    if not a > 0:
        raise NumericalFailure(f"moment recursion needs a > 0, got {a}")
    tau = schedule.step_size(iteration)
    al = alpha(schedule, state.k, tau)
    st = math.sqrt(tau)
    kap = st * (target_precision - 1.0 / a)
    c1 = al * al * c - 2.0 * al * kap * b + kap * kap * a
    xv = al * b - kap * a  # E[x v_new]
    b1 = xv + st * c1
    a1 = a + 2.0 * st * xv + tau * c1
    mv1 = al * state.mv - st * target_precision * (state.m - target_mean)
    m1 = state.m + st * mv1
    return MomentState(a1, b1, c1, m1, mv1, state.k + 1)


def w2_1d(A, B) -> float:
    """W2 distance between equal-size 1-D empirical measures (sorted matching)."""
    a = np.sort(np.asarray(A, dtype=float).ravel())
    b = np.sort(np.asarray(B, dtype=float).ravel())
    if a.shape != b.shape:
        raise ValueError(f"w2_1d needs equal sizes, got {a.size} and {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def transport_map_1d(x, target_sample) -> np.ndarray:
    """Monotone matching T(x_i): the order statistic of ``target_sample`` with x_i's rank."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.sort(np.asarray(target_sample, dtype=float).ravel())
    if x.shape != y.shape:
        raise ValueError("transport map needs equal-size samples")
    T = np.empty_like(x)
    T[np.argsort(x, kind="stable")] = y
    return T


def lyapunov_energy_1d(particles, velocities, target_sample, target_mean: float, target_var: float,
                       beta: float, t: float) -> float:
    """e^{sqrt(b) t}/2 mean|-sqrt(b)(T(x) - x) + v|^2 + e^{sqrt(b) t} KL_fit."""
    x = np.asarray(particles, dtype=float).ravel()
    v = np.asarray(velocities, dtype=float).ravel()
    T = transport_map_1d(x, target_sample)
    sb = math.sqrt(beta)
    kinetic = 0.5 * np.mean((-sb * (T - x) + v) ** 2)
    kl = gaussian_fit_kl(x, [target_mean], [[target_var]])
    return float(math.exp(sb * t) * (kinetic + kl))


def rate_fit(t: Sequence[float], values: Sequence[float],
             window: Tuple[float, float] = (2.0, math.inf), loglog: bool = False) -> float:
    """Least-squares slope of log(value) against t (or log t with ``loglog``)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    sel = (t >= window[0]) & (t <= window[1])
    pos = sel & (y > 0) & np.isfinite(y)
    if pos.sum() < sel.sum():
        warnings.warn("nonpositive values trimmed from the rate window", DiagnosticWarning,
                      stacklevel=2)
    if pos.sum() < 2:
        raise ValueError("rate fit needs at least two positive points in the window")
    xs = np.log(t[pos]) if loglog else t[pos]
    return float(np.polyfit(xs, np.log(y[pos]), 1)[0])


def first_crossing(t, values, threshold: float) -> Optional[float]:
    """First time at which ``values`` drops below ``threshold`` (None if never)."""
    t = np.asarray(t, dtype=float)
    idx = np.flatnonzero(np.asarray(values, dtype=float) < threshold)
    return float(t[idx[0]]) if idx.size else None


def nearest_neighbor_spacing(points) -> float:
    """Mean distance from each point to its nearest other point."""
    X = as_points(points)
    D = sq_dists(X, X)
    np.fill_diagonal(D, np.inf)
    return float(np.sqrt(D.min(axis=1)).mean())
