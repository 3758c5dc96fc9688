"""Particle estimates of the score grad log rho, and kernel bandwidth selection."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from aigflow.core import RngLike, as_generator
from aigflow.kernels import GaussianKernel, as_points, mmd, sq_dists

H_FLOOR = 1e-12

BANDWIDTH_METHODS = ("med", "bm")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateBandwidthWarning(RuntimeWarning):
    """A bandwidth hit the floor ``H_FLOOR`` (collapsed or coincident particles)."""


@dataclass
class BandwidthState:
    """Current KDE bandwidth and how it is refreshed."""

    h: float = 1.0
    method: str = "med"
    bm_refresh_period: int = 1
    bm_search_evals: int = 30

    def __post_init__(self):
        self.method = self.method.lower()
        if self.method not in BANDWIDTH_METHODS:
            raise ValueError(f"unknown bandwidth method {self.method!r}")
        if self.bm_refresh_period < 1 or self.bm_search_evals < 3:
            raise ValueError("bm_refresh_period must be >= 1 and bm_search_evals >= 3")
        self.h = max(float(self.h), H_FLOOR)


def kde_score(x, particles, h: float) -> np.ndarray:
    """Gradient of the log Gaussian KDE of ``particles`` at query point(s) ``x``.

    Uses softmax weights so that the quotient of kernel sums never becomes
    0/0 far away from the particles.  Returns an array shaped like ``x``
    (a single d-vector query gives a d-vector).
    """
    P = as_points(particles)
    if len(P) == 0:
        raise ValueError("kde_score needs at least one particle")
    d = P.shape[1]
    x_arr = np.asarray(x, dtype=float)
    single = x_arr.ndim == 0 or (x_arr.ndim == 1 and d > 1)
    X = x_arr.reshape(1, d) if single else as_points(x_arr)
    if h < H_FLOOR:
        warnings.warn(f"bandwidth {h} clamped to {H_FLOOR}", DegenerateBandwidthWarning, stacklevel=2)
        h = H_FLOOR
    logits = -sq_dists(X, P) / (2.0 * h)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    out = -(X - w @ P) / h
    if single:
        return out[0] if x_arr.ndim == 1 else out[0, 0]
    return out[:, 0] if x_arr.ndim == 1 else out


def gaussian_score(x, particles) -> np.ndarray:
    """Score of the maximum-likelihood Gaussian fit to ``particles``.

    This is the "exact-score" mode used for Gaussian experiments: the
    particle cloud stays Gaussian in the mean-field limit, so the fitted
    score is the true score of rho_t.
    """
    P = as_points(particles)
    X = as_points(x)
    m = P.mean(axis=0)
    C = np.atleast_2d(np.cov(P, rowvar=False, bias=True))
    return -np.linalg.solve(C, (X - m).T).T


def kde_log_density(x, particles, h: float) -> np.ndarray:
    """Log of the normalized Gaussian KDE at query points (used for energy proxies)."""
    P = as_points(particles)
    X = as_points(x)
    d = P.shape[1]
    logits = -sq_dists(X, P) / (2.0 * h)
    mx = logits.max(axis=1)
    lse = mx + np.log(np.exp(logits - mx[:, None]).sum(axis=1))
    return lse - math.log(len(P)) - 0.5 * d * math.log(2.0 * math.pi * h)


def med_bandwidth(particles) -> float:
    """Median off-diagonal squared distance divided by 2 log(N + 1)."""
    P = as_points(particles)
    n = len(P)
    if n < 2:
        raise ValueError("median bandwidth needs at least two particles")
    D = sq_dists(P, P)
    iu = np.triu_indices(n, k=1)
    h = float(np.median(D[iu])) / (2.0 * math.log(n + 1.0))
    if h < H_FLOOR:
        warnings.warn("coincident particles: bandwidth clamped to floor",
                      DegenerateBandwidthWarning, stacklevel=2)
        h = H_FLOOR
    return h


def bm_objective(h: float, particles, s: float, increments,
                 kernel: GaussianKernel = GaussianKernel(1.0)) -> float:
    """MMD between a deterministic KDE heat step and a Brownian step.

    ``increments`` are the frozen standard normal draws B_i.
    """
    X = as_points(particles)
    Y = X - s * kde_score(X, X, h)
    Z = X + math.sqrt(2.0 * s) * as_points(increments)
    return mmd(Y, Z, kernel)


def bm_bandwidth(h_prev: float, particles, s: float, rng: RngLike,
                 evals: int = 30, kernel: GaussianKernel = GaussianKernel(1.0)) -> float:
    """Brownian-motion bandwidth selection.

    Minimizes :func:`bm_objective` over log h in ``[h_prev/10, 10 h_prev]``
    with ``evals`` objective evaluations.  A coarse log-spaced scan centred
    on ``h_prev`` (about a third of the budget) picks the basin, since the
    objective can have more than one local minimum; golden-section search
    then refines between the neighbours of the best scan point.  Returns
    the best point evaluated; a flat objective returns ``h_prev``.
    """
    X = as_points(particles)
    if len(X) < 2:
        raise ValueError("BM bandwidth needs at least two particles")
    if s < 0:
        raise ValueError("step scale s must be nonnegative")
    if evals < 1:
        raise ValueError("evals must be positive")
    h_prev = max(float(h_prev), H_FLOOR)
    B = as_generator(rng).standard_normal(X.shape)

    def obj(logh):
        return bm_objective(math.exp(logh), X, s, B, kernel)

    centre = math.log(h_prev)
    span = math.log(10.0)
    n_scan = max(1, min(evals, 2 * (evals // 6) + 1))  # odd, so the centre is on the grid
    grid = centre + np.linspace(-span, span, n_scan) if n_scan > 1 else np.array([centre])
    seen = [(float(g), obj(float(g))) for g in grid]
    remaining = evals - n_scan
    if remaining >= 2:
        i = min(range(n_scan), key=lambda j: seen[j][1])
        lo = seen[max(i - 1, 0)][0]
        hi = seen[min(i + 1, n_scan - 1)][0]
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc, fd = obj(c), obj(d)
        seen += [(c, fc), (d, fd)]
        for _ in range(remaining - 2):
            if fc < fd:
                hi, d, fd = d, c, fc
                c = hi - _GOLDEN * (hi - lo)
                fc = obj(c)
                seen.append((c, fc))
            else:
                lo, c, fc = c, d, fd
                d = lo + _GOLDEN * (hi - lo)
                fd = obj(d)
                seen.append((d, fd))
    values = np.array([v for _, v in seen])
    scale = max(np.abs(values).max(), np.finfo(float).tiny)
    if values.max() - values.min() <= 4.0 * np.finfo(float).eps * scale:
        return h_prev
    best = math.exp(min(seen, key=lambda p: p[1])[0])
    return float(min(max(best, h_prev / 10.0), 10.0 * h_prev))
