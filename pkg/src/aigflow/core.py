"""Shared state types, damping schedules and seeded randomness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a configuration value violates a documented precondition."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class NumericalFailure(FloatingPointError):
    """Raised when a flow produces non-finite values.

    ``particle`` is the index of the first offending particle (if known) and
    ``iteration`` the global iteration at which the failure happened.
    """

    def __init__(self, message: str, particle: Optional[int] = None,
                 iteration: Optional[int] = None):
        super().__init__(message)
        self.particle = particle
        self.iteration = iteration


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream id) pair naming a reproducible random stream."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)


RngLike = Union[RngStream, np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class Ensemble:
    """Particle positions and velocities, plus the restartable counter ``k``."""

    positions: np.ndarray
    velocities: np.ndarray
    k: int = 0

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        v = np.array(self.velocities, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if x.shape != v.shape:
            raise ValueError(f"positions {x.shape} and velocities {v.shape} differ in shape")
        if self.k < 0:
            raise ValueError("iteration index k must be nonnegative")
        bad = ~(np.isfinite(x).all(axis=1) & np.isfinite(v).all(axis=1))
        if bad.any():
            idx = int(np.flatnonzero(bad)[0])
            raise NumericalFailure(f"non-finite state at particle {idx}", particle=idx)
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @classmethod
    def at_rest(cls, positions) -> "Ensemble":
        x = np.asarray(positions, dtype=float)
        return cls(x, np.zeros_like(x), 0)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    def restarted(self) -> "Ensemble":
        return Ensemble(self.positions, np.zeros_like(self.positions), 0)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.positions).all() and np.isfinite(self.velocities).all())


SCHEDULE_MODES = ("nesterov", "strongly-convex")


@dataclass(frozen=True)
class Schedule:
    """Damping and step-size schedule.

    ``decay`` is an optional ``(factor, period)`` pair: the step size is
    multiplied by ``factor`` every ``period`` global iterations.
    """

    mode: str = "nesterov"
    tau: float = 0.1
    beta: Optional[float] = None
    decay: Optional[Tuple[float, int]] = None

    def __post_init__(self):
        if self.mode not in SCHEDULE_MODES:
            raise ConfigurationError(f"unknown schedule mode {self.mode!r}", "schedule")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"tau must be positive, got {self.tau}", "tau")
        if self.mode == "strongly-convex":
            if self.beta is None or not self.beta > 0:
                raise ConfigurationError("strongly-convex mode requires beta > 0", "beta")
            if self.beta * self.tau >= 1:
                raise ConfigurationError(
                    f"strongly-convex mode requires beta*tau < 1, got {self.beta * self.tau}", "beta")
        if self.decay is not None:
            factor, period = self.decay
            if not 0 < factor <= 1 or int(period) < 1:
                raise ConfigurationError(f"invalid decay {self.decay}", "decay")

    def step_size(self, iteration: int = 0) -> float:
        """Step size at global iteration ``iteration`` (decay applied)."""
        if self.decay is None:
            return self.tau
        factor, period = self.decay
        return self.tau * factor ** (iteration // int(period))


def alpha(schedule: Schedule, k: int, tau: Optional[float] = None) -> float:
    """Momentum coefficient for restart counter ``k``.

    ``tau`` overrides the schedule's base step size (used with decay).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if schedule.mode == "strongly-convex":
        tau = schedule.tau if tau is None else tau
        if schedule.beta * tau >= 1:
            raise ConfigurationError("beta*tau must be < 1", "beta")
        r = math.sqrt(schedule.beta * tau)
        return (1.0 - r) / (1.0 + r)
    return max(0.0, (k - 1.0) / (k + 2.0))


def init_ensemble(n: int, d: int, mean, covariance, rng: RngLike) -> Ensemble:
    """Draw ``n`` i.i.d. Gaussian positions with zero velocities."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (d,))
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (d, d):
        raise ConfigurationError(f"covariance must be {d}x{d}, got {cov.shape}", "init_cov")
    if not np.allclose(cov, cov.T):
        raise ConfigurationError("covariance must be symmetric", "init_cov")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ConfigurationError("covariance must be positive definite", "init_cov") from None
    z = as_generator(rng).standard_normal((n, d))
    return Ensemble.at_rest(mean + z @ chol.T)


__all__ = [
    "ConfigurationError",
    "Ensemble",
    "NumericalFailure",
    "RngStream",
    "Schedule",
    "alpha",
    "as_generator",
    "init_ensemble",
]
