"""1-D grid solver for Fisher-Rao accelerated flows, plus closed-form geodesics.

The Fisher-Rao flow acts pointwise on the grid (no spatial derivatives), so
densities live on a uniform grid and integrals are Riemann sums
sum(f) * dx.  Square-root densities R = sqrt(rho) sit on the unit sphere of
L^2, which gives the great-circle geodesics and the distance 2 arccos <R0, R1>.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from aigflow.core import NumericalFailure

RHO_FLOOR = 1e-30

EnergyGrad = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class GridDensity:
    """Density ``rho`` and momentum ``phi`` on uniform ``nodes``."""

    nodes: np.ndarray
    rho: np.ndarray
    phi: Optional[np.ndarray] = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        rho = np.asarray(self.rho, dtype=float).ravel()
        phi = np.zeros_like(rho) if self.phi is None else np.asarray(self.phi, dtype=float).ravel()
        if not (nodes.shape == rho.shape == phi.shape):
            raise ValueError("nodes, rho and phi must have the same length")
        if len(nodes) > 1 and not np.allclose(np.diff(nodes), nodes[1] - nodes[0]):
            raise ValueError("grid must be uniform")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", phi)

    @property
    def dx(self) -> float:
        return float(self.nodes[1] - self.nodes[0]) if len(self.nodes) > 1 else 1.0

    @property
    def amplitude(self) -> np.ndarray:
        return np.sqrt(self.rho)

    def mass(self) -> float:
        return float(self.rho.sum() * self.dx)

    def normalized(self) -> "GridDensity":
        rho = np.maximum(self.rho, RHO_FLOOR)
        rho = rho / (rho.sum() * self.dx)
        return GridDensity(self.nodes, np.maximum(rho, RHO_FLOOR), self.phi)

    def expect(self, f) -> float:
        return float(np.sum(self.rho * f) / np.sum(self.rho))

    def to_csv(self, path, field: str = "rho") -> None:
        write_grid_csv(path, self.nodes, getattr(self, field), field)

    @classmethod
    def from_function(cls, nodes, density: Callable[[np.ndarray], np.ndarray]) -> "GridDensity":
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, density(nodes)).normalized()


def write_grid_csv(path, nodes, values, name: str = "value") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", name])
        for x, v in zip(nodes, values):
            w.writerow([repr(float(x)), repr(float(v))])


def read_grid_csv(path) -> Tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


# -- energies ---------------------------------------------------------------

def potential_energy(potential) -> Tuple[Callable, Callable]:
    """E(rho) = int V rho dx; the first variation is V itself."""
    V = np.asarray(potential, dtype=float)

    def energy(state: GridDensity) -> float:
        return float(np.sum(V * state.rho) * state.dx)

    def grad(rho):
        return V

    return energy, grad


def quadratic_energy(weight: float = 1.0) -> Tuple[Callable, Callable]:
    """E(rho) = weight/2 int rho^2 dx; the first variation is weight * rho."""

    def energy(state: GridDensity) -> float:
        return float(0.5 * weight * np.sum(state.rho ** 2) * state.dx)

    def grad(rho):
        return weight * np.asarray(rho)

    return energy, grad


def kl_energy(target_rho) -> Tuple[Callable, Callable]:
    """E(rho) = int rho log(rho / rho*) dx with first variation log rho - log rho* + 1."""
    log_t = np.log(np.maximum(np.asarray(target_rho, dtype=float), RHO_FLOOR))

    def energy(state: GridDensity) -> float:
        rho = np.maximum(state.rho, RHO_FLOOR)
        return float(np.sum(rho * (np.log(rho) - log_t)) * state.dx)

    def grad(rho):
        return np.log(np.maximum(rho, RHO_FLOOR)) - log_t + 1.0

    return energy, grad


def fr_hamiltonian(state: GridDensity, energy: Callable[[GridDensity], float]) -> float:
    """Kinetic part 1/2 Var_rho(phi) plus the potential energy."""
    m = state.expect(state.phi)
    kinetic = 0.5 * (state.expect(state.phi ** 2) - m * m)
    return kinetic + energy(state)


# -- time stepping ----------------------------------------------------------

def _rhs(rho, phi, damping, egrad):
    mean_phi = np.sum(rho * phi) / np.sum(rho)
    drho = (phi - mean_phi) * rho
    dphi = -damping * phi - 0.5 * phi * phi + mean_phi * phi - egrad(rho)
    return drho, dphi


def faig_step(state: GridDensity, energy_grad: EnergyGrad, alpha: Union[float, Callable[[float], float]],
              dt: float, t: float = 0.0) -> GridDensity:
    """One classical RK4 step of the Fisher-Rao AIG system.

    ``energy_grad`` is the first variation dE/drho, either fixed or a function
    of rho.  ``alpha`` is a damping constant or a function of time (``t`` is
    the time at the start of the step).  rho is renormalized and floored.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    egrad = energy_grad if callable(energy_grad) else (lambda rho, g=np.asarray(energy_grad): g)
    damp = alpha if callable(alpha) else (lambda s, a=float(alpha): a)
    r0, p0 = state.rho, state.phi
    k1 = _rhs(r0, p0, damp(t), egrad)
    k2 = _rhs(r0 + 0.5 * dt * k1[0], p0 + 0.5 * dt * k1[1], damp(t + 0.5 * dt), egrad)
    k3 = _rhs(r0 + 0.5 * dt * k2[0], p0 + 0.5 * dt * k2[1], damp(t + 0.5 * dt), egrad)
    k4 = _rhs(r0 + dt * k3[0], p0 + dt * k3[1], damp(t + dt), egrad)
    rho = r0 + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    phi = p0 + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    if not (np.isfinite(rho).all() and np.isfinite(phi).all()):
        raise NumericalFailure("non-finite Fisher-Rao state")
    return GridDensity(state.nodes, rho, phi).normalized()


def faig_run(state: GridDensity, energy_grad: EnergyGrad, alpha, dt: float, t_end: float,
             t0: float = 0.0, callback=None) -> GridDensity:
    """Integrate from ``t0`` to ``t_end``; ``callback(t, state)`` after each step."""
    n = int(round((t_end - t0) / dt))
    t = t0
    for _ in range(n):
        state = faig_step(state, energy_grad, alpha, dt, t)
        t += dt
        if callback is not None:
            callback(t, state)
    return state


def nesterov_damping(t: float) -> float:
    return 3.0 / t


# -- geodesics --------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicFR:
    """R_t = A sin(H t) + B cos(H t), with rho_t = R_t^2."""

    A: np.ndarray
    B: np.ndarray
    H: float
    rho0: np.ndarray
    rho1: np.ndarray
    dx: float = 1.0

    def amplitude(self, t: float) -> np.ndarray:
        return self.A * math.sin(self.H * t) + self.B * math.cos(self.H * t)

    def density(self, t: float) -> np.ndarray:
        return self.amplitude(t) ** 2


def _sqrt_pair(rho0, rho1, dx):
    if isinstance(rho0, GridDensity):
        dx = rho0.dx
        rho0 = rho0.rho
    if isinstance(rho1, GridDensity):
        rho1 = rho1.rho
    r0 = np.asarray(rho0, dtype=float).ravel()
    r1 = np.asarray(rho1, dtype=float).ravel()
    if r0.shape != r1.shape:
        raise ValueError("densities must live on the same grid")
    if (r0 <= 0).any() or (r1 <= 0).any():
        raise ValueError("Fisher-Rao geodesics need strictly positive densities")
    return r0, r1, float(dx)


def _overlap(r0, r1, dx) -> float:
    return float(np.clip(np.sum(np.sqrt(r0) * np.sqrt(r1)) * dx, -1.0, 1.0))


def fr_geodesic(rho0, rho1, dx: float = 1.0) -> GeodesicFR:
    """Great-circle path between two positive, normalized densities.

    Accepts :class:`GridDensity` values or raw arrays with spacing ``dx``.
    """
    r0, r1, dx = _sqrt_pair(rho0, rho1, dx)
    B = np.sqrt(r0)
    if np.max(np.abs(r0 - r1)) <= 1e-14:
        return GeodesicFR(np.zeros_like(B), B, 0.0, r0, r1, dx)
    H = math.acos(_overlap(r0, r1, dx))
    if H == 0.0:
        return GeodesicFR(np.zeros_like(B), B, 0.0, r0, r1, dx)
    A = (np.sqrt(r1) - B * math.cos(H)) / math.sin(H)
    return GeodesicFR(A, B, H, r0, r1, dx)


def fr_distance(rho0, rho1, dx: float = 1.0) -> float:
    """2 arccos(int sqrt(rho0 rho1) dx)."""
    r0, r1, dx = _sqrt_pair(rho0, rho1, dx)
    return 2.0 * math.acos(_overlap(r0, r1, dx))
