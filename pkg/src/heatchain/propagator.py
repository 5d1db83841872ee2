"""Transient dynamics of means and covariance matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian_core import GaussianState, matrix_exp
from .model import ChainSpec, GeneratorSet, ReservoirBank
from .steady import SolverError, hadamard_block_cm, rwa_eigensystem

EQUAL_FREQ_TOL = 1e-9


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple[GaussianState, ...]
    provenance: str

    @property
    def covs(self) -> np.ndarray:
        return np.stack([s.cov for s in self.states])

    @property
    def means(self) -> np.ndarray:
        return np.stack([s.mean for s in self.states])


def l_matrix(nu, zeta: float, t: float, omega: float = 1.0) -> np.ndarray:
    """Finite-time kernel ``(1 - exp(-[zeta + i(nu_j - nu_k)] t)) / (zeta + i(nu_j - nu_k))``.

    For ``zeta == 0`` the diagonal (and any pair with ``|nu_j - nu_k| <
    1e-9 |omega|``) is the limit value ``t``.
    """
    nu = np.asarray(nu, dtype=float)
    dnu = nu[:, None] - nu[None, :]
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    if zeta > 0:
        z = zeta + 1j * dnu
        zt = z * t
        tiny = np.abs(zt) < 1e-6
        safe = np.where(tiny, 1.0, z)
        series = t * (1 - zt / 2 + zt**2 / 6)
        return np.where(tiny, series, -np.expm1(-safe * t) / safe)
    same = np.abs(dnu) < EQUAL_FREQ_TOL * abs(omega)
    safe = np.where(same, 1.0, dnu)
    return np.where(same, complex(t), 1j * np.expm1(-1j * safe * t) / safe)


def chain_rotation(spec: ChainSpec, t: float) -> np.ndarray:
    """``exp(J H t)`` for an RWA chain, built from its eigensystem."""
    nu, O = rwa_eigensystem(spec)
    C = (O * np.cos(nu * t)) @ O.T
    S = (O * np.sin(nu * t)) @ O.T
    return np.block([[C, S], [-S, C]])


def integral_I(spec: ChainSpec, bank: ReservoirBank, t: float) -> np.ndarray:
    """``int_0^t exp(-zeta s) exp(-i H s) Dblk exp(i H s) ds`` in Hadamard form."""
    zeta = bank.uniform_zeta
    if zeta is None:
        raise ValueError("needs uniform thermal damping")
    nu, O = rwa_eigensystem(spec)
    Dt = O.T @ (bank.excess_diffusion(spec.hbar)[:, None] * O)
    return O @ (Dt * l_matrix(nu, zeta, t, spec.omega)) @ O.T


def evolve_mean_exact(x0, Gamma, xi, eta, t: float) -> np.ndarray:
    Gamma = np.asarray(Gamma, dtype=float)
    E = matrix_exp(Gamma, t)
    x = E @ np.asarray(x0, dtype=float)
    drive = np.asarray(xi, dtype=float) - np.asarray(eta, dtype=float)
    if np.any(drive):
        try:
            x = x + np.linalg.solve(Gamma, (E - np.eye(len(drive))) @ drive)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular drift with nonzero drive; use evolve_ode") from exc
    return x


def _check_closed_form(spec: ChainSpec, bank: ReservoirBank):
    if spec.topology != "rwa":
        raise ValueError("closed-form evolution applies to RWA chains only")
    if bank.has_dephasing:
        raise ValueError("closed-form evolution does not cover dephasing")
    if bank.n != spec.n:
        raise ValueError("bank and chain sizes differ")


def evolve_cm_closed(V0, spec: ChainSpec, bank: ReservoirBank, t: float) -> np.ndarray:
    """Covariance matrix at time ``t`` for uniform thermal damping ``zeta > 0``."""
    _check_closed_form(spec, bank)
    zeta = bank.uniform_zeta
    if zeta is None or zeta <= 0:
        raise ValueError("closed-form evolution needs uniform zeta > 0")
    hbar = spec.hbar
    nu, O = rwa_eigensystem(spec)
    R = chain_rotation(spec, t)
    decay = math.exp(-zeta * t)
    V = decay * (R @ np.asarray(V0, dtype=float) @ R.T)
    V += 0.5 * hbar * (-math.expm1(-zeta * t)) * np.eye(2 * spec.n)
    V += hadamard_block_cm(O, l_matrix(nu, zeta, t, spec.omega), bank.excess_diffusion(hbar))
    return 0.5 * (V + V.T)


def evolve_all_diffusive(V0, spec: ChainSpec, bank: ReservoirBank, t: float) -> np.ndarray:
    """Covariance matrix when only the end-chain diffusive baths act (no steady state)."""
    _check_closed_form(spec, bank)
    if np.any(bank.zetas > 0):
        raise ValueError("thermal damping present; use evolve_cm_closed")
    nu, O = rwa_eigensystem(spec)
    R = chain_rotation(spec, t)
    V = R @ np.asarray(V0, dtype=float) @ R.T
    V += hadamard_block_cm(O, l_matrix(nu, 0.0, t, spec.omega), bank.excess_diffusion(spec.hbar))
    return 0.5 * (V + V.T)


def _rk4_step(gens: GeneratorSet, V, x, h):
    f, g = gens.cm_rhs, gens.mean_rhs
    k1, m1 = f(V), g(x)
    k2, m2 = f(V + 0.5 * h * k1), g(x + 0.5 * h * m1)
    k3, m3 = f(V + 0.5 * h * k2), g(x + 0.5 * h * m2)
    k4, m4 = f(V + h * k3), g(x + h * m3)
    V = V + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    x = x + (h / 6.0) * (m1 + 2 * m2 + 2 * m3 + m4)
    return 0.5 * (V + V.T), x


def evolve_ode(V0, x0, gens: GeneratorSet, t: float, dt: float, sample_times=None) -> Trajectory:
    """Classical RK4 integration of the (dephasing-extended) moment equations.

    Samples are returned at ``sample_times`` (default: ``[0, t]``).  Each
    interval between samples is split into equal steps no longer than ``dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    times = np.array(sorted({0.0, float(t)} if sample_times is None
                            else {0.0, *map(float, sample_times)}))
    if times[0] < 0:
        raise ValueError("sample times must be non-negative")
    V = np.array(V0, dtype=float)
    x = np.zeros(gens.layout.dim) if x0 is None else np.array(x0, dtype=float)
    hbar = gens.hbar
    states = [GaussianState(x, V, hbar)]
    step = 0
    for a, b in zip(times[:-1], times[1:]):
        nsub = max(1, math.ceil((b - a) / dt - 1e-9))
        h = (b - a) / nsub
        for _ in range(nsub):
            with np.errstate(over="ignore", invalid="ignore"):
                V, x = _rk4_step(gens, V, x, h)
            step += 1
            if not (np.all(np.isfinite(V)) and np.all(np.isfinite(x))):
                raise SolverError(f"non-finite state at RK4 step {step} (t ~ {a + h * step:.6g})")
        states.append(GaussianState(x, V, hbar))
    return Trajectory(times=times, states=tuple(states), provenance=f"rk4(dt<={dt:g})")
