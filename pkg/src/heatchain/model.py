"""Chain and reservoir specifications and their drift/diffusion generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gaussian_core import PhaseSpaceLayout, _frozen, direct_sum, symplectic_form, tridiagonal_block

TOPOLOGIES = ("rwa", "smc")


@dataclass(frozen=True)
class ChainSpec:
    """Nearest-neighbour oscillator chain.

    ``coupling`` is the hopping rate Omega (a scalar for a uniform chain, a
    list of ``n - 1`` bond values for a disordered one) when ``topology`` is
    ``"rwa"``, and the spring constant kappa when it is ``"smc"``.
    """

    n: int
    omega: float
    coupling: float | tuple[float, ...] = 0.0
    topology: str = "rwa"
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be positive and finite, got {self.omega!r}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if not (np.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError(f"hbar must be positive, got {self.hbar!r}")
        c = self.coupling
        if np.ndim(c) == 0:
            if not np.isfinite(c):
                raise ValueError("coupling must be finite")
            object.__setattr__(self, "coupling", float(c))
        else:
            if self.topology == "smc":
                raise ValueError("SMC chains take a single spring constant kappa")
            c = tuple(float(v) for v in c)
            if len(c) != self.n - 1:
                raise ValueError(f"per-bond coupling list must have n-1 = {self.n - 1} entries, got {len(c)}")
            if not all(np.isfinite(c)):
                raise ValueError("couplings must be finite")
            object.__setattr__(self, "coupling", c)

    @property
    def layout(self) -> PhaseSpaceLayout:
        return PhaseSpaceLayout(self.n, self.hbar)

    @property
    def is_uniform_rwa(self) -> bool:
        return self.topology == "rwa" and isinstance(self.coupling, float)

    @property
    def bonds(self) -> np.ndarray:
        """Per-bond RWA couplings (length n-1)."""
        if self.topology != "rwa":
            raise ValueError("bonds are defined for RWA chains only")
        return np.broadcast_to(np.asarray(self.coupling, dtype=float), (self.n - 1,)).copy()


def _pair(value, name):
    if value is None:
        return None
    zeta, nbar = (float(v) for v in value)
    if zeta < 0 or nbar < 0 or not (np.isfinite(zeta) and np.isfinite(nbar)):
        raise ValueError(f"{name}: rate and occupation must be finite and non-negative, got {value!r}")
    return (zeta, nbar)


@dataclass(frozen=True)
class ReservoirBank:
    """Per-site thermal baths, optional all-diffusive end baths, per-site dephasing rates."""

    thermal: tuple[tuple[float, float], ...]
    diffusive_A: tuple[float, float] | None = None
    diffusive_B: tuple[float, float] | None = None
    dephasing: tuple[float, ...] = ()

    def __post_init__(self):
        thermal = tuple(_pair(p, f"thermal[{k + 1}]") for k, p in enumerate(self.thermal))
        if len(thermal) < 1:
            raise ValueError("at least one site is required")
        object.__setattr__(self, "thermal", thermal)
        object.__setattr__(self, "diffusive_A", _pair(self.diffusive_A, "diffusive_A"))
        object.__setattr__(self, "diffusive_B", _pair(self.diffusive_B, "diffusive_B"))
        deph = tuple(float(g) for g in self.dephasing)
        if deph and len(deph) != len(thermal):
            raise ValueError(f"dephasing needs one rate per site ({len(thermal)}), got {len(deph)}")
        for m, g in enumerate(deph):
            if g < 0 or not np.isfinite(g):
                raise ValueError(f"dephasing[{m + 1}]: rate must be non-negative, got {g!r}")
        object.__setattr__(self, "dephasing", deph)

    @classmethod
    def uniform(cls, n, zeta, nbar, *, zeta_A=0.0, nbar_A=0.0, zeta_B=0.0, nbar_B=0.0,
                gamma: float | Sequence[float] = 0.0) -> "ReservoirBank":
        nbars = np.broadcast_to(np.asarray(nbar, dtype=float), (n,))
        zetas = np.broadcast_to(np.asarray(zeta, dtype=float), (n,))
        gammas = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
        return cls(
            thermal=tuple(zip(zetas.tolist(), nbars.tolist())),
            diffusive_A=(zeta_A, nbar_A) if zeta_A else None,
            diffusive_B=(zeta_B, nbar_B) if zeta_B else None,
            dephasing=tuple(gammas.tolist()) if np.any(gammas) else (),
        )

    @property
    def n(self) -> int:
        return len(self.thermal)

    @property
    def zetas(self) -> np.ndarray:
        return np.array([z for z, _ in self.thermal])

    @property
    def nbars(self) -> np.ndarray:
        return np.array([nb for _, nb in self.thermal])

    @property
    def gammas(self) -> np.ndarray:
        return np.array(self.dephasing) if self.dephasing else np.zeros(self.n)

    @property
    def has_dephasing(self) -> bool:
        return bool(np.any(self.gammas > 0))

    @property
    def uniform_zeta(self) -> float | None:
        z = self.zetas
        return float(z[0]) if np.all(z == z[0]) else None

    def mirrored(self) -> "ReservoirBank":
        """Site-reversed bank with the A and B baths exchanged."""
        return ReservoirBank(
            thermal=self.thermal[::-1],
            diffusive_A=self.diffusive_B,
            diffusive_B=self.diffusive_A,
            dephasing=self.dephasing[::-1],
        )

    def excess_diffusion(self, hbar: float = 1.0) -> np.ndarray:
        """Diagonal of ``hbar * Diag(zeta_k nbar_k + end-bath terms)``, the n x n block
        added on top of the zero-point diffusion ``hbar zeta_k / 2``."""
        d = self.zetas * self.nbars
        if self.diffusive_A is not None:
            d[0] += self.diffusive_A[0] * self.diffusive_A[1]
        if self.diffusive_B is not None:
            d[-1] += self.diffusive_B[0] * self.diffusive_B[1]
        return hbar * d


@dataclass(frozen=True)
class HamiltonianSpec:
    """``H = x.Hx/2 + xi.Jx + H0``."""

    H: np.ndarray
    xi: np.ndarray | None = None
    H0: float = 0.0

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] % 2:
            raise ValueError(f"adjacency must be 2n x 2n, got {H.shape}")
        if not np.allclose(H, H.T, rtol=0, atol=1e-14 * max(1.0, np.abs(H).max())):
            raise ValueError("adjacency matrix must be symmetric")
        xi = np.zeros(H.shape[0]) if self.xi is None else np.asarray(self.xi, dtype=float)
        if xi.shape != (H.shape[0],):
            raise ValueError(f"xi must have length {H.shape[0]}")
        object.__setattr__(self, "H", _frozen(H))
        object.__setattr__(self, "xi", _frozen(xi))
        object.__setattr__(self, "H0", float(self.H0))

    @property
    def n(self) -> int:
        return self.H.shape[0] // 2


@dataclass(frozen=True)
class LindbladLinear:
    """``L = lam . J x + mu``."""

    lam: np.ndarray
    mu: complex = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lam", _frozen(np.asarray(self.lam, dtype=complex)))
        object.__setattr__(self, "mu", complex(self.mu))

    @property
    def upsilon(self) -> np.ndarray:
        return np.outer(self.lam, self.lam.conj())


@dataclass(frozen=True)
class LindbladQuadratic:
    """``L = x . Delta x / 2 + mu`` with real symmetric ``Delta``."""

    Delta: np.ndarray
    mu: complex = 0.0
    label: str = ""
    rate: float = 0.0

    def __post_init__(self):
        D = np.asarray(self.Delta, dtype=float)
        if not np.array_equal(D, D.T):
            raise ValueError("Delta must be symmetric")
        object.__setattr__(self, "Delta", _frozen(D))
        object.__setattr__(self, "mu", complex(self.mu))

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.rate))


def build_adjacency(spec: ChainSpec) -> HamiltonianSpec:
    n, w = spec.n, spec.omega
    if spec.topology == "rwa":
        blk = tridiagonal_block(n, w, spec.bonds)
        H = direct_sum(blk, blk)
    else:
        kappa = spec.coupling
        blk = tridiagonal_block(n, w + kappa, -0.5 * kappa)
        blk[0, 0] -= 0.5 * kappa
        blk[-1, -1] -= 0.5 * kappa
        H = direct_sum(blk, w * np.eye(n))
    return HamiltonianSpec(H=H, xi=np.zeros(2 * n))


def _site_vector(layout: PhaseSpaceLayout, k: int, q_coef, p_coef) -> np.ndarray:
    v = np.zeros(layout.dim, dtype=complex)
    v[layout.q_index(k)] = q_coef
    v[layout.p_index(k)] = p_coef
    return v


def thermal_lindblad_pair(k: int, zeta: float, nbar: float, layout: PhaseSpaceLayout):
    """Damping and pumping operators of the thermal bath on site ``k`` (1-based)."""
    if zeta < 0 or nbar < 0:
        raise ValueError("zeta and nbar must be non-negative")
    down = np.sqrt(0.5 * zeta * (nbar + 1.0)) * _site_vector(layout, k, 1j, -1.0)
    up = np.sqrt(0.5 * zeta * nbar) * _site_vector(layout, k, -1j, -1.0)
    label = f"thermal:{k}"
    return LindbladLinear(down, 0.0, label), LindbladLinear(up, 0.0, label)


def diffusive_lindblad(end: str, zeta: float, nbar: float, layout: PhaseSpaceLayout):
    """High-temperature end bath ``A`` (site 1) or ``B`` (site n); enters D only."""
    if end not in ("A", "B"):
        raise ValueError(f"end must be 'A' or 'B', got {end!r}")
    if zeta < 0 or nbar < 0:
        raise ValueError("zeta and nbar must be non-negative")
    site = 1 if end == "A" else layout.n
    lam = np.sqrt(0.5 * zeta * nbar) * _site_vector(layout, site, 1j, -1.0)
    return LindbladLinear(lam, 0.0, end), LindbladLinear(lam.conj(), 0.0, end)


def dephasing_quadratic(m: int, gamma: float, layout: PhaseSpaceLayout) -> LindbladQuadratic:
    """``hbar sqrt(gamma) a_m^dag a_m`` written as ``x.Delta x/2 + mu``.

    The real constant ``mu = -hbar sqrt(gamma)/2`` cancels out of the
    dissipator, so it has no dynamical effect.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    s = np.sqrt(gamma)
    Delta = np.zeros((layout.dim, layout.dim))
    Delta[layout.q_index(m), layout.q_index(m)] = s
    Delta[layout.p_index(m), layout.p_index(m)] = s
    return LindbladQuadratic(Delta, -0.5 * layout.hbar * s, f"dephasing:{m}", float(gamma))


@dataclass(frozen=True)
class GeneratorSet:
    Gamma: np.ndarray
    D: np.ndarray
    Upsilon: np.ndarray
    eta: np.ndarray
    hamiltonian: HamiltonianSpec
    layout: PhaseSpaceLayout
    linear: tuple[LindbladLinear, ...] = ()
    quadratic: tuple[LindbladQuadratic, ...] = ()
    gamma_tilde: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # drift including the quadratic-Lindblad correction
        J = self.layout.J
        G = np.array(self.Gamma, dtype=float)
        for q in self.quadratic:
            JD = J @ q.Delta
            G += 0.5 * self.hbar * JD @ JD
        object.__setattr__(self, "gamma_tilde", _frozen(G))

    @property
    def n(self) -> int:
        return self.layout.n

    @property
    def hbar(self) -> float:
        return self.layout.hbar

    @property
    def H(self) -> np.ndarray:
        return self.hamiltonian.H

    @property
    def has_dephasing(self) -> bool:
        return any(q.rate > 0 for q in self.quadratic)

    def delta_v(self, V) -> np.ndarray:
        """Diffusion generated by the quadratic Lindblads, ``hbar sum J Dm V Dm J^T``."""
        out = np.zeros((self.layout.dim, self.layout.dim))
        J = self.layout.J
        for q in self.quadratic:
            A = J @ q.Delta
            out += A @ V @ A.T
        return self.hbar * out

    def cm_rhs(self, V) -> np.ndarray:
        """Right-hand side of the covariance equation of motion."""
        G = self.gamma_tilde
        return G @ V + V @ G.T + self.D + self.delta_v(V)

    def mean_rhs(self, x) -> np.ndarray:
        return self.hamiltonian.xi - self.eta + self.gamma_tilde @ x


def assemble_generators(ham: HamiltonianSpec, bank: ReservoirBank,
                        layout: PhaseSpaceLayout) -> GeneratorSet:
    if ham.n != layout.n or bank.n != layout.n:
        raise ValueError(f"dimension mismatch: H has n={ham.n}, bank n={bank.n}, layout n={layout.n}")
    linear: list[LindbladLinear] = []
    for k, (zeta, nbar) in enumerate(bank.thermal, start=1):
        if zeta > 0:
            linear.extend(thermal_lindblad_pair(k, zeta, nbar, layout))
    for end, pair in (("A", bank.diffusive_A), ("B", bank.diffusive_B)):
        if pair is not None and pair[0] > 0:
            linear.extend(diffusive_lindblad(end, *pair, layout))
    quadratic = [dephasing_quadratic(m, g, layout)
                 for m, g in enumerate(bank.gammas, start=1) if g > 0]

    dim = layout.dim
    Ups = np.zeros((dim, dim), dtype=complex)
    eta = np.zeros(dim)
    # sum each reservoir's pair first so a conjugate (diffusive) pair cancels exactly
    groups: dict[str, np.ndarray] = {}
    for L in linear:
        groups[L.label] = groups.get(L.label, 0) + L.upsilon
        eta += np.imag(np.conj(L.mu) * L.lam)
    for U in groups.values():
        Ups += U
    J = symplectic_form(layout.n)
    Gamma = J @ ham.H - Ups.imag @ J
    D = layout.hbar * Ups.real
    D = 0.5 * (D + D.T)
    return GeneratorSet(
        Gamma=_frozen(Gamma), D=_frozen(D), Upsilon=_frozen(Ups), eta=_frozen(eta),
        hamiltonian=ham, layout=layout, linear=tuple(linear), quadratic=tuple(quadratic),
    )


def build_generators(spec: ChainSpec, bank: ReservoirBank) -> GeneratorSet:
    if bank.n != spec.n:
        raise ValueError(f"bank has {bank.n} sites, chain has {spec.n}")
    return assemble_generators(build_adjacency(spec), bank, spec.layout)


def nbar_from_temperature(*, omega: float, beta: float | None = None,
                          temperature: float | None = None, hbar: float = 1.0) -> float:
    """Bose-Einstein occupation ``1/(exp(hbar beta omega) - 1)`` (k_B = 1)."""
    if (beta is None) == (temperature is None):
        raise ValueError("give exactly one of beta or temperature")
    if beta is None:
        if not temperature > 0:
            raise ValueError("temperature must be positive")
        beta = 1.0 / temperature
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not omega > 0:
        raise ValueError("omega must be positive")
    x = hbar * beta * omega
    return 0.0 if x > 700 else float(1.0 / np.expm1(x))
