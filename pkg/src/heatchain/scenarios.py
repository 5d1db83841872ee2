"""Preset configurations, closed-form cross-checks, sweeps and studies."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gaussian_core import vacuum_cm
from .model import ChainSpec, GeneratorSet, ReservoirBank, build_generators
from .propagator import evolve_all_diffusive, evolve_cm_closed, evolve_ode
from .steady import SolverError, SteadyState, solve_steady, stability_check
from .thermo import CurrentReport, mean_energy, occupations, total_current

PRESET_NAMES = ("baseline", "caseI", "caseII", "caseIII", "caseIV", "caseV", "caseVI")

DESCRIPTIONS = {
    "baseline": "uniform RWA chain, thermal bath on every site, diffusive baths at both ends",
    "caseI": "thermal baths only, hot and cold baths at the ends",
    "caseII": "diffusive end baths only (no steady state)",
    "caseIII": "thermal and diffusive baths at the two end sites only",
    "caseIV": "thermal baths at the ends plus dephasing on every site",
    "caseV": "randomly disordered couplings, baseline reservoirs",
    "caseVI": "spring-mass (position-position) coupling, baseline reservoirs",
}

# every knob a preset accepts; values of None mean "preset default"
PARAMETERS = ("n", "omega", "Omega", "kappa", "couplings", "hbar", "zeta", "nbar", "nbar_sites",
              "zeta_sites", "zeta_end", "zeta_A", "nbar_A", "zeta_B", "nbar_B", "gamma", "seed")

_BASE = dict(n=25, omega=1.0, Omega=0.5, hbar=1.0, zeta=0.1, zeta_end=0.1, nbar=10.0,
             zeta_A=0.1, nbar_A=100.0, zeta_B=0.1, nbar_B=50.0, gamma=0.0)

_DEFAULTS = {
    "baseline": {},
    "caseI": dict(zeta_A=0.0, zeta_B=0.0, nbar_A=0.0, nbar_B=0.0, nbar=30.0,
                  nbar_sites={1: 100.0, -1: 50.0}),
    "caseII": dict(zeta=0.0, nbar=0.0),
    "caseIII": dict(zeta="ends", nbar=0.0),
    "caseIV": dict(zeta="ends", nbar=0.0, nbar_sites={1: 100.0, -1: 50.0},
                   zeta_A=0.0, zeta_B=0.0, nbar_A=0.0, nbar_B=0.0, gamma=0.5),
    "caseV": dict(seed=0),
    "caseVI": dict(kappa=0.5),
}


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    spec: ChainSpec
    bank: ReservoirBank
    description: str
    params: dict = field(default_factory=dict, compare=False)

    @property
    def generators(self) -> GeneratorSet:
        return build_generators(self.spec, self.bank)


def disorder_couplings(n: int, seed: int) -> tuple[float, ...]:
    """``n - 1`` couplings uniform on (0, 1] from numpy's PCG64 generator."""
    rng = np.random.default_rng(seed)
    return tuple((1.0 - rng.random(n - 1)).tolist())


def _site_values(n, scalar, sites):
    return _apply_sites(np.full(n, float(scalar)), sites)


def _apply_sites(out, sites):
    n = len(out)
    for k, v in (sites or {}).items():
        k = int(k)
        idx = k - 1 if k > 0 else n + k
        if not 0 <= idx < n:
            raise ValueError(f"site {k} outside 1..{n}")
        out[idx] = float(v)
    return out


def preset(name: str, **overrides) -> ScenarioPreset:
    """Build a named preset; keyword overrides replace its defaults.

    ``nbar_sites`` / ``zeta_sites`` map 1-based sites (negative counts from
    the far end) to per-site values; ``zeta="ends"`` damps only sites 1 and n,
    at rate ``zeta_end``.
    """
    if name not in _DEFAULTS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    unknown = set(overrides) - set(PARAMETERS)
    if unknown:
        raise ValueError(f"unknown override(s): {', '.join(sorted(unknown))}")
    p = {**_BASE, **_DEFAULTS[name]}
    p.update({k: v for k, v in overrides.items() if v is not None})
    n = int(p["n"])

    if p.get("kappa") is not None:
        if p.get("couplings") is not None:
            raise ValueError("give either kappa (SMC) or couplings (RWA), not both")
        spec = ChainSpec(n, p["omega"], p["kappa"], "smc", p["hbar"])
    else:
        if p.get("couplings") is not None:
            coupling = tuple(p["couplings"])
        elif name == "caseV":
            coupling = disorder_couplings(n, int(p["seed"]))
        else:
            coupling = p["Omega"]
        spec = ChainSpec(n, p["omega"], coupling, "rwa", p["hbar"])

    if p["zeta"] == "ends":
        zetas = _site_values(n, 0.0, {1: p["zeta_end"], -1: p["zeta_end"]})
    elif isinstance(p["zeta"], str):
        raise ValueError(f"zeta must be a number or 'ends', got {p['zeta']!r}")
    else:
        zetas = _site_values(n, p["zeta"], None)
    zetas = _apply_sites(zetas, p.get("zeta_sites"))
    nbars = _site_values(n, p["nbar"], p.get("nbar_sites"))
    bank = ReservoirBank.uniform(n, zetas, nbars, zeta_A=p["zeta_A"], nbar_A=p["nbar_A"],
                                 zeta_B=p["zeta_B"], nbar_B=p["nbar_B"], gamma=p["gamma"])
    return ScenarioPreset(name, spec, bank, DESCRIPTIONS[name], params=p)


# closed forms -------------------------------------------------------------

def case3_closed_forms(N1: float, Nn: float, zeta: float, Omega: float, omega: float, n: int,
                       hbar: float = 1.0):
    """Steady occupations and end currents with baths on the two end sites only.

    ``N1`` and ``Nn`` are effective occupations (thermal plus diffusive end
    baths scaled by their rate ratios).  Returns ``(occupations, (J1, Jn))``.
    """
    if n < 3 or zeta <= 0:
        raise ValueError("need n >= 3 and zeta > 0")
    mean, d = 0.5 * (N1 + Nn), N1 - Nn
    end = zeta**2 * d / (8 * Omega**2 + 2 * zeta**2)
    occ = np.full(n, mean)
    occ[0] += end
    occ[-1] -= end
    J1 = 2 * hbar * omega * Omega**2 * zeta * d / (4 * Omega**2 + zeta**2)
    return occ, (J1, -J1)


def case4_closed_forms(N1: float, Nn: float, zeta: float, gamma: float, Omega: float, omega: float,
                       n: int, hbar: float = 1.0):
    """Case III with uniform dephasing ``gamma``: linear bulk profile and ~1/n current."""
    if n < 3 or zeta <= 0 or gamma < 0:
        raise ValueError("need n >= 3, zeta > 0, gamma >= 0")
    mean, d = 0.5 * (N1 + Nn), N1 - Nn
    gz = (n - 1) * gamma * zeta
    den = 8 * Omega**2 + 2 * zeta**2 + 2 * gz
    k = np.arange(1, n + 1)
    occ = mean + (n - 2 * k + 1) * gamma * zeta * d / den
    occ[0] = mean + (zeta**2 + gz) * d / den
    occ[-1] = mean - (zeta**2 + gz) * d / den
    J1 = 2 * hbar * omega * Omega**2 * zeta * d / (4 * Omega**2 + zeta**2 + gz)
    return occ, (J1, -J1)


def smc_mode_frequencies(n: int, omega: float, kappa: float) -> np.ndarray:
    """``sqrt(omega(omega + kappa) - omega kappa cos((m-1) pi/n))`` for m = 1..n."""
    m = np.arange(1, n + 1)
    return np.sqrt(omega * (omega + kappa) - omega * kappa * np.cos((m - 1) * np.pi / n))


# reports ------------------------------------------------------------------

@dataclass(frozen=True)
class TransportReport:
    name: str
    occupations: np.ndarray
    currents: CurrentReport
    mean_energy: float
    steady: SteadyState

    def end_current(self, end: str) -> float:
        """Current from everything attached to site 1 (``"1"``) or site n (``"n"``)."""
        n = len(self.occupations)
        site, bath = (1, "A") if end == "1" else (n, "B")
        per = self.currents.per_reservoir
        return per.get(f"thermal:{site}", 0.0) + per.get(bath, 0.0)


@dataclass(frozen=True)
class SweepResult:
    columns: tuple[str, ...]
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)


def run_steady(p: ScenarioPreset, method: str = "auto") -> TransportReport:
    gens = p.generators
    st = solve_steady(gens, method)
    ham = gens.hamiltonian
    return TransportReport(
        name=p.name,
        occupations=occupations(st.V_star, gens.hbar),
        currents=total_current(gens, st.V_star, st.x_star),
        mean_energy=mean_energy(ham.H, ham.xi, ham.H0, st.V_star, st.x_star),
        steady=st,
    )


def default_dt(gens: GeneratorSet) -> float:
    """RK4 step with ``dt * ||Gamma~||_2 <= 0.1``, capped at 0.05."""
    return min(0.05, 0.1 / max(np.linalg.norm(gens.gamma_tilde, 2), 1e-12))


def run_evolve(p: ScenarioPreset, times, V0=None, dt: float | None = None):
    """Sample occupations, energy and total current on a time grid.

    Closed forms are used where they apply; otherwise RK4.  Returns
    ``(times, occupations[t, site], energy[t], current[t], provenance)``.
    """
    gens = p.generators
    times = np.asarray(sorted(set(float(t) for t in times)))
    if times.size == 0 or times[0] < 0:
        raise ValueError("need a non-empty, non-negative time grid")
    V0 = vacuum_cm(p.spec.n, p.spec.hbar) if V0 is None else np.asarray(V0, dtype=float)
    spec, bank = p.spec, p.bank
    closed = spec.topology == "rwa" and not bank.has_dephasing
    if closed and bank.uniform_zeta is not None and bank.uniform_zeta > 0:
        covs = [evolve_cm_closed(V0, spec, bank, t) for t in times]
        how = "closed-form"
    elif closed and not np.any(bank.zetas > 0):
        covs = [evolve_all_diffusive(V0, spec, bank, t) for t in times]
        how = "closed-form (diffusive only)"
    else:
        traj = evolve_ode(V0, None, gens, times[-1], dt or default_dt(gens), sample_times=times)
        keep = np.isin(traj.times, times)
        covs = [s.cov for s, k in zip(traj.states, keep) if k]
        how = traj.provenance
    ham = gens.hamiltonian
    occ = np.array([occupations(V, spec.hbar) for V in covs])
    energy = np.array([mean_energy(ham.H, ham.xi, ham.H0, V, None) for V in covs])
    current = np.array([total_current(gens, V).total for V in covs])
    return times, occ, energy, current, how


# sweeps and studies -------------------------------------------------------

def fourier_crossover_scan(ns, gamma: float = 0.5, *, zeta: float = 0.1, N1: float = 100.0,
                           Nn: float = 50.0, Omega: float = 0.5, omega: float = 1.0,
                           hbar: float = 1.0, endpoint_tol: float = 1e-8) -> SweepResult:
    """End current as dephasing is switched on at the first k sites, k = 0..n.

    Rows are ``(n, k, J1)``.  The k = 0 and k = n rows are checked against the
    closed forms; a mismatch above ``endpoint_tol`` raises ``SolverError``.
    """
    rows = []
    worst = 0.0
    monotone = True
    for n in ns:
        n = int(n)
        spec = ChainSpec(n, omega, Omega, "rwa", hbar)
        prev = np.inf
        for k in range(n + 1):
            gam = np.zeros(n)
            gam[:k] = gamma
            zetas = np.zeros(n)
            zetas[[0, -1]] = zeta
            nbars = np.zeros(n)
            nbars[[0, -1]] = (N1, Nn)
            bank = ReservoirBank.uniform(n, zetas, nbars, gamma=gam)
            try:
                gens = build_generators(spec, bank)
                st = solve_steady(gens)
            except Exception as exc:
                raise SolverError(f"scan point n={n}, k={k}: {exc}") from exc
            J1 = total_current(gens, st.V_star).per_reservoir["thermal:1"]
            rows.append((n, k, J1))
            if k in (0, n):
                ref = (case3_closed_forms(N1, Nn, zeta, Omega, omega, n, hbar) if k == 0 else
                       case4_closed_forms(N1, Nn, zeta, gamma, Omega, omega, n, hbar))[1][0]
                err = abs(J1 - ref) / abs(ref) if ref else abs(J1)
                worst = max(worst, err)
                if err > endpoint_tol:
                    raise SolverError(f"scan endpoint n={n}, k={k}: relative error {err:.2e}")
            monotone = monotone and J1 <= prev * (1 + 1e-12)
            prev = J1
    return SweepResult(columns=("n", "k", "J1"), rows=np.array(rows, dtype=float),
                       metadata=dict(gamma=gamma, zeta=zeta, N1=N1, Nn=Nn, Omega=Omega, omega=omega,
                                     hbar=hbar, endpoint_max_rel_error=worst, monotone_in_k=monotone))


def size_scan(name: str, ns, **overrides) -> SweepResult:
    """Steady end currents and summed thermal current of a preset over chain sizes."""
    rows = []
    for n in ns:
        rep = run_steady(preset(name, n=int(n), **overrides))
        rows.append((int(n), rep.end_current("1"), rep.end_current("n"),
                     float(rep.currents.thermal(int(n)).sum()), rep.currents.total))
    return SweepResult(columns=("n", "J1", "Jn", "sum_thermal", "total"),
                       rows=np.array(rows, dtype=float), metadata=dict(preset=name, **overrides))


def disorder_study(seed: int, n: int = 25, bank: ReservoirBank | None = None) -> TransportReport:
    """Steady transport through a chain with couplings drawn uniformly from (0, 1]."""
    p = preset("caseV", n=n, seed=seed)
    if bank is not None:
        p = replace(p, bank=bank)
    return run_steady(p)


@dataclass(frozen=True)
class SpectrumCheck:
    imaginary_parts: np.ndarray
    predicted: np.ndarray
    max_frequency_error: float
    max_damping_error: float


def smc_spectrum_check(spec: ChainSpec, bank: ReservoirBank) -> SpectrumCheck:
    """Compare drift eigenvalues with ``-zeta/2 +- i nu'_m`` (uniform zeta)."""
    zeta = bank.uniform_zeta
    if spec.topology != "smc" or zeta is None:
        raise ValueError("needs an SMC chain with uniform damping")
    ev = stability_check(build_generators(spec, bank).Gamma).eigenvalues
    im = np.sort(ev.imag[ev.imag > 0])
    nu = np.sort(smc_mode_frequencies(spec.n, spec.omega, spec.coupling))
    if im.size != nu.size:
        raise SolverError("eigenvalues do not come in conjugate pairs")
    return SpectrumCheck(imaginary_parts=im, predicted=nu,
                         max_frequency_error=float(np.abs(im - nu).max()),
                         max_damping_error=float(np.abs(ev.real + 0.5 * zeta).max()))


def smc_study(n: int = 25, kappa: float = 0.5, bank: ReservoirBank | None = None):
    """Steady transport for spring-mass coupling plus the mode-frequency cross-check."""
    p = preset("caseVI", n=n, kappa=kappa)
    if bank is not None:
        p = replace(p, bank=bank)
    return run_steady(p), smc_spectrum_check(p.spec, p.bank)
