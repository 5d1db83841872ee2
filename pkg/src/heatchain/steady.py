"""Stability analysis and steady-state covariance solvers.

Three independent routes to the stationary covariance matrix are provided:

* :func:`solve_lyapunov_spectral` diagonalizes the drift and divides by
  eigenvalue sums (fast, the default path);
* :func:`solve_lyapunov_vectorized` flattens the (dephasing-extended)
  Lyapunov equation into a dense linear system (small chains only);
* :func:`closed_form_vstar` evaluates the sine-transform / Hadamard-product
  formula for RWA chains with uniform thermal damping.

Stability uses the decay convention: a steady state exists when every drift
eigenvalue has a strictly negative real part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .gaussian_core import _frozen, hadamard, physicality_margin, sine_transform, symplectic_form, \
    toeplitz_mode_frequencies, tridiagonal_block
from .model import ChainSpec, GeneratorSet, ReservoirBank, build_generators

RESIDUAL_TOL = 1e-10
PHYSICALITY_TOL = 1e-10
NEAR_DEFECTIVE_TOL = 1e-12
MAX_VECTORIZED_N = 30


class SolverError(RuntimeError):
    """A solver could not produce a steady state within its accuracy contract."""


class NearDefectiveError(SolverError):
    pass


class NoSteadyStateError(RuntimeError):
    """The dynamics has no (unique) steady state."""


@dataclass(frozen=True)
class StabilityReport:
    eigenvalues: np.ndarray
    stable: bool
    spectral_gap: float


@dataclass(frozen=True)
class SteadyState:
    V_star: np.ndarray
    x_star: np.ndarray
    residual: float
    solver: str = ""
    hbar: float = 1.0
    d_norm: float = field(default=float("nan"), compare=False)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.d_norm if self.d_norm > 0 else self.residual

    @property
    def physicality_margin(self) -> float:
        return physicality_margin(self.V_star, self.hbar)


def stability_check(Gamma) -> StabilityReport:
    Gamma = np.asarray(Gamma, dtype=float)
    if not np.all(np.isfinite(Gamma)):
        raise ValueError("drift matrix must be finite")
    ev = np.linalg.eigvals(Gamma)
    # eigenvalues on the imaginary axis come out as +-eps; count those as marginal
    threshold = NEAR_DEFECTIVE_TOL * max(1.0, np.linalg.norm(Gamma, 2))
    gap = float(-ev.real.max())
    return StabilityReport(eigenvalues=ev, stable=bool(gap > threshold), spectral_gap=gap)


def lyapunov_residual(Gamma, V, D, extra=None) -> float:
    R = Gamma @ V + V @ Gamma.T + D
    if extra is not None:
        R = R + extra
    return float(np.linalg.norm(R))


def _finish(V, Gamma, D, solver, hbar, extra_fn=None) -> SteadyState:
    V = 0.5 * (V + V.T)
    extra = extra_fn(V) if extra_fn is not None else None
    res = lyapunov_residual(Gamma, V, D, extra)
    return SteadyState(V_star=_frozen(V), x_star=_frozen(np.zeros(V.shape[0])), residual=res,
                       solver=solver, hbar=hbar, d_norm=float(np.linalg.norm(D)))


class _SpectralLyapunov:
    """Eigendecomposition of a stable drift, reused for repeated solves of
    ``G V + V G^T + Y = 0``."""

    def __init__(self, Gamma):
        Gamma = np.asarray(Gamma, dtype=float)
        rep = stability_check(Gamma)
        if not rep.stable:
            raise NoSteadyStateError(f"drift is not stable (spectral gap {rep.spectral_gap:.3e})")
        lam, S = np.linalg.eig(Gamma)
        sums = lam[:, None] + lam[None, :]
        if np.abs(sums).min() < NEAR_DEFECTIVE_TOL * np.linalg.norm(Gamma, 2):
            raise NearDefectiveError("eigenvalue pair sums to ~0")
        cond = np.linalg.cond(S)
        if not np.isfinite(cond) or cond > 1e10:
            raise NearDefectiveError(f"eigenvector matrix ill-conditioned (cond {cond:.2e})")
        self.lam = lam
        self.S = S
        self.Sinv = np.linalg.inv(S)
        self.denominator = -sums

    def solve(self, Y) -> np.ndarray:
        Yt = self.Sinv @ Y @ self.Sinv.T
        return (self.S @ (Yt / self.denominator) @ self.S.T).real


def solve_lyapunov_spectral(Gamma, D, *, hbar: float = 1.0) -> SteadyState:
    """Steady state of ``G V + V G^T + D = 0`` by diagonalizing ``G``.

    With ``G = S diag(l) S^-1`` the solution is ``V = S W S^T`` where
    ``W_jk = -(S^-1 D S^-T)_jk / (l_j + l_k)``.

    Raises
    ------
    NoSteadyStateError
        If ``G`` is not stable.
    NearDefectiveError
        If two eigenvalues nearly cancel or the eigenbasis is ill-conditioned;
        callers should fall back to another solver.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    D = np.asarray(D, dtype=float)
    V = _SpectralLyapunov(Gamma).solve(D)
    return _finish(V, Gamma, D, "spectral", hbar)


def _extended_drift(Gamma, deltas, hbar):
    n = Gamma.shape[0] // 2
    J = symplectic_form(n)
    Gt = np.array(Gamma, dtype=float)
    As = []
    for Dm in deltas:
        A = J @ np.asarray(Dm, dtype=float)
        Gt += 0.5 * hbar * A @ A
        As.append(A)
    return Gt, As


def solve_lyapunov_vectorized(Gamma, D, deltas=(), *, hbar: float = 1.0,
                              max_n: int = MAX_VECTORIZED_N) -> SteadyState:
    """Solve the dephasing-extended stationary equation as one dense linear system.

    The unknown ``V`` is flattened column-major, so ``A V B`` becomes
    ``kron(B^T, A) vec(V)``.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    D = np.asarray(D, dtype=float)
    dim = Gamma.shape[0]
    if dim // 2 > max_n:
        raise SolverError(f"vectorized solver limited to n <= {max_n} (got n={dim // 2})")
    Gt, As = _extended_drift(Gamma, deltas, hbar)
    eye = np.eye(dim)
    L = np.kron(eye, Gt) + np.kron(Gt, eye)
    for A in As:
        L += hbar * np.kron(A, A)
    if As:
        ev = np.linalg.eigvals(L)
    else:
        ev = stability_check(Gamma).eigenvalues
    if ev.real.max() >= -NEAR_DEFECTIVE_TOL * max(1.0, np.linalg.norm(Gt, 2)):
        raise NoSteadyStateError("moment dynamics is not stable; no steady state")
    try:
        v = np.linalg.solve(L, -D.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise NoSteadyStateError("singular Lyapunov operator") from exc
    V = v.reshape(dim, dim, order="F")
    extra = (lambda X: hbar * sum(A @ X @ A.T for A in As)) if As else None
    return _finish(V, Gt, D, "vectorized", hbar, extra)


def solve_lyapunov_krylov(Gamma, D, deltas=(), *, hbar: float = 1.0,
                          rtol: float = 1e-14, maxiter: int = 500) -> SteadyState:
    """Dephasing-extended steady state for chains too long for the dense system.

    Uses GMRES on ``(I - P) V = P0`` where ``P0`` solves the plain Lyapunov
    equation with ``D`` and ``P`` maps ``V`` to the Lyapunov solution driven by
    the dephasing diffusion of ``V``; both solves reuse one eigendecomposition.
    """
    Gamma = np.asarray(Gamma, dtype=float)
    D = np.asarray(D, dtype=float)
    dim = Gamma.shape[0]
    Gt, As = _extended_drift(Gamma, deltas, hbar)
    lyap = _SpectralLyapunov(Gt)

    def dephase(X):
        return hbar * sum((A @ X @ A.T for A in As), np.zeros_like(X))

    def matvec(v):
        X = v.reshape(dim, dim)
        return (X - lyap.solve(dephase(X))).ravel()

    op = LinearOperator((dim * dim, dim * dim), matvec=matvec, dtype=float)
    rhs = lyap.solve(D)
    v, info = gmres(op, rhs.ravel(), x0=rhs.ravel(), rtol=rtol, atol=0.0,
                    restart=min(200, dim * dim), maxiter=maxiter)
    if info != 0:
        raise SolverError(f"GMRES did not converge (info={info})")
    V = v.reshape(dim, dim)
    out = _finish(V, Gt, D, "krylov", hbar, dephase if As else None)
    if out.relative_residual > RESIDUAL_TOL:
        raise SolverError(f"krylov residual {out.relative_residual:.2e} above contract")
    return out


def solve_lyapunov_schur(Gamma, D, *, hbar: float = 1.0) -> SteadyState:
    """Bartels-Stewart fallback for drifts with an ill-conditioned eigenbasis."""
    Gamma = np.asarray(Gamma, dtype=float)
    D = np.asarray(D, dtype=float)
    if not stability_check(Gamma).stable:
        raise NoSteadyStateError("drift is not stable")
    V = sla.solve_continuous_lyapunov(Gamma, -D)
    return _finish(V, Gamma, D, "schur", hbar)


def lstar_matrix(nu, zeta: float) -> np.ndarray:
    """Long-time kernel ``1/(zeta + i(nu_j - nu_k))``."""
    nu = np.asarray(nu, dtype=float)
    return 1.0 / (zeta + 1j * (nu[:, None] - nu[None, :]))


def rwa_eigensystem(spec: ChainSpec):
    """Mode frequencies and the orthogonal matrix ``O`` with ``O^T H_blk O = diag(nu)``.

    Uniform chains use the sine transform; disordered chains are diagonalized
    numerically.
    """
    if spec.topology != "rwa":
        raise ValueError("RWA chains only")
    if spec.is_uniform_rwa:
        return toeplitz_mode_frequencies(spec.n, spec.omega, spec.coupling), sine_transform(spec.n)
    return np.linalg.eigh(tridiagonal_block(spec.n, spec.omega, spec.bonds))


def hadamard_block_cm(O, kernel, excess_diag) -> np.ndarray:
    """``[[Re I, -Im I], [Im I, Re I]]`` with ``I = O[(O^T Dblk O) o kernel]O^T``."""
    Dt = O.T @ (np.asarray(excess_diag)[:, None] * O)
    I = O @ hadamard(Dt, kernel) @ O.T
    return np.block([[I.real, -I.imag], [I.imag, I.real]])


def closed_form_vstar(spec: ChainSpec, bank: ReservoirBank) -> SteadyState:
    """Steady state of an RWA chain with uniform thermal damping, via the
    sine transform and Hadamard products (no linear solve)."""
    zeta = bank.uniform_zeta
    if spec.topology != "rwa":
        raise ValueError("closed form applies to RWA chains only")
    if zeta is None or zeta <= 0:
        raise ValueError("closed form needs uniform thermal damping zeta_k = zeta > 0")
    if bank.has_dephasing:
        raise ValueError("closed form does not cover dephasing")
    hbar = spec.hbar
    nu, O = rwa_eigensystem(spec)
    V = 0.5 * hbar * np.eye(2 * spec.n) + hadamard_block_cm(O, lstar_matrix(nu, zeta),
                                                             bank.excess_diffusion(hbar))
    gens = build_generators(spec, bank)
    return _finish(V, gens.Gamma, gens.D, "closed-form", hbar)


def steady_mean(Gamma, xi, eta) -> np.ndarray:
    Gamma = np.asarray(Gamma, dtype=float)
    rhs = np.asarray(xi, dtype=float) - np.asarray(eta, dtype=float)
    if not np.any(rhs):
        return np.zeros(Gamma.shape[0])
    try:
        return -np.linalg.solve(Gamma, rhs)
    except np.linalg.LinAlgError as exc:
        raise NoSteadyStateError("singular drift: steady mean undefined") from exc


def solve_steady(gens: GeneratorSet, method: str = "auto") -> SteadyState:
    """Steady state of a generator set, choosing a solver.

    ``auto`` uses the spectral route without dephasing (falling back to the
    vectorized or Schur solvers if the drift is near-defective) and the
    vectorized (n <= 12) or Krylov route with dephasing.
    """
    hbar = gens.hbar
    deltas = [q.Delta for q in gens.quadratic]
    if method == "auto":
        if deltas:
            method = "vectorized" if gens.n <= 12 else "krylov"
        else:
            method = "spectral"
    if method == "spectral":
        if deltas:
            raise ValueError("spectral solver does not handle dephasing")
        try:
            st = solve_lyapunov_spectral(gens.Gamma, gens.D, hbar=hbar)
            if st.relative_residual > RESIDUAL_TOL:
                raise NearDefectiveError(f"spectral residual {st.relative_residual:.2e}")
        except NearDefectiveError:
            if gens.n <= 12:
                st = solve_lyapunov_vectorized(gens.Gamma, gens.D, hbar=hbar)
            else:
                st = solve_lyapunov_schur(gens.Gamma, gens.D, hbar=hbar)
    elif method == "vectorized":
        st = solve_lyapunov_vectorized(gens.Gamma, gens.D, deltas, hbar=hbar)
    elif method == "krylov":
        st = solve_lyapunov_krylov(gens.Gamma, gens.D, deltas, hbar=hbar)
    elif method == "schur":
        if deltas:
            raise ValueError("Schur solver does not handle dephasing")
        st = solve_lyapunov_schur(gens.Gamma, gens.D, hbar=hbar)
    else:
        raise ValueError(f"unknown method {method!r}")
    x_star = steady_mean(gens.gamma_tilde, gens.hamiltonian.xi, gens.eta)
    return SteadyState(V_star=st.V_star, x_star=_frozen(x_star), residual=st.residual,
                       solver=st.solver, hbar=hbar, d_norm=st.d_norm)


@dataclass(frozen=True)
class CheckerboardReport:
    ok: bool
    max_violation: float
    tolerance: float
    violations: tuple = ()
    nearest_neighbour_max: float = 0.0


def checkerboard_validate(V_star, n: int | None = None, tol: float = 1e-10) -> CheckerboardReport:
    """Parity structure of a uniform-chain steady state.

    q-q and p-p entries with odd ``j + k`` and q-p entries with even ``j + k``
    must vanish (so in particular ``V_{j,j+1} = 0``).  Violations are returned
    as ``(block, j, k)`` with 1-based site labels.
    """
    V = np.asarray(V_star, dtype=float)
    n = V.shape[0] // 2 if n is None else n
    scale = float(np.abs(V).max())
    bound = tol * scale
    j, k = np.indices((n, n))
    odd = (j + k) % 2 == 1
    blocks = {
        "qq": (V[:n, :n], odd),
        "pp": (V[n:, n:], odd),
        "qp": (V[:n, n:], ~odd),
        "pq": (V[n:, :n], ~odd),
    }
    violations = []
    worst = 0.0
    for name, (B, mask) in blocks.items():
        vals = np.abs(np.where(mask, B, 0.0))
        worst = max(worst, float(vals.max()))
        for a, b in zip(*np.nonzero(vals > bound)):
            violations.append((name, int(a) + 1, int(b) + 1))
    nn = float(np.abs(np.diag(V[:n, :n], 1)).max()) if n > 1 else 0.0
    return CheckerboardReport(ok=not violations, max_violation=worst, tolerance=bound,
                              violations=tuple(violations), nearest_neighbour_max=nn)
