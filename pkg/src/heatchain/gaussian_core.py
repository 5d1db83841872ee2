"""Phase-space conventions and dense linear-algebra helpers.

Quadratures are ordered ``x = (q_1, ..., q_n, p_1, ..., p_n)``.  Site labels
exposed to users are 1-based; array indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhaseSpaceLayout:
    """Index bookkeeping for ``n`` oscillators with action scale ``hbar``."""

    n: int
    hbar: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (np.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar!r}")

    @property
    def dim(self) -> int:
        return 2 * self.n

    def q_index(self, k: int) -> int:
        """Array index of ``q_k`` for the 1-based site label ``k``."""
        self._check_site(k)
        return k - 1

    def p_index(self, k: int) -> int:
        """Array index of ``p_k`` for the 1-based site label ``k``."""
        self._check_site(k)
        return k - 1 + self.n

    def _check_site(self, k: int) -> None:
        if not 1 <= k <= self.n:
            raise ValueError(f"site {k} outside 1..{self.n}")

    @property
    def J(self) -> np.ndarray:
        return symplectic_form(self.n)


@dataclass(frozen=True)
class SpectralPair:
    """Mode frequencies (ordered by mode label m = 1..n) and the matrix diagonalizing the block."""

    frequencies: np.ndarray
    O: np.ndarray


def symplectic_form(n: int) -> np.ndarray:
    """Return ``J = [[0, I], [-I, 0]]`` of size ``2n``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def sine_transform(n: int) -> np.ndarray:
    """Discrete sine transform ``O_kl = sqrt(2/(n+1)) sin(k l pi/(n+1))``.

    The matrix is symmetric and its own inverse.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    k = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(k, k) * np.pi / (n + 1))


def toeplitz_mode_frequencies(n: int, omega: float, Omega: float) -> np.ndarray:
    """Eigenvalues ``omega + 2 Omega cos(m pi/(n+1))`` indexed by mode label m = 1..n."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    m = np.arange(1, n + 1)
    return omega + 2.0 * Omega * np.cos(m * np.pi / (n + 1))


def uniform_chain_spectrum(n: int, omega: float, Omega: float) -> SpectralPair:
    return SpectralPair(
        frequencies=_frozen(toeplitz_mode_frequencies(n, omega, Omega)),
        O=_frozen(sine_transform(n)),
    )


def tridiagonal_block(n: int, omega: float, bonds) -> np.ndarray:
    """Symmetric tridiagonal matrix with ``omega`` on the diagonal and ``bonds`` off it."""
    bonds = np.broadcast_to(np.asarray(bonds, dtype=float), (n - 1,))
    return omega * np.eye(n) + np.diag(bonds, 1) + np.diag(bonds, -1)


def matrix_exp(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring (Pade, via scipy)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or not np.isfinite(t):
        raise ValueError("matrix_exp input must be finite")
    return sla.expm(A * t)


def hadamard(A, B) -> np.ndarray:
    """Elementwise product of two equally shaped matrices."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return A * B


def direct_sum(A, B) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    out = np.zeros((A.shape[0] + B.shape[0], A.shape[1] + B.shape[1]), dtype=np.result_type(A, B))
    out[: A.shape[0], : A.shape[1]] = A
    out[A.shape[0]:, A.shape[1]:] = B
    return out


def physicality_margin(V, hbar: float = 1.0) -> float:
    """Minimum eigenvalue of ``V + i (hbar/2) J``; non-negative for a physical state."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0] // 2
    M = V + 0.5j * hbar * symplectic_form(n)
    return float(np.linalg.eigvalsh(M).min())


def vacuum_cm(n: int, hbar: float = 1.0) -> np.ndarray:
    return 0.5 * hbar * np.eye(2 * n)


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of a Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError(f"covariance must be 2n x 2n, got {cov.shape}")
        if mean.shape != (cov.shape[0],):
            raise ValueError(f"mean shape {mean.shape} incompatible with covariance {cov.shape}")
        object.__setattr__(self, "cov", _frozen(cov))
        object.__setattr__(self, "mean", _frozen(mean))

    @property
    def n(self) -> int:
        return self.cov.shape[0] // 2

    def is_physical(self, tol: float = 1e-8) -> bool:
        scale = max(1.0, float(np.abs(self.cov).max()))
        symmetric = np.abs(self.cov - self.cov.T).max() <= tol * scale
        return bool(symmetric and physicality_margin(self.cov, self.hbar) >= -tol * scale)
