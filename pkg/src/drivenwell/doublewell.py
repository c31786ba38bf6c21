"""Operators of the driven quartic double well in a truncated oscillator basis.

Natural units hbar = m = omega_0 = 1 throughout: energies in hbar*omega_0,
times in 1/omega_0, lengths in the oscillator length of the basis.

The static Hamiltonian is

    H_DW = p^2/2 - x^2/4 + x^4/(64 D)

with barrier height D, well minima at x = +-sqrt(8 D), and a spatially
homogeneous drive S x cos(Omega t), S = F sqrt(8 D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters of the driven double well.

    D : barrier height (units hbar*omega_0)
    F : dimensionless driving strength
    omega : driving angular frequency (units omega_0)
    N : dimension of the truncated oscillator basis
    sigma : length scale of the expansion basis
    """

    D: float = 2.0
    F: float = 1e-3
    omega: float = 1.5
    N: int = 64
    sigma: float = 1.0

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"barrier height D must be positive, got {self.D}")
        if self.F < 0:
            raise ValueError(f"driving strength F must be >= 0, got {self.F}")
        if not self.omega > 0:
            raise ValueError(f"driving frequency must be positive, got {self.omega}")
        if self.N < 8:
            raise ValueError(f"basis dimension N must be >= 8, got {self.N}")
        if not self.sigma > 0:
            raise ValueError(f"basis scale sigma must be positive, got {self.sigma}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def well_position(self) -> float:
        """Classical minimum x_0 = sqrt(8 D)."""
        return np.sqrt(8.0 * self.D)


def build_position(N: int, sigma: float = 1.0) -> np.ndarray:
    """Position operator x: tridiagonal, x_{n,n+1} = sigma*sqrt((n+1)/2)."""
    if N < 2:
        raise ValueError(f"need N >= 2 basis states, got {N}")
    x = np.zeros((N, N))
    n = np.arange(N - 1)
    off = sigma * np.sqrt((n + 1) / 2.0)
    x[n, n + 1] = off
    x[n + 1, n] = off
    return x


def build_momentum(N: int, sigma: float = 1.0) -> np.ndarray:
    """Momentum operator p: anti-tridiagonal imaginary, p_{n,n+1} = i sqrt((n+1)/2)/sigma."""
    if N < 2:
        raise ValueError(f"need N >= 2 basis states, got {N}")
    p = np.zeros((N, N), dtype=complex)
    n = np.arange(N - 1)
    off = np.sqrt((n + 1) / 2.0) / sigma
    p[n, n + 1] = 1j * off
    p[n + 1, n] = -1j * off
    return p


def build_position_squared(N: int, sigma: float = 1.0) -> np.ndarray:
    """x^2 composed in the infinite basis, truncated to N (pentadiagonal)."""
    if N < 2:
        raise ValueError(f"need N >= 2 basis states, got {N}")
    a = np.zeros((N, N))
    n = np.arange(N)
    a[n, n] = sigma**2 * (2 * n + 1) / 2.0
    m = np.arange(N - 2)
    off = sigma**2 * np.sqrt((m + 1) * (m + 2)) / 2.0
    a[m, m + 2] = off
    a[m + 2, m] = off
    return a


def build_kinetic(N: int, sigma: float = 1.0) -> np.ndarray:
    """Kinetic energy p^2/2, composed in the infinite basis and truncated.

    Real pentadiagonal: diagonal (2n+1)/(4 sigma^2), second off-diagonal
    -sqrt((n+1)(n+2))/(4 sigma^2).
    """
    if N < 2:
        raise ValueError(f"need N >= 2 basis states, got {N}")
    t = np.zeros((N, N))
    n = np.arange(N)
    t[n, n] = (2 * n + 1) / (4.0 * sigma**2)
    m = np.arange(N - 2)
    off = -np.sqrt((m + 1) * (m + 2)) / (4.0 * sigma**2)
    t[m, m + 2] = off
    t[m + 2, m] = off
    return t


def build_static_hamiltonian(params: ModelParams) -> np.ndarray:
    """H_DW = p^2/2 - x^2/4 + x^4/(64 D) in the truncated basis.

    The quartic term is the square of the truncated x^2 matrix, which keeps
    it positive semidefinite and the spectrum bounded from below at any N.
    """
    x2 = build_position_squared(params.N, params.sigma)
    x4 = x2 @ x2
    return build_kinetic(params.N, params.sigma) - x2 / 4.0 + x4 / (64.0 * params.D)


def drive_amplitude(params: ModelParams) -> float:
    """Coefficient S = F*sqrt(8 D) of the drive term S x cos(Omega t)."""
    return params.F * np.sqrt(8.0 * params.D)


def hamiltonian_at(params: ModelParams, t: float) -> np.ndarray:
    """Full Hamiltonian H(t) = H_DW + S x cos(Omega t)."""
    h = build_static_hamiltonian(params)
    s = drive_amplitude(params)
    if s != 0.0:
        h = h + s * np.cos(params.omega * t) * build_position(params.N, params.sigma)
    return h


def parity_operator(N: int) -> np.ndarray:
    """Oscillator-basis parity, diag((-1)^n)."""
    if N < 1:
        raise ValueError(f"need N >= 1 basis states, got {N}")
    return np.diag((-1.0) ** np.arange(N))


def classical_potential(x, D: float):
    """V(x) = -x^2/4 + x^4/(64 D); barrier top V(0) = 0, wells V(+-x_0) = -D."""
    x = np.asarray(x, dtype=float)
    return -(x**2) / 4.0 + x**4 / (64.0 * D)
