"""Floquet-Markov master equation for an ohmic bath.

In the Floquet basis the weak-coupling master equation for the reduced
density matrix has a time-independent generator,

    d rho_ab / dt = -i (eps_a - eps_b) rho_ab + sum_cd L_{ab,cd} rho_cd,

whose dissipative kernel L is assembled from the harmonic components of the
position matrix elements X_{ab,k} and the bath correlation N(eps) = gamma *
eps * n_th(eps), evaluated at all quasienergy differences shifted by integer
multiples of the driving frequency.  The kernel keeps the coherences (no
full secular approximation), so positivity is monitored rather than
guaranteed; trace preservation and Hermiticity preservation are exact
identities of the construction and are verified numerically.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .doublewell import build_position
from .floquet import FloquetSolution, FloquetError


class KernelError(RuntimeError):
    """Raised when the dissipative kernel cannot be built or is inconsistent."""


class SteadyStateError(RuntimeError):
    """Raised when the asymptotic state is degenerate or fails validation."""


@dataclass(frozen=True)
class BathParams:
    """Ohmic bath: coupling gamma (units omega_0), temperature k_B T
    (units hbar*omega_0), n_f retained Floquet states, harmonic cutoff K."""

    gamma: float = 1e-6
    temperature: float = 1e-4
    n_f: int = 10
    K: int = 32

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"bath coupling gamma must be > 0, got {self.gamma}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.n_f < 3:
            raise ValueError(f"need n_f >= 3 retained states, got {self.n_f}")


def bath_coefficient(eps, bath: BathParams):
    """N(eps) = gamma * eps / (exp(eps/k_B T) - 1).

    Total function: the removable singularity at eps = 0 takes its limit
    gamma * k_B T, and T = 0 is the analytic limit (gamma*|eps| for eps < 0,
    zero for eps > 0).  Detailed balance N(-eps) = N(eps) e^{eps/k_B T} holds
    identically.
    """
    eps = np.asarray(eps, dtype=float)
    g = bath.gamma
    kt = bath.temperature
    if kt == 0.0:
        return np.where(eps < 0.0, -g * eps, 0.0)
    ratio = eps / kt
    out = np.full(eps.shape, g * kt)  # eps -> 0 limit
    nonzero = np.abs(ratio) > 1e-12
    r = ratio[nonzero]
    e = eps[nonzero]
    vals = np.empty_like(e)
    hot = r > 500.0  # expm1 overflow guard; exp(-r) underflows harmlessly
    vals[hot] = g * e[hot] * np.exp(-r[hot])
    vals[~hot] = g * e[~hot] / np.expm1(r[~hot])
    out[nonzero] = vals
    return out if out.ndim else float(out)


def position_fourier_elements(solution: FloquetSolution, n_f: int, K: int):
    """Harmonic components of the position matrix in the retained Floquet basis.

    X[a, b, K+k] = (1/M) sum_j e^{-i k Omega t_j} <phi_a(t_j)|x|phi_b(t_j)>
    for the n_f lowest-mean-energy states and |k| <= K.  The symmetry
    X_{ab,k} = conj(X_{ba,-k}) is exact for Hermitian x; it is symmetrized
    against roundoff and asserted.

    Returns (X, retained) with retained the selected state indices.
    """
    if solution.modes is None:
        raise FloquetError("time-sampled modes are required for X coefficients")
    if solution.M < 2 * K + 2:
        raise ValueError(f"K={K} aliases with M={solution.M}; need M >= {2 * K + 2}")
    retained = solution.lowest_mean_energy_states(n_f)
    modes = solution.modes[retained]  # (n_f, M, N)
    x = build_position(solution.params.N, solution.params.sigma)
    # f[j, a, b] = <phi_a(t_j)|x|phi_b(t_j)>
    xm = np.einsum("nm,bjm->bjn", x, modes)
    f = np.einsum("ajn,bjn->jab", modes.conj(), xm)
    comp = np.fft.fft(f, axis=0) / solution.M  # index k holds e^{-2 pi i jk/M} sum
    ks = np.arange(-K, K + 1)
    big_x = np.ascontiguousarray(np.moveaxis(comp[ks % solution.M], 0, -1))
    mirrored = np.conj(np.swapaxes(big_x, 0, 1))[:, :, ::-1]
    defect = np.max(np.abs(big_x - mirrored))
    big_x = 0.5 * (big_x + mirrored)
    if not defect < 1e-10:
        raise KernelError(f"X symmetry defect {defect:.3e}; modes are inconsistent")
    return big_x, retained


@dataclass
class DissipativeKernel:
    """Dissipative kernel plus the coherent quasienergy differences.

    ``kernel[a, b, c, d]`` multiplies rho_cd in the equation for rho_ab; the
    full generator adds -i(eps_a - eps_b) on the diagonal.  Vectorization is
    row-major: rho_ab sits at index a*n + b.
    """

    kernel: np.ndarray
    eps: np.ndarray
    omega: float
    bath: BathParams
    retained: np.ndarray

    @property
    def n_states(self) -> int:
        return self.eps.size

    def generator(self) -> np.ndarray:
        n = self.n_states
        gen = self.kernel.reshape(n * n, n * n).astype(complex).copy()
        coherent = -1j * (self.eps[:, None] - self.eps[None, :]).ravel()
        gen[np.diag_indices(n * n)] += coherent
        return gen

    def fastest_rate(self) -> float:
        return float(np.max(np.abs(self.kernel)))

    def fastest_coherence(self) -> float:
        return float(np.max(np.abs(self.eps[:, None] - self.eps[None, :])))

    def suggested_dt(self) -> float:
        """Largest step resolving both coherent phases and dissipative rates."""
        bounds = [0.25 / max(self.fastest_coherence(), 1e-300),
                  0.1 / max(self.fastest_rate(), 1e-300)]
        return 0.9 * min(bounds)


def build_kernel(big_x: np.ndarray, eps: np.ndarray, bath: BathParams,
                 omega: float, retained=None) -> DissipativeKernel:
    """Assemble the dissipative kernel from X coefficients and quasienergies.

    Implements the three sums

        L_{ab,cd} = sum_k (N_{ac,k} + N_{bd,k}) X_{ac,k} X_{db,-k}
                  - delta_{bd} sum_{e,k} N_{ec,k} X_{ae,-k} X_{ec,k}
                  - delta_{ac} sum_{e,k} N_{ed,k} X_{de,-k} X_{eb,k}

    with N_{ab,k} = N(eps_a - eps_b + k Omega).  Trace preservation (the
    column sums of the population part cancel exactly) is checked on
    construction.
    """
    n = eps.size
    if big_x.shape[0] != n or big_x.shape[1] != n:
        raise KernelError(
            f"X tensor covers {big_x.shape[:2]} states, quasienergies have {n}"
        )
    n_k = big_x.shape[2]
    if n_k % 2 != 1:
        raise KernelError(f"X tensor needs an odd harmonic count, got {n_k}")
    big_k = n_k // 2
    ks = np.arange(-big_k, big_k + 1)
    diffs = eps[:, None, None] - eps[None, :, None] + ks[None, None, :] * omega
    nmat = bath_coefficient(diffs, bath)  # (n, n, n_k)
    x_rev = big_x[:, :, ::-1]  # X_{ab,-k} at index K+k

    nx = nmat * big_x
    term1 = np.einsum("ack,dbk->abcd", nx, x_rev)
    term1 += np.einsum("ack,bdk,dbk->abcd", big_x, nmat, x_rev)
    sink_left = np.einsum("aek,eck->ac", x_rev, nx)
    sink_right = np.einsum("dek,ebk->db", x_rev * np.swapaxes(nmat, 0, 1), big_x)
    eye = np.eye(n)
    kernel = term1
    kernel -= np.einsum("ac,bd->abcd", sink_left, eye)
    kernel -= np.einsum("db,ac->abcd", sink_right, eye)

    trace_defect = np.max(np.abs(np.einsum("aacd->cd", kernel)))
    if not trace_defect < 1e-10:
        raise KernelError(f"kernel does not preserve the trace: {trace_defect:.3e}")
    return DissipativeKernel(
        kernel=kernel, eps=np.asarray(eps, dtype=float), omega=omega, bath=bath,
        retained=(np.arange(n) if retained is None else np.asarray(retained)),
    )


def kernel_for_solution(solution: FloquetSolution, bath: BathParams) -> DissipativeKernel:
    """Convenience: X coefficients + kernel for the retained states."""
    big_x, retained = position_fourier_elements(solution, bath.n_f, bath.K)
    return build_kernel(
        big_x, solution.eps[retained], bath, solution.params.omega, retained
    )


def validate_density_matrix(rho: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if not herm < tol:
        raise ValueError(f"density matrix not Hermitian, defect {herm:.3e}")
    tr = np.trace(rho).real
    if not abs(tr - 1.0) < tol:
        raise ValueError(f"density matrix trace {tr} != 1")
    return rho


def _rk4_step_matrix(gen: np.ndarray, dt: float) -> np.ndarray:
    """One classic RK4 step of the linear system as a matrix polynomial.

    For x' = G x the RK4 update is exactly x -> (1 + A + A^2/2 + A^3/6 +
    A^4/24) x with A = G dt, so long stretches can be taken as matrix powers
    without changing the arithmetic of stepping.
    """
    a = gen * dt
    n = gen.shape[0]
    step = np.eye(n, dtype=complex) + a
    a_pow = a @ a
    step += a_pow / 2.0
    a_pow = a_pow @ a
    step += a_pow / 6.0
    a_pow = a_pow @ a
    step += a_pow / 24.0
    return step


@dataclass
class MasterTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_samples, n, n)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def integrate_master_equation(kernel: DissipativeKernel, rho0: np.ndarray,
                              t_end: float, dt: float | None = None,
                              sample_stride: int | None = None) -> MasterTrajectory:
    """Propagate rho with classic 4th-order steps of the linear generator.

    Samples are stored every ``sample_stride`` steps (the first sample is
    rho0 at t=0, the last lands at or just past t_end).  Steps larger than
    the coherent or dissipative resolution limits are refused, with a
    workable dt in the message.
    """
    rho0 = validate_density_matrix(rho0)
    n = kernel.n_states
    if rho0.shape[0] != n:
        raise ValueError(f"rho has dimension {rho0.shape[0]}, kernel has {n}")
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    suggested = kernel.suggested_dt()
    if dt is None:
        dt = suggested
    if dt * kernel.fastest_rate() >= 0.1 or dt * kernel.fastest_coherence() >= 0.25:
        raise ValueError(
            f"dt={dt:.3e} does not resolve the fastest coherence "
            f"({kernel.fastest_coherence():.3e}) or rate "
            f"({kernel.fastest_rate():.3e}); use dt <= {suggested:.3e}"
        )
    steps = max(int(np.ceil(t_end / dt)), 1)
    if sample_stride is None:
        sample_stride = max(steps // 256, 1)
    gen = kernel.generator()
    step = _rk4_step_matrix(gen, dt)
    hop = np.linalg.matrix_power(step, sample_stride)
    n_samples = steps // sample_stride + 1
    times = np.arange(n_samples) * (sample_stride * dt)
    states = np.empty((n_samples, n, n), dtype=complex)
    v = rho0.reshape(-1).astype(complex)
    states[0] = rho0
    for i in range(1, n_samples):
        v = hop @ v
        states[i] = v.reshape(n, n)
    return MasterTrajectory(times=times, states=states)


def _long_time_state(kernel: DissipativeKernel, tol: float = 1e-9,
                     max_doublings: int = 60) -> np.ndarray:
    """Relax the maximally mixed state by repeated horizon doubling.

    Each iterate is renormalized to unit trace: the zero mode of the
    generator carries a roundoff-level real part that would otherwise
    amplify exponentially over the ~2^60-step horizons reached here.
    """
    n = kernel.n_states
    gen = kernel.generator()
    dt = kernel.suggested_dt()
    hop = _rk4_step_matrix(gen, dt)
    mixed = (np.eye(n, dtype=complex) / n).reshape(-1)
    trace_idx = np.arange(n) * n + np.arange(n)
    prev = mixed
    for _ in range(max_doublings):
        hop = hop @ hop
        v = hop @ mixed
        if not np.all(np.isfinite(v)):
            raise SteadyStateError(
                "long-time propagation diverged; the generator has a "
                "growing mode"
            )
        v = v / np.sum(v[trace_idx]).real
        if np.max(np.abs(v - prev)) < tol:
            prev = v
            break
        prev = v
    rho = prev.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def asymptotic_state(kernel: DissipativeKernel, cross_validate: bool = True,
                     null_space_rtol: float = 1e-12) -> np.ndarray:
    """Stationary density matrix: the null vector of the full generator.

    Found by singular-value analysis; a null space of dimension != 1 raises
    (the dimension is reported).  The result is Hermitized, normalized to
    unit trace, and optionally cross-validated against long-time propagation
    to within 1e-6 in max-entry norm.
    """
    n = kernel.n_states
    gen = kernel.generator()
    _, svals, vh = np.linalg.svd(gen)
    cutoff = null_space_rtol * svals[0]
    nullity = int(np.sum(svals < cutoff))
    if nullity != 1:
        raise SteadyStateError(
            f"generator null space has dimension {nullity}, expected 1 "
            f"(singular values tail: {svals[-max(nullity, 2):]})"
        )
    rho = vh[-1].conj().reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise SteadyStateError("null vector is traceless; no stationary state")
    rho = rho / tr
    if cross_validate:
        relaxed = _long_time_state(kernel)
        dist = np.max(np.abs(rho - relaxed))
        if not dist < 1e-6:
            raise SteadyStateError(
                f"null-space state disagrees with long-time propagation by {dist:.3e}"
            )
    # positivity is monitored, not enforced: the kernel keeps nonsecular
    # terms, so small negative weights are possible and worth flagging
    lowest = float(np.linalg.eigvalsh(rho).min())
    if lowest < -1e-6:
        warnings.warn(
            f"asymptotic state has negative weight {lowest:.3e}",
            stacklevel=2,
        )
    return rho


def golden_rule_rates(kernel: DissipativeKernel) -> np.ndarray:
    """Direct transition rates R[a, c] = L_{aa,cc} for a != c (zero diagonal)."""
    n = kernel.n_states
    rates = np.einsum("aacc->ac", kernel.kernel).real.copy()
    rates[np.diag_indices(n)] = 0.0
    return rates
