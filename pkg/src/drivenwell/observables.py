"""Coherence metrics, localized states, state labeling, decoherence rate.

The localized right/left superpositions are built from the doublet modes at
t = 0; through an avoided crossing, where the odd partner hybridizes with
the resonant level, the doublet component is recovered by projecting the
static odd ground state onto the hybrid pair, which reduces to the plain
doublet state away from the crossing.  Occupation probabilities are always
evaluated against Floquet modes at equal time within the period, which in
the Floquet-coefficient representation makes them time-independent vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .doublewell import build_position, build_static_hamiltonian
from .floquet import FloquetSolution


class LabelingError(RuntimeError):
    """Raised when doublet/singlet labels cannot be assigned unambiguously."""


def renyi_entropy(rho: np.ndarray, order: float = 2.0) -> float:
    """Renyi entropy S_q = ln(tr rho^q) / (1 - q); S_2 = -ln tr(rho^2).

    Eigenvalues in (-1e-6, 0) are integrator noise and are clamped to zero
    before the trace power; larger negative weight raises.
    """
    if order <= 0 or order == 1.0:
        raise ValueError(f"Renyi order must be positive and != 1, got {order}")
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if not herm < 1e-8:
        raise ValueError(f"density matrix not Hermitian, defect {herm:.3e}")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -1e-6:
        raise ValueError(f"density matrix has negative weight {evals.min():.3e}")
    evals = np.clip(evals, 0.0, None)
    power_trace = np.sum(evals**order)
    return float(np.log(power_trace) / (1.0 - order))


@dataclass
class StateLabels:
    """Indices of the physically labeled states in a FloquetSolution.

    ``hybrid`` lists states sharing doublet and resonant-level character
    (inside an avoided crossing ``d_minus`` and ``singlet`` are then None).
    """

    d_plus: int
    d_minus: int | None
    singlet: int | None
    hybrid: tuple


def _static_ground_pair(solution: FloquetSolution):
    _, vectors = np.linalg.eigh(build_static_hamiltonian(solution.params))
    return vectors[:, 0], vectors[:, 1]


def identify_states(solution: FloquetSolution) -> StateLabels:
    """Label the tunnel doublet and the resonant level.

    The doublet is the opposite-parity pair with the lowest mean energies;
    character (overlap with the static ground pair at t = 0) disambiguates
    through crossings, where the two hybrids sharing the odd-ground
    character are flagged instead of forced into either label.  The
    resonant level is the state of doublet parity whose mean energy is
    closest to one driving quantum above the doublet.
    """
    if solution.parity is None or solution.mean_energies is None:
        raise LabelingError("solution needs parities and mean energies")
    phi_even, phi_odd = _static_ground_pair(solution)
    even_char = np.abs(solution.modes0 @ phi_even.conj()) ** 2
    odd_char = np.abs(solution.modes0 @ phi_odd.conj()) ** 2

    d_plus = int(np.argmax(even_char))
    if even_char[d_plus] < 0.9:
        raise LabelingError(
            f"even doublet partner is delocalized (best character "
            f"{even_char[d_plus]:.3f}); candidates "
            f"{np.argsort(-even_char)[:3].tolist()}"
        )

    order = np.argsort(-odd_char)
    first, second = int(order[0]), int(order[1])
    if odd_char[first] >= 0.75:
        d_minus = first
        hybrid = ()
    elif odd_char[first] + odd_char[second] >= 0.9:
        d_minus = None
        hybrid = (first, second) if first < second else (second, first)
    else:
        raise LabelingError(
            f"odd doublet character is spread over more than two states: "
            f"{odd_char[order[:4]].round(3).tolist()} at {order[:4].tolist()}"
        )

    omega = solution.params.omega
    e_ref = solution.mean_energies[d_plus] + omega
    singlet = None
    if d_minus is not None:
        mask = np.flatnonzero(
            (solution.parity == solution.parity[d_minus])
            & (np.arange(solution.n_states) != d_minus)
        )
        if mask.size:
            distance = np.abs(solution.mean_energies[mask] - e_ref)
            best = np.argsort(distance, kind="stable")
            if distance[best[0]] < 0.35 * omega:
                singlet = int(mask[best[0]])
                runner = distance[best[1]] if best.size > 1 else np.inf
                if runner < 1.5 * distance[best[0]]:
                    raise LabelingError(
                        f"two candidate resonant levels at mean-energy distances "
                        f"{distance[best[0]]:.4f} and {runner:.4f}"
                    )
    return StateLabels(d_plus=d_plus, d_minus=d_minus, singlet=singlet,
                       hybrid=hybrid)


@dataclass
class LocalizedStates:
    """Right/left well superpositions and the barrier-top component at t=0.

    ``coeff_*`` are the expansion coefficients in the Floquet basis of the
    originating solution; they stay constant over a period, so equal-time
    projections of a Floquet-basis density matrix are just quadratic forms.
    """

    phi_right: np.ndarray
    phi_left: np.ndarray
    phi_top: np.ndarray | None
    labels: StateLabels
    coeff_right: np.ndarray
    coeff_left: np.ndarray
    coeff_top: np.ndarray | None


def localized_states(solution: FloquetSolution) -> LocalizedStates:
    """Build |phi_R/L(0)> = (|phi_d+(0)> +- |phi_d-(0)>)/sqrt(2).

    The relative phase of the odd partner is chosen so that <R|x|R> > 0.
    Inside a crossing the odd doublet mode is the normalized projection of
    the static odd ground state onto the hybrid pair, and the orthogonal
    hybrid combination provides the barrier-top state; away from it the
    plain singlet state plays that role when identified.
    """
    labels = identify_states(solution)
    phi_even, phi_odd = _static_ground_pair(solution)
    phi_dp = solution.modes0[labels.d_plus]

    if labels.d_minus is not None:
        span = solution.modes0[[labels.d_minus]]
    else:
        span = solution.modes0[list(labels.hybrid)]
    coef = span.conj() @ phi_odd  # <phi_k(0)|static odd>
    coef = coef / np.linalg.norm(coef)
    phi_dm = coef @ span

    x = build_position(solution.params.N, solution.params.sigma)
    phi_r = (phi_dp + phi_dm) / np.sqrt(2.0)
    if np.real(phi_r.conj() @ x @ phi_r) < 0:
        phi_dm = -phi_dm
        coef = -coef
        phi_r = (phi_dp + phi_dm) / np.sqrt(2.0)
    phi_l = (phi_dp - phi_dm) / np.sqrt(2.0)

    phi_top = None
    if labels.d_minus is None:
        ortho = np.array([-np.conj(coef[1]), np.conj(coef[0])])
        phi_top = ortho @ span
    elif labels.singlet is not None:
        phi_top = solution.modes0[labels.singlet]

    basis = solution.modes0.conj()
    return LocalizedStates(
        phi_right=phi_r, phi_left=phi_l, phi_top=phi_top, labels=labels,
        coeff_right=basis @ phi_r, coeff_left=basis @ phi_l,
        coeff_top=None if phi_top is None else basis @ phi_top,
    )


@dataclass
class CoherenceTrace:
    """Renyi-entropy and occupation traces along a dissipative trajectory."""

    times: np.ndarray
    s2: np.ndarray
    p_return: np.ndarray
    p_left: np.ndarray
    p_top: np.ndarray


def coherence_trace(times, states, coeff_return, coeff_left=None,
                    coeff_top=None) -> CoherenceTrace:
    """Evaluate S2 and equal-time occupation probabilities along a trajectory.

    ``states`` are density matrices in the (retained) Floquet basis and the
    coefficient vectors live in the same basis, so each probability is
    <c|rho|c> at matching time within the period.
    """
    times = np.asarray(times)
    n_t = times.size

    def project(coeff):
        if coeff is None:
            return np.zeros(n_t)
        return np.real(np.einsum("a,tab,b->t", coeff.conj(), states, coeff))

    s2 = np.array([renyi_entropy(states[i]) for i in range(n_t)])
    return CoherenceTrace(
        times=times, s2=s2,
        p_return=project(coeff_return),
        p_left=project(coeff_left),
        p_top=project(coeff_top),
    )


@dataclass
class DecoherenceEstimate:
    """Entropy growth rate 1/t_coh over an integer number of tunnel cycles."""

    rate: float
    cycles: int
    t_window: float
    s2_reached: float
    saturated: bool


def decoherence_rate(trace: CoherenceTrace, splitting: float,
                     cycles: int | None = None, target: float = 0.2,
                     monotone_tol: float = 1e-3) -> DecoherenceEstimate:
    """1/t_coh = (S2(t_p) - S2(0)) / t_p with t_p a multiple of tunnel cycles.

    The cycle duration is 2*pi/|splitting|.  When ``cycles`` is not given,
    the smallest multiple at which S2 has grown to ``target`` is used; if
    the trace ends first, the estimate uses the last full cycle and is
    marked saturated.  Entropy is expected to grow stepwise but not to
    decrease substantially inside the window; violations only warn.
    """
    if splitting == 0:
        raise ValueError("tunnel splitting must be nonzero")
    t_cycle = 2.0 * np.pi / abs(splitting)
    max_cycles = int(np.floor(trace.times[-1] / t_cycle))
    if max_cycles < 1:
        raise ValueError(
            f"trace covers {trace.times[-1]:.3g}, less than one tunnel "
            f"cycle ({t_cycle:.3g})"
        )
    s0 = trace.s2[0]

    def s2_at(t):
        return float(np.interp(t, trace.times, trace.s2))

    saturated = False
    if cycles is None:
        for cycles in range(1, max_cycles + 1):
            if s2_at(cycles * t_cycle) - s0 >= target:
                break
        else:
            cycles = max_cycles
            saturated = True
    elif cycles > max_cycles:
        raise ValueError(f"trace covers only {max_cycles} cycles, need {cycles}")

    t_p = cycles * t_cycle
    window = trace.s2[trace.times <= t_p]
    drops = np.maximum.accumulate(window) - window
    if drops.max() > monotone_tol:
        warnings.warn(
            f"Renyi entropy decreases by {drops.max():.3e} inside the "
            f"averaging window; net growth is still used",
            stacklevel=2,
        )
    s2_end = s2_at(t_p)
    return DecoherenceEstimate(
        rate=(s2_end - s0) / t_p, cycles=cycles, t_window=t_p,
        s2_reached=s2_end, saturated=saturated,
    )
