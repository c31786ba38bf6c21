"""Analytic three-level model of a singlet-doublet crossing.

A tunnel doublet (even/odd pair, quasienergy splitting Delta) is driven close
to resonance with an unpaired level of equal generalized parity sitting near
the barrier top.  In the basis {even partner, odd partner, resonant level}
the reduced Floquet Hamiltonian is

    H = eps_d_plus * 1 + [[0, 0,     0        ],
                          [0, Delta, b        ],
                          [0, b,     Delta+dlt]]

with coupling b > 0 and detuning dlt.  The module provides the closed-form
spectrum, mixing angle, and tunneling probabilities of this model, a
numerical evolution oracle, and a fitter that extracts (b, delta, Delta)
from a swept Floquet spectrum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .doublewell import build_static_hamiltonian
from .floquet import SweepResult


class CrossingFitError(RuntimeError):
    """Raised when a swept spectrum does not contain a usable crossing."""


@dataclass(frozen=True)
class ThreeStateParams:
    """Parameters of the three-level crossing model (all in hbar*omega_0)."""

    eps_d_plus: float
    Delta: float
    delta: float
    b: float

    def __post_init__(self):
        if not self.Delta > 0:
            raise ValueError(f"doublet splitting Delta must be > 0, got {self.Delta}")
        if not self.b > 0:
            raise ValueError(f"coupling b must be > 0, got {self.b}")

    @property
    def beta(self) -> float:
        return mixing_angle(self.b, self.delta)


def mixing_angle(b: float, delta: float) -> float:
    """Mixing angle beta in (0, pi/2) with 2*beta = arctan(2b/delta).

    The half-angle of the two-argument arctangent picks the branch that is
    continuous through delta = 0: beta -> 0 for delta >> b and
    beta -> pi/2 for -delta >> b.
    """
    if not b > 0:
        raise ValueError(f"coupling b must be > 0, got {b}")
    return 0.5 * np.arctan2(2.0 * b, delta)


def quasienergies(p: ThreeStateParams):
    """Closed-form quasienergies (eps_0_plus, eps_1_minus, eps_2_minus).

    The odd pair is eps_d_plus + Delta + delta/2 -+ sqrt(delta^2+4b^2)/2,
    ordered eps_1 <= eps_2; the even level is untouched by the coupling.
    """
    root = np.sqrt(p.delta**2 + 4.0 * p.b**2)
    center = p.eps_d_plus + p.Delta + 0.5 * p.delta
    return p.eps_d_plus, center - 0.5 * root, center + 0.5 * root


def mean_energies(p: ThreeStateParams, e_d_plus: float, e_d_minus: float,
                  e_t_minus: float):
    """Mean energies of the mixed states: convex combinations through beta."""
    c2 = np.cos(p.beta) ** 2
    s2 = np.sin(p.beta) ** 2
    return (
        e_d_plus,
        e_d_minus * c2 + e_t_minus * s2,
        e_d_minus * s2 + e_t_minus * c2,
    )


def tunnel_probabilities(p: ThreeStateParams, t):
    """Probabilities (P_R, P_L, P_t) for a state started in the right well.

    Closed-form evolution of the localized superposition under the
    three-level Hamiltonian; P_R + P_L + P_t = 1 identically.
    """
    t = np.asarray(t, dtype=float)
    eps0, eps1, eps2 = quasienergies(p)
    c2 = np.cos(p.beta) ** 2
    s2 = np.sin(p.beta) ** 2
    doublet_beat = np.cos((eps1 - eps0) * t) * c2 + np.cos((eps2 - eps0) * t) * s2
    top_term = (np.cos((eps1 - eps2) * t) - 1.0) * c2 * s2
    p_right = 0.5 * (1.0 + doublet_beat + top_term)
    p_left = 0.5 * (1.0 - doublet_beat + top_term)
    p_top = -top_term
    return p_right, p_left, p_top


def evolve_numerically(p: ThreeStateParams, t, initial):
    """Evolve a 3-vector under the model Hamiltonian via eigendecomposition.

    Brute-force oracle for the closed forms: states live in the fixed basis
    {even partner, odd partner, resonant level}.
    """
    initial = np.asarray(initial, dtype=complex)
    norm = np.linalg.norm(initial)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"initial state must be normalized, |psi| = {norm}")
    h = p.eps_d_plus * np.eye(3) + np.array(
        [[0.0, 0.0, 0.0], [0.0, p.Delta, p.b], [0.0, p.b, p.Delta + p.delta]]
    )
    w, v = np.linalg.eigh(h)
    coef = v.conj().T @ initial
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    phases = np.exp(-1j * np.outer(np.atleast_1d(t), w))
    states = (phases * coef) @ v.T
    return states[0] if scalar else states


def localized_probabilities(states: np.ndarray):
    """(P_R, P_L, P_t) projections of model states onto the localized basis."""
    right = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    left = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    p_r = np.abs(states @ right) ** 2
    p_l = np.abs(states @ left) ** 2
    p_t = np.abs(states[..., 2]) ** 2
    return p_r, p_l, p_t


@dataclass
class CrossingFit:
    """Three-level parameters extracted from a swept Floquet spectrum.

    ``delta_coeffs`` are the degree-1 coefficients (np.polyval order) of the
    reconstructed detuning delta(axis value); tracks index the SweepResult.
    """

    params: ThreeStateParams
    center: float
    gap_min: float
    delta_coeffs: np.ndarray
    even_track: int
    doublet_track: int
    partner_track: int

    def delta_at(self, value) -> np.ndarray:
        return np.polyval(self.delta_coeffs, value)


def _static_well_states(params):
    """Lowest even/odd eigenvectors of the undriven Hamiltonian."""
    _, vectors = np.linalg.eigh(build_static_hamiltonian(params))
    return vectors[:, 0], vectors[:, 1]


def _track_parity(sweep: SweepResult, tracks: np.ndarray, t: int) -> int:
    """Majority parity label of one track (crossing points may be unresolved)."""
    labels = np.array(
        [sweep.solutions[i].parity[tracks[i, t]] for i in range(len(sweep.solutions))]
    )
    labels = labels[labels != 0]
    if labels.size == 0:
        return 0
    return int(np.sign(labels.sum())) or int(labels[0])


def _fold_distance(d: np.ndarray, omega: float) -> np.ndarray:
    """Distance between quasienergies on the circle of circumference omega."""
    return np.abs((d + 0.5 * omega) % omega - 0.5 * omega)


def fit_crossing(sweep: SweepResult, reference_states=None) -> CrossingFit:
    """Fit (b, delta, Delta) to the avoided crossing of the tunnel doublet.

    The doublet's odd member is anchored by its overlap with the static odd
    ground state, so crossings between unrelated levels elsewhere in the
    window are ignored.  The coupling comes from a parabola through the
    squared gap near its minimum (the squared gap of a two-level crossing is
    exactly quadratic in a linear detuning), the detuning from straight-line
    fits to the asymptotic branches over the outer quarter of the sweep on
    each side, and Delta from the even-odd splitting in the same windows.
    """
    grid = sweep.grid
    n_pts = grid.size
    if n_pts < 7:
        raise CrossingFitError(f"need at least 7 grid points, got {n_pts}")
    omega = sweep.solutions[0].params.omega
    tracks = sweep.tracks()

    if reference_states is None:
        reference_states = _static_well_states(sweep.solutions[0].params)
    phi_even, phi_odd = reference_states

    def character(i, kind):
        """|<static reference|phi(0)>|^2 per track at grid point i."""
        ref = phi_even if kind == "even" else phi_odd
        amps = sweep.solutions[i].modes0[tracks[i]] @ ref.conj()
        return np.abs(amps) ** 2

    even_track = int(np.argmax(character(0, "even")))
    if _track_parity(sweep, tracks, even_track) != 1:
        raise CrossingFitError("even doublet partner has odd parity label")

    odd_char_left = character(0, "odd")
    doublet_track = int(np.argmax(odd_char_left))
    if _track_parity(sweep, tracks, doublet_track) != -1:
        raise CrossingFitError("doublet odd partner has even parity label")

    eps_tracks = np.empty((n_pts, tracks.shape[1]))
    for i, sol in enumerate(sweep.solutions):
        eps_tracks[i] = sol.eps[tracks[i]]

    # partner = the odd track that hybridizes with the doublet, i.e. the one
    # that picks up odd-ground character somewhere in the window; levels that
    # merely slide past in quasienergy never acquire any
    candidates = [
        t for t in range(tracks.shape[1])
        if t != doublet_track and _track_parity(sweep, tracks, t) == -1
    ]
    if not candidates:
        raise CrossingFitError("no second odd-parity track in the sweep")
    acquired = np.array([
        max(character(i, "odd")[t] for i in range(n_pts)) for t in candidates
    ])
    if np.max(acquired) < 0.05:
        raise CrossingFitError(
            "no track hybridizes with the doublet inside the swept window"
        )
    partner_track = candidates[int(np.argmax(acquired))]

    gap = _fold_distance(
        eps_tracks[:, partner_track] - eps_tracks[:, doublet_track], omega
    )

    # exactly one substantial interior dip
    edge_scale = 0.5 * min(gap[0], gap[-1])
    below = gap < edge_scale
    if not below.any():
        raise CrossingFitError("no avoided crossing inside the swept window")
    runs = np.flatnonzero(np.diff(below.astype(int)) == 1).size + int(below[0])
    if runs != 1:
        raise CrossingFitError(
            f"found {runs} separate gap dips in the window; expected exactly one"
        )
    i_min = int(np.argmin(gap))
    if i_min in (0, n_pts - 1):
        raise CrossingFitError("gap minimum sits on the window edge")

    # squared-gap parabola through the three points around the minimum
    sel = slice(i_min - 1, i_min + 2)
    coeffs = np.polyfit(grid[sel], gap[sel] ** 2, 2)
    if coeffs[0] <= 0:
        raise CrossingFitError("squared gap is not convex at its minimum")
    center = float(-coeffs[1] / (2.0 * coeffs[0]))
    gap_min = float(np.sqrt(max(np.polyval(coeffs, center), 0.0)))
    b = 0.5 * gap_min

    # asymptote lines from the outer quarter of the sweep on each side;
    # branch identity (upper/lower) is tied to the level character at each end
    quarter = max(n_pts // 4, 2)
    left = np.arange(quarter)
    right = np.arange(n_pts - quarter, n_pts)
    lower = np.minimum(eps_tracks[:, doublet_track], eps_tracks[:, partner_track])
    upper = np.maximum(eps_tracks[:, doublet_track], eps_tracks[:, partner_track])

    def doublet_branch(i):
        d_char = character(i, "odd")
        wins = d_char[doublet_track] > d_char[partner_track]
        on_lower = eps_tracks[i, doublet_track] <= eps_tracks[i, partner_track]
        return lower if (wins == on_lower) else upper

    d_left, d_right = doublet_branch(0), doublet_branch(n_pts - 1)
    t_left = upper if d_left is lower else lower
    t_right = upper if d_right is lower else lower
    x_fit = np.concatenate([grid[left], grid[right]])
    d_fit = np.concatenate([d_left[left], d_right[right]])
    t_fit = np.concatenate([t_left[left], t_right[right]])
    d_line = np.polyfit(x_fit, d_fit, 1)
    t_line = np.polyfit(x_fit, t_fit, 1)
    delta_coeffs = t_line - d_line

    eps_even = eps_tracks[:, even_track]
    splitting = np.concatenate([
        _fold_distance(d_left[left] - eps_even[left], omega),
        _fold_distance(d_right[right] - eps_even[right], omega),
    ])
    big_delta = float(np.median(splitting))
    if not big_delta > 0:
        raise CrossingFitError("doublet splitting came out non-positive")
    if not (big_delta <= 3.0 * b and b <= 0.1 * omega):
        warnings.warn(
            f"crossing outside the usual regime Delta <~ b << omega: "
            f"Delta={big_delta:.3e}, b={b:.3e}, omega={omega:.3e}",
            stacklevel=2,
        )

    eps_plus_line = np.polyfit(grid, eps_tracks[:, even_track], 1)
    params = ThreeStateParams(
        eps_d_plus=float(np.polyval(eps_plus_line, center)),
        Delta=big_delta,
        delta=float(np.polyval(delta_coeffs, center)),
        b=b,
    )
    return CrossingFit(
        params=params, center=center, gap_min=gap_min,
        delta_coeffs=delta_coeffs, even_track=even_track,
        doublet_track=doublet_track, partner_track=partner_track,
    )
