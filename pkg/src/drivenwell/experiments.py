"""Experiment drivers: spectrum sweep, dissipative dynamics, decoherence
sweep, asymptotic state.

Every experiment writes one CSV file: a ``#``-prefixed metadata block with
the full configuration echo and code version, a fixed header line, then
data rows with 17-significant-digit floats.  Output is assembled in grid
order regardless of worker completion order, so files are bit-identical
across runs for a fixed configuration.
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, serialize_config
from .crossing import fit_crossing
from .dissipation import (
    BathParams,
    asymptotic_state,
    integrate_master_equation,
    kernel_for_solution,
)
from .floquet import SweepResult, solve
from .observables import (
    LocalizedStates,
    coherence_trace,
    decoherence_rate,
    localized_states,
    renyi_entropy,
)


class ExperimentError(RuntimeError):
    """Raised when an experiment cannot produce a complete output."""


def _format_row(values) -> str:
    parts = []
    for v in values:
        if isinstance(v, (int, np.integer)):
            parts.append(str(int(v)))
        else:
            parts.append(f"{float(v) + 0.0:.17g}")  # folds -0.0 into 0.0
    return ",".join(parts)


def write_csv(path: str, config: RunConfig, header, rows) -> None:
    """Metadata block + header + rows; LF endings; atomic via rename."""
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# drivenwell {__version__}\n")
            for line in serialize_config(config).splitlines():
                fh.write(f"# {line}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(_format_row(row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def resolve_threads(config: RunConfig) -> int:
    """Worker count: config knob, then FLOQUET_THREADS, then all cores."""
    if config.threads > 0:
        return config.threads
    env = os.environ.get("FLOQUET_THREADS", "")
    if env.strip():
        try:
            value = int(env)
        except ValueError:
            raise ExperimentError(f"FLOQUET_THREADS={env!r} is not an integer")
        if value > 0:
            return value
    return os.cpu_count() or 1


def sweep_grid(config: RunConfig) -> np.ndarray:
    return np.linspace(config.sweep_min, config.sweep_max, config.sweep_points)


def _solve_point(args):
    config, value = args
    params = replace(config.model, **{config.sweep_axis: value})
    sol = solve(params, steps=config.steps_per_period,
                M=config.samples_per_period, K=config.bath.K)
    return sol.without_heavy_arrays()


def _solved_sweep(config: RunConfig, threads: int) -> SweepResult:
    """Sweep with grid points solved by a worker pool, matched in order."""
    from .floquet import sweep as floquet_sweep

    grid = sweep_grid(config)
    if threads <= 1 or grid.size == 1:
        return floquet_sweep(
            config.model, config.sweep_axis, grid,
            steps=config.steps_per_period, M=config.samples_per_period,
            K=config.bath.K,
        )
    with ProcessPoolExecutor(max_workers=threads) as pool:
        solved = list(pool.map(_solve_point, [(config, v) for v in grid],
                               chunksize=1))
    solutions = iter(solved)
    return floquet_sweep(
        config.model, config.sweep_axis, grid,
        solver=lambda params: next(solutions),
    )


def run_spectrum(config: RunConfig, threads: int):
    """Quasienergies, mean energies, parities of the tracked lowest states."""
    sw = _solved_sweep(config, threads)
    tracks = sw.tracks()
    n_f = config.bath.n_f
    first = sw.solutions[0]
    emit = first.lowest_mean_energy_states(n_f)  # track ids at point 0
    rows = []
    for i, value in enumerate(sw.grid):
        sol = sw.solutions[i]
        for state_id, track in enumerate(emit):
            idx = tracks[i, track]
            rows.append((
                value, state_id, sol.eps[idx], sol.mean_energies[idx],
                sol.parity[idx],
            ))
    header = (config.sweep_axis, "state", "quasienergy", "mean_energy", "parity")
    return header, rows


def _pair_splitting(sol, loc: LocalizedStates) -> float:
    """|eps_2 - eps_1| of the odd pair driving the tunnel cycle."""
    labels = loc.labels
    if labels.hybrid:
        a, b = labels.hybrid
    elif labels.singlet is not None:
        a, b = labels.d_minus, labels.singlet
    else:
        raise ExperimentError(
            "no resonant partner identified; the tunnel cycle is set by the "
            "doublet splitting only"
        )
    omega = sol.params.omega
    d = sol.eps[a] - sol.eps[b]
    return abs((d + omega / 2) % omega - omega / 2)


def _initial_left_state(sol, loc: LocalizedStates, retained):
    coeff = loc.coeff_left[retained]
    norm = np.linalg.norm(coeff)
    if norm < 0.99:
        raise ExperimentError(
            f"|phi_L> has weight {norm**2:.3f} inside the retained states; "
            f"increase n_f"
        )
    coeff = coeff / norm
    return coeff, np.outer(coeff, coeff.conj())


def run_dynamics(config: RunConfig, threads: int):
    """Return probability, barrier-top occupation and S2 versus time."""
    sol = solve(config.model, steps=config.steps_per_period,
                M=config.samples_per_period, K=config.bath.K)
    loc = localized_states(sol)
    kernel = kernel_for_solution(sol, config.bath)
    splitting = _pair_splitting(sol, loc)
    coeff_left, rho0 = _initial_left_state(sol, loc, kernel.retained)
    coeff_top = (None if loc.coeff_top is None
                 else loc.coeff_top[kernel.retained])
    t_end = config.dynamics_cycles * 2 * np.pi / splitting
    dt = config.dt if config.dt > 0 else kernel.suggested_dt()
    stride = max(int(np.ceil(t_end / dt)) // (256 * config.dynamics_cycles), 1)
    traj = integrate_master_equation(kernel, rho0, t_end, dt=dt,
                                     sample_stride=stride)
    trace = coherence_trace(
        traj.times, traj.states, coeff_return=coeff_left, coeff_top=coeff_top
    )
    rows = list(zip(trace.times, trace.p_return, trace.p_top, trace.s2))
    return ("t", "P_return", "P_top", "S2"), rows


def measure_decoherence(kernel, rho0, splitting, coeff_return, coeff_top,
                        target: float, max_cycles: int, dt=None):
    """Entropy growth rate over tunnel cycles, windows grown geometrically.

    Integrates over 2^k cycles until S2 reaches the target (or the cap),
    then applies the averaged-growth estimator on the final trace.
    """
    cycles = 1
    while True:
        t_end = cycles * 2 * np.pi / splitting
        traj = integrate_master_equation(kernel, rho0, t_end, dt=dt)
        trace = coherence_trace(
            traj.times, traj.states, coeff_return=coeff_return,
            coeff_top=coeff_top,
        )
        if trace.s2[-1] - trace.s2[0] >= target or cycles >= max_cycles:
            break
        cycles = min(cycles * 2, max_cycles)
    estimate = decoherence_rate(trace, splitting, target=target)
    return estimate, trace


def _decoherence_point(args):
    config, value = args
    params = replace(config.model, **{config.sweep_axis: value})
    sol = solve(params, steps=config.steps_per_period,
                M=config.samples_per_period, K=config.bath.K)
    loc = localized_states(sol)
    splitting = _pair_splitting(sol, loc)
    rows = []
    for temperature in config.temperatures:
        bath = replace(config.bath, temperature=temperature)
        kernel = kernel_for_solution(sol, bath)
        coeff_left, rho0 = _initial_left_state(sol, loc, kernel.retained)
        coeff_top = (None if loc.coeff_top is None
                     else loc.coeff_top[kernel.retained])
        estimate, _ = measure_decoherence(
            kernel, rho0, splitting, coeff_left, coeff_top,
            config.entropy_target, config.max_cycles,
            dt=config.dt if config.dt > 0 else None,
        )
        if estimate.saturated:
            print(
                f"note: {config.sweep_axis}={value:g} T={temperature:g}: "
                f"entropy saturated at {estimate.s2_reached:.3g} after "
                f"{estimate.cycles} cycles",
                file=sys.stderr,
            )
        rho_inf = asymptotic_state(kernel)
        rows.append((value, temperature, estimate.rate, renyi_entropy(rho_inf)))
    return rows


def run_decoherence(config: RunConfig, threads: int):
    """Decoherence rate and asymptotic entropy over the sweep grid."""
    grid = sweep_grid(config)
    jobs = [(config, v) for v in grid]
    if threads <= 1 or grid.size == 1:
        chunks = [_decoherence_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_decoherence_point, jobs, chunksize=1))
    rows = [row for chunk in chunks for row in chunk]
    header = (config.sweep_axis, "temperature", "inv_t_coh", "S2_asymptotic")
    return header, rows


def run_asymptotic(config: RunConfig, threads: int):
    """Stationary state of the master equation at the configured point."""
    sol = solve(config.model, steps=config.steps_per_period,
                M=config.samples_per_period, K=config.bath.K)
    kernel = kernel_for_solution(sol, config.bath)
    rho = asymptotic_state(kernel)
    s2 = renyi_entropy(rho)
    populations = np.diag(rho).real
    rows = []
    for state_id, idx in enumerate(kernel.retained):
        rows.append((
            state_id, sol.eps[idx], sol.mean_energies[idx], sol.parity[idx],
            populations[state_id], s2,
        ))
    header = ("state", "quasienergy", "mean_energy", "parity", "population",
              "S2_asymptotic")
    return header, rows


_RUNNERS = {
    "spectrum": run_spectrum,
    "dynamics": run_dynamics,
    "decoherence": run_decoherence,
    "asymptotic": run_asymptotic,
}


def run(config: RunConfig) -> int:
    """Execute the configured experiment; 0 iff the output was fully written."""
    threads = resolve_threads(config)
    path = config.output_path()
    try:
        header, rows = _RUNNERS[config.experiment](config, threads)
        write_csv(path, config, header, rows)
    except Exception as exc:
        print(f"error: {config.experiment}: {exc}", file=sys.stderr)
        if os.path.exists(path + ".tmp"):
            os.unlink(path + ".tmp")
        return 1
    return 0
