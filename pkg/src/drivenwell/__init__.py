"""Floquet spectra, coherent tunneling, and dissipative dynamics of a
harmonically driven quartic double well."""

__version__ = "0.1.0"

from .crossing import CrossingFit, ThreeStateParams, fit_crossing
from .dissipation import (
    BathParams,
    DissipativeKernel,
    asymptotic_state,
    build_kernel,
    golden_rule_rates,
    integrate_master_equation,
    kernel_for_solution,
)
from .doublewell import ModelParams
from .floquet import FloquetSolution, SweepResult, propagate, solve, sweep
from .observables import (
    CoherenceTrace,
    coherence_trace,
    decoherence_rate,
    identify_states,
    localized_states,
    renyi_entropy,
)

__all__ = [
    "BathParams",
    "CoherenceTrace",
    "CrossingFit",
    "DissipativeKernel",
    "FloquetSolution",
    "ModelParams",
    "SweepResult",
    "ThreeStateParams",
    "asymptotic_state",
    "build_kernel",
    "coherence_trace",
    "decoherence_rate",
    "fit_crossing",
    "golden_rule_rates",
    "identify_states",
    "integrate_master_equation",
    "kernel_for_solution",
    "localized_states",
    "propagate",
    "renyi_entropy",
    "solve",
    "sweep",
    "__version__",
]
