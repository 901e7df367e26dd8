"""jjosc: design and verification toolkit for Josephson-junction microwave oscillators.

Modules
-------
circuit_model
    Physical constants, junction parameters and the perturbative impedance
    of a capacitively shunted junction locked to its first Shapiro step.
steady_state
    Self-consistent oscillation solver (gain balances loss, zero total
    reactance), output power, efficiency and design formulas.
time_domain
    Brute-force oracle: full nonlinear circuit ODE/SDE integration.
sigproc
    Spectral estimation, line fitting and heterodyne IQ analysis.
injection
    Injection locking: Adler law, lock detection and lock-range maps.
fidelity
    Phase-noise models and qubit-operation infidelity.
presets
    Worked example devices used in the tests and documentation.
cli
    Command-line front end emitting CSV data products with run manifests.
"""

from .circuit_model import (
    ComplexImpedance,
    DriveState,
    JunctionParams,
    PhysicalConstants,
    bessel_j,
    dc_junction_current,
    derived_junction_quantities,
    junction_impedance,
    locking_phase,
    max_abs_j1,
    reduced_drive,
)
from .errors import JJOscError
from .fidelity import (
    PhaseNoiseModel,
    QubitOperation,
    average_fidelity,
    dephasing_integral,
    filter_function,
    infidelity,
    infidelity_curve,
    phase_noise_from_points,
)
from .injection import (
    InjectionSpec,
    LockResult,
    adler_lock_range,
    detect_lock,
    fit_adler_constant,
    locking_map,
)
from .sigproc import (
    IQCloud,
    Spectrum,
    fit_gaussian_peak,
    heterodyne_demodulate,
    integrate_power,
    iq_histogram,
    power_spectral_density,
    radial_profile,
)
from .steady_state import (
    BiasRegion,
    OperatingPoint,
    ResonatorParams,
    bias_sweep,
    fold_shunt_loss,
    frequency_sensitivity,
    max_output_power,
    optimal_load,
    output_power,
    shapiro_voltage,
    solve_operating_point,
    solve_with_shunt_loading,
    total_quality_factor,
)
from .time_domain import (
    CircuitState,
    InjectionTone,
    SimConfig,
    TimeTrace,
    iv_curve,
    simulate,
    simulate_batch,
    steady_state_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "JJOscError",
    # circuit_model
    "ComplexImpedance",
    "DriveState",
    "JunctionParams",
    "PhysicalConstants",
    "bessel_j",
    "dc_junction_current",
    "derived_junction_quantities",
    "junction_impedance",
    "locking_phase",
    "max_abs_j1",
    "reduced_drive",
    # steady_state
    "BiasRegion",
    "OperatingPoint",
    "ResonatorParams",
    "bias_sweep",
    "fold_shunt_loss",
    "frequency_sensitivity",
    "max_output_power",
    "optimal_load",
    "output_power",
    "shapiro_voltage",
    "solve_operating_point",
    "solve_with_shunt_loading",
    "total_quality_factor",
    # time_domain
    "CircuitState",
    "InjectionTone",
    "SimConfig",
    "TimeTrace",
    "iv_curve",
    "simulate",
    "simulate_batch",
    "steady_state_metrics",
    # sigproc
    "IQCloud",
    "Spectrum",
    "fit_gaussian_peak",
    "heterodyne_demodulate",
    "integrate_power",
    "iq_histogram",
    "power_spectral_density",
    "radial_profile",
    # injection
    "InjectionSpec",
    "LockResult",
    "adler_lock_range",
    "detect_lock",
    "fit_adler_constant",
    "locking_map",
    # fidelity
    "PhaseNoiseModel",
    "QubitOperation",
    "average_fidelity",
    "dephasing_integral",
    "filter_function",
    "infidelity",
    "infidelity_curve",
    "phase_noise_from_points",
]
