"""Resonator coupling and external-Q extraction from short time-domain records."""

from .dsp import (
    DecimationPlan,
    FirFilter,
    apply_fir,
    decimate_filtered,
    decimate_raw,
    design_lowpass,
    gaussian_bandpass,
    plan_decimation,
)
from .errors import (
    EstimationError,
    ExcitationBandwidthError,
    IllConditionedError,
    InvalidArgumentError,
    OutOfRangeError,
    ResonestError,
)
from .extraction import (
    CouplingResult,
    KPipelineConfig,
    ReflectionSpectrum,
    condition_signal,
    coupling_coefficient,
    external_q,
    extract_coupling,
    group_delay,
    s11_from_voltages,
)
from .signals import (
    CoupledPairSpec,
    PulseSpec,
    UniformSignal,
    gaussian_pulse,
    impulse,
    integrate_coupled_lc,
    oracle_ode,
    oracle_two_tone,
    pulse_attenuation_db,
    split_frequencies,
)
from .spectral import (
    ComplexFrequencyEstimate,
    EspritConfig,
    PairingResult,
    PeriodogramPeak,
    RealMode,
    esprit,
    forward_backward_correlation,
    match_peaks,
    pair_to_real_modes,
    periodogram_peaks,
    rayleigh_limit,
    select_split_pair,
)
from .synthesis import (
    CouplingTargets,
    DebyeModel,
    FilterPrototype,
    MonotoneCurve,
    coupling_targets,
    debye_permittivity,
    invert_curve,
    loss_tangent,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "apply_fir",
    "ComplexFrequencyEstimate",
    "condition_signal",
    "CoupledPairSpec",
    "coupling_coefficient",
    "coupling_targets",
    "CouplingResult",
    "CouplingTargets",
    "debye_permittivity",
    "DebyeModel",
    "decimate_filtered",
    "decimate_raw",
    "DecimationPlan",
    "design_lowpass",
    "esprit",
    "EspritConfig",
    "EstimationError",
    "ExcitationBandwidthError",
    "external_q",
    "extract_coupling",
    "FilterPrototype",
    "FirFilter",
    "forward_backward_correlation",
    "gaussian_bandpass",
    "gaussian_pulse",
    "group_delay",
    "IllConditionedError",
    "impulse",
    "integrate_coupled_lc",
    "InvalidArgumentError",
    "invert_curve",
    "KPipelineConfig",
    "loss_tangent",
    "match_peaks",
    "MonotoneCurve",
    "oracle_ode",
    "oracle_two_tone",
    "OutOfRangeError",
    "pair_to_real_modes",
    "PairingResult",
    "periodogram_peaks",
    "PeriodogramPeak",
    "plan_decimation",
    "pulse_attenuation_db",
    "PulseSpec",
    "rayleigh_limit",
    "RealMode",
    "ReflectionSpectrum",
    "ResonestError",
    "s11_from_voltages",
    "select_split_pair",
    "split_frequencies",
    "UniformSignal",
]
