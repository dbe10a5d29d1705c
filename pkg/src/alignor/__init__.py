"""alignor: simulation and analysis of bistable hysteresis scan records.

A numpy/scipy toolkit modeling coexisting rank-1 (orientation) and rank-2
(alignment) spin moments in an optically pumped vapor, the measurement
chain that observes them (field sweeps, lock-in demodulation, filtering),
the nonlinear fits that reduce the demodulated contours, and the physical
back-of-the-envelope estimators that accompany them.
"""

from .dynamics import (
    CoupledState,
    CouplingParams,
    FlipEvent,
    LatchState,
    StepSizeError,
    SweepProtocol,
    Trajectory,
    UnreachableThresholdError,
    default_tau_flip,
    effective_field_from_transient,
    effective_params,
    max_stable_dt,
    predict_flip_field,
    run_sweep,
    step_coupled,
    sweep_profile,
)
from .estimators import (
    BroadeningBudget,
    DipoleConfig,
    broadening_rate,
    circular_power,
    cs_number_density,
    cs_vapor_pressure_pa,
    dipole_field,
    ensemble_volume,
    point_dipole_validity,
)
from .fitkit import (
    CompositeContourModel,
    DegenerateFitError,
    FitResult,
    TransitionResult,
    composite_eval,
    extract_transition,
    fit_record,
    fit_trend,
    levenberg_marquardt,
)
from .instrument import (
    DemodRecord,
    ScanConfig,
    ScanRecord,
    calibrate_phase,
    lockin_demodulate,
    lowpass_filter,
    lowpass_rise_time,
    synthesize_record,
)
from .plotsvg import Series, emit_plot
from .recordio import (
    dump_config,
    load_config,
    parse_config,
    read_record,
    write_record,
)
from .spincore import (
    AlignmentMultipole,
    EnsembleParams,
    FieldVector,
    NormalizedField,
    OrientationMoment,
    SignalMix,
    alignment_signal_closed_form,
    alignment_signal_shape,
    alignment_steady_state,
    alignment_steady_state_grid,
    build_spin2_generators,
    orientation_steady_state,
    orientation_steady_state_grid,
    experiment_signal_mix,
    signals_from_state,
)
from .study import (
    StudyConfig,
    StudyPreset,
    StudyResult,
    measure_point,
    report,
    run_study,
    study_config_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMultipole", "BroadeningBudget", "CompositeContourModel",
    "CoupledState", "CouplingParams", "DegenerateFitError", "DemodRecord",
    "DipoleConfig", "EnsembleParams", "FieldVector", "FitResult",
    "FlipEvent", "LatchState", "NormalizedField", "OrientationMoment",
    "ScanConfig", "ScanRecord", "Series", "SignalMix", "StepSizeError",
    "StudyConfig", "StudyPreset", "StudyResult", "SweepProtocol",
    "Trajectory", "TransitionResult", "UnreachableThresholdError",
    "alignment_signal_closed_form", "alignment_signal_shape",
    "alignment_steady_state", "alignment_steady_state_grid",
    "broadening_rate", "build_spin2_generators", "calibrate_phase",
    "circular_power", "composite_eval", "cs_number_density",
    "cs_vapor_pressure_pa", "default_tau_flip", "dipole_field",
    "dump_config", "effective_field_from_transient", "effective_params",
    "emit_plot", "ensemble_volume", "extract_transition", "fit_record",
    "fit_trend", "levenberg_marquardt", "load_config", "lockin_demodulate",
    "lowpass_filter", "lowpass_rise_time", "max_stable_dt", "measure_point",
    "orientation_steady_state", "orientation_steady_state_grid",
    "experiment_signal_mix", "parse_config", "point_dipole_validity",
    "predict_flip_field", "read_record", "report", "run_study", "run_sweep",
    "signals_from_state", "step_coupled", "study_config_from_dict",
    "sweep_profile", "synthesize_record", "write_record",
]
