"""Stark-tuning toolkit for SiV- color centers.

Simulates local electric fields of coplanar electrode geometries, generates
and fits field-dependent PLE spectra, and plans voltages that bring many
emitters to a common target frequency.
"""

__version__ = "0.1.0"

from .model import (
    Emitter,
    LevelStructure,
    StarkParams,
    TransitionLabel,
    fields_for_frequency,
    propagate_field_uncertainty,
    stark_shift,
    transition_frequency,
    transition_ladder,
)
from .electrostatics import (
    ElectrodeGeometry,
    FieldMap,
    FieldProbe,
    calibrate_kappa,
    field_at,
    lorentz_local_field,
    solve_potential,
)
from .spectra import (
    AmplitudeModel,
    LineShapeParams,
    Spectrum,
    amplitude_model,
    generate_ple_scan,
    generate_voltage_series,
    linewidth_model,
    lorentzian,
    spectrum_from_csv,
    spectrum_to_csv,
)
from .fitting import (
    LinearTermTest,
    LorentzianFit,
    StarkFit,
    detect_peaks,
    fit_lorentzian,
    fit_stark,
    linear_term_test,
)
from .matcher import (
    Assignment,
    EnsembleSpec,
    MatchPlan,
    TuningConstraints,
    ensemble_from_csv,
    ensemble_to_csv,
    match_frequencies,
    match_frequencies_oracle,
    reachable_interval,
    sample_ensemble,
    voltage_for_target,
)

__all__ = [name for name in dir() if not name.startswith("_")]
