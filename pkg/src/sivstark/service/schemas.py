"""Request/response models for the HTTP service.

Wire field names carry units exactly like the config file keys, and fit
records use the canonical JSON field names (center_GHz, fwhm_MHz,
alpha_MHz_per_MVpm2, ...).
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

from ..electrostatics import DEFAULT_RESOLUTION, ElectrodeGeometry, FieldProbe
from ..matcher import EnsembleSpec, TuningConstraints
from ..model import Emitter, StarkParams, TransitionLabel
from ..spectra import AmplitudeModel, LineShapeParams


class GeometryModel(BaseModel):
    gap_um: float = 7.6
    electrode_width_um: float = 10.0
    applied_voltage_V: float = 10.0
    epsilon_diamond: float = 5.7
    domain_width_um: float = 58.0
    domain_height_above_um: float = 15.2
    domain_depth_below_um: float = 15.2
    kind: Literal["coplanar", "parallel_plate"] = "coplanar"

    def to_domain(self) -> ElectrodeGeometry:
        return ElectrodeGeometry(
            gap_um=self.gap_um,
            electrode_width_um=self.electrode_width_um,
            applied_voltage_v=self.applied_voltage_V,
            epsilon_diamond=self.epsilon_diamond,
            domain_um=(
                self.domain_width_um,
                self.domain_height_above_um,
                self.domain_depth_below_um,
            ),
            kind=self.kind,
        )


class ProbeModel(BaseModel):
    x_um: float = 1.9
    depth_nm: float = 100.0

    def to_domain(self) -> FieldProbe:
        return FieldProbe(x_um=self.x_um, depth_nm=self.depth_nm)


class FieldRequest(BaseModel):
    geometry: GeometryModel = Field(default_factory=GeometryModel)
    probe: ProbeModel = Field(default_factory=ProbeModel)
    resolution_cells_per_gap: int = DEFAULT_RESOLUTION
    extra_probe_x_um: list[float] = Field(default_factory=list)
    include_profile: bool = True


class ProbeReadout(BaseModel):
    x_um: float
    depth_nm: float
    e_ext_x_MVpm: float
    e_ext_y_MVpm: float
    e_ext_mag_MVpm: float
    e_local_MVpm: float
    kappa_MVpm_per_V: float


class FieldResponse(BaseModel):
    probe: ProbeReadout
    extra_probes: list[ProbeReadout]
    iterations: int
    residual: float
    spacing_um: float
    profile_csv: str | None


class StarkModel(BaseModel):
    f_max_GHz: float
    alpha_MHz_per_MVpm2: float
    e0_MVpm: float = 0.0

    def to_domain(self) -> StarkParams:
        return StarkParams(self.f_max_GHz, self.alpha_MHz_per_MVpm2, self.e0_MVpm)


class LineShapeModel(BaseModel):
    gamma0_MHz: float = 400.0
    gamma_slope_MHz_per_MVpm: float = 5.0
    transform_limit_MHz: float = 90.0

    def to_domain(self) -> LineShapeParams:
        return LineShapeParams(
            self.gamma0_MHz, self.gamma_slope_MHz_per_MVpm, self.transform_limit_MHz
        )


class AmplitudeModelSchema(BaseModel):
    a_max_cps: float = 2.0e4
    v_on_V: float = 5.0
    w_on_V: float = 10.0
    v_peak_V: float = 75.0
    w_off_V: float = 60.0

    def to_domain(self) -> AmplitudeModel:
        return AmplitudeModel(
            self.a_max_cps, self.v_on_V, self.w_on_V, self.v_peak_V, self.w_off_V
        )


class SimulateRequest(BaseModel):
    emitter_id: str = "E1"
    transition: Literal["A", "B", "C", "D"] = "C"
    stark: StarkModel
    kappa_MVpm_per_V: float
    voltages_V: list[float]
    detuning_min_GHz: float = -8.0
    detuning_max_GHz: float = 2.0
    points: int = 200
    integration_time_s: float = 0.05
    seed: int = 1234
    dark_rate_cps: float = 700.0
    reference_GHz: float | None = None
    lineshape: LineShapeModel = Field(default_factory=LineShapeModel)
    amplitude: AmplitudeModelSchema = Field(default_factory=AmplitudeModelSchema)


class SpectrumRecord(BaseModel):
    voltage_V: float
    seed: int
    center_GHz: float
    fwhm_MHz: float
    peak_rate_cps: float
    csv: str


class SimulateResponse(BaseModel):
    spectra: list[SpectrumRecord]
    transition: str
    reference_GHz: float


class LorentzianFitModel(BaseModel):
    center_GHz: float
    center_sigma_GHz: float
    fwhm_MHz: float
    fwhm_sigma_MHz: float
    amplitude_cps: float
    amplitude_sigma_cps: float
    baseline_cps: float
    baseline_sigma_cps: float
    reduced_chi2: float
    converged: bool


class StarkFitModel(BaseModel):
    f_max_GHz: float
    f_max_sigma_GHz: float
    alpha_MHz_per_MVpm2: float
    alpha_sigma_MHz_per_MVpm2: float
    alpha_sigma_systematic_MHz_per_MVpm2: float
    e0_MVpm: float
    e0_sigma_MVpm: float
    covariance: list[float]
    n_points: int


class FitLorentzianRequest(BaseModel):
    spectrum_csv: str


class FitLorentzianResponse(BaseModel):
    voltage_V: float
    fit: LorentzianFitModel


class StarkPoint(BaseModel):
    e_MVpm: float
    f_GHz: float
    sigma_f_GHz: float | None = None


class FitStarkRequest(BaseModel):
    points: list[StarkPoint]
    rel_field_uncertainty: float = 0.07


class FitSeriesRequest(BaseModel):
    spectra_csv: list[str]
    kappa_MVpm_per_V: float
    rel_field_uncertainty: float = 0.07


class SeriesFitRecord(BaseModel):
    voltage_V: float
    ok: bool
    error: str | None = None
    fit: LorentzianFitModel | None = None


class FitSeriesResponse(BaseModel):
    fits: list[SeriesFitRecord]
    stark: StarkFitModel
    failed_voltages: list[float]
    table_csv: str


class EmitterModel(BaseModel):
    id: str
    f_max_GHz: float
    alpha: float
    e0: float
    kappa: float | None = None

    def to_domain(self, label: TransitionLabel) -> Emitter:
        return Emitter(
            id=self.id, stark={label: StarkParams(self.f_max_GHz, self.alpha, self.e0)}
        )


class EnsembleSpecModel(BaseModel):
    n: int = 9
    f0_center_GHz: float = 406700.0
    f0_fwhm_GHz: float = 10.0
    alpha_min: float = 1.4
    alpha_max: float = 15.0
    e0_min_MVpm: float = 0.0
    e0_max_MVpm: float = 6.0
    correlation: float = 0.0
    seed: int = 42

    def to_domain(self) -> EnsembleSpec:
        return EnsembleSpec(
            n=self.n,
            f0_center_ghz=self.f0_center_GHz,
            f0_fwhm_ghz=self.f0_fwhm_GHz,
            alpha_range_mhz=(self.alpha_min, self.alpha_max),
            e0_range_mvpm=(self.e0_min_MVpm, self.e0_max_MVpm),
            alpha_e0_correlation=self.correlation,
            seed=self.seed,
        )


class TuningModel(BaseModel):
    v_min_V: float = 0.0
    v_max_V: float = 100.0
    kappa_MVpm_per_V: float = 0.21
    match_tolerance_MHz: float = 90.0

    def to_domain(self, kappa_map: dict[str, float] | None = None) -> TuningConstraints:
        return TuningConstraints(
            v_range_v=(self.v_min_V, self.v_max_V),
            kappa_mvpm_per_v=kappa_map if kappa_map else self.kappa_MVpm_per_V,
            match_tolerance_mhz=self.match_tolerance_MHz,
        )


class MatchRequest(BaseModel):
    transition: Literal["A", "B", "C", "D"] = "C"
    emitters: list[EmitterModel] | None = None
    ensemble: EnsembleSpecModel | None = None
    tuning: TuningModel = Field(default_factory=TuningModel)
    objective: Literal["max-matched", "min-max-residual"] = "max-matched"
    oracle: bool = False


class AssignmentModel(BaseModel):
    id: str
    voltage_V: float
    achieved_GHz: float
    residual_MHz: float
    matched: bool


class MatchPlanModel(BaseModel):
    target_GHz: float
    objective: str
    objective_value_MHz: float
    matched_count: int
    n_emitters: int
    assignments: list[AssignmentModel]


class MatchResponse(BaseModel):
    plan: MatchPlanModel
    oracle_plan: MatchPlanModel | None
    ensemble_csv: str


class SampleEnsembleRequest(BaseModel):
    spec: EnsembleSpecModel = Field(default_factory=EnsembleSpecModel)
    transition: Literal["A", "B", "C", "D"] = "C"
    kappa_MVpm_per_V: float = 0.21


class SampleEnsembleResponse(BaseModel):
    emitters: list[EmitterModel]
    csv: str


class HealthResponse(BaseModel):
    status: str
    version: str
