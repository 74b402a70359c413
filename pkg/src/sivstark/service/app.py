"""FastAPI service exposing the toolkit pipeline.

Domain errors map onto HTTP codes: semantic input problems give 422,
numerical/convergence failures give 409 (the CLI turns these into exit
codes 1 and 2).
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..constants import MHZ_PER_GHZ
from ..electrostatics import (
    calibrate_kappa,
    field_at,
    line_cut_csv,
    lorentz_local_field,
    solve_potential,
    FieldProbe,
)
from ..errors import (
    DegenerateQuadratic,
    IllConditioned,
    InsufficientSpread,
    LineOutsideScan,
    NoConvergence,
    NoPeakFound,
    NotConverged,
    SivstarkError,
    Unreachable,
)
from ..fitting import fit_lorentzian, fit_stark
from ..matcher import (
    ensemble_to_csv,
    match_frequencies,
    match_frequencies_oracle,
    sample_ensemble,
)
from ..model import Emitter, TransitionLabel, propagate_field_uncertainty
from ..serialize import lorentzian_fit_to_dict, stark_fit_to_dict
from ..spectra import expected_rate, generate_ple_scan, spectrum_from_csv, spectrum_to_csv
from . import schemas

NUMERICAL_ERRORS = (
    NoConvergence,
    LineOutsideScan,
    NotConverged,
    NoPeakFound,
    InsufficientSpread,
    DegenerateQuadratic,
    IllConditioned,
    Unreachable,
)

ORACLE_MAX_EMITTERS = 12


class TooFewUsableSpectra(SivstarkError):
    def __init__(self, failed_voltages):
        self.failed_voltages = list(failed_voltages)
        super().__init__(
            "fewer than 4 spectra could be fitted; failed voltages: "
            + ", ".join(f"{v:g}" for v in self.failed_voltages)
        )


def _error_payload(exc: Exception) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, (LineOutsideScan,)):
        payload["voltages"] = exc.voltages
    if isinstance(exc, TooFewUsableSpectra):
        payload["failed_voltages"] = exc.failed_voltages
    if isinstance(exc, NoConvergence):
        payload["iterations"] = exc.iterations
        payload["residual"] = exc.residual
    return payload


def _fit_model(fit) -> schemas.LorentzianFitModel:
    return schemas.LorentzianFitModel(**lorentzian_fit_to_dict(fit))


def _stark_model(stark, rel_field_uncertainty: float) -> schemas.StarkFitModel:
    systematic = abs(stark.alpha_mhz) * propagate_field_uncertainty(rel_field_uncertainty)
    return schemas.StarkFitModel(**stark_fit_to_dict(stark, systematic))


def _plan_model(plan) -> schemas.MatchPlanModel:
    d = plan.to_dict()
    return schemas.MatchPlanModel(
        target_GHz=d["target_GHz"],
        objective=d["objective"],
        objective_value_MHz=d["objective_value_MHz"],
        matched_count=d["matched_count"],
        n_emitters=d["n_emitters"],
        assignments=[schemas.AssignmentModel(**a) for a in d["assignments"]],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="sivstark", version=__version__)

    @app.exception_handler(SivstarkError)
    def _domain_error(request, exc: SivstarkError):
        status = 409 if isinstance(exc, NUMERICAL_ERRORS + (TooFewUsableSpectra,)) else 422
        return JSONResponse(status_code=status, content={"detail": _error_payload(exc)})

    @app.exception_handler(ValueError)
    def _value_error(request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": _error_payload(exc)})

    @app.exception_handler(KeyError)
    def _key_error(request, exc: KeyError):
        return JSONResponse(status_code=422, content={"detail": _error_payload(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/field", response_model=schemas.FieldResponse)
    def field(req: schemas.FieldRequest):
        geometry = req.geometry.to_domain()
        fmap = solve_potential(geometry, req.resolution_cells_per_gap)

        def readout(x_um: float) -> schemas.ProbeReadout:
            probe = FieldProbe(x_um=x_um, depth_nm=req.probe.depth_nm)
            ex, ey = field_at(fmap, probe)
            mag = math.hypot(ex, ey)
            local = lorentz_local_field(mag, geometry.epsilon_diamond)
            calibrated = calibrate_kappa(geometry, probe, field_map=fmap)
            return schemas.ProbeReadout(
                x_um=x_um,
                depth_nm=req.probe.depth_nm,
                e_ext_x_MVpm=ex,
                e_ext_y_MVpm=ey,
                e_ext_mag_MVpm=mag,
                e_local_MVpm=local,
                kappa_MVpm_per_V=calibrated.kappa_mvpm_per_v,
            )

        profile = None
        if req.include_profile:
            profile = line_cut_csv(fmap, req.probe.depth_nm / 1000.0)
        return schemas.FieldResponse(
            probe=readout(req.probe.x_um),
            extra_probes=[readout(x) for x in req.extra_probe_x_um],
            iterations=fmap.convergence.iterations,
            residual=fmap.convergence.residual,
            spacing_um=fmap.spacing_um,
            profile_csv=profile,
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        label = TransitionLabel(req.transition)
        params = req.stark.to_domain()
        emitter = Emitter(id=req.emitter_id, stark={label: params})
        probe = FieldProbe(kappa_mvpm_per_v=req.kappa_MVpm_per_V)
        lineshape = req.lineshape.to_domain()
        amplitude = req.amplitude.to_domain()
        detunings = np.linspace(req.detuning_min_GHz, req.detuning_max_GHz, req.points)
        reference = req.reference_GHz if req.reference_GHz is not None else params.f_max_ghz

        records = []
        bad = []
        for i, v in enumerate(req.voltages_V):
            seed = req.seed ^ i
            try:
                spectrum = generate_ple_scan(
                    emitter,
                    label,
                    probe,
                    float(v),
                    detunings,
                    lineshape,
                    amplitude,
                    req.integration_time_s,
                    seed=seed,
                    dark_rate_cps=req.dark_rate_cps,
                    reference_ghz=reference,
                )
            except LineOutsideScan:
                bad.append(float(v))
                continue
            rate, center, fwhm = expected_rate(
                emitter,
                label,
                probe,
                float(v),
                detunings,
                lineshape,
                amplitude,
                req.dark_rate_cps,
                reference,
            )
            records.append(
                schemas.SpectrumRecord(
                    voltage_V=float(v),
                    seed=seed,
                    center_GHz=center,
                    fwhm_MHz=fwhm,
                    peak_rate_cps=float(rate.max()),
                    csv=spectrum_to_csv(spectrum),
                )
            )
        if bad:
            raise LineOutsideScan(bad)
        return schemas.SimulateResponse(
            spectra=records, transition=label.value, reference_GHz=reference
        )

    @app.post("/fit/lorentzian", response_model=schemas.FitLorentzianResponse)
    def fit_single(req: schemas.FitLorentzianRequest):
        spectrum = spectrum_from_csv(req.spectrum_csv)
        fit = fit_lorentzian(spectrum)
        return schemas.FitLorentzianResponse(
            voltage_V=spectrum.voltage_v, fit=_fit_model(fit)
        )

    @app.post("/fit/stark", response_model=schemas.StarkFitModel)
    def fit_stark_points(req: schemas.FitStarkRequest):
        e = np.array([p.e_MVpm for p in req.points])
        f = np.array([p.f_GHz for p in req.points])
        sigmas = [p.sigma_f_GHz for p in req.points]
        sigma_f = None
        if all(s is not None for s in sigmas) and sigmas:
            sigma_f = np.array(sigmas, dtype=float)
        stark = fit_stark(e, f, sigma_f)
        return _stark_model(stark, req.rel_field_uncertainty)

    @app.post("/fit/series", response_model=schemas.FitSeriesResponse)
    def fit_series(req: schemas.FitSeriesRequest):
        fits = []
        usable = []
        failed = []
        for csv_text in req.spectra_csv:
            spectrum = spectrum_from_csv(csv_text)
            v = spectrum.voltage_v
            try:
                fit = fit_lorentzian(spectrum)
            except (NoPeakFound, NotConverged, IllConditioned, ValueError) as exc:
                failed.append(v)
                fits.append(
                    schemas.SeriesFitRecord(
                        voltage_V=v, ok=False, error=f"{type(exc).__name__}: {exc}"
                    )
                )
                continue
            fits.append(schemas.SeriesFitRecord(voltage_V=v, ok=True, fit=_fit_model(fit)))
            usable.append((req.kappa_MVpm_per_V * v, fit))
        if len(usable) < 4:
            raise TooFewUsableSpectra(failed)
        usable.sort(key=lambda item: item[0])
        e = np.array([item[0] for item in usable])
        centers = np.array([item[1].center_ghz for item in usable])
        sigma = np.array([max(item[1].center_sigma_ghz, 1e-12) for item in usable])
        stark = fit_stark(e, centers, sigma)

        lines = [
            "voltage_V,e_local_MVpm,shift_GHz,center_GHz,center_sigma_GHz,"
            "amplitude_cps,amplitude_sigma_cps,fwhm_MHz,fwhm_sigma_MHz"
        ]
        for e_i, fit in usable:
            shift = fit.center_ghz - stark.f_max_ghz
            lines.append(
                f"{e_i / req.kappa_MVpm_per_V:.9g},{e_i:.9g},{shift:.9g},"
                f"{fit.center_ghz:.9g},{fit.center_sigma_ghz:.9g},"
                f"{fit.amplitude:.9g},{fit.amplitude_sigma:.9g},"
                f"{fit.fwhm_mhz:.9g},{fit.fwhm_sigma_mhz:.9g}"
            )
        return schemas.FitSeriesResponse(
            fits=fits,
            stark=_stark_model(stark, req.rel_field_uncertainty),
            failed_voltages=failed,
            table_csv="\n".join(lines) + "\n",
        )

    @app.post("/match", response_model=schemas.MatchResponse)
    def match(req: schemas.MatchRequest):
        label = TransitionLabel(req.transition)
        if req.emitters is not None:
            emitters = [m.to_domain(label) for m in req.emitters]
            kappa_map = {
                m.id: m.kappa for m in req.emitters if m.kappa is not None
            }
            if kappa_map and len(kappa_map) != len(req.emitters):
                for m in req.emitters:
                    kappa_map.setdefault(m.id, req.tuning.kappa_MVpm_per_V)
            tc = req.tuning.to_domain(kappa_map or None)
        else:
            spec = (req.ensemble or schemas.EnsembleSpecModel()).to_domain()
            emitters = sample_ensemble(spec, label)
            tc = req.tuning.to_domain()
        if not emitters:
            raise ValueError("cannot match an empty ensemble")
        plan = match_frequencies(emitters, label, tc, req.objective)
        oracle_plan = None
        if req.oracle:
            if len(emitters) > ORACLE_MAX_EMITTERS:
                raise ValueError(
                    f"oracle mode is test-scale only (n <= {ORACLE_MAX_EMITTERS})"
                )
            oracle_plan = _plan_model(
                match_frequencies_oracle(emitters, label, tc, req.objective)
            )
        return schemas.MatchResponse(
            plan=_plan_model(plan),
            oracle_plan=oracle_plan,
            ensemble_csv=ensemble_to_csv(emitters, label, tc),
        )

    @app.post("/ensemble/sample", response_model=schemas.SampleEnsembleResponse)
    def ensemble_endpoint(req: schemas.SampleEnsembleRequest):
        label = TransitionLabel(req.transition)
        emitters = sample_ensemble(req.spec.to_domain(), label)
        tc = schemas.TuningModel(kappa_MVpm_per_V=req.kappa_MVpm_per_V).to_domain()
        models = [
            schemas.EmitterModel(
                id=em.id,
                f_max_GHz=em.stark[label].f_max_ghz,
                alpha=em.stark[label].alpha_mhz,
                e0=em.stark[label].e0_mvpm,
                kappa=req.kappa_MVpm_per_V,
            )
            for em in emitters
        ]
        return schemas.SampleEnsembleResponse(
            emitters=models, csv=ensemble_to_csv(emitters, label, tc)
        )

    return app


app = create_app()
