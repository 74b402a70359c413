import math

import numpy as np
import pytest

from sivstark.electrostatics import FieldProbe
from sivstark.errors import LineOutsideScan
from sivstark.model import Emitter, StarkParams, TransitionLabel
from sivstark.spectra import (
    AmplitudeModel,
    LineShapeParams,
    Spectrum,
    amplitude_model,
    expected_rate,
    generate_ple_scan,
    generate_voltage_series,
    linewidth_model,
    lorentzian,
    spectrum_from_csv,
    spectrum_to_csv,
)

L = TransitionLabel


@pytest.fixture
def emitter():
    return Emitter(id="E4", stark={L.C: StarkParams(406700.0, 15.0, 3.0)})


@pytest.fixture
def probe():
    return FieldProbe(x_um=1.9, depth_nm=100.0, kappa_mvpm_per_v=0.21)


DET = np.linspace(-8.0, 2.0, 200)


def test_lorentzian_peak_and_half_maximum():
    assert lorentzian(0.0, 0.0, 400.0, 1000.0) == pytest.approx(1000.0)
    assert lorentzian(0.2, 0.0, 400.0, 1000.0) == pytest.approx(500.0)
    assert lorentzian(-0.2, 0.0, 400.0, 1000.0) == pytest.approx(500.0)


def test_lorentzian_integral():
    # integral over all detunings is amplitude * pi * fwhm / 2
    fwhm_ghz = 0.4
    x = np.linspace(-400.0, 400.0, 4_000_001)
    y = lorentzian(x, 0.0, 400.0, 1000.0)
    expected = 1000.0 * math.pi * fwhm_ghz / 2.0
    assert np.trapezoid(y, x) == pytest.approx(expected, rel=1e-3)


def test_linewidth_model():
    ls = LineShapeParams()
    assert linewidth_model(ls, 3.0, 3.0) == pytest.approx(400.0)
    # default slope keeps the 30 MV/m width inside the observed band
    assert 500.0 <= linewidth_model(ls, 33.0, 3.0) <= 600.0
    flat = LineShapeParams(gamma_slope_mhz_per_mvpm=0.0)
    assert linewidth_model(flat, 45.0, 0.0) == linewidth_model(flat, 0.0, 0.0)


def test_amplitude_model_gate():
    am = AmplitudeModel()
    assert amplitude_model(am, -100.0) < 0.02 * am.a_max_cps
    assert amplitude_model(am, 75.0) >= 0.95 * am.a_max_cps
    # huge rolloff width: non-decreasing everywhere
    wide = AmplitudeModel(w_off_v=1e9)
    vs = np.linspace(-100.0, 300.0, 200)
    values = [amplitude_model(wide, v) for v in vs]
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


def test_scan_deterministic(emitter, probe):
    kwargs = dict(
        detunings_ghz=DET,
        lineshape=LineShapeParams(),
        amplitude=AmplitudeModel(),
        integration_time_s=0.05,
        seed=77,
    )
    a = generate_ple_scan(emitter, L.C, probe, 40.0, **kwargs)
    b = generate_ple_scan(emitter, L.C, probe, 40.0, **kwargs)
    assert np.array_equal(a.counts, b.counts)
    c = generate_ple_scan(emitter, L.C, probe, 40.0, **{**kwargs, "seed": 78})
    assert not np.array_equal(a.counts, c.counts)


def test_infinite_integration_time_is_noiseless(emitter, probe):
    ls, am = LineShapeParams(), AmplitudeModel()
    s = generate_ple_scan(emitter, L.C, probe, 40.0, DET, ls, am, math.inf, seed=1)
    rate, _, _ = expected_rate(emitter, L.C, probe, 40.0, DET, ls, am)
    assert np.array_equal(s.counts, rate)
    # and the independent hand evaluation agrees to rounding
    e_local = 0.21 * 40.0
    p = emitter.stark[L.C]
    center = -(p.alpha_mhz / 1000.0) * (e_local - p.e0_mvpm) ** 2
    manual = lorentzian(DET, center, linewidth_model(ls, e_local, p.e0_mvpm),
                        amplitude_model(am, 40.0)) + 700.0
    assert np.allclose(s.counts, manual, rtol=1e-9)


def test_expected_counts_scale_with_integration_time(emitter, probe):
    ls, am = LineShapeParams(), AmplitudeModel()
    totals = {}
    for t in (0.05, 0.5):
        reps = [
            generate_ple_scan(emitter, L.C, probe, 60.0, DET, ls, am, t, seed=s).counts.sum()
            for s in range(40)
        ]
        totals[t] = np.mean(reps)
    assert totals[0.5] / totals[0.05] == pytest.approx(10.0, rel=0.02)


def test_noiseless_spectrum_symmetric(emitter, probe):
    # symmetric grid about the line center
    p = emitter.stark[L.C]
    e_local = 0.21 * 40.0
    center = 406700.0 - p.alpha_mhz / 1000.0 * (e_local - p.e0_mvpm) ** 2 - 406700.0
    grid = center + np.linspace(-3.0, 3.0, 201)
    s = generate_ple_scan(
        emitter, L.C, probe, 40.0, grid, LineShapeParams(), AmplitudeModel(), math.inf, seed=0
    )
    assert np.allclose(s.counts, s.counts[::-1], rtol=1e-12)


def test_line_outside_scan(emitter, probe):
    narrow = np.linspace(-0.3, 0.3, 64)
    with pytest.raises(LineOutsideScan):
        generate_ple_scan(
            emitter, L.C, probe, 100.0, narrow, LineShapeParams(), AmplitudeModel(),
            0.05, seed=0,
        )


def test_voltage_series(emitter, probe):
    ls, am = LineShapeParams(), AmplitudeModel()
    assert generate_voltage_series(emitter, L.C, probe, [], DET, ls, am, 0.05, 1) == []
    volts = [10.0 * k for k in range(11)]
    series = generate_voltage_series(emitter, L.C, probe, volts, DET, ls, am, math.inf, 5)
    assert len(series) == 11
    centers = [s.detunings_ghz[np.argmax(s.counts)] for s in series]
    # vertex at E0/kappa ~ 14 V; beyond it centers decrease monotonically
    assert all(b < a for a, b in zip(centers[2:], centers[3:]))
    # seeds derive from root ^ index
    noisy = generate_voltage_series(emitter, L.C, probe, volts, DET, ls, am, 0.05, 5)
    assert [s.noise_seed for s in noisy] == [5 ^ i for i in range(11)]


def test_voltage_series_monotone_for_nonpositive_e0(probe):
    # with E0 <= 0 the whole 0..100 V range sits right of the vertex
    em = Emitter(id="Z", stark={L.C: StarkParams(406700.0, 15.0, 0.0)})
    ls, am = LineShapeParams(), AmplitudeModel()
    volts = [10.0 * k for k in range(11)]
    series = generate_voltage_series(em, L.C, probe, volts, DET, ls, am, math.inf, 5)
    centers = [s.detunings_ghz[np.argmax(s.counts)] for s in series]
    assert all(b <= a for a, b in zip(centers, centers[1:]))


def test_series_aggregates_outside_scan_errors(emitter, probe):
    narrow = np.linspace(-0.5, 0.5, 64)
    with pytest.raises(LineOutsideScan) as err:
        generate_voltage_series(
            emitter, L.C, probe, [0.0, 90.0, 100.0], narrow,
            LineShapeParams(), AmplitudeModel(), 0.05, 1,
        )
    assert err.value.voltages == [90.0, 100.0]


def test_negative_voltage_line_buried_in_dark_noise(emitter, probe):
    # charge-state gate: at negative bias the line's expected contribution
    # stays below 3 sigma of the per-bin dark shot noise
    ls, am = LineShapeParams(), AmplitudeModel()
    t = 0.05
    dark_mean = 700.0 * t
    peak_counts = amplitude_model(am, -50.0) * t
    assert peak_counts < 3.0 * math.sqrt(dark_mean)
    s = generate_ple_scan(emitter, L.C, probe, -50.0, DET, ls, am, t, seed=3)
    from sivstark.errors import NoPeakFound
    from sivstark.fitting import detect_peaks

    with pytest.raises(NoPeakFound):
        detect_peaks(s)


def test_total_counts_monotone_in_gate_voltage():
    values = [
        amplitude_model(AmplitudeModel(v_on_v=v_on), 20.0) for v_on in (0.0, 5.0, 10.0, 30.0)
    ]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_csv_round_trip(emitter, probe):
    s = generate_ple_scan(
        emitter, L.C, probe, 40.0, DET, LineShapeParams(), AmplitudeModel(), 0.05, seed=11
    )
    text = spectrum_to_csv(s)
    assert text.startswith("# voltage_V=40 seed=11 t_int_s=0.05\ndetuning_GHz,counts\n")
    back = spectrum_from_csv(text)
    assert back.voltage_v == s.voltage_v
    assert back.noise_seed == s.noise_seed
    assert back.integration_time_s == s.integration_time_s
    assert np.allclose(back.detunings_ghz, s.detunings_ghz, rtol=1e-8)
    assert np.array_equal(back.counts, s.counts)
    # byte-stable round trip
    assert spectrum_to_csv(back) == text


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum(0.0, np.array([0.0, 0.0, 1.0]), np.zeros(3), 1.0, 0)
    with pytest.raises(ValueError):
        Spectrum(0.0, np.array([0.0, 1.0]), np.array([-1.0, 0.0]), 1.0, 0)
    with pytest.raises(ValueError):
        LineShapeParams(gamma0_mhz=50.0)  # below the transform limit
    with pytest.raises(ValueError):
        AmplitudeModel(a_max_cps=0.0)
