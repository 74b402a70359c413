import numpy as np
import pytest
from fastapi.testclient import TestClient

from sivstark.service.app import app
from sivstark.spectra import spectrum_from_csv


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_field_parallel_plate(client):
    resp = client.post(
        "/field",
        json={
            "geometry": {
                "kind": "parallel_plate",
                "gap_um": 1.0,
                "electrode_width_um": 1.0,
                "applied_voltage_V": 1.0,
                "epsilon_diamond": 1.0,
                "domain_width_um": 1.0,
                "domain_height_above_um": 1.0,
                "domain_depth_below_um": 1.0,
            },
            "probe": {"x_um": 0.5, "depth_nm": 500.0},
            "resolution_cells_per_gap": 64,
            "extra_probe_x_um": [0.25, 0.75],
            "include_profile": True,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["probe"]["kappa_MVpm_per_V"] == pytest.approx(1.0, rel=1e-6)
    assert len(body["extra_probes"]) == 2
    assert body["residual"] <= 1e-8
    assert body["profile_csv"].startswith("x_um,y_um,phi_V,Ex_MVpm,Ey_MVpm")


def test_field_rejects_bad_geometry(client):
    resp = client.post(
        "/field",
        json={"geometry": {"gap_um": -1.0}, "probe": {"x_um": 1.9, "depth_nm": 100.0}},
    )
    assert resp.status_code == 422


def test_simulate_fit_round_trip(client):
    sim = client.post(
        "/simulate",
        json={
            "stark": {"f_max_GHz": 406700.0, "alpha_MHz_per_MVpm2": 15.0, "e0_MVpm": 3.0},
            "kappa_MVpm_per_V": 0.21,
            "voltages_V": [10.0 * k for k in range(11)],
            "detuning_min_GHz": -8.0,
            "detuning_max_GHz": 2.0,
            "points": 200,
            "integration_time_s": 0.05,
            "seed": 99,
        },
    )
    assert sim.status_code == 200
    body = sim.json()
    assert len(body["spectra"]) == 11
    assert body["spectra"][3]["seed"] == 99 ^ 3
    centers = [rec["center_GHz"] for rec in body["spectra"]]
    assert max(centers) - min(centers) > 4.0

    fit = client.post(
        "/fit/series",
        json={
            "spectra_csv": [rec["csv"] for rec in body["spectra"]],
            "kappa_MVpm_per_V": 0.21,
            "rel_field_uncertainty": 0.07,
        },
    )
    assert fit.status_code == 200
    stark = fit.json()["stark"]
    assert stark["alpha_MHz_per_MVpm2"] == pytest.approx(15.0, rel=0.05)
    assert stark["e0_MVpm"] == pytest.approx(3.0, rel=0.10)
    assert stark["alpha_sigma_systematic_MHz_per_MVpm2"] == pytest.approx(
        0.14 * stark["alpha_MHz_per_MVpm2"], rel=1e-9
    )
    assert len(stark["covariance"]) == 9
    table = fit.json()["table_csv"].splitlines()
    assert table[0].startswith("voltage_V,e_local_MVpm,shift_GHz,center_GHz")
    assert len(table) == 12


def test_simulate_deterministic(client):
    payload = {
        "stark": {"f_max_GHz": 0.0, "alpha_MHz_per_MVpm2": 15.0, "e0_MVpm": 0.0},
        "kappa_MVpm_per_V": 0.21,
        "voltages_V": [0.0, 50.0],
        "detuning_min_GHz": -8.0,
        "detuning_max_GHz": 2.0,
        "points": 120,
        "integration_time_s": 0.05,
        "seed": 5,
    }
    a = client.post("/simulate", json=payload).json()
    b = client.post("/simulate", json=payload).json()
    assert a == b


def test_simulate_line_outside_scan(client):
    resp = client.post(
        "/simulate",
        json={
            "stark": {"f_max_GHz": 0.0, "alpha_MHz_per_MVpm2": 15.0, "e0_MVpm": 0.0},
            "kappa_MVpm_per_V": 0.21,
            "voltages_V": [0.0, 100.0],
            "detuning_min_GHz": -0.5,
            "detuning_max_GHz": 0.5,
            "points": 64,
            "integration_time_s": 0.05,
            "seed": 5,
        },
    )
    assert resp.status_code == 409
    assert resp.json()["detail"]["voltages"] == [100.0]


def test_fit_single_spectrum(client):
    sim = client.post(
        "/simulate",
        json={
            "stark": {"f_max_GHz": 0.0, "alpha_MHz_per_MVpm2": 15.0, "e0_MVpm": 0.0},
            "kappa_MVpm_per_V": 0.21,
            "voltages_V": [60.0],
            "detuning_min_GHz": -8.0,
            "detuning_max_GHz": 2.0,
            "points": 200,
            "integration_time_s": "inf",
            "seed": 1,
        },
    ).json()
    csv_text = sim["spectra"][0]["csv"]
    spectrum = spectrum_from_csv(csv_text)
    assert np.isinf(spectrum.integration_time_s)
    resp = client.post("/fit/lorentzian", json={"spectrum_csv": csv_text})
    assert resp.status_code == 200
    body = resp.json()
    assert body["voltage_V"] == 60.0
    assert body["fit"]["center_GHz"] == pytest.approx(
        -15.0 * (0.21 * 60.0) ** 2 / 1000.0, abs=1e-6
    )


def test_fit_series_too_few_usable(client):
    flat = "# voltage_V=0 seed=0 t_int_s=1\ndetuning_GHz,counts\n" + "\n".join(
        f"{x / 10.0},35" for x in range(-50, 51)
    )
    resp = client.post(
        "/fit/series", json={"spectra_csv": [flat], "kappa_MVpm_per_V": 0.21}
    )
    assert resp.status_code == 409
    assert resp.json()["detail"]["error"] == "TooFewUsableSpectra"


def test_fit_stark_endpoint(client):
    e = np.linspace(0.0, 21.0, 11)
    f = 406700.0 - 15.0 / 1000.0 * (e - 3.0) ** 2
    resp = client.post(
        "/fit/stark",
        json={"points": [{"e_MVpm": float(ei), "f_GHz": float(fi)} for ei, fi in zip(e, f)]},
    )
    assert resp.status_code == 200
    assert resp.json()["alpha_MHz_per_MVpm2"] == pytest.approx(15.0, rel=1e-9)
    # collinear input: vertex form unidentifiable
    resp = client.post(
        "/fit/stark",
        json={"points": [{"e_MVpm": float(ei), "f_GHz": 1.0} for ei in e]},
    )
    assert resp.status_code == 409
    assert resp.json()["detail"]["error"] == "DegenerateQuadratic"


def test_match_with_sampled_ensemble(client):
    resp = client.post(
        "/match",
        json={
            "ensemble": {"n": 5, "seed": 3, "f0_fwhm_GHz": 2.0},
            "tuning": {"v_min_V": 0.0, "v_max_V": 100.0, "kappa_MVpm_per_V": 0.21,
                       "match_tolerance_MHz": 90.0},
            "objective": "max-matched",
            "oracle": True,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["plan"]["n_emitters"] == 5
    assert body["oracle_plan"] is not None
    assert body["plan"]["matched_count"] >= body["oracle_plan"]["matched_count"]
    assert body["ensemble_csv"].startswith("id,f_max_GHz,alpha,e0,kappa")


def test_match_single_emitter_explicit(client):
    resp = client.post(
        "/match",
        json={
            "emitters": [{"id": "Q", "f_max_GHz": 406700.0, "alpha": 15.0, "e0": 3.0}],
            "objective": "max-matched",
        },
    )
    body = resp.json()
    assert body["plan"]["matched_count"] == 1
    assert body["plan"]["assignments"][0]["voltage_V"] == pytest.approx(3.0 / 0.21)


def test_sample_ensemble_endpoint(client):
    resp = client.post("/ensemble/sample", json={"spec": {"n": 4, "seed": 2}})
    body = resp.json()
    assert len(body["emitters"]) == 4
    assert body["csv"].count("\n") == 5
