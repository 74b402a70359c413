"""Command-line client for the sivstark service.

All compute goes through the HTTP service layer: by default an in-process
ASGI transport (no server needed), or a remote instance via ``--server``.
Subcommands read one sectioned config file, post requests, and write the
returned artifacts atomically.

Exit codes: 0 success, 1 config/input error, 2 numerical or convergence
failure.
"""

from __future__ import annotations

import argparse
import glob
import json
import math
import os
import sys

import httpx

from . import __version__
from .config import EXAMPLE_CONFIG, RunConfig, load_config
from .errors import ConfigError
from .serialize import atomic_write, canonical_json, sha256_hex


class CliFailure(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def _make_client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        # starlette's TestClient import warns about httpx pinning; harmless here
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code == 200:
        return response.json()
    try:
        detail = response.json().get("detail")
    except json.JSONDecodeError:
        detail = response.text
    message = json.dumps(detail) if isinstance(detail, (dict, list)) else str(detail)
    raise CliFailure(
        1 if response.status_code == 422 else 2,
        f"{path} failed ({response.status_code}): {message}",
    )


def _geometry_payload(cfg: RunConfig) -> dict:
    g = cfg.geometry()
    return {
        "gap_um": g.gap_um,
        "electrode_width_um": g.electrode_width_um,
        "applied_voltage_V": g.applied_voltage_v,
        "epsilon_diamond": g.epsilon_diamond,
        "domain_width_um": g.domain_um[0],
        "domain_height_above_um": g.domain_um[1],
        "domain_depth_below_um": g.domain_um[2],
        "kind": g.kind,
    }


def cmd_field(args, client) -> int:
    cfg = load_config(args.config)
    probe = cfg.probe()
    payload = {
        "geometry": _geometry_payload(cfg),
        "probe": {"x_um": probe.x_um, "depth_nm": probe.depth_nm},
        "resolution_cells_per_gap": cfg.resolution(),
        "extra_probe_x_um": [],
        "include_profile": True,
    }
    result = _post(client, "/field", payload)
    out = args.out or "."
    report = {
        "config_sha256": sha256_hex(cfg.raw_text),
        "geometry": payload["geometry"],
        "resolution_cells_per_gap": payload["resolution_cells_per_gap"],
        "probe": result["probe"],
        "extra_probes": result["extra_probes"],
        "convergence": {
            "iterations": result["iterations"],
            "residual": result["residual"],
        },
        "spacing_um": result["spacing_um"],
    }
    atomic_write(os.path.join(out, "field_report.json"), canonical_json(report))
    atomic_write(os.path.join(out, "field_profile.csv"), result["profile_csv"])
    p = result["probe"]
    print(
        f"E_ext = {p['e_ext_mag_MVpm']:.4f} MV/m (Ex {p['e_ext_x_MVpm']:.4f}, "
        f"Ey {p['e_ext_y_MVpm']:.4f}) at x = {p['x_um']:g} um, "
        f"depth = {p['depth_nm']:g} nm"
    )
    print(f"E_local = {p['e_local_MVpm']:.4f} MV/m, kappa = {p['kappa_MVpm_per_V']:.6f} MV/m per V")
    print(f"wrote {out}/field_report.json, {out}/field_profile.csv")
    return 0


def cmd_simulate(args, client) -> int:
    cfg = load_config(args.config)
    label = cfg.transition()
    emitter = cfg.emitter()
    params = emitter.stark[label]
    detunings = cfg.detunings()
    seed = args.seed if args.seed is not None else cfg.scan_seed()
    tuning = cfg.tuning()
    t_int = cfg.integration_time()
    payload = {
        "emitter_id": emitter.id,
        "transition": label.value,
        "stark": {
            "f_max_GHz": params.f_max_ghz,
            "alpha_MHz_per_MVpm2": params.alpha_mhz,
            "e0_MVpm": params.e0_mvpm,
        },
        "kappa_MVpm_per_V": tuning.kappa_for(emitter.id),
        "voltages_V": cfg.voltages(),
        "detuning_min_GHz": float(detunings[0]),
        "detuning_max_GHz": float(detunings[-1]),
        "points": int(detunings.size),
        "integration_time_s": "inf" if math.isinf(t_int) else t_int,
        "seed": seed,
        "dark_rate_cps": cfg.dark_rate(),
        "lineshape": {
            "gamma0_MHz": cfg.lineshape().gamma0_mhz,
            "gamma_slope_MHz_per_MVpm": cfg.lineshape().gamma_slope_mhz_per_mvpm,
            "transform_limit_MHz": cfg.lineshape().transform_limit_mhz,
        },
        "amplitude": {
            "a_max_cps": cfg.amplitude().a_max_cps,
            "v_on_V": cfg.amplitude().v_on_v,
            "w_on_V": cfg.amplitude().w_on_v,
            "v_peak_V": cfg.amplitude().v_peak_v,
            "w_off_V": cfg.amplitude().w_off_v,
        },
    }
    result = _post(client, "/simulate", payload)
    out = args.out or "."
    files = []
    for i, record in enumerate(result["spectra"]):
        name = f"spectrum_{i:03d}_v{record['voltage_V']:g}.csv"
        atomic_write(os.path.join(out, name), record["csv"])
        files.append(
            {
                "file": name,
                "voltage_V": record["voltage_V"],
                "seed": record["seed"],
                "center_GHz": record["center_GHz"],
                "fwhm_MHz": record["fwhm_MHz"],
            }
        )
    manifest = {
        "config_sha256": sha256_hex(cfg.raw_text),
        "emitter": emitter.id,
        "transition": result["transition"],
        "reference_GHz": result["reference_GHz"],
        "root_seed": seed,
        "n_spectra": len(files),
        "files": files,
    }
    atomic_write(os.path.join(out, "manifest.json"), canonical_json(manifest))
    print(f"wrote {len(files)} spectra and manifest.json to {out}")
    return 0


def cmd_fit(args, client) -> int:
    cfg = load_config(args.config)
    pattern = os.path.join(args.spectra, "spectrum_*.csv")
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise CliFailure(1, f"no spectra matching {pattern}")
    spectra_csv = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as fh:
            spectra_csv.append(fh.read())
    tuning = cfg.tuning()
    emitter = cfg.emitter()
    payload = {
        "spectra_csv": spectra_csv,
        "kappa_MVpm_per_V": tuning.kappa_for(emitter.id),
        "rel_field_uncertainty": 0.07,
    }
    result = _post(client, "/fit/series", payload)
    out = args.out or args.spectra
    fits = {
        "config_sha256": sha256_hex(cfg.raw_text),
        "kappa_MVpm_per_V": payload["kappa_MVpm_per_V"],
        "fits": result["fits"],
        "failed_voltages": result["failed_voltages"],
    }
    atomic_write(os.path.join(out, "fits.json"), canonical_json(fits))
    atomic_write(os.path.join(out, "stark.json"), canonical_json(result["stark"]))
    atomic_write(os.path.join(out, "fig2_table.csv"), result["table_csv"])
    stark = result["stark"]
    print(
        f"alpha = {stark['alpha_MHz_per_MVpm2']:.4g} "
        f"+- {stark['alpha_sigma_MHz_per_MVpm2']:.2g} (stat) "
        f"+- {stark['alpha_sigma_systematic_MHz_per_MVpm2']:.2g} (syst) MHz/(MV/m)^2"
    )
    print(
        f"E0 = {stark['e0_MVpm']:.4g} +- {stark['e0_sigma_MVpm']:.2g} MV/m, "
        f"f_max = {stark['f_max_GHz']:.6g} GHz"
    )
    if result["failed_voltages"]:
        print("unfittable voltages:", ", ".join(f"{v:g}" for v in result["failed_voltages"]))
    print(f"wrote fits.json, stark.json, fig2_table.csv to {out}")
    return 0


def cmd_match(args, client) -> int:
    cfg = load_config(args.config)
    tuning = cfg.tuning()
    payload = {
        "transition": cfg.transition().value,
        "tuning": {
            "v_min_V": tuning.v_range_v[0],
            "v_max_V": tuning.v_range_v[1],
            "kappa_MVpm_per_V": float(tuning.kappa_mvpm_per_v),
            "match_tolerance_MHz": tuning.match_tolerance_mhz,
        },
        "objective": cfg.objective(),
        "oracle": bool(args.oracle),
    }
    if args.ensemble:
        from .matcher import ensemble_from_csv

        with open(args.ensemble, "r", encoding="utf-8") as fh:
            emitters, kappas = ensemble_from_csv(fh.read(), cfg.transition())
        payload["emitters"] = [
            {
                "id": em.id,
                "f_max_GHz": em.stark[cfg.transition()].f_max_ghz,
                "alpha": em.stark[cfg.transition()].alpha_mhz,
                "e0": em.stark[cfg.transition()].e0_mvpm,
                "kappa": kappas[em.id],
            }
            for em in emitters
        ]
    else:
        spec = cfg.ensemble_spec()
        payload["ensemble"] = {
            "n": spec.n,
            "f0_center_GHz": spec.f0_center_ghz,
            "f0_fwhm_GHz": spec.f0_fwhm_ghz,
            "alpha_min": spec.alpha_range_mhz[0],
            "alpha_max": spec.alpha_range_mhz[1],
            "e0_min_MVpm": spec.e0_range_mvpm[0],
            "e0_max_MVpm": spec.e0_range_mvpm[1],
            "correlation": spec.alpha_e0_correlation,
            "seed": spec.seed,
        }
    result = _post(client, "/match", payload)
    out = args.out or "."
    plan = dict(result["plan"])
    plan["config_sha256"] = sha256_hex(cfg.raw_text)
    atomic_write(os.path.join(out, "plan.json"), canonical_json(plan))
    atomic_write(os.path.join(out, "ensemble.csv"), result["ensemble_csv"])
    if result.get("oracle_plan"):
        atomic_write(
            os.path.join(out, "oracle_plan.json"),
            canonical_json(result["oracle_plan"]),
        )
    n = plan["n_emitters"]
    print(
        f"target = {plan['target_GHz']:.6f} GHz, matched {plan['matched_count']}/{n} "
        f"(fraction {plan['matched_count'] / n:.3f}), objective {plan['objective']}"
    )
    if result.get("oracle_plan"):
        o = result["oracle_plan"]
        print(
            f"oracle: target = {o['target_GHz']:.6f} GHz, "
            f"matched {o['matched_count']}/{n}"
        )
    print(f"wrote plan.json, ensemble.csv to {out}")
    return 0


def cmd_report(args, client) -> int:
    run = args.run
    # no paths in the artifact: repeated seeded runs must be byte-identical
    report: dict = {}
    summaries = []

    def load(name):
        path = os.path.join(run, name)
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                return json.load(fh)
        return None

    field = load("field_report.json")
    if field:
        report["field"] = field
        p = field["probe"]
        summaries.append(
            f"field: E_ext {p['e_ext_mag_MVpm']:.4f} MV/m, "
            f"E_local {p['e_local_MVpm']:.4f} MV/m, kappa {p['kappa_MVpm_per_V']:.6f}"
        )
    manifest = load("manifest.json")
    if manifest:
        report["simulation"] = {
            "n_spectra": manifest["n_spectra"],
            "transition": manifest["transition"],
            "root_seed": manifest["root_seed"],
            "config_sha256": manifest["config_sha256"],
        }
        summaries.append(f"simulation: {manifest['n_spectra']} spectra")
    stark = load("stark.json")
    if stark:
        report["stark"] = stark
        summaries.append(
            f"stark fit: alpha {stark['alpha_MHz_per_MVpm2']:.4g} MHz/(MV/m)^2, "
            f"E0 {stark['e0_MVpm']:.4g} MV/m"
        )
    plan = load("plan.json")
    if plan:
        report["match"] = plan
        summaries.append(
            f"match: {plan['matched_count']}/{plan['n_emitters']} at "
            f"{plan['target_GHz']:.6f} GHz"
        )
    if not report:
        raise CliFailure(1, f"no artifacts found in {run}")
    out_path = args.out or os.path.join(run, "report.json")
    atomic_write(out_path, canonical_json(report))
    for line in summaries:
        print(line)
    print(f"wrote {out_path}")
    return 0


def cmd_example_config(args, client) -> int:
    if args.out:
        atomic_write(args.out, EXAMPLE_CONFIG)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(EXAMPLE_CONFIG)
    return 0


def cmd_serve(args, client) -> int:
    import uvicorn

    uvicorn.run("sivstark.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sivstark",
        description="Stark-tuning toolkit: field simulation, PLE spectra, fits, matching",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--server", help="remote service URL (default: in-process)")
        p.add_argument("--out", help="output directory or file")
        if config_required:
            p.add_argument("--config", required=True, help="run configuration file")

    p = sub.add_parser("field", help="solve the electrode field, report kappa")
    common(p)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("simulate", help="generate voltage-dependent PLE spectra")
    common(p)
    p.add_argument("--seed", type=int, help="override the scan seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit spectra and recover Stark parameters")
    common(p)
    p.add_argument("--spectra", required=True, help="directory of spectrum_*.csv")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("match", help="plan voltages matching emitters to one frequency")
    common(p)
    p.add_argument("--ensemble", help="ensemble CSV (default: sample from config)")
    p.add_argument("--oracle", action="store_true", help="also run the grid oracle (test scale)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("report", help="summarize a run directory")
    common(p, config_required=False)
    p.add_argument("--run", required=True, help="directory with pipeline artifacts")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("example-config", help="print or write the example config")
    common(p, config_required=False)
    p.set_defaults(func=cmd_example_config)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    client = None
    try:
        if args.command != "serve":
            client = _make_client(getattr(args, "server", None))
        return args.func(args, client)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CliFailure as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    finally:
        if client is not None:
            client.close()


if __name__ == "__main__":
    sys.exit(main())
