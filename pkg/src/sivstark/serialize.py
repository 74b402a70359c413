"""Canonical, byte-stable serialization helpers.

Artifacts must be byte-identical across repeated seeded runs, so JSON is
always written with sorted keys and fixed separators, CSV floats with 9
significant digits, and files atomically via a temp file and rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .fitting import LorentzianFit, StarkFit


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def lorentzian_fit_to_dict(fit: LorentzianFit) -> dict:
    return {
        "center_GHz": fit.center_ghz,
        "center_sigma_GHz": fit.center_sigma_ghz,
        "fwhm_MHz": fit.fwhm_mhz,
        "fwhm_sigma_MHz": fit.fwhm_sigma_mhz,
        "amplitude_cps": fit.amplitude,
        "amplitude_sigma_cps": fit.amplitude_sigma,
        "baseline_cps": fit.baseline,
        "baseline_sigma_cps": fit.baseline_sigma,
        "reduced_chi2": fit.reduced_chi2,
        "converged": fit.converged,
    }


def stark_fit_to_dict(fit: StarkFit, alpha_sigma_systematic_mhz: float | None = None) -> dict:
    out = {
        "f_max_GHz": fit.f_max_ghz,
        "f_max_sigma_GHz": fit.f_max_sigma_ghz,
        "alpha_MHz_per_MVpm2": fit.alpha_mhz,
        "alpha_sigma_MHz_per_MVpm2": fit.alpha_sigma_mhz,
        "e0_MVpm": fit.e0_mvpm,
        "e0_sigma_MVpm": fit.e0_sigma_mvpm,
        "covariance": list(np.asarray(fit.covariance).ravel()),
        "n_points": fit.n_points,
    }
    if alpha_sigma_systematic_mhz is not None:
        out["alpha_sigma_systematic_MHz_per_MVpm2"] = alpha_sigma_systematic_mhz
    return out
