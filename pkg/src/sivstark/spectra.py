"""Synthetic voltage-dependent PLE scans.

A scan is a Lorentzian line whose center follows the quadratic Stark law,
whose width grows linearly with the induced-dipole field |E - E0|, and
whose amplitude follows a charge-state gate curve in voltage (dark at
negative bias, plateau between ~50 and 100 V).  Counts are Poisson with a
constant dark rate; an infinite integration time switches noise off and
stores the exact model rate instead.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .constants import (
    DARK_RATE_CPS,
    GAMMA0_MHZ,
    GAMMA_SLOPE_MHZ_PER_MVPM,
    MHZ_PER_GHZ,
    TRANSFORM_LIMIT_MHZ,
)
from .errors import LineOutsideScan
from .model import Emitter, TransitionLabel, transition_frequency
from .electrostatics import FieldProbe


@dataclass(frozen=True)
class LineShapeParams:
    """Zero-field FWHM, broadening slope, and the transform limit (MHz)."""

    gamma0_mhz: float = GAMMA0_MHZ
    gamma_slope_mhz_per_mvpm: float = GAMMA_SLOPE_MHZ_PER_MVPM
    transform_limit_mhz: float = TRANSFORM_LIMIT_MHZ

    def __post_init__(self):
        if not self.transform_limit_mhz > 0.0:
            raise ValueError("transform_limit_mhz must be > 0")
        if self.gamma0_mhz < self.transform_limit_mhz:
            raise ValueError("gamma0_mhz must be >= transform_limit_mhz")
        if self.gamma_slope_mhz_per_mvpm < 0.0:
            raise ValueError("gamma_slope must be >= 0")


@dataclass(frozen=True)
class AmplitudeModel:
    """Charge-state gate: logistic turn-on times a soft high-voltage rolloff."""

    a_max_cps: float = 2.0e4
    v_on_v: float = 5.0
    w_on_v: float = 10.0
    v_peak_v: float = 75.0
    w_off_v: float = 60.0

    def __post_init__(self):
        if self.a_max_cps <= 0.0:
            raise ValueError("a_max_cps must be > 0")
        if self.w_on_v <= 0.0 or self.w_off_v <= 0.0:
            raise ValueError("w_on_v and w_off_v must be > 0")


@dataclass(eq=False)
class Spectrum:
    """One PLE scan at a fixed voltage.

    ``counts`` holds raw photon counts per bin for finite integration time
    and the exact model rate (counts/s) when ``integration_time_s`` is
    infinite.
    """

    voltage_v: float
    detunings_ghz: np.ndarray
    counts: np.ndarray
    integration_time_s: float
    noise_seed: int

    def __post_init__(self):
        d = np.asarray(self.detunings_ghz, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if d.ndim != 1 or c.shape != d.shape:
            raise ValueError("detunings and counts must be 1-D and equal length")
        if not np.all(np.diff(d) > 0.0):
            raise ValueError("detunings must be strictly increasing")
        if np.any(c < 0.0):
            raise ValueError("counts must be >= 0")
        self.detunings_ghz = d
        self.counts = c


def lorentzian(detuning_ghz, center_ghz: float, fwhm_mhz: float, amplitude: float):
    """Peak-normalized Lorentzian: equals ``amplitude`` at the center."""
    if fwhm_mhz <= 0.0:
        raise ValueError("fwhm_mhz must be > 0")
    hw = fwhm_mhz / (2.0 * MHZ_PER_GHZ)  # half width in GHz
    x = np.asarray(detuning_ghz, dtype=float) - center_ghz
    out = amplitude * hw * hw / (x * x + hw * hw)
    return float(out) if out.ndim == 0 else out


def linewidth_model(ls: LineShapeParams, e_local_mvpm: float, e0_mvpm: float) -> float:
    """FWHM in MHz: gamma0 plus a term linear in the induced-dipole field."""
    return ls.gamma0_mhz + ls.gamma_slope_mhz_per_mvpm * abs(e_local_mvpm - e0_mvpm)


def amplitude_model(am: AmplitudeModel, voltage_v: float) -> float:
    """Peak count rate at a given voltage (counts/s)."""
    rise = expit((voltage_v - am.v_on_v) / am.w_on_v)
    over = max(0.0, voltage_v - am.v_peak_v)
    return am.a_max_cps * float(rise) * math.exp(-over * over / (2.0 * am.w_off_v**2))


def expected_rate(
    emitter: Emitter,
    label: TransitionLabel,
    probe: FieldProbe,
    voltage_v: float,
    detunings_ghz: np.ndarray,
    lineshape: LineShapeParams,
    amplitude: AmplitudeModel,
    dark_rate_cps: float = DARK_RATE_CPS,
    reference_ghz: float | None = None,
) -> tuple[np.ndarray, float, float]:
    """Noiseless model rate per bin plus (center detuning GHz, FWHM MHz)."""
    if label not in emitter.stark:
        raise KeyError(f"emitter {emitter.id!r} has no Stark parameters for {label}")
    if probe.kappa_mvpm_per_v is None:
        raise ValueError("probe must be calibrated (kappa is not set)")
    p = emitter.stark[label]
    e_local = probe.kappa_mvpm_per_v * voltage_v
    ref = p.f_max_ghz if reference_ghz is None else reference_ghz
    center = transition_frequency(p, e_local) - ref
    fwhm = linewidth_model(lineshape, e_local, p.e0_mvpm)
    amp = amplitude_model(amplitude, voltage_v)
    rate = lorentzian(detunings_ghz, center, fwhm, amp) + dark_rate_cps
    return rate, center, fwhm


def generate_ple_scan(
    emitter: Emitter,
    label: TransitionLabel,
    probe: FieldProbe,
    voltage_v: float,
    detunings_ghz,
    lineshape: LineShapeParams,
    amplitude: AmplitudeModel,
    integration_time_s: float,
    seed: int,
    dark_rate_cps: float = DARK_RATE_CPS,
    reference_ghz: float | None = None,
) -> Spectrum:
    """One seeded PLE scan.

    The line center comes from the quadratic Stark law at E = kappa * V,
    detuned against ``reference_ghz`` (the transition's f_max when not
    given).  Counts are Poisson(rate * t) per bin; ``integration_time_s =
    inf`` disables noise and stores the exact rate.

    Raises
    ------
    LineOutsideScan
        If the line center falls more than two FWHM beyond the grid.
    """
    detunings = np.asarray(detunings_ghz, dtype=float)
    rate, center, fwhm = expected_rate(
        emitter,
        label,
        probe,
        voltage_v,
        detunings,
        lineshape,
        amplitude,
        dark_rate_cps,
        reference_ghz,
    )
    fwhm_ghz = fwhm / MHZ_PER_GHZ
    if (
        center < detunings[0] - 2.0 * fwhm_ghz
        or center > detunings[-1] + 2.0 * fwhm_ghz
    ):
        raise LineOutsideScan(
            [voltage_v],
            f"line center {center:.3f} GHz is > 2 FWHM outside the scan "
            f"[{detunings[0]:g}, {detunings[-1]:g}] GHz at {voltage_v:g} V",
        )
    if math.isinf(integration_time_s):
        counts = rate
    else:
        rng = np.random.default_rng(seed)
        counts = rng.poisson(rate * integration_time_s).astype(float)
    return Spectrum(
        voltage_v=voltage_v,
        detunings_ghz=detunings,
        counts=counts,
        integration_time_s=integration_time_s,
        noise_seed=seed,
    )


def generate_voltage_series(
    emitter: Emitter,
    label: TransitionLabel,
    probe: FieldProbe,
    voltages_v,
    detunings_ghz,
    lineshape: LineShapeParams,
    amplitude: AmplitudeModel,
    integration_time_s: float,
    root_seed: int,
    dark_rate_cps: float = DARK_RATE_CPS,
    reference_ghz: float | None = None,
) -> list[Spectrum]:
    """Element-wise :func:`generate_ple_scan` over a voltage list.

    Per-voltage seeds derive from the root seed XOR the voltage index.
    Scan-window errors are aggregated: one LineOutsideScan listing every
    offending voltage.
    """
    spectra = []
    bad: list[float] = []
    for i, v in enumerate(voltages_v):
        try:
            spectra.append(
                generate_ple_scan(
                    emitter,
                    label,
                    probe,
                    float(v),
                    detunings_ghz,
                    lineshape,
                    amplitude,
                    integration_time_s,
                    seed=root_seed ^ i,
                    dark_rate_cps=dark_rate_cps,
                    reference_ghz=reference_ghz,
                )
            )
        except LineOutsideScan:
            bad.append(float(v))
    if bad:
        raise LineOutsideScan(bad)
    return spectra


def spectrum_to_csv(s: Spectrum) -> str:
    """Canonical CSV: comment header with metadata, then detuning/count rows."""
    lines = [
        f"# voltage_V={s.voltage_v:.9g} seed={s.noise_seed} "
        f"t_int_s={s.integration_time_s:.9g}",
        "detuning_GHz,counts",
    ]
    for d, c in zip(s.detunings_ghz, s.counts):
        lines.append(f"{d:.9g},{c:.9g}")
    return "\n".join(lines) + "\n"


_HEADER_RE = re.compile(
    r"#\s*voltage_V=(?P<v>\S+)\s+seed=(?P<seed>\S+)\s+t_int_s=(?P<t>\S+)"
)


def spectrum_from_csv(text: str) -> Spectrum:
    """Parse a spectrum written by :func:`spectrum_to_csv`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m = _HEADER_RE.match(lines[0])
    if m is None:
        raise ValueError("missing '# voltage_V=... seed=... t_int_s=...' header")
    body = lines[1:]
    if body and body[0].startswith("detuning"):
        body = body[1:]
    data = np.array([[float(f) for f in ln.split(",")] for ln in body])
    return Spectrum(
        voltage_v=float(m.group("v")),
        detunings_ghz=data[:, 0],
        counts=data[:, 1],
        integration_time_s=float(m.group("t")),
        noise_seed=int(m.group("seed")),
    )
