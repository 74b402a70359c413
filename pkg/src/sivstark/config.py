"""Run configuration: one sectioned key-value file drives all subcommands.

The format is INI-style with units embedded in the key names (gap_um,
kappa_MVpm_per_V, ...).  Parsing errors always name the offending entry as
``section.key`` so they can be reported verbatim.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from . import constants
from .electrostatics import DEFAULT_RESOLUTION, ElectrodeGeometry, FieldProbe
from .errors import ConfigError
from .matcher import EnsembleSpec, TuningConstraints
from .model import Emitter, LevelStructure, StarkParams, TransitionLabel
from .spectra import AmplitudeModel, LineShapeParams

EXAMPLE_CONFIG = """\
[geometry]
gap_um = 7.6
electrode_width_um = 10.0
applied_voltage_V = 10.0
epsilon_diamond = 5.7
domain_width_um = 58.0
domain_height_above_um = 15.2
domain_depth_below_um = 15.2
resolution_cells_per_gap = 304
kind = coplanar

[probe]
x_um = 1.9
depth_nm = 100.0

[emitter]
id = E4
transition = C
f_max_GHz = 406700.0
alpha_MHz_per_MVpm2 = 15.0
e0_MVpm = 3.0
gs_split_GHz = 50.0
es_split_GHz = 250.0
zpl_center_THz = 406.7

[scan]
voltages_V = 0:100:10
detuning_min_GHz = -8.0
detuning_max_GHz = 2.0
points = 200
integration_time_s = 0.05
seed = 1234
dark_rate_cps = 700.0

[lineshape]
gamma0_MHz = 400.0
gamma_slope_MHz_per_MVpm = 5.0
transform_limit_MHz = 90.0

[amplitude]
a_max_cps = 20000.0
v_on_V = 5.0
w_on_V = 10.0
v_peak_V = 75.0
w_off_V = 60.0

[ensemble]
n = 9
f0_center_GHz = 406700.0
f0_fwhm_GHz = 10.0
alpha_min = 1.4
alpha_max = 15.0
e0_min_MVpm = 0.0
e0_max_MVpm = 6.0
correlation = 0.0
seed = 42

[tuning]
v_min_V = 0.0
v_max_V = 100.0
kappa_MVpm_per_V = 0.21
match_tolerance_MHz = 90.0
objective = max-matched
"""


@dataclass
class RunConfig:
    """Typed view over the parsed config file plus its raw text (for hashing)."""

    parser: configparser.ConfigParser
    raw_text: str

    def _get(self, section: str, key: str, cast, default=None):
        if not self.parser.has_section(section):
            if default is not None:
                return default
            raise ConfigError(f"{section}.{key}", "missing section")
        if not self.parser.has_option(section, key):
            if default is not None:
                return default
            raise ConfigError(f"{section}.{key}", "missing key")
        raw = self.parser.get(section, key)
        try:
            return cast(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}: {exc}") from exc

    def geometry(self) -> ElectrodeGeometry:
        gap = self._get("geometry", "gap_um", float, 7.6)
        try:
            return ElectrodeGeometry(
                gap_um=gap,
                electrode_width_um=self._get("geometry", "electrode_width_um", float, 10.0),
                applied_voltage_v=self._get("geometry", "applied_voltage_V", float, 10.0),
                epsilon_diamond=self._get("geometry", "epsilon_diamond", float, constants.EPSILON_DIAMOND),
                domain_um=(
                    self._get("geometry", "domain_width_um", float, 58.0),
                    self._get("geometry", "domain_height_above_um", float, 15.2),
                    self._get("geometry", "domain_depth_below_um", float, 15.2),
                ),
                kind=self._get("geometry", "kind", str, "coplanar").strip(),
            )
        except ValueError as exc:
            raise ConfigError("geometry", str(exc)) from exc

    def resolution(self) -> int:
        return self._get("geometry", "resolution_cells_per_gap", int, DEFAULT_RESOLUTION)

    def probe(self) -> FieldProbe:
        x_um = self._get("probe", "x_um", float, 1.9)
        gap = self._get("geometry", "gap_um", float, 7.6)
        if not 0.0 < x_um < gap:
            raise ConfigError(
                "probe.x_um", f"must lie inside the electrode gap (0, {gap:g}) um"
            )
        try:
            return FieldProbe(
                x_um=x_um,
                depth_nm=self._get("probe", "depth_nm", float, 100.0),
            )
        except ValueError as exc:
            raise ConfigError("probe", str(exc)) from exc

    def transition(self) -> TransitionLabel:
        name = self._get("emitter", "transition", str, "C").strip().upper()
        try:
            return TransitionLabel(name)
        except ValueError as exc:
            raise ConfigError("emitter.transition", f"unknown transition {name!r}") from exc

    def emitter(self) -> Emitter:
        label = self.transition()
        try:
            params = StarkParams(
                f_max_ghz=self._get("emitter", "f_max_GHz", float, 406700.0),
                alpha_mhz=self._get("emitter", "alpha_MHz_per_MVpm2", float, 15.0),
                e0_mvpm=self._get("emitter", "e0_MVpm", float, 0.0),
            )
            levels = LevelStructure(
                zpl_center_thz=self._get("emitter", "zpl_center_THz", float, constants.ZPL_CENTER_THZ),
                gs_split_ghz=self._get("emitter", "gs_split_GHz", float, constants.GS_SPLIT_GHZ),
                es_split_ghz=self._get("emitter", "es_split_GHz", float, constants.ES_SPLIT_GHZ),
            )
            probe = self.probe()
            return Emitter(
                id=self._get("emitter", "id", str, "E1"),
                levels=levels,
                stark={label: params},
                position_um_nm=(probe.x_um, probe.depth_nm),
            )
        except ValueError as exc:
            raise ConfigError("emitter", str(exc)) from exc

    def voltages(self) -> list[float]:
        raw = self._get("scan", "voltages_V", str, "0:100:10").strip()
        try:
            if ":" in raw:
                start, stop, step = (float(tok) for tok in raw.split(":"))
                if step <= 0.0:
                    raise ValueError("step must be > 0")
                n = int(round((stop - start) / step))
                return [start + k * step for k in range(n + 1)]
            return [float(tok) for tok in raw.split(",") if tok.strip() != ""]
        except ValueError as exc:
            raise ConfigError("scan.voltages_V", f"cannot parse {raw!r}: {exc}") from exc

    def detunings(self) -> np.ndarray:
        lo = self._get("scan", "detuning_min_GHz", float, -8.0)
        hi = self._get("scan", "detuning_max_GHz", float, 2.0)
        n = self._get("scan", "points", int, 200)
        if not lo < hi:
            raise ConfigError("scan.detuning_min_GHz", "window must satisfy min < max")
        if n < 2:
            raise ConfigError("scan.points", "need at least 2 points")
        return np.linspace(lo, hi, n)

    def integration_time(self) -> float:
        return self._get("scan", "integration_time_s", float, 0.05)

    def scan_seed(self) -> int:
        return self._get("scan", "seed", int, 1234)

    def dark_rate(self) -> float:
        return self._get("scan", "dark_rate_cps", float, constants.DARK_RATE_CPS)

    def lineshape(self) -> LineShapeParams:
        try:
            return LineShapeParams(
                gamma0_mhz=self._get("lineshape", "gamma0_MHz", float, constants.GAMMA0_MHZ),
                gamma_slope_mhz_per_mvpm=self._get(
                    "lineshape", "gamma_slope_MHz_per_MVpm", float, constants.GAMMA_SLOPE_MHZ_PER_MVPM
                ),
                transform_limit_mhz=self._get(
                    "lineshape", "transform_limit_MHz", float, constants.TRANSFORM_LIMIT_MHZ
                ),
            )
        except ValueError as exc:
            raise ConfigError("lineshape", str(exc)) from exc

    def amplitude(self) -> AmplitudeModel:
        try:
            return AmplitudeModel(
                a_max_cps=self._get("amplitude", "a_max_cps", float, 2.0e4),
                v_on_v=self._get("amplitude", "v_on_V", float, 5.0),
                w_on_v=self._get("amplitude", "w_on_V", float, 10.0),
                v_peak_v=self._get("amplitude", "v_peak_V", float, 75.0),
                w_off_v=self._get("amplitude", "w_off_V", float, 60.0),
            )
        except ValueError as exc:
            raise ConfigError("amplitude", str(exc)) from exc

    def ensemble_spec(self) -> EnsembleSpec:
        try:
            return EnsembleSpec(
                n=self._get("ensemble", "n", int, 9),
                f0_center_ghz=self._get("ensemble", "f0_center_GHz", float, 406700.0),
                f0_fwhm_ghz=self._get("ensemble", "f0_fwhm_GHz", float, 10.0),
                alpha_range_mhz=(
                    self._get("ensemble", "alpha_min", float, 1.4),
                    self._get("ensemble", "alpha_max", float, 15.0),
                ),
                e0_range_mvpm=(
                    self._get("ensemble", "e0_min_MVpm", float, 0.0),
                    self._get("ensemble", "e0_max_MVpm", float, 6.0),
                ),
                alpha_e0_correlation=self._get("ensemble", "correlation", float, 0.0),
                seed=self._get("ensemble", "seed", int, 42),
            )
        except ValueError as exc:
            raise ConfigError("ensemble", str(exc)) from exc

    def tuning(self) -> TuningConstraints:
        try:
            return TuningConstraints(
                v_range_v=(
                    self._get("tuning", "v_min_V", float, 0.0),
                    self._get("tuning", "v_max_V", float, 100.0),
                ),
                kappa_mvpm_per_v=self._get(
                    "tuning", "kappa_MVpm_per_V", float, constants.KAPPA_MVPM_PER_V
                ),
                match_tolerance_mhz=self._get(
                    "tuning", "match_tolerance_MHz", float, constants.TRANSFORM_LIMIT_MHZ
                ),
            )
        except ValueError as exc:
            raise ConfigError("tuning", str(exc)) from exc

    def objective(self) -> str:
        obj = self._get("tuning", "objective", str, "max-matched").strip()
        if obj not in ("max-matched", "min-max-residual"):
            raise ConfigError("tuning.objective", f"unknown objective {obj!r}")
        return obj


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", f"invalid config syntax: {exc}") from exc
    return RunConfig(parser=parser, raw_text=text)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
