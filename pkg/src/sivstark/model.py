"""Emitter physics: level structure, the quadratic Stark law and its inversion.

The optical transition frequency of an inversion-symmetric defect under a
local electric field E follows

    f(E) = f_max - alpha * (E - E0)^2

with ``f_max`` the maximum transition frequency (GHz), ``alpha`` the
effective polarizability (MHz/(MV/m)^2) and ``E0`` a built-in offset field
(MV/m).  Inversion symmetry forbids a permanent dipole, so there is no
linear term and the shift is always towards lower frequency.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .constants import (
    ALPHA_EPSILON_MHZ,
    ES_SPLIT_GHZ,
    GS_SPLIT_GHZ,
    MHZ_PER_GHZ,
    GHZ_PER_THZ,
    ZPL_CENTER_THZ,
)
from .errors import DegenerateQuadratic


@dataclass(frozen=True)
class StarkParams:
    """Quadratic Stark parameters of one optical transition.

    Parameters
    ----------
    f_max_ghz:
        Maximum (zero net field) transition frequency in GHz.  May be
        absolute or relative to a declared reference.
    alpha_mhz:
        Effective polarizability in MHz/(MV/m)^2, non-negative: only red
        shifts occur.
    e0_mvpm:
        Offset local electric field in MV/m.  Observed values are positive
        but negative values are allowed for stored ensembles.
    """

    f_max_ghz: float
    alpha_mhz: float
    e0_mvpm: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.f_max_ghz):
            raise ValueError("f_max_ghz must be finite")
        if not math.isfinite(self.alpha_mhz) or self.alpha_mhz < 0.0:
            raise ValueError("alpha_mhz must be finite and >= 0")
        if not math.isfinite(self.e0_mvpm):
            raise ValueError("e0_mvpm must be finite")


@dataclass(frozen=True)
class LevelStructure:
    """Ground/excited doublet splittings around the zero-phonon line."""

    zpl_center_thz: float = ZPL_CENTER_THZ
    gs_split_ghz: float = GS_SPLIT_GHZ
    es_split_ghz: float = ES_SPLIT_GHZ

    def __post_init__(self):
        if self.gs_split_ghz < 0.0 or self.es_split_ghz < 0.0:
            raise ValueError("level splittings must be >= 0")


@enum.unique
class TransitionLabel(enum.Enum):
    """The four optical transitions, ordered by descending frequency."""

    A = "A"
    B = "B"
    C = "C"
    D = "D"

    @property
    def rank(self) -> int:
        return "ABCD".index(self.value)

    def __lt__(self, other):
        if not isinstance(other, TransitionLabel):
            return NotImplemented
        return self.rank < other.rank


@dataclass(frozen=True)
class Emitter:
    """A single SiV- center: levels, per-transition Stark parameters, position.

    ``position_um_nm`` is (distance from the grounded electrode's inner edge
    in um, depth below the diamond surface in nm).
    """

    id: str
    levels: LevelStructure = field(default_factory=LevelStructure)
    stark: dict[TransitionLabel, StarkParams] = field(default_factory=dict)
    position_um_nm: tuple[float, float] = (1.9, 100.0)

    def __post_init__(self):
        if not self.stark:
            raise ValueError("emitter needs Stark parameters for >= 1 transition")
        x_um, depth_nm = self.position_um_nm
        if x_um <= 0.0 or depth_nm < 0.0:
            raise ValueError("emitter position must lie inside the gap, below surface")


def transition_frequency(p: StarkParams, e_local_mvpm: float) -> float:
    """Transition frequency in GHz at a local field (MV/m).

    Evaluates f_max - alpha*(E - E0)^2 with the MHz -> GHz conversion made
    explicit: alpha carries MHz/(MV/m)^2.
    """
    d = e_local_mvpm - p.e0_mvpm
    return p.f_max_ghz - p.alpha_mhz * d * d / MHZ_PER_GHZ


def stark_shift(p: StarkParams, e_local_mvpm: float) -> float:
    """Stark shift f(E) - f_max in GHz; never positive."""
    d = e_local_mvpm - p.e0_mvpm
    return -p.alpha_mhz * d * d / MHZ_PER_GHZ


def fields_for_frequency(p: StarkParams, f_target_ghz: float) -> list[float]:
    """All local fields (MV/m) at which the transition sits at ``f_target_ghz``.

    Solves the quadratic for E, returning 0, 1 or 2 values sorted
    ascending: empty when the target lies above f_max, the vertex alone when
    it equals f_max.

    Raises
    ------
    DegenerateQuadratic
        If alpha is below the identifiability threshold.
    """
    if p.alpha_mhz < ALPHA_EPSILON_MHZ:
        raise DegenerateQuadratic(
            f"alpha = {p.alpha_mhz:g} MHz/(MV/m)^2 is below "
            f"{ALPHA_EPSILON_MHZ:g}; E0 is unidentifiable"
        )
    drop_mhz = (p.f_max_ghz - f_target_ghz) * MHZ_PER_GHZ
    if drop_mhz < 0.0:
        return []
    r = math.sqrt(drop_mhz / p.alpha_mhz)
    if r == 0.0:
        return [p.e0_mvpm]
    return [p.e0_mvpm - r, p.e0_mvpm + r]


def transition_ladder(levels: LevelStructure) -> dict[TransitionLabel, float]:
    """Frequencies (GHz) of the four allowed transitions, A highest to D lowest.

    Ground levels sit at -/+ gs_split/2 around zero, excited levels at
    -/+ es_split/2 around the zero-phonon line, so the spacings satisfy
    f_A - f_B = f_C - f_D = gs_split and f_A - f_D = gs_split + es_split.
    """
    zpl_ghz = levels.zpl_center_thz * GHZ_PER_THZ
    gs = levels.gs_split_ghz
    es = levels.es_split_ghz
    return {
        TransitionLabel.A: zpl_ghz + (es + gs) / 2.0,
        TransitionLabel.B: zpl_ghz + (es - gs) / 2.0,
        TransitionLabel.C: zpl_ghz - (es - gs) / 2.0,
        TransitionLabel.D: zpl_ghz - (es + gs) / 2.0,
    }


def propagate_field_uncertainty(rel_sigma_e: float) -> float:
    """Relative polarizability uncertainty from a relative field uncertainty.

    First-order propagation through the quadratic law: a relative error in E
    doubles when squared.
    """
    if not 0.0 <= rel_sigma_e < 1.0:
        raise ValueError("rel_sigma_e must be in [0, 1)")
    return 2.0 * rel_sigma_e
