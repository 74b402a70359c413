"""Emitter ensembles and the multi-emitter frequency-matching problem.

Because the Stark shift is strictly red (one-sided), each emitter can reach
a frequency interval [f_lo, f_hi] within its voltage range.  Matching many
emitters to one target is then an interval problem: the max-matched
objective counts intervals containing the target (piecewise constant, with
breakpoints exactly at interval endpoints, so endpoint enumeration is
exact), while the min-max-residual objective minimizes the largest clamped
distance to any interval (convex, refined by golden-section search seeded
on the endpoint grid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import StringIO
from typing import Mapping

import numpy as np
from scipy.special import ndtr

from .constants import FWHM_SIGMA_RATIO, KAPPA_MVPM_PER_V, TRANSFORM_LIMIT_MHZ, MHZ_PER_GHZ
from .errors import Unreachable
from .model import (
    Emitter,
    StarkParams,
    TransitionLabel,
    fields_for_frequency,
    transition_frequency,
)

GOLDEN_RATIO_CONJ = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class EnsembleSpec:
    """Statistical description of a paper-like emitter ensemble.

    Zero-field frequencies are normal with the given inhomogeneous FWHM;
    polarizability is log-uniform on its range, the offset field uniform on
    its range, and the two are tied by a Gaussian copula with the given
    rank correlation.
    """

    n: int
    f0_center_ghz: float = 406700.0
    f0_fwhm_ghz: float = 10.0
    alpha_range_mhz: tuple[float, float] = (1.4, 15.0)
    e0_range_mvpm: tuple[float, float] = (0.0, 6.0)
    alpha_e0_correlation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.f0_fwhm_ghz <= 0.0:
            raise ValueError("f0_fwhm_ghz must be > 0")
        if not 0.0 < self.alpha_range_mhz[0] <= self.alpha_range_mhz[1]:
            raise ValueError("alpha_range must be ordered and positive")
        if not self.e0_range_mvpm[0] <= self.e0_range_mvpm[1]:
            raise ValueError("e0_range must be ordered")
        if not -1.0 <= self.alpha_e0_correlation <= 1.0:
            raise ValueError("correlation must lie in [-1, 1]")


@dataclass(frozen=True)
class TuningConstraints:
    """Voltage range, voltage-to-field conversion and the match tolerance."""

    v_range_v: tuple[float, float] = (0.0, 100.0)
    kappa_mvpm_per_v: float | Mapping[str, float] = KAPPA_MVPM_PER_V
    match_tolerance_mhz: float = TRANSFORM_LIMIT_MHZ

    def __post_init__(self):
        if not self.v_range_v[0] < self.v_range_v[1]:
            raise ValueError("v_range must satisfy v_min < v_max")
        if self.match_tolerance_mhz <= 0.0:
            raise ValueError("match_tolerance_mhz must be > 0")
        kappas = (
            self.kappa_mvpm_per_v.values()
            if isinstance(self.kappa_mvpm_per_v, Mapping)
            else [self.kappa_mvpm_per_v]
        )
        if any(k <= 0.0 for k in kappas):
            raise ValueError("kappa must be > 0")

    def kappa_for(self, emitter_id: str) -> float:
        if isinstance(self.kappa_mvpm_per_v, Mapping):
            return float(self.kappa_mvpm_per_v[emitter_id])
        return float(self.kappa_mvpm_per_v)


@dataclass(frozen=True)
class Assignment:
    emitter_id: str
    voltage_v: float
    achieved_ghz: float
    residual_mhz: float
    matched: bool


@dataclass(frozen=True)
class MatchPlan:
    target_ghz: float
    objective: str
    objective_value_mhz: float
    assignments: tuple[Assignment, ...]

    @property
    def matched_count(self) -> int:
        return sum(1 for a in self.assignments if a.matched)

    def to_dict(self) -> dict:
        return {
            "target_GHz": self.target_ghz,
            "objective": self.objective,
            "objective_value_MHz": self.objective_value_mhz,
            "matched_count": self.matched_count,
            "n_emitters": len(self.assignments),
            "assignments": [
                {
                    "id": a.emitter_id,
                    "voltage_V": a.voltage_v,
                    "achieved_GHz": a.achieved_ghz,
                    "residual_MHz": a.residual_mhz,
                    "matched": a.matched,
                }
                for a in self.assignments
            ],
        }


def sample_ensemble(spec: EnsembleSpec, label: TransitionLabel = TransitionLabel.C) -> list[Emitter]:
    """Draw a deterministic ensemble of emitters for the given transition."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    if n == 0:
        return []
    f_max = rng.normal(spec.f0_center_ghz, spec.f0_fwhm_ghz / FWHM_SIGMA_RATIO, n)
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    rho = spec.alpha_e0_correlation
    z2 = rho * z1 + math.sqrt(max(1.0 - rho * rho, 0.0)) * z2
    u1 = ndtr(z1)
    u2 = ndtr(z2)
    lo, hi = spec.alpha_range_mhz
    alpha = np.exp(math.log(lo) + u1 * (math.log(hi) - math.log(lo)))
    e0 = spec.e0_range_mvpm[0] + u2 * (spec.e0_range_mvpm[1] - spec.e0_range_mvpm[0])
    return [
        Emitter(
            id=f"E{i + 1}",
            stark={label: StarkParams(float(f_max[i]), float(alpha[i]), float(e0[i]))},
        )
        for i in range(n)
    ]


def reachable_interval(
    emitter: Emitter, label: TransitionLabel, tc: TuningConstraints
) -> tuple[float, float]:
    """Image [f_lo, f_hi] of the Stark law over the allowed voltage range."""
    p = emitter.stark[label]
    kappa = tc.kappa_for(emitter.id)
    v_lo, v_hi = tc.v_range_v
    f_ends = (
        transition_frequency(p, kappa * v_lo),
        transition_frequency(p, kappa * v_hi),
    )
    v_vertex = p.e0_mvpm / kappa
    f_hi = p.f_max_ghz if v_lo <= v_vertex <= v_hi else max(f_ends)
    return min(f_ends), f_hi


def voltage_for_target(
    emitter: Emitter, label: TransitionLabel, target_ghz: float, tc: TuningConstraints
) -> float:
    """Feasible voltage putting the transition exactly at the target.

    Among the real roots of the quadratic mapped to voltage, returns the
    feasible one with the smallest |v| (ties broken toward the smaller v;
    small |v| keeps the induced dipole and the line broadening low).

    Raises
    ------
    Unreachable
        If no root lies within the voltage range.
    """
    p = emitter.stark[label]
    kappa = tc.kappa_for(emitter.id)
    v_lo, v_hi = tc.v_range_v
    slack = 1.0e-9 * max(abs(v_lo), abs(v_hi), 1.0)
    candidates = [
        e / kappa
        for e in fields_for_frequency(p, target_ghz)
        if v_lo - slack <= e / kappa <= v_hi + slack
    ]
    if not candidates:
        raise Unreachable(
            f"{target_ghz:g} GHz not reachable for {emitter.id} within "
            f"[{v_lo:g}, {v_hi:g}] V"
        )
    best = min(candidates, key=lambda v: (abs(v), v))
    return float(min(max(best, v_lo), v_hi))


def _clamped_assignment(
    emitter: Emitter,
    label: TransitionLabel,
    tc: TuningConstraints,
    target_ghz: float,
) -> Assignment:
    """Best-effort assignment: exact when the target is reachable, else the
    nearest end of the reachable interval."""
    p = emitter.stark[label]
    kappa = tc.kappa_for(emitter.id)
    v_lo, v_hi = tc.v_range_v
    f_lo, f_hi = reachable_interval(emitter, label, tc)
    if f_lo <= target_ghz <= f_hi:
        v = voltage_for_target(emitter, label, target_ghz, tc)
        achieved = transition_frequency(p, kappa * v)
    elif target_ghz > f_hi:
        v_vertex = p.e0_mvpm / kappa
        if v_lo <= v_vertex <= v_hi:
            v = v_vertex
        else:
            v = min((v_lo, v_hi), key=lambda vv: abs(transition_frequency(p, kappa * vv) - f_hi))
        achieved = transition_frequency(p, kappa * v)
    else:
        v = min((v_lo, v_hi), key=lambda vv: transition_frequency(p, kappa * vv))
        achieved = transition_frequency(p, kappa * v)
    residual_mhz = abs(achieved - target_ghz) * MHZ_PER_GHZ
    # slack absorbs float cancellation at ~4e5 GHz absolute frequencies
    slack_mhz = 1.0e-6 + abs(target_ghz) * 1.0e-9
    return Assignment(
        emitter_id=emitter.id,
        voltage_v=float(v),
        achieved_ghz=float(achieved),
        residual_mhz=float(residual_mhz),
        matched=residual_mhz <= tc.match_tolerance_mhz + slack_mhz,
    )


def _sum_abs_voltage(assignments: list[Assignment]) -> float:
    return sum(abs(a.voltage_v) for a in assignments if a.matched)


def _golden_section(fun, lo: float, hi: float, tol: float = 1.0e-7) -> float:
    """Minimize a unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN_RATIO_CONJ * (b - a)
    d = a + GOLDEN_RATIO_CONJ * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN_RATIO_CONJ * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN_RATIO_CONJ * (b - a)
            fd = fun(d)
    return (a + b) / 2.0


def match_frequencies(
    ensemble: list[Emitter],
    label: TransitionLabel,
    tc: TuningConstraints,
    objective: str = "max-matched",
) -> MatchPlan:
    """Choose one target frequency and per-emitter voltages.

    ``max-matched`` maximizes the number of emitters whose reachable
    interval (inflated by the match tolerance) contains the target, with
    ties broken toward the smallest summed |v| and then the lowest target.
    ``min-max-residual`` minimizes the largest clamped residual.  Both are
    deterministic.
    """
    if not ensemble:
        raise ValueError("ensemble must be non-empty")
    if objective not in ("max-matched", "min-max-residual"):
        raise ValueError(f"unknown objective {objective!r}")
    tol_ghz = tc.match_tolerance_mhz / MHZ_PER_GHZ
    intervals = [reachable_interval(em, label, tc) for em in ensemble]

    if objective == "max-matched":
        # stay a hair inside the tolerance so boundary candidates survive
        # the exact feasibility re-check
        tol_eff = tol_ghz * (1.0 - 1.0e-9)
        endpoints = sorted(
            {lo - tol_eff for lo, _ in intervals}
            | {hi + tol_eff for _, hi in intervals}
            | {lo for lo, _ in intervals}
            | {hi for _, hi in intervals}
            | {em.stark[label].f_max_ghz for em in ensemble}
        )
        candidates = list(endpoints)
        candidates.extend(
            (a + b) / 2.0 for a, b in zip(endpoints[:-1], endpoints[1:])
        )
        best_key = None
        best = None
        for f in candidates:
            assignments = [_clamped_assignment(em, label, tc, f) for em in ensemble]
            matched = sum(1 for a in assignments if a.matched)
            worst = max((a.residual_mhz for a in assignments if a.matched), default=0.0)
            # exact matches outrank tolerance-edge ones; this keeps the
            # chosen target at or below the matched emitters' f_max
            key = (-matched, worst, _sum_abs_voltage(assignments), f)
            if best_key is None or key < best_key:
                best_key = key
                best = (f, assignments)
        target, assignments = best
        value = max(
            (a.residual_mhz for a in assignments if a.matched), default=0.0
        )
    else:
        lows = [lo for lo, _ in intervals]
        highs = [hi for _, hi in intervals]

        def worst_residual(f: float) -> float:
            return max(
                max(lo - f, f - hi, 0.0) for lo, hi in intervals
            )

        target = _golden_section(worst_residual, min(lows), max(highs))
        grid_best = min(sorted(set(lows) | set(highs)), key=worst_residual)
        if worst_residual(grid_best) < worst_residual(target):
            target = grid_best
        assignments = [_clamped_assignment(em, label, tc, target) for em in ensemble]
        value = max(a.residual_mhz for a in assignments)

    return MatchPlan(
        target_ghz=float(target),
        objective=objective,
        objective_value_mhz=float(value),
        assignments=tuple(assignments),
    )


def match_frequencies_oracle(
    ensemble: list[Emitter],
    label: TransitionLabel,
    tc: TuningConstraints,
    objective: str = "max-matched",
    f_grid_mhz: float = 1.0,
    v_grid_v: float = 0.01,
) -> MatchPlan:
    """Exhaustive grid-search reference (test scale only).

    Scans targets on an ``f_grid_mhz`` grid and, independently of the
    closed-form inversion, voltages on a ``v_grid_v`` grid per emitter.
    """
    if not ensemble:
        raise ValueError("ensemble must be non-empty")
    tol_ghz = tc.match_tolerance_mhz / MHZ_PER_GHZ
    v_lo, v_hi = tc.v_range_v
    n_v = int(round((v_hi - v_lo) / v_grid_v)) + 1
    voltages = v_lo + v_grid_v * np.arange(n_v)
    reachable = []
    for em in ensemble:
        p = em.stark[label]
        kappa = tc.kappa_for(em.id)
        freqs = np.array([transition_frequency(p, kappa * v) for v in voltages])
        order = np.argsort(freqs)
        reachable.append((freqs[order], voltages[order]))

    f_min = min(f.min() for f, _ in reachable) - tol_ghz
    f_max = max(f.max() for f, _ in reachable) + tol_ghz
    step = f_grid_mhz / MHZ_PER_GHZ
    targets = f_min + step * np.arange(int((f_max - f_min) / step) + 1)

    def nearest(freqs: np.ndarray, volts: np.ndarray, f: float):
        i = np.searchsorted(freqs, f)
        best = None
        for k in (i - 1, i):
            if 0 <= k < freqs.size:
                cand = (abs(freqs[k] - f), volts[k], freqs[k])
                if best is None or cand[0] < best[0]:
                    best = cand
        return best

    best_target = None
    best_key = None
    for f in targets:
        residuals = [nearest(fr, vo, f) for fr, vo in reachable]
        if objective == "max-matched":
            matched = [r for r in residuals if r[0] <= tol_ghz + 1e-12]
            key = (-len(matched), sum(abs(r[1]) for r in matched), f)
        else:
            key = (max(r[0] for r in residuals), f)
        if best_key is None or key < best_key:
            best_key = key
            best_target = f

    assignments = []
    for em, (fr, vo) in zip(ensemble, reachable):
        r = nearest(fr, vo, best_target)
        assignments.append(
            Assignment(
                emitter_id=em.id,
                voltage_v=float(r[1]),
                achieved_ghz=float(r[2]),
                residual_mhz=float(r[0] * MHZ_PER_GHZ),
                matched=bool(r[0] <= tol_ghz + 1e-12),
            )
        )
    if objective == "max-matched":
        value = max((a.residual_mhz for a in assignments if a.matched), default=0.0)
    else:
        value = max(a.residual_mhz for a in assignments)
    return MatchPlan(
        target_ghz=float(best_target),
        objective=objective,
        objective_value_mhz=float(value),
        assignments=tuple(assignments),
    )


def ensemble_to_csv(ensemble: list[Emitter], label: TransitionLabel, tc: TuningConstraints) -> str:
    """CSV export: id, f_max_GHz, alpha, e0, kappa."""
    buf = StringIO()
    buf.write("id,f_max_GHz,alpha,e0,kappa\n")
    for em in ensemble:
        p = em.stark[label]
        buf.write(
            f"{em.id},{p.f_max_ghz:.9g},{p.alpha_mhz:.9g},{p.e0_mvpm:.9g},"
            f"{tc.kappa_for(em.id):.9g}\n"
        )
    return buf.getvalue()


def ensemble_from_csv(
    text: str, label: TransitionLabel = TransitionLabel.C
) -> tuple[list[Emitter], dict[str, float]]:
    """Parse an ensemble CSV; returns emitters and the per-emitter kappa map."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split(",")[0] != "id":
        raise ValueError("expected header 'id,f_max_GHz,alpha,e0,kappa'")
    emitters = []
    kappas: dict[str, float] = {}
    for ln in lines[1:]:
        ident, f_max, alpha, e0, kappa = ln.split(",")
        emitters.append(
            Emitter(
                id=ident,
                stark={label: StarkParams(float(f_max), float(alpha), float(e0))},
            )
        )
        kappas[ident] = float(kappa)
    return emitters, kappas
