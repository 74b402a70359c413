"""Line-parameter and Stark-parameter recovery from PLE spectra.

Lorentzian peaks are fitted by damped (Levenberg-Marquardt) weighted least
squares with Poisson weights (variance ~ counts + 1 per bin); parameter
uncertainties come from the inverse curvature at the optimum.  Field
dependence is fitted as a plain quadratic polynomial by weighted linear
least squares -- globally solvable, no starting point -- and then mapped to
the vertex form (f_max, alpha, E0) with first-order covariance propagation.

A note on the linear-term check: adding a polynomial term b*E to a
quadratic yields another quadratic, so such a term is unobservable within
the quadratic Stark model (it only moves the vertex).  What *is*
observable is a vertex-odd magnitude term b*|E - E0|, the signature of a
permanent dipole.  ``linear_term_test`` therefore refits with an explicit
|E - e0_hat| term about the fitted vertex and reports its significance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import MHZ_PER_GHZ, MIN_FIELD_SPAN_MVPM, ALPHA_EPSILON_MHZ
from .errors import (
    DegenerateQuadratic,
    IllConditioned,
    InsufficientSpread,
    NoPeakFound,
    NotConverged,
)
from .spectra import Spectrum

MAX_FIT_ITERATIONS = 200
STEP_TOL = 1.0e-10
GRAD_TOL = 1.0e-10
MAD_THRESHOLD = 5.0
C2_EPSILON_GHZ = ALPHA_EPSILON_MHZ / MHZ_PER_GHZ


@dataclass(frozen=True)
class PeakGuess:
    center_ghz: float
    fwhm_mhz: float
    amplitude: float


@dataclass(frozen=True)
class LorentzianFit:
    """Fitted line parameters with 1-sigma uncertainties."""

    center_ghz: float
    center_sigma_ghz: float
    fwhm_mhz: float
    fwhm_sigma_mhz: float
    amplitude: float
    amplitude_sigma: float
    baseline: float
    baseline_sigma: float
    reduced_chi2: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class StarkFit:
    """Vertex-form quadratic Stark parameters with covariance.

    ``covariance`` is 3x3 over (f_max, alpha, e0); alpha may come out
    negative on noisy data (the estimator is unconstrained).
    """

    f_max_ghz: float
    f_max_sigma_ghz: float
    alpha_mhz: float
    alpha_sigma_mhz: float
    e0_mvpm: float
    e0_sigma_mvpm: float
    covariance: np.ndarray
    n_points: int


@dataclass(frozen=True)
class LinearTermTest:
    """Vertex-frame |E - e0| coefficient, its sigma and significance."""

    coefficient_ghz_per_mvpm: float
    sigma_ghz_per_mvpm: float
    significance: float
    e0_mvpm: float


def detect_peaks(s: Spectrum) -> list[PeakGuess]:
    """Initial guesses from local maxima above the noise floor.

    The floor is median + 5 * MAD; guesses are ordered by amplitude.

    Raises
    ------
    NoPeakFound
        If nothing rises above the floor.
    """
    y = s.counts
    x = s.detunings_ghz
    if y.size < 16:
        raise ValueError("need >= 16 samples to detect peaks")
    baseline = float(np.median(y))
    mad = float(np.median(np.abs(y - baseline)))
    floor = baseline + MAD_THRESHOLD * mad
    interior = np.arange(1, y.size - 1)
    is_max = (y[interior] > y[interior - 1]) & (y[interior] >= y[interior + 1])
    candidates = interior[is_max & (y[interior] > floor)]
    guesses = []
    for i in candidates:
        half = baseline + (y[i] - baseline) / 2.0
        lo = i
        while lo > 0 and y[lo] > half:
            lo -= 1
        hi = i
        while hi < y.size - 1 and y[hi] > half:
            hi += 1
        fwhm_ghz = max(x[hi] - x[lo], x[1] - x[0])
        guesses.append(
            PeakGuess(
                center_ghz=float(x[i]),
                fwhm_mhz=float(fwhm_ghz * MHZ_PER_GHZ),
                amplitude=float(y[i] - baseline),
            )
        )
    if not guesses:
        raise NoPeakFound("no local maximum above median + 5*MAD")
    guesses.sort(key=lambda g: g.amplitude, reverse=True)
    return guesses


def _lorentzian_model_jac(x: np.ndarray, p: np.ndarray):
    """Model counts and Jacobian for p = (baseline, amplitude, center, fwhm_mhz)."""
    b, a, c, w = p
    hw = w / (2.0 * MHZ_PER_GHZ)
    dx = x - c
    denom = dx * dx + hw * hw
    u = hw * hw / denom
    m = b + a * u
    jac = np.empty((x.size, 4))
    jac[:, 0] = 1.0
    jac[:, 1] = u
    jac[:, 2] = a * 2.0 * dx * u * u / (hw * hw)
    jac[:, 3] = a * (2.0 * u * (1.0 - u) / hw) / (2.0 * MHZ_PER_GHZ)
    return m, jac


def fit_lorentzian(s: Spectrum, guess: PeakGuess | None = None) -> LorentzianFit:
    """Fit baseline + Lorentzian to one spectrum.

    Damped least squares with weights 1/(counts + 1); converged means the
    relative step or the gradient norm fell below 1e-10.

    Raises
    ------
    NotConverged
        After 200 iterations; carries the best fit so far in ``.fit``.
    IllConditioned
        If the normal equations are singular at the optimum.
    """
    if guess is None:
        guess = detect_peaks(s)[0]
    x = s.detunings_ghz
    y = s.counts
    sigma = np.sqrt(y + 1.0)
    p = np.array(
        [float(np.median(y)), guess.amplitude, guess.center_ghz, guess.fwhm_mhz]
    )
    if not np.all(np.isfinite(p)) or p[3] <= 0.0:
        raise ValueError(f"invalid initial guess {guess}")

    def cost_of(params):
        m, jac = _lorentzian_model_jac(x, params)
        r = (m - y) / sigma
        return float(r @ r), r, jac / sigma[:, None]

    cost, r, jw = cost_of(p)
    lam = 1.0e-3
    converged = False
    iterations = 0
    while iterations < MAX_FIT_ITERATIONS:
        iterations += 1
        g = jw.T @ r
        if float(np.max(np.abs(g))) < GRAD_TOL:
            converged = True
            break
        jtj = jw.T @ jw
        d = np.diag(jtj).copy()
        d[d <= 0.0] = 1.0e-12
        accepted = False
        while lam < 1.0e14:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            if trial[3] <= 0.0:
                lam *= 10.0
                continue
            trial_cost, trial_r, trial_jw = cost_of(trial)
            if math.isfinite(trial_cost) and trial_cost <= cost:
                rel_step = float(np.linalg.norm(step)) / (
                    float(np.linalg.norm(p)) + 1.0e-30
                )
                p, cost, r, jw = trial, trial_cost, trial_r, trial_jw
                lam = max(lam * 0.3, 1.0e-12)
                accepted = True
                if rel_step < STEP_TOL:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            # damping exhausted: no descent direction left
            converged = True
        if converged:
            break

    jtj = jw.T @ jw
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned("singular normal equations at the optimum") from exc
    sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    dof = max(x.size - 4, 1)
    fit = LorentzianFit(
        center_ghz=float(p[2]),
        center_sigma_ghz=float(sigmas[2]),
        fwhm_mhz=abs(float(p[3])),
        fwhm_sigma_mhz=float(sigmas[3]),
        amplitude=float(p[1]),
        amplitude_sigma=float(sigmas[1]),
        baseline=float(p[0]),
        baseline_sigma=float(sigmas[0]),
        reduced_chi2=cost / dof,
        converged=converged,
        iterations=iterations,
    )
    if not converged:
        raise NotConverged(fit, f"no convergence in {MAX_FIT_ITERATIONS} iterations")
    return fit


def _weighted_quadratic(
    t: np.ndarray, f: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """WLS fit of f = d0 + d1 t + d2 t^2; returns coefficients and covariance."""
    design = np.column_stack([np.ones_like(t), t, t * t])
    xtw = design.T * w
    normal = xtw @ design
    try:
        cov = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned("singular normal equations in quadratic fit") from exc
    coeff = cov @ (xtw @ f)
    return coeff, cov


def _check_points(e, f, sigma_f):
    e = np.asarray(e, dtype=float)
    f = np.asarray(f, dtype=float)
    if e.shape != f.shape or e.ndim != 1:
        raise ValueError("field and frequency arrays must be 1-D and equal length")
    if e.size < 4:
        raise ValueError("need >= 4 points for a 3-parameter fit with one dof")
    span = float(e.max() - e.min())
    if span < MIN_FIELD_SPAN_MVPM:
        raise InsufficientSpread(
            f"field span {span:g} MV/m is below {MIN_FIELD_SPAN_MVPM:g} MV/m"
        )
    if sigma_f is None:
        w = np.ones_like(f)
    else:
        sigma_f = np.asarray(sigma_f, dtype=float)
        if sigma_f.shape != f.shape or np.any(sigma_f <= 0.0):
            raise ValueError("sigma_f must match f and be positive")
        w = 1.0 / (sigma_f * sigma_f)
    return e, f, w


def fit_stark(e_mvpm, f_ghz, sigma_f_ghz=None) -> StarkFit:
    """Weighted quadratic fit of center frequency vs local field.

    Fits f = c0 + c1 E + c2 E^2 and maps to the vertex form: alpha = -c2
    (in MHz/(MV/m)^2), e0 = -c1 / (2 c2), f_max = c0 - c1^2 / (4 c2), with
    the covariance propagated through the mapping.

    Raises
    ------
    InsufficientSpread
        If the field values span less than 5 MV/m.
    DegenerateQuadratic
        If |c2| is too small for the vertex form; the exception carries the
        polynomial coefficients/covariance in ``.coefficients``/``.covariance``.
    """
    e, f, w = _check_points(e_mvpm, f_ghz, sigma_f_ghz)
    e_mean = float(e.mean())
    t = e - e_mean
    d, cov_d = _weighted_quadratic(t, f, w)
    # shift back to the raw-field frame: exact linear transform
    shift = np.array(
        [
            [1.0, -e_mean, e_mean * e_mean],
            [0.0, 1.0, -2.0 * e_mean],
            [0.0, 0.0, 1.0],
        ]
    )
    c = shift @ d
    cov_c = shift @ cov_d @ shift.T
    c0, c1, c2 = c
    if abs(c2) < C2_EPSILON_GHZ:
        err = DegenerateQuadratic(
            f"|c2| = {abs(c2):.3e} GHz/(MV/m)^2 is below {C2_EPSILON_GHZ:.0e}; "
            "vertex form unidentifiable, use the polynomial coefficients"
        )
        err.coefficients = c
        err.covariance = cov_c
        raise err
    alpha = -c2 * MHZ_PER_GHZ
    e0 = -c1 / (2.0 * c2)
    f_max = c0 - c1 * c1 / (4.0 * c2)
    jac = np.array(
        [
            [1.0, -c1 / (2.0 * c2), c1 * c1 / (4.0 * c2 * c2)],
            [0.0, 0.0, -MHZ_PER_GHZ],
            [0.0, -1.0 / (2.0 * c2), c1 / (2.0 * c2 * c2)],
        ]
    )
    cov = jac @ cov_c @ jac.T
    sig = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return StarkFit(
        f_max_ghz=float(f_max),
        f_max_sigma_ghz=float(sig[0]),
        alpha_mhz=float(alpha),
        alpha_sigma_mhz=float(sig[1]),
        e0_mvpm=float(e0),
        e0_sigma_mvpm=float(sig[2]),
        covariance=cov,
        n_points=int(e.size),
    )


def linear_term_test(e_mvpm, f_ghz, sigma_f_ghz=None) -> LinearTermTest:
    """Significance of a vertex-odd linear term about the fitted vertex.

    Refits f = a0 + a1 |E - e0_hat| + a2 (E - e0_hat)^2 with e0_hat taken
    from :func:`fit_stark` and reports a1 / sigma(a1).
    """
    stark = fit_stark(e_mvpm, f_ghz, sigma_f_ghz)
    e, f, w = _check_points(e_mvpm, f_ghz, sigma_f_ghz)
    t = np.abs(e - stark.e0_mvpm)
    coeff, cov = _weighted_quadratic(t, f, w)
    sigma = math.sqrt(max(cov[1, 1], 0.0))
    if sigma == 0.0:
        raise IllConditioned("linear-term sigma is zero; design is degenerate")
    return LinearTermTest(
        coefficient_ghz_per_mvpm=float(coeff[1]),
        sigma_ghz_per_mvpm=sigma,
        significance=float(coeff[1] / sigma),
        e0_mvpm=stark.e0_mvpm,
    )
