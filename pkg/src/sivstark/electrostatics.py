"""Static potential and field of coplanar electrodes on a dielectric half-space.

Solves div(eps grad phi) = 0 on a uniform 2-D grid (the cross-section
perpendicular to the electrode fingers): diamond fills the lower half,
vacuum the upper half, and the electrodes are zero-thickness equipotential
strips on the surface.  Outer boundaries are zero-normal-derivative, placed
at least two gap widths away from the electrodes.

Discretization is a vertex-centered finite-volume / 5-point stencil with
per-cell permittivity; edge conductances average the permittivity of the
two cells flanking each edge, which resolves the diamond/vacuum interface
exactly when the surface lies on a grid row (it always does here: the grid
is snapped so electrode edges and the surface coincide with nodes).  The
linear system is solved by Ruge-Stuben algebraic multigrid with conjugate
gradient acceleration; the contract is the relative residual, not the
algorithm.

Coordinates are in micrometers with x = 0 at the grounded electrode's inner
edge and y = 0 at the diamond surface.  Potentials in volts then give
fields in MV/m directly (1 V/um = 1 MV/m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from io import StringIO

import numpy as np
import pyamg
import scipy.sparse as sp

from .constants import EPSILON_DIAMOND, NM_PER_UM
from .errors import NoConvergence, OutOfDomain

DEFAULT_RESOLUTION = 304  # cells across the gap; 25 nm at the 7.6 um gap
MIN_RESOLUTION = 64
RESIDUAL_TOL = 1.0e-8
MAX_ITERATIONS = 500


@dataclass(frozen=True)
class ElectrodeGeometry:
    """Coplanar electrode pair (or a parallel-plate test capacitor).

    ``domain_um`` is (total width, height above the surface, depth below),
    all in micrometers; for coplanar electrodes it must enclose the strips
    with a margin of at least two gap widths on every side.
    """

    gap_um: float = 7.6
    electrode_width_um: float = 10.0
    applied_voltage_v: float = 10.0
    epsilon_diamond: float = EPSILON_DIAMOND
    domain_um: tuple[float, float, float] = (58.0, 15.2, 15.2)
    kind: str = "coplanar"  # "coplanar" | "parallel_plate"

    def __post_init__(self):
        if self.gap_um <= 0.0:
            raise ValueError("gap_um must be > 0")
        if self.epsilon_diamond < 1.0:
            raise ValueError("epsilon_diamond must be >= 1")
        if self.kind not in ("coplanar", "parallel_plate"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        width, above, below = self.domain_um
        if width <= 0.0 or above <= 0.0 or below <= 0.0:
            raise ValueError("domain extents must be > 0")
        if self.kind == "coplanar":
            if self.electrode_width_um <= 0.0:
                raise ValueError("electrode_width_um must be > 0")
            margin = (width - self.gap_um - 2.0 * self.electrode_width_um) / 2.0
            if margin < 2.0 * self.gap_um - 1e-9:
                raise ValueError(
                    "domain must enclose the electrodes with margin >= 2 x gap "
                    f"(lateral margin is {margin:g} um)"
                )
            if above < 2.0 * self.gap_um - 1e-9 or below < 2.0 * self.gap_um - 1e-9:
                raise ValueError("domain must extend >= 2 x gap above and below")


@dataclass(frozen=True)
class FieldProbe:
    """Probe point: ``x_um`` from the grounded inner edge, ``depth_nm`` below
    the surface.  ``kappa_mvpm_per_v`` is filled in by :func:`calibrate_kappa`."""

    x_um: float = 1.9
    depth_nm: float = 100.0
    kappa_mvpm_per_v: float | None = None

    def __post_init__(self):
        if self.depth_nm < 0.0:
            raise ValueError("depth_nm must be >= 0")
        if self.kappa_mvpm_per_v is not None and self.kappa_mvpm_per_v <= 0.0:
            raise ValueError("kappa must be > 0")


@dataclass(frozen=True)
class ConvergenceReport:
    iterations: int
    residual: float
    tolerance: float


@dataclass(eq=False)
class FieldMap:
    """Solved potential grid and derived cell-centered field components.

    ``phi`` is (ny+1, nx+1) on nodes; ``ex``/``ey`` are (ny, nx) on cell
    centers, in MV/m.  ``eps_cells`` records the per-cell permittivity used
    in the solve (needed for discrete flux checks).
    """

    xs_um: np.ndarray
    ys_um: np.ndarray
    phi_v: np.ndarray
    ex_mvpm: np.ndarray
    ey_mvpm: np.ndarray
    eps_cells: np.ndarray
    spacing_um: float
    convergence: ConvergenceReport

    @property
    def x_centers_um(self) -> np.ndarray:
        return self.xs_um[:-1] + 0.5 * self.spacing_um

    @property
    def y_centers_um(self) -> np.ndarray:
        return self.ys_um[:-1] + 0.5 * self.spacing_um


def _edge_conductances(eps_cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-edge conductances from per-cell permittivity.

    Returns (c_h, c_v): c_h[j, i] couples nodes (i, j)-(i+1, j) and averages
    the cells below/above the edge; c_v[j, i] couples (i, j)-(i, j+1) and
    averages the cells left/right.  Missing flanking cells at the domain
    boundary contribute nothing (half control volumes).
    """
    ny, nx = eps_cells.shape
    c_h = np.zeros((ny + 1, nx))
    c_h[1:, :] += 0.5 * eps_cells
    c_h[:-1, :] += 0.5 * eps_cells
    c_v = np.zeros((ny, nx + 1))
    c_v[:, 1:] += 0.5 * eps_cells
    c_v[:, :-1] += 0.5 * eps_cells
    return c_h, c_v


def _solve_grid(
    eps_cells: np.ndarray,
    dirichlet: np.ndarray,
    values: np.ndarray,
    tol: float,
    maxiter: int,
) -> tuple[np.ndarray, ConvergenceReport]:
    """Solve the discrete div(eps grad phi) = 0 system.

    ``dirichlet`` and ``values`` are boolean/float node arrays of shape
    (ny+1, nx+1).  Returns node potentials and the convergence report.
    """
    ny, nx = eps_cells.shape
    n_nodes = (ny + 1) * (nx + 1)
    c_h, c_v = _edge_conductances(eps_cells)

    node = np.arange(n_nodes, dtype=np.int32).reshape(ny + 1, nx + 1)
    p_h = node[:, :-1].ravel()
    q_h = node[:, 1:].ravel()
    p_v = node[:-1, :].ravel()
    q_v = node[1:, :].ravel()
    c = np.concatenate([c_h.ravel(), c_v.ravel()])
    p = np.concatenate([p_h, p_v])
    q = np.concatenate([q_h, q_v])

    rows = np.concatenate([p, q, p, q])
    cols = np.concatenate([p, q, q, p])
    data = np.concatenate([c, c, -c, -c])
    a = sp.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    del rows, cols, data, p, q, c, p_h, q_h, p_v, q_v

    fixed = dirichlet.ravel()
    free = ~fixed
    phi_fixed = values.ravel()[fixed]
    a_uu = a[free][:, free].tocsr()
    b = -a[free][:, fixed] @ phi_fixed
    del a

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        x = np.zeros(int(free.sum()))
        report = ConvergenceReport(iterations=0, residual=0.0, tolerance=tol)
    else:
        ml = pyamg.ruge_stuben_solver(a_uu)
        residuals: list[float] = []
        x = ml.solve(b, tol=tol, maxiter=maxiter, accel="cg", residuals=residuals)
        rel = float(np.linalg.norm(b - a_uu @ x)) / b_norm
        iterations = max(len(residuals) - 1, 0)
        if rel > tol:
            raise NoConvergence(iterations, rel)
        report = ConvergenceReport(iterations=iterations, residual=rel, tolerance=tol)

    phi = np.empty(n_nodes)
    phi[fixed] = phi_fixed
    phi[free] = x
    return phi.reshape(ny + 1, nx + 1), report


def solve_potential(
    geometry: ElectrodeGeometry,
    resolution: int = DEFAULT_RESOLUTION,
    tol: float = RESIDUAL_TOL,
    maxiter: int = MAX_ITERATIONS,
) -> FieldMap:
    """Solve the electrode geometry at ``resolution`` cells across the gap.

    The grid is snapped so the electrode edges and the diamond surface fall
    exactly on nodes; domain extents are rounded to whole cells.

    Raises
    ------
    NoConvergence
        If the relative residual does not reach ``tol`` within ``maxiter``
        multigrid cycles.
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION} cells per gap")
    g = geometry
    h = g.gap_um / resolution
    width, above, below = g.domain_um
    n_above = max(int(round(above / h)), 1)
    n_below = max(int(round(below / h)), 1)

    if g.kind == "parallel_plate":
        nx = resolution
        ny = n_above + n_below
        xs = h * np.arange(nx + 1)
        ys = -n_below * h + h * np.arange(ny + 1)
        eps_cells = np.full((ny, nx), g.epsilon_diamond)
        dirichlet = np.zeros((ny + 1, nx + 1), bool)
        values = np.zeros((ny + 1, nx + 1))
        dirichlet[:, 0] = True
        dirichlet[:, nx] = True
        values[:, nx] = g.applied_voltage_v
    else:
        n_w = max(int(round(g.electrode_width_um / h)), 1)
        margin = (width - g.gap_um - 2.0 * g.electrode_width_um) / 2.0
        n_m = max(int(round(margin / h)), 1)
        nx = resolution + 2 * n_w + 2 * n_m
        ny = n_above + n_below
        i_origin = n_m + n_w  # node index of the grounded inner edge (x = 0)
        xs = h * (np.arange(nx + 1) - i_origin)
        ys = -n_below * h + h * np.arange(ny + 1)
        j_surf = n_below
        ycell = ys[:-1] + 0.5 * h
        eps_cells = np.where(ycell < 0.0, g.epsilon_diamond, 1.0)[:, None] * np.ones(
            (1, nx)
        )
        dirichlet = np.zeros((ny + 1, nx + 1), bool)
        values = np.zeros((ny + 1, nx + 1))
        dirichlet[j_surf, i_origin - n_w : i_origin + 1] = True
        i_hot = i_origin + resolution
        dirichlet[j_surf, i_hot : i_hot + n_w + 1] = True
        values[j_surf, i_hot : i_hot + n_w + 1] = g.applied_voltage_v

    phi, report = _solve_grid(eps_cells, dirichlet, values, tol, maxiter)
    ex = -(np.diff(phi, axis=1)[:-1, :] + np.diff(phi, axis=1)[1:, :]) / (2.0 * h)
    ey = -(np.diff(phi, axis=0)[:, :-1] + np.diff(phi, axis=0)[:, 1:]) / (2.0 * h)
    return FieldMap(
        xs_um=xs,
        ys_um=ys,
        phi_v=phi,
        ex_mvpm=ex,
        ey_mvpm=ey,
        eps_cells=eps_cells,
        spacing_um=h,
        convergence=report,
    )


def _bilinear(grid: np.ndarray, xg: np.ndarray, yg: np.ndarray, x: float, y: float):
    i = int(np.clip(np.searchsorted(xg, x) - 1, 0, len(xg) - 2))
    j = int(np.clip(np.searchsorted(yg, y) - 1, 0, len(yg) - 2))
    tx = (x - xg[i]) / (xg[i + 1] - xg[i])
    ty = (y - yg[j]) / (yg[j + 1] - yg[j])
    return (
        grid[j, i] * (1 - tx) * (1 - ty)
        + grid[j, i + 1] * tx * (1 - ty)
        + grid[j + 1, i] * (1 - tx) * ty
        + grid[j + 1, i + 1] * tx * ty
    )


def field_at(fmap: FieldMap, probe: FieldProbe) -> tuple[float, float]:
    """(Ex, Ey) in MV/m at the probe point, bilinear on cell centers.

    Raises
    ------
    OutOfDomain
        If the probe lies outside the solved grid.
    """
    x = probe.x_um
    y = -probe.depth_nm / NM_PER_UM
    if not (fmap.xs_um[0] <= x <= fmap.xs_um[-1]) or not (
        fmap.ys_um[0] <= y <= fmap.ys_um[-1]
    ):
        raise OutOfDomain(f"probe ({x:g} um, {y:g} um) outside the solved domain")
    xc = fmap.x_centers_um
    yc = fmap.y_centers_um
    ex = float(_bilinear(fmap.ex_mvpm, xc, yc, x, y))
    ey = float(_bilinear(fmap.ey_mvpm, xc, yc, x, y))
    return ex, ey


def potential_at(fmap: FieldMap, x_um: float, y_um: float) -> float:
    """Node-bilinear potential (V) at a point inside the domain."""
    if not (fmap.xs_um[0] <= x_um <= fmap.xs_um[-1]) or not (
        fmap.ys_um[0] <= y_um <= fmap.ys_um[-1]
    ):
        raise OutOfDomain(f"({x_um:g}, {y_um:g}) um outside the solved domain")
    return float(_bilinear(fmap.phi_v, fmap.xs_um, fmap.ys_um, x_um, y_um))


def lorentz_local_field(e_ext_mvpm: float, epsilon: float) -> float:
    """Local field at the defect site: E_ext * (epsilon + 2) / 3."""
    if epsilon < 1.0:
        raise ValueError("epsilon must be >= 1")
    return e_ext_mvpm * (epsilon + 2.0) / 3.0


def calibrate_kappa(
    geometry: ElectrodeGeometry,
    probe: FieldProbe,
    resolution: int = DEFAULT_RESOLUTION,
    field_map: FieldMap | None = None,
) -> FieldProbe:
    """Voltage-to-local-field conversion at a probe point.

    Solves the geometry at its configured voltage (pass ``field_map`` to
    reuse an existing solve) and returns the probe with kappa set to the
    Lorentz-corrected field magnitude per applied volt.  By linearity of the
    boundary-value problem kappa is voltage-independent.
    """
    v = geometry.applied_voltage_v
    if v == 0.0:
        raise ValueError("calibration needs a nonzero applied voltage")
    fmap = field_map if field_map is not None else solve_potential(geometry, resolution)
    ex, ey = field_at(fmap, probe)
    e_ext = math.hypot(ex, ey)
    e_local = lorentz_local_field(e_ext, geometry.epsilon_diamond)
    return FieldProbe(
        x_um=probe.x_um,
        depth_nm=probe.depth_nm,
        kappa_mvpm_per_v=e_local / abs(v),
    )


def contour_flux(
    fmap: FieldMap, i_lo: int, i_hi: int, j_lo: int, j_hi: int
) -> tuple[float, float]:
    """(net, gross) eps*grad(phi).n flux out of the node rectangle
    [i_lo..i_hi] x [j_lo..j_hi].

    Uses the same edge conductances as the solve, so the net is zero up to
    the solver residual whenever the rectangle contains no electrode nodes;
    the gross (sum of absolute per-edge fluxes) sets the natural scale.
    """
    c_h, c_v = _edge_conductances(fmap.eps_cells)
    phi = fmap.phi_v
    sides = []
    if i_hi + 1 < phi.shape[1]:
        sides.append(
            c_h[j_lo : j_hi + 1, i_hi]
            * (phi[j_lo : j_hi + 1, i_hi] - phi[j_lo : j_hi + 1, i_hi + 1])
        )
    if i_lo - 1 >= 0:
        sides.append(
            c_h[j_lo : j_hi + 1, i_lo - 1]
            * (phi[j_lo : j_hi + 1, i_lo] - phi[j_lo : j_hi + 1, i_lo - 1])
        )
    if j_hi + 1 < phi.shape[0]:
        sides.append(
            c_v[j_hi, i_lo : i_hi + 1]
            * (phi[j_hi, i_lo : i_hi + 1] - phi[j_hi + 1, i_lo : i_hi + 1])
        )
    if j_lo - 1 >= 0:
        sides.append(
            c_v[j_lo - 1, i_lo : i_hi + 1]
            * (phi[j_lo, i_lo : i_hi + 1] - phi[j_lo - 1, i_lo : i_hi + 1])
        )
    edge_fluxes = np.concatenate(sides) if sides else np.zeros(1)
    return float(edge_fluxes.sum()), float(np.abs(edge_fluxes).sum())


def line_cut_csv(fmap: FieldMap, depth_um: float) -> str:
    """CSV line cut at constant depth: x_um,y_um,phi_V,Ex_MVpm,Ey_MVpm."""
    y = -abs(depth_um)
    buf = StringIO()
    buf.write("x_um,y_um,phi_V,Ex_MVpm,Ey_MVpm\n")
    xc = fmap.x_centers_um
    yc = fmap.y_centers_um
    for x in xc:
        ex = float(_bilinear(fmap.ex_mvpm, xc, yc, float(x), y))
        ey = float(_bilinear(fmap.ey_mvpm, xc, yc, float(x), y))
        phi = potential_at(fmap, float(x), y)
        buf.write(f"{x:.9g},{y:.9g},{phi:.9g},{ex:.9g},{ey:.9g}\n")
    return buf.getvalue()
