"""
Yin-Yang charts on a spherical shell and their staggered (MAC) grids.

Both charts share the coordinate box

    r in [R1, R2],  theta in [pi/4 - eps, 3pi/4 + eps],  phi in [pi/4 - eps, 7pi/4 + eps]

with theta the colatitude.  The Yin chart uses the standard spherical map,
the Yang chart the same map composed with the rotation (x, y, z) -> (-x, z, y),
which is its own inverse; hence the Yin -> Yang and Yang -> Yin coordinate
maps coincide.

Padded index convention (used by every array in the package)
------------------------------------------------------------
Along each axis with ``n`` cells:

* centre-located values have ``n + 2`` entries; padded index ``m`` sits at
  centre ``c[m - 1]`` (entries 0 and n+1 are ghost centres mirrored across the
  end faces),
* face-located values have ``n + 3`` entries; padded index ``m`` sits at face
  ``f[m - 1]`` (entries 0 and n+2 are mirrored one cell outside the box).

So face ``m`` lies between centres ``m - 1`` and ``m`` and centre ``m`` lies
between faces ``m`` and ``m + 1``, on every axis.

The radial axis ends at physical walls: centre quantities close with a
mirrored ghost (``ghost = 2 g - interior``), face quantities carry the wall
value on the wall face itself (padded 1 and n+1).  The angular axes end at
chart interfaces: the outermost padded entries are fringe values supplied
from the sibling chart (or by a boundary provider).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import qmc


class GeometryError(ValueError):
    """Invalid shell, grid specification or coordinate query."""


class PoleAmbiguityError(GeometryError):
    """The image point sits on the target chart's polar axis."""


class OutOfDomainError(GeometryError):
    def __init__(self, coordinate, message=None):
        self.coordinate = coordinate
        super().__init__(message or f"point outside grid box: {coordinate!r}")


class ChartId(Enum):
    YIN = 0
    YANG = 1

    @property
    def other(self):
        return ChartId.YANG if self is ChartId.YIN else ChartId.YIN


# rotation taking the standard spherical frame to the chart frame
_FRAME = {
    ChartId.YIN: np.eye(3),
    ChartId.YANG: np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]),
}


@dataclass(frozen=True)
class ShellExtents:
    R1: float
    R2: float
    epsilon: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.R1 < self.R2):
            raise GeometryError(f"shell radii must satisfy 0 < R1 < R2, got R1={self.R1}, R2={self.R2}")
        # eps == 0 is accepted on purpose: the charts then only touch, which
        # check_coverage() reports.
        if not (0.0 <= self.epsilon < np.pi / 8):
            raise GeometryError(f"overlap epsilon must lie in [0, pi/8), got {self.epsilon}")

    @property
    def theta_range(self):
        return (np.pi / 4 - self.epsilon, 3 * np.pi / 4 + self.epsilon)

    @property
    def phi_range(self):
        return (np.pi / 4 - self.epsilon, 7 * np.pi / 4 + self.epsilon)


def _check_stretching(s, n, name):
    if s is None:
        return np.linspace(0.0, 1.0, n + 1)
    if callable(s):
        table = np.asarray(s(np.linspace(0.0, 1.0, n + 1)), dtype=float)
    else:
        table = np.asarray(s, dtype=float)
    if table.shape != (n + 1,):
        raise GeometryError(f"{name} stretching must tabulate {n + 1} face positions, got shape {table.shape}")
    if not np.all(np.diff(table) > 0):
        raise GeometryError(f"{name} stretching must be strictly increasing")
    if abs(table[0]) > 1e-14 or abs(table[-1] - 1.0) > 1e-14:
        raise GeometryError(f"{name} stretching must map onto [0, 1]")
    table = table.copy()
    table[0], table[-1] = 0.0, 1.0
    return table


@dataclass(frozen=True)
class GridSpec:
    """Cell counts per direction and optional stretching.

    A stretching is either a callable mapping the uniform parameter in [0, 1]
    onto [0, 1], or a strictly increasing table of ``n + 1`` normalised face
    positions.
    """

    n_r: int
    n_theta: int
    n_phi: int
    stretching: tuple = (None, None, None)

    def __post_init__(self):
        for name, n in (("n_r", self.n_r), ("n_theta", self.n_theta), ("n_phi", self.n_phi)):
            if int(n) != n or n < 2:
                raise GeometryError(f"{name} must be an integer >= 2, got {n}")
        if len(self.stretching) != 3:
            raise GeometryError("stretching must hold one entry per direction")

    @property
    def counts(self):
        return (self.n_r, self.n_theta, self.n_phi)

    def normalised_faces(self):
        return tuple(
            _check_stretching(s, n, name)
            for s, n, name in zip(self.stretching, self.counts, ("r", "theta", "phi"))
        )


@dataclass(frozen=True, eq=False)
class Axis:
    """One coordinate direction of a MAC grid, with padded point arrays."""

    faces: np.ndarray
    wall: bool

    n: int = field(init=False)
    centers: np.ndarray = field(init=False)
    cpts: np.ndarray = field(init=False)
    fpts: np.ndarray = field(init=False)

    def __post_init__(self):
        f = np.asarray(self.faces, dtype=float)
        if f.ndim != 1 or f.size < 3 or not np.all(np.diff(f) > 0):
            raise GeometryError("faces must be a strictly increasing array with at least 3 entries")
        c = 0.5 * (f[1:] + f[:-1])
        cpts = np.concatenate([[2 * f[0] - c[0]], c, [2 * f[-1] - c[-1]]])
        fpts = np.concatenate([[2 * f[0] - f[1]], f, [2 * f[-1] - f[-2]]])
        for name, val in (("faces", f), ("n", f.size - 1), ("centers", c), ("cpts", cpts), ("fpts", fpts)):
            object.__setattr__(self, name, val)
        for a in (f, c, cpts, fpts):
            a.flags.writeable = False

    def points(self, s):
        return self.cpts if s == "c" else self.fpts

    def size(self, s):
        return self.n + 2 if s == "c" else self.n + 3

    def half_points(self, s):
        """Coordinates of the dual points left and right of every padded point."""
        if s == "c":
            return self.fpts[:-1], self.fpts[1:]
        left = np.concatenate([[2 * self.fpts[0] - self.cpts[0]], self.cpts])
        right = np.concatenate([self.cpts, [2 * self.fpts[-1] - self.cpts[-1]]])
        return left, right

    def widths(self, s):
        """Dual cell width at each padded point (mid-point quadrature weight)."""
        left, right = self.half_points(s)
        return right - left

    def unknown_range(self, s):
        """First and last padded index solved for on this axis (inclusive)."""
        if s == "c":
            return 1, self.n
        return (2, self.n) if self.wall else (1, self.n + 1)

    def interior(self, s):
        lo, hi = self.unknown_range(s)
        return slice(lo, hi + 1)


STAGGERING = {"T": "ccc", "p": "ccc", "ur": "fcc", "ut": "cfc", "up": "ccf"}
COMPONENT_STAG = ("fcc", "cfc", "ccf")


@dataclass(frozen=True, eq=False)
class MacGrid:
    """Staggered grid on one chart box.

    ``u_r`` lives on r-faces, ``u_theta`` on theta-faces, ``u_phi`` on
    phi-faces; scalars at cell centres (see :data:`STAGGERING`).
    """

    r: Axis
    theta: Axis
    phi: Axis
    R1: float
    theta1: float

    def __post_init__(self):
        if self.theta.fpts[0] <= 0.0 or self.theta.fpts[-1] >= np.pi:
            raise GeometryError("theta range (including fringe) must lie inside (0, pi)")

    @property
    def axes(self):
        return (self.r, self.theta, self.phi)

    @property
    def counts(self):
        return tuple(a.n for a in self.axes)

    def shape(self, stag):
        return tuple(a.size(s) for a, s in zip(self.axes, stag))

    def interior(self, stag):
        return tuple(a.interior(s) for a, s in zip(self.axes, stag))

    def coords(self, stag):
        """Broadcastable padded coordinate arrays (r, theta, phi) for a staggering."""
        r = self.r.points(stag[0])[:, None, None]
        t = self.theta.points(stag[1])[None, :, None]
        p = self.phi.points(stag[2])[None, None, :]
        return r, t, p

    def volumes(self, stag):
        """Dual-cell coordinate volumes dr dtheta dphi at padded points."""
        wr, wt, wp = (a.widths(s) for a, s in zip(self.axes, stag))
        return wr[:, None, None] * wt[None, :, None] * wp[None, None, :]

    def zeros(self, stag):
        return np.zeros(self.shape(stag))

    def fringe_mask(self, stag):
        """Angular padded positions filled from outside the chart (corners excluded)."""
        _, st, sp = stag
        nt, np_ = self.theta.size(st), self.phi.size(sp)
        it = np.zeros(nt, bool)
        it[self.theta.interior(st)] = True
        ip = np.zeros(np_, bool)
        ip[self.phi.interior(sp)] = True
        return (~it[:, None] & ip[None, :]) | (it[:, None] & ~ip[None, :])


def make_grid(extents, spec, theta_range=None, phi_range=None):
    """Build a MacGrid on the chart box (or on an explicit angular box)."""
    nr, nt, np_ = spec.normalised_faces()
    t0, t1 = theta_range if theta_range is not None else extents.theta_range
    p0, p1 = phi_range if phi_range is not None else extents.phi_range
    r_axis = Axis(extents.R1 + (extents.R2 - extents.R1) * nr, wall=True)
    t_axis = Axis(t0 + (t1 - t0) * nt, wall=False)
    p_axis = Axis(p0 + (p1 - p0) * np_, wall=False)
    return MacGrid(r_axis, t_axis, p_axis, R1=extents.R1, theta1=np.pi / 4 - extents.epsilon)


@dataclass(frozen=True, eq=False)
class YinYangDomain:
    extents: ShellExtents
    spec: GridSpec
    yin: MacGrid
    yang: MacGrid

    def grid(self, chart):
        return self.yin if chart is ChartId.YIN else self.yang


def build_domain(extents, spec):
    """Two congruent MAC grids on the Yin and Yang charts."""
    if not isinstance(extents, ShellExtents) or not isinstance(spec, GridSpec):
        raise GeometryError("build_domain expects ShellExtents and GridSpec")
    return YinYangDomain(extents, spec, make_grid(extents, spec), make_grid(extents, spec))


# -- coordinate maps ---------------------------------------------------------

def chart_to_cartesian(chart, r, theta, phi):
    r, theta, phi = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r, theta, phi)))
    st = np.sin(theta)
    std = np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)])
    return tuple(np.tensordot(_FRAME[chart], std, axes=1))


def cartesian_to_chart(chart, x, y, z, pole_tol=None):
    """Inverse of :func:`chart_to_cartesian`; phi is returned in [0, 2 pi)."""
    xyz = np.stack(np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, y, z))))
    X, Y, Z = np.tensordot(_FRAME[chart].T, xyz, axes=1)
    r = np.sqrt(X * X + Y * Y + Z * Z)
    theta = np.arccos(np.clip(Z / r, -1.0, 1.0))
    if pole_tol is not None:
        bad = (theta < pole_tol) | (theta > np.pi - pole_tol)
        if np.any(bad):
            raise PoleAmbiguityError(f"image point on the {chart.name} polar axis; longitude undefined")
    phi = np.mod(np.arctan2(Y, X), 2 * np.pi)
    return r, theta, phi


def sibling_coords(chart, r, theta, phi):
    """Coordinates in the other chart of the point (r, theta, phi) given in ``chart``."""
    xyz = chart_to_cartesian(chart, r, theta, phi)
    _, t2, p2 = cartesian_to_chart(chart.other, *xyz, pole_tol=1e-12)
    # radius is shared by both charts; return it untouched
    return np.broadcast_to(np.asarray(r, dtype=float), np.shape(t2)).copy(), t2, p2


def unit_vectors(chart, theta, phi):
    """Cartesian components of (e_r, e_theta, e_phi) for points of ``chart``.

    Each returned array has the Cartesian index first.
    """
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    zero = np.zeros_like(theta)
    er = np.stack([st * cp, st * sp, ct])
    et = np.stack([ct * cp, ct * sp, -st])
    ep = np.stack([-sp, cp, zero])
    M = _FRAME[chart]
    return tuple(np.tensordot(M, e, axes=1) for e in (er, et, ep))


# -- point location ----------------------------------------------------------

def locate_cell(grid, p):
    """Cell multi-index containing ``p`` and the normalised offsets inside it.

    A coordinate lying exactly on a face belongs to the lower-index cell.
    """
    idx, off = [], []
    for axis, x in zip(grid.axes, p):
        f = axis.faces
        if not (f[0] <= x <= f[-1]):
            raise OutOfDomainError(tuple(p))
        i = int(np.searchsorted(f, x, side="left")) - 1
        i = min(max(i, 0), axis.n - 1)
        idx.append(i)
        off.append((x - f[i]) / (f[i + 1] - f[i]))
    return tuple(idx), tuple(off)


def cell_point(grid, index, offsets):
    """Inverse of :func:`locate_cell`."""
    return tuple(
        a.faces[i] + o * (a.faces[i + 1] - a.faces[i]) for a, i, o in zip(grid.axes, index, offsets)
    )


# -- invariant checks --------------------------------------------------------

def in_box(extents, theta, phi, margin=0.0):
    t0, t1 = extents.theta_range
    p0, p1 = extents.phi_range
    return (theta >= t0 + margin) & (theta <= t1 - margin) & (phi >= p0 + margin) & (phi <= p1 - margin)


def boundary_margin(extents, samples=4001):
    """Smallest signed distance (radians) of a chart's angular boundary to the
    sibling chart's box edge.  Positive means strict containment."""
    t0, t1 = extents.theta_range
    p0, p1 = extents.phi_range
    s = np.linspace(0.0, 1.0, samples)
    edges = [
        (np.full_like(s, t0), p0 + (p1 - p0) * s),
        (np.full_like(s, t1), p0 + (p1 - p0) * s),
        (t0 + (t1 - t0) * s, np.full_like(s, p0)),
        (t0 + (t1 - t0) * s, np.full_like(s, p1)),
    ]
    worst = np.inf
    for t, p in edges:
        xyz = chart_to_cartesian(ChartId.YIN, 1.0, t, p)
        _, tt, pp = cartesian_to_chart(ChartId.YANG, *xyz)
        d = np.minimum.reduce([tt - t0, t1 - tt, pp - p0, p1 - pp])
        worst = min(worst, float(d.min()))
    return worst


def check_coverage(domain, n_points=10_000, seed=0):
    """Report the coverage and boundary-containment invariants of a domain."""
    ext = domain.extents
    sob = qmc.Halton(d=3, seed=seed).random(n_points)
    r = ext.R1 + (ext.R2 - ext.R1) * sob[:, 0]
    theta = np.arccos(1.0 - 2.0 * sob[:, 1])
    phi = 2 * np.pi * sob[:, 2]
    xyz = chart_to_cartesian(ChartId.YIN, r, theta, phi)
    covered = np.zeros(n_points, bool)
    for chart in ChartId:
        _, t, p = cartesian_to_chart(chart, *xyz)
        covered |= in_box(ext, t, p)
    margin = boundary_margin(ext)
    congruent = all(
        np.array_equal(a.faces, b.faces) for a, b in zip(domain.yin.axes, domain.yang.axes)
    )
    return {
        "covered": bool(covered.all()),
        "uncovered_points": int((~covered).sum()),
        "boundary_margin": margin,
        "boundary_contained": margin > 1e-12,
        "congruent": congruent,
    }


def cell_diameters(grid, chart=ChartId.YIN):
    """Largest Cartesian corner-to-corner distance of every cell."""
    R, T, P = np.meshgrid(grid.r.faces, grid.theta.faces, grid.phi.faces, indexing="ij")
    xyz = np.stack(chart_to_cartesian(chart, R, T, P))
    corners = [
        xyz[:, a : a + grid.r.n, b : b + grid.theta.n, c : c + grid.phi.n]
        for a in (0, 1) for b in (0, 1) for c in (0, 1)
    ]
    diam = np.zeros(grid.counts)
    for i in range(8):
        for j in range(i + 1, 8):
            d = np.sqrt(((corners[i] - corners[j]) ** 2).sum(axis=0))
            np.maximum(diam, d, out=diam)
    return diam


def max_cell_diameter(grid):
    return float(cell_diameters(grid).max())
