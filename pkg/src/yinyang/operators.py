"""
Second-order finite-difference operators on one MAC chart.

Fields are plain padded numpy arrays (see :mod:`yinyang.geometry` for the
index convention) tagged by a three-letter staggering string such as
``"ccc"`` (cell centre) or ``"fcc"`` (r-face).  Operators only ever write the
unknown region of their output; the padding layer is the caller's business.

Directional operators are stored as three-point stencils in difference form

    (L f)_m = lo_m (f_{m-1} - f_m) + hi_m (f_{m+1} - f_m) + react_m f_m

so constant fields are annihilated exactly whenever ``react`` vanishes.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import COMPONENT_STAG

AXES = ("r", "theta", "phi")


class ShapeError(ValueError):
    pass


def _axis_index(direction):
    if isinstance(direction, str):
        try:
            return AXES.index(direction)
        except ValueError:
            raise ValueError(f"unknown direction {direction!r}") from None
    return int(direction)


def _bcast(a, ax):
    shape = [1, 1, 1]
    shape[ax] = -1
    return np.asarray(a).reshape(shape)


def _shift(sl, ax, lo, hi):
    out = list(sl)
    out[ax] = slice(lo, hi)
    return tuple(out)


def check_shape(grid, f, stag):
    if f.shape != grid.shape(stag):
        raise ShapeError(f"field shape {f.shape} does not match staggering {stag!r} {grid.shape(stag)}")


def interior_coords(grid, stag):
    """Broadcastable (r, theta, phi) restricted to the unknown region."""
    r, t, p = grid.coords(stag)
    I = grid.interior(stag)
    return r[I[0], :, :], t[:, I[1], :], p[:, :, I[2]]


def _line_geometry(grid, stag, ax):
    A = grid.axes[ax]
    s = stag[ax]
    lo, hi = A.unknown_range(s)
    pts = A.points(s)
    left, right = A.half_points(s)
    x = pts[lo : hi + 1]
    xm = pts[lo - 1 : hi]
    xp = pts[lo + 1 : hi + 2]
    xl = left[lo : hi + 1]
    xr = right[lo : hi + 1]
    return tuple(_bcast(v, ax) for v in (x, xm, xp, xl, xr))


@dataclass(eq=False)
class DirectionalOperator:
    """Three-point stencil along one axis, stored over the unknown region."""

    grid: object
    stag: str
    axis: int
    lo: np.ndarray
    hi: np.ndarray
    react: np.ndarray
    hat: bool = False

    @property
    def direction(self):
        return AXES[self.axis]

    def _full(self):
        shape = tuple(s.stop - s.start for s in self.grid.interior(self.stag))
        return DirectionalOperator(
            self.grid, self.stag, self.axis,
            np.broadcast_to(self.lo, shape), np.broadcast_to(self.hi, shape),
            np.broadcast_to(self.react, shape), self.hat,
        )

    def __add__(self, other):
        if other is None:
            return self
        if (other.grid is not self.grid) or other.stag != self.stag or other.axis != self.axis:
            raise ShapeError("can only add stencils on the same grid, staggering and axis")
        return DirectionalOperator(
            self.grid, self.stag, self.axis,
            self.lo + other.lo, self.hi + other.hi, self.react + other.react, self.hat or other.hat,
        )

    __radd__ = __add__

    def scaled(self, c):
        return DirectionalOperator(self.grid, self.stag, self.axis, c * self.lo, c * self.hi, c * self.react, self.hat)

    def apply(self, f, out=None):
        check_shape(self.grid, f, self.stag)
        I = self.grid.interior(self.stag)
        ax = self.axis
        a, b = I[ax].start, I[ax].stop
        fc = f[I]
        val = self.lo * (f[_shift(I, ax, a - 1, b - 1)] - fc) + self.hi * (f[_shift(I, ax, a + 1, b + 1)] - fc)
        val = val + self.react * fc
        if out is None:
            out = np.zeros_like(f)
        out[I] = val
        return out

    def tridiagonal(self, scale, closure):
        """Bands of ``I - scale * L`` on the unknown region, homogeneous closure.

        ``closure`` is ``"mirror"`` (ghost = -first unknown, i.e. zero value on
        the wall face) or ``"dirichlet"`` (zero neighbour).  Bands are returned
        with the solve axis last, flattened to (lines, n).
        """
        full = self._full()
        lo = np.moveaxis(np.asarray(full.lo), self.axis, -1)
        hi = np.moveaxis(np.asarray(full.hi), self.axis, -1)
        re = np.moveaxis(np.asarray(full.react), self.axis, -1)
        mid = re - lo - hi
        sub = -scale * lo
        sup = -scale * hi
        diag = 1.0 - scale * mid
        if closure == "mirror":
            diag[..., 0] += scale * lo[..., 0]
            diag[..., -1] += scale * hi[..., -1]
        n = diag.shape[-1]
        sub = np.ascontiguousarray(sub.reshape(-1, n))
        diag = np.ascontiguousarray(diag.reshape(-1, n))
        sup = np.ascontiguousarray(sup.reshape(-1, n))
        sub[:, 0] = 0.0
        sup[:, -1] = 0.0
        return sub, diag, sup


def closure_kind(grid, stag, axis):
    """Closure of the unknown range at both ends of ``axis`` for ``stag``."""
    return "mirror" if grid.axes[axis].wall and stag[axis] == "c" else "dirichlet"


def _zero_op(grid, stag, ax, hat=False):
    z = np.zeros((1, 1, 1))
    return DirectionalOperator(grid, stag, ax, z, z, z, hat)


def conservative_second(grid, stag, ax, flux_coef, prefactor, hat=False):
    """prefactor * d/dx(flux_coef(x) d/dx) in flux form along ``ax``."""
    x, xm, xp, xl, xr = _line_geometry(grid, stag, ax)
    w = xr - xl
    lo = prefactor * flux_coef(xl) / (w * (x - xm))
    hi = prefactor * flux_coef(xr) / (w * (xp - x))
    return DirectionalOperator(grid, stag, ax, lo, hi, np.zeros((1, 1, 1)), hat)


def first_derivative(grid, stag, ax, coef):
    """coef * d/dx by centred differences along ``ax``."""
    x, xm, xp, _, _ = _line_geometry(grid, stag, ax)
    d = xp - xm
    return DirectionalOperator(grid, stag, ax, -coef / d, coef / d, np.zeros((1, 1, 1)))


def reaction(grid, stag, ax, coef):
    z = np.zeros((1, 1, 1))
    return DirectionalOperator(grid, stag, ax, z, z, np.asarray(coef, dtype=float))


# -- Laplacian pieces --------------------------------------------------------

def laplacian_operator(grid, stag, direction, hat=False):
    """Delta_rr, Delta_thth or Delta_phph (hat variants freeze r -> R1, theta -> theta1)."""
    ax = _axis_index(direction)
    r, t, _ = interior_coords(grid, stag)
    if ax == 0:
        return conservative_second(grid, stag, 0, lambda x: x * x, 1.0 / (r * r))
    if ax == 1:
        rr = grid.R1 if hat else r
        return conservative_second(grid, stag, 1, np.sin, 1.0 / (rr * rr * np.sin(t)), hat)
    if hat:
        pref = 1.0 / (grid.R1 * np.sin(grid.theta1)) ** 2
        pref = np.full((1, 1, 1), pref)
    else:
        pref = 1.0 / (r * np.sin(t)) ** 2
    return conservative_second(grid, stag, 2, np.ones_like, pref, hat)


def apply_directional(op, f):
    return op.apply(f)


def apply_laplacian(grid, f, stag="ccc", hat=False):
    check_shape(grid, f, stag)
    out = np.zeros_like(f)
    for d in AXES:
        out += laplacian_operator(grid, stag, d, hat=hat).apply(f)
    return out


# -- advection ---------------------------------------------------------------

def advection_operator(grid, stag, direction, a):
    """-a_d * (metric) d/dx_d, with ``a`` the d-th advecting component on the unknown region."""
    ax = _axis_index(direction)
    r, t, _ = interior_coords(grid, stag)
    metric = (1.0, 1.0 / r, 1.0 / (r * np.sin(t)))[ax]
    return first_derivative(grid, stag, ax, -a * metric)


def advect(grid, stag, a, f):
    """u . grad f at the unknown points of ``stag``; ``a`` holds the three
    advecting components on that region."""
    out = np.zeros_like(f)
    for d in range(3):
        out -= advection_operator(grid, stag, d, a[d]).apply(f)
    return out


def advect_scalar(grid, u, f):
    a = advecting_components(grid, u, "ccc")
    return advect(grid, "ccc", a, f)


# -- staggering transfers ----------------------------------------------------

def _c2f(f, pts_c, pts_f, ax):
    """Linear interpolation from padded centres onto padded faces along ``ax``."""
    n2 = f.shape[ax]
    shape = list(f.shape)
    shape[ax] = n2 + 1
    out = np.empty(shape)
    c0, c1 = pts_c[:-1], pts_c[1:]
    x = pts_f[1:-1]
    wr = _bcast((x - c0) / (c1 - c0), ax)
    a = np.take(f, range(0, n2 - 1), axis=ax)
    b = np.take(f, range(1, n2), axis=ax)
    inner = (1 - wr) * a + wr * b
    out[_shift((slice(None),) * 3, ax, 1, n2)] = inner
    out[_shift((slice(None),) * 3, ax, 0, 1)] = np.take(inner, [0], axis=ax)
    out[_shift((slice(None),) * 3, ax, n2, n2 + 1)] = np.take(inner, [-1], axis=ax)
    return out


def _f2c(f, pts_f, pts_c, ax):
    n3 = f.shape[ax]
    f0, f1 = pts_f[:-1], pts_f[1:]
    wr = _bcast((pts_c - f0) / (f1 - f0), ax)
    a = np.take(f, range(0, n3 - 1), axis=ax)
    b = np.take(f, range(1, n3), axis=ax)
    return (1 - wr) * a + wr * b


def restagger(grid, f, src, dst):
    """Move a field between staggerings by per-axis linear averaging."""
    check_shape(grid, f, src)
    for ax, (s, d) in enumerate(zip(src, dst)):
        if s == d:
            continue
        A = grid.axes[ax]
        f = _c2f(f, A.cpts, A.fpts, ax) if s == "c" else _f2c(f, A.fpts, A.cpts, ax)
    return f


def advecting_components(grid, u, stag):
    """The three velocity components averaged onto the unknown points of ``stag``."""
    I = grid.interior(stag)
    return tuple(restagger(grid, uc, cs, stag)[I] for uc, cs in zip(u, COMPONENT_STAG))


# -- divergence / gradient ---------------------------------------------------

def div_piece(grid, j, uj):
    """j-th contribution to the divergence at all padded cell centres."""
    j = _axis_index(j)
    src = COMPONENT_STAG[j]
    check_shape(grid, uj, src)
    A = grid.axes[j]
    r, t, _ = grid.coords("ccc")
    fp = A.fpts
    w = _bcast(fp[1:] - fp[:-1], j)
    lo = np.take(uj, range(0, A.n + 2), axis=j)
    hi = np.take(uj, range(1, A.n + 3), axis=j)
    if j == 0:
        rf = _bcast(fp, 0)
        return (rf[1:] ** 2 * hi - rf[:-1] ** 2 * lo) / (r * r * w)
    if j == 1:
        sf = _bcast(np.sin(fp), 1)
        return (sf[:, 1:] * hi - sf[:, :-1] * lo) / (r * np.sin(t) * w)
    return (hi - lo) / (r * np.sin(t) * w)


def divergence(grid, u):
    return div_piece(grid, 0, u[0]) + div_piece(grid, 1, u[1]) + div_piece(grid, 2, u[2])


def grad_piece(grid, i, p):
    """i-th component of grad p on i-faces (padded faces 1..n+1 filled)."""
    i = _axis_index(i)
    check_shape(grid, p, "ccc")
    stag = COMPONENT_STAG[i]
    A = grid.axes[i]
    r, t, _ = grid.coords(stag)
    d = _bcast(A.cpts[1:] - A.cpts[:-1], i)
    out = np.zeros(grid.shape(stag))
    diff = (np.take(p, range(1, A.n + 2), axis=i) - np.take(p, range(0, A.n + 1), axis=i)) / d
    sl = _shift((slice(None),) * 3, i, 1, A.n + 2)
    if i == 0:
        out[sl] = diff
    elif i == 1:
        out[sl] = diff / r
    else:
        out[sl] = diff / (r * np.sin(t))
    return out


def grad(grid, p):
    return tuple(grad_piece(grid, i, p) for i in range(3))


def grad_div_term(grid, i, j, uj):
    """D_ij u_j: i-th gradient component of the j-th divergence contribution."""
    return grad_piece(grid, i, div_piece(grid, j, uj))


def grad_div_operator(grid, i):
    """D_ii as a three-point stencil along axis i on the i-face unknowns."""
    stag = COMPONENT_STAG[i]
    x, xm, xp, xl, xr = _line_geometry(grid, stag, i)
    r, t, _ = interior_coords(grid, stag)
    if i == 0:
        alpha = lambda s: s * s
        g = lambda s: s * s
        gamma = 1.0
    elif i == 1:
        alpha = np.sin
        g = lambda s: r * np.sin(s)
        gamma = 1.0 / r
    else:
        alpha = np.ones_like
        g = lambda s: r * np.sin(t)
        gamma = 1.0 / (r * np.sin(t))
    w = xr - xl
    gr = g(xr) * (xp - x)
    gl = g(xl) * (x - xm)
    hi = gamma * alpha(xp) / (gr * w)
    lo = gamma * alpha(xm) / (gl * w)
    mid = -gamma * alpha(x) * (1.0 / gr + 1.0 / gl) / w
    return DirectionalOperator(grid, stag, i, lo, hi, lo + hi + mid)


# -- weights and inner products ----------------------------------------------

class WeightKind(Enum):
    OMEGA = "omega"
    OMEGA1 = "omega1"
    OMEGA2 = "omega2"


def weight(grid, stag, kind=WeightKind.OMEGA):
    """Weight function sampled at the padded points of ``stag``."""
    kind = WeightKind(kind)
    r, t, _ = grid.coords(stag)
    st = np.sin(t)
    if kind is WeightKind.OMEGA:
        w = r * r * st
    elif kind is WeightKind.OMEGA1:
        w = (r * r / grid.R1**2 - 1.0) * st
    else:
        w = (r * r * st * st / (grid.R1 * np.sin(grid.theta1)) ** 2 - 1.0) / st
    return np.broadcast_to(w, grid.shape(stag))


def weighted_product(grid, f, g, stag="ccc", kind=WeightKind.OMEGA, region=None):
    """Mid-point quadrature of f g w over the unknown region (or ``region``)."""
    I = grid.interior(stag) if region is None else region
    w = weight(grid, stag, kind)[I]
    if np.any(w < -1e-14):
        raise ArithmeticError(f"negative {WeightKind(kind).value} weight on the chart")
    vol = grid.volumes(stag)[I]
    return float(np.sum(f[I] * g[I] * w * vol))


def weighted_norm(grid, f, stag="ccc", kind=WeightKind.OMEGA, region=None):
    return float(np.sqrt(max(weighted_product(grid, f, f, stag, kind, region), 0.0)))


def face_gradient_energy(grid, f, axis, kind=WeightKind.OMEGA):
    """Face-sum form of (-Delta_ii f, f)_omega for a centred scalar with its
    padding filled by homogeneous data.

    ``kind`` OMEGA1 (axis 1) or OMEGA2 (axis 2) gives the weighted seminorm
    ||d_i f||^2 of the difference between hat and full operators instead.
    """
    kind = WeightKind(kind)
    A = grid.axes[axis]
    I = list(grid.interior("ccc"))
    I[axis] = slice(0, A.n + 2)
    d = np.diff(f[tuple(I)], axis=axis)
    h = _bcast(A.cpts[1:] - A.cpts[:-1], axis)
    r, t, _ = interior_coords(grid, "ccc")
    widths = [_bcast(grid.axes[k].widths("c")[grid.interior("ccc")[k]], k) for k in range(3)]
    widths[axis] = 1.0
    vol = widths[0] * widths[1] * widths[2]
    xf = _bcast(A.fpts[1:-1], axis)
    if axis == 0:
        coef = xf * xf * np.sin(t)
    elif axis == 1:
        coef = np.sin(xf) if kind is WeightKind.OMEGA else (r * r / grid.R1**2 - 1.0) * np.sin(xf)
    else:
        st = np.sin(t)
        if kind is WeightKind.OMEGA:
            coef = 1.0 / st
        else:
            coef = (r * r * st * st / (grid.R1 * np.sin(grid.theta1)) ** 2 - 1.0) / st
    e = coef * d * d / h * vol
    if closure_kind(grid, "ccc", axis) == "mirror":
        # the wall sits half a spacing from the first centre
        e[_shift((slice(None),) * 3, axis, 0, 1)] *= 0.5
        e[_shift((slice(None),) * 3, axis, A.n, A.n + 1)] *= 0.5
    return float(np.sum(e))


# -- curvature terms of the vector Laplacian ---------------------------------

def own_curvature_operator(grid, comp, direction):
    """The part of the component's vector-Laplacian extras acting on the
    component itself along ``direction`` (None when absent)."""
    ax = _axis_index(direction)
    stag = COMPONENT_STAG[comp]
    r, t, _ = interior_coords(grid, stag)
    if comp == 0 and ax == 0:
        # -2u/r^2 + 2 d_r(r^2 u)/r^3 = 2u/r^2 + (2/r) d_r u
        return first_derivative(grid, stag, 0, 2.0 / r) + reaction(grid, stag, 0, 2.0 / (r * r))
    if comp == 1 and ax == 1:
        # -u/(r s)^2 + 2 c d_t(u s)/(r s)^2 = cos(2t) u/(r s)^2 + 2 c/(r^2 s) d_t u
        s, c = np.sin(t), np.cos(t)
        return first_derivative(grid, stag, 1, 2 * c / (r * r * s)) + reaction(
            grid, stag, 1, np.cos(2 * t) / (r * s) ** 2
        )
    if comp == 2 and ax == 2:
        return reaction(grid, stag, 2, -1.0 / (r * np.sin(t)) ** 2)
    return None


def cross_curvature_terms(grid, comp, u):
    """Curvature terms of the ``comp`` equation coupling to the other components."""
    stag = COMPONENT_STAG[comp]
    out = np.zeros(grid.shape(stag))
    I = grid.interior(stag)
    r, t, _ = interior_coords(grid, stag)
    s, c = np.sin(t), np.cos(t)
    if comp == 1:
        urc = restagger(grid, u[0], "fcc", "ccc")
        dth = grad_piece(grid, 1, urc)[I] * r  # plain d_theta
        flux = div_piece(grid, 0, u[0])  # (1/r^2) d_r(r^2 u_r) at centres
        flux_t = restagger(grid, flux, "ccc", "cfc")[I]
        out[I] = 2.0 * dth / (r * r) + 2.0 * c * flux_t / (r * s)
    elif comp == 2:
        urc = restagger(grid, u[0], "fcc", "ccc")
        utc = restagger(grid, u[1], "cfc", "ccc")
        dph_r = grad_piece(grid, 2, urc)[I] * r * s
        dph_t = grad_piece(grid, 2, utc)[I] * r * s
        out[I] = 2.0 * dph_r / (r * r * s) + 2.0 * c * dph_t / (r * s) ** 2
    return out


def vector_laplacian_extras(grid, comp, u):
    """Vector Laplacian minus the scalar Laplacian of component ``comp``, in the
    divergence-free rewritten form used by the component equations."""
    comp = _axis_index(comp)
    stag = COMPONENT_STAG[comp]
    out = cross_curvature_terms(grid, comp, u)
    op = own_curvature_operator(grid, comp, comp)
    return out + op.apply(u[comp])
