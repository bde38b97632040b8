"""
Exact solutions, forcing terms, error norms and convergence tables.

Closed forms are written in Cartesian components and rotated into the
spherical basis of whichever chart asks for them.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import COMPONENT_STAG, ChartId, chart_to_cartesian, unit_vectors
from .operators import weight


def _cart(chart, r, theta, phi):
    return chart_to_cartesian(chart, r, theta, phi)


def to_spherical(chart, theta, phi, v):
    """Project Cartesian vector components ``v`` onto the chart's (e_r, e_th, e_ph)."""
    basis = unit_vectors(chart, theta, phi)
    return tuple(sum(e[i] * v[i] for i in range(3)) for e in basis)


def to_cartesian(chart, theta, phi, w):
    basis = unit_vectors(chart, theta, phi)
    return tuple(sum(basis[k][i] * w[k] for k in range(3)) for i in range(3))


# -- manufactured solution -----------------------------------------------------

@dataclass(frozen=True)
class ManufacturedSolution:
    """u = cos t (2x^2yz, -xy^2z, -xyz^2), p = cos t xyz, T = 2 cos t x^2yz."""

    Pr: float = 1.0
    Ra: float = 1.0
    kappa: float = 1.0
    gravity: str = "radial"  # "radial" (g = -e_r) or "none"

    def velocity_cart(self, t, x, y, z):
        c = np.cos(t)
        return (c * 2 * x * x * y * z, -c * x * y * y * z, -c * x * y * z * z)

    def pressure(self, t, x, y, z):
        return np.cos(t) * x * y * z

    def temperature(self, t, x, y, z):
        return 2 * np.cos(t) * x * x * y * z

    def forcing_cart(self, t, x, y, z):
        """f = u_t + (u.grad)u + grad p - Pr lap u - g Pr Ra T (hand-derived)."""
        c, s = np.cos(t), np.sin(t)
        U = (2 * x * x * y * z, -x * y * y * z, -x * y * z * z)
        q = x * x * y * y * z * z
        conv = (4 * x * q, y * q, z * q)
        gp = (y * z, x * z, x * y)
        lap = (4 * y * z, -2 * x * z, -2 * x * y)
        f = [-s * U[i] + c * c * conv[i] + c * gp[i] - self.Pr * c * lap[i] for i in range(3)]
        if self.gravity == "radial":
            r = np.sqrt(x * x + y * y + z * z)
            b = self.Pr * self.Ra * 2 * c * x * x * y * z / r
            f = [f[0] + b * x, f[1] + b * y, f[2] + b * z]
        return tuple(f)

    def heat_source(self, t, x, y, z):
        c, s = np.cos(t), np.sin(t)
        return -2 * s * x * x * y * z + 4 * c * c * x**3 * y * y * z * z - self.kappa * 4 * c * y * z


def manufactured_eval(t, chart, r, theta, phi, sol=None):
    """(u spherical components in ``chart``, p, T) of the manufactured solution."""
    sol = sol or ManufacturedSolution()
    x, y, z = _cart(chart, r, theta, phi)
    u = to_spherical(chart, theta, phi, sol.velocity_cart(t, x, y, z))
    return u, sol.pressure(t, x, y, z), sol.temperature(t, x, y, z)


def manufactured_forcing(t, chart, r, theta, phi, sol=None):
    sol = sol or ManufacturedSolution()
    x, y, z = _cart(chart, r, theta, phi)
    f = to_spherical(chart, theta, phi, sol.forcing_cart(t, x, y, z))
    return f, sol.heat_source(t, x, y, z)


# -- Landau jet ------------------------------------------------------------------

class ParameterDomainError(ValueError):
    pass


@dataclass(frozen=True)
class LandauSolution:
    """Steady axisymmetric round jet (Landau-Squire) about the Cartesian z axis.

    With nu the kinematic viscosity and A > 1 the jet constant, in spherical
    coordinates (R, Theta) about z:

        u_R     = (2 nu / R) ((A^2 - 1) / (A - cos Theta)^2 - 1)
        u_Theta = -(2 nu / R) sin Theta / (A - cos Theta)
        p       = (4 nu^2 / R^2) (A cos Theta - 1) / (A - cos Theta)^2

    The velocity is proportional to nu = 1/Re.
    """

    nu: float = 1.0
    A: float = 2.0

    def __post_init__(self):
        if not self.A > 1.0:
            raise ParameterDomainError(f"jet constant A must exceed 1 (A={self.A}); the solution is singular on the axis")
        if not self.nu > 0:
            raise ParameterDomainError("nu must be positive")

    @classmethod
    def for_reynolds(cls, Re, A=2.0):
        return cls(nu=1.0 / Re, A=A)

    def polar(self, R, C):
        """(u_R, u_Theta, p) as functions of R and C = cos Theta."""
        A, nu = self.A, self.nu
        S = np.sqrt(np.maximum(1.0 - C * C, 0.0))
        den = A - C
        uR = 2 * nu / R * ((A * A - 1) / den**2 - 1)
        uT = -2 * nu / R * S / den
        p = 4 * nu * nu / R**2 * (A * C - 1) / den**2
        return uR, uT, p

    def velocity_cart(self, x, y, z):
        R = np.sqrt(x * x + y * y + z * z)
        rho = np.sqrt(x * x + y * y)
        C = z / R
        uR, uT, _ = self.polar(R, C)
        safe = np.where(rho > 0, rho, 1.0)
        cp_ = np.where(rho > 0, x / safe, 1.0)
        sp_ = np.where(rho > 0, y / safe, 0.0)
        S = rho / R
        # e_R = (S cp, S sp, C); e_Theta = (C cp, C sp, -S)
        return (uR * S * cp_ + uT * C * cp_, uR * S * sp_ + uT * C * sp_, uR * C - uT * S)

    def pressure_cart(self, x, y, z):
        R = np.sqrt(x * x + y * y + z * z)
        return self.polar(R, z / R)[2]


def landau_eval(sol, chart, r, theta, phi):
    x, y, z = _cart(chart, r, theta, phi)
    u = to_spherical(chart, theta, phi, sol.velocity_cart(x, y, z))
    return u, sol.pressure_cart(x, y, z)


# -- numerical differentiation oracles ----------------------------------------

def _fd_grad(fun, X, h):
    """Sixth-order central differences of a scalar function of Cartesian points."""
    w = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
    out = []
    for i in range(3):
        acc = 0.0
        for k, wk in zip(range(-3, 4), w):
            if wk == 0.0:
                continue
            Y = [X[0], X[1], X[2]]
            Y[i] = X[i] + k * h
            acc = acc + wk * fun(*Y)
        out.append(acc / h)
    return out


def _fd_lap(fun, X, h):
    w = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0
    acc = 0.0
    for i in range(3):
        for k, wk in zip(range(-3, 4), w):
            Y = [X[0], X[1], X[2]]
            Y[i] = X[i] + k * h
            acc = acc + wk * fun(*Y)
    return acc / (h * h)


def ns_residual_fd(velocity, pressure, X, nu, h=5e-3, dudt=None, forcing=None):
    """(u.grad)u + grad p - nu lap u [+ u_t - f] and div u at Cartesian points
    by sixth-order finite differences."""
    comps = [lambda x, y, z, i=i: velocity(x, y, z)[i] for i in range(3)]
    u = velocity(*X)
    grads = [_fd_grad(c, X, h) for c in comps]
    gp = _fd_grad(pressure, X, h)
    res = []
    for i in range(3):
        v = sum(u[j] * grads[i][j] for j in range(3)) + gp[i] - nu * _fd_lap(comps[i], X, h)
        if dudt is not None:
            v = v + dudt[i]
        if forcing is not None:
            v = v - forcing[i]
        res.append(v)
    div = grads[0][0] + grads[1][1] + grads[2][2]
    return res, div


def landau_residual(sol, X, h=5e-3):
    """Steady Navier-Stokes momentum residual and divergence of the jet."""
    return ns_residual_fd(sol.velocity_cart, sol.pressure_cart, X, sol.nu, h=h)


def manufactured_forcing_fd(sol, t, X, h=5e-3, ht=1e-4):
    """Forcing and heat source of the manufactured solution by finite differences."""
    vel = lambda x, y, z: sol.velocity_cart(t, x, y, z)
    pres = lambda x, y, z: sol.pressure(t, x, y, z)
    dudt = [
        (sol.velocity_cart(t + ht, *X)[i] * 8 - sol.velocity_cart(t - ht, *X)[i] * 8
         - sol.velocity_cart(t + 2 * ht, *X)[i] + sol.velocity_cart(t - 2 * ht, *X)[i]) / (12 * ht)
        for i in range(3)
    ]
    mom, _ = ns_residual_fd(vel, pres, X, sol.Pr, h=h, dudt=dudt)
    if sol.gravity == "radial":
        x, y, z = X
        r = np.sqrt(x * x + y * y + z * z)
        T = sol.temperature(t, *X)
        mom = [mom[0] + sol.Pr * sol.Ra * T * x / r, mom[1] + sol.Pr * sol.Ra * T * y / r,
               mom[2] + sol.Pr * sol.Ra * T * z / r]
    temp = lambda x, y, z: sol.temperature(t, x, y, z)
    dTdt = (8 * sol.temperature(t + ht, *X) - 8 * sol.temperature(t - ht, *X)
            - sol.temperature(t + 2 * ht, *X) + sol.temperature(t - 2 * ht, *X)) / (12 * ht)
    gT = _fd_grad(temp, X, h)
    u = vel(*X)
    src = dTdt + sum(u[i] * gT[i] for i in range(3)) - sol.kappa * _fd_lap(temp, X, h)
    return mom, src


# -- error norms -------------------------------------------------------------

QUANTITY_STAG = {"p1": "ccc", "p2": "ccc", "p": "ccc", "T": "ccc"}


def field_error(grid, num, exact, stag):
    """Mid-point l2 norm (physical volume weight) of num - exact over the unknown points."""
    I = grid.interior(stag)
    w = weight(grid, stag)[I] * grid.volumes(stag)[I]
    d = num[I] - exact[I]
    return float(np.sqrt(np.sum(d * d * w)))


def vector_error(grid, num, exact):
    return float(np.sqrt(sum(field_error(grid, n, e, s) ** 2 for n, e, s in zip(num, exact, COMPONENT_STAG))))


@dataclass
class ErrorReport:
    time: float
    per_chart: dict = field(default_factory=dict)  # quantity -> {chart name: error}

    def add(self, quantity, chart, value):
        self.per_chart.setdefault(quantity, {})[ChartId(chart).name.lower()] = float(value)

    def combined(self, quantity):
        """Both charts' quadratures summed (overlap counted twice)."""
        return float(np.sqrt(sum(v * v for v in self.per_chart[quantity].values())))

    @property
    def quantities(self):
        return list(self.per_chart)

    def as_row(self):
        row = {"time": self.time}
        for q in self.per_chart:
            for c, v in self.per_chart[q].items():
                row[f"err_{q}_{c}"] = v
            row[f"err_{q}"] = self.combined(q)
        return row


class DegenerateFitError(ValueError):
    pass


@dataclass
class ConvergenceTable:
    kind: str  # "tau" or "h"
    rows: list = field(default_factory=list)  # (abscissa, {quantity: error})

    def add(self, x, errors):
        self.rows.append((float(x), dict(errors)))

    def slopes(self):
        return convergence_slope(self)


def convergence_slope(table):
    if len(table.rows) < 3:
        raise DegenerateFitError("at least three rows are needed for a slope fit")
    quantities = table.rows[0][1].keys()
    out = {}
    x = np.log([r[0] for r in table.rows])
    for q in quantities:
        e = np.array([r[1][q] for r in table.rows], dtype=float)
        if np.any(~np.isfinite(e)) or np.any(e <= 0):
            raise DegenerateFitError(f"non-positive or non-finite error for {q!r}")
        out[q] = float(np.polyfit(x, np.log(e), 1)[0])
    return out
