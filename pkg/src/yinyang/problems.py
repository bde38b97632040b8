"""
Initial, boundary and forcing data for the test problems, plus helpers that
sample them onto padded chart arrays and impose wall closures.
"""

import numpy as np

from .geometry import COMPONENT_STAG, ChartId
from .verify import LandauSolution, ManufacturedSolution, landau_eval, manufactured_eval, manufactured_forcing


class Problem:
    """Homogeneous data: zero fields, zero walls, no forcing."""

    name = "zero"
    has_exact = False
    has_forcing = False

    def temperature(self, chart, r, theta, phi, t):
        return np.zeros(np.broadcast(r, theta, phi).shape)

    def velocity(self, chart, r, theta, phi, t):
        z = np.zeros(np.broadcast(r, theta, phi).shape)
        return (z, z, z)

    def pressure(self, chart, r, theta, phi, t):
        return np.zeros(np.broadcast(r, theta, phi).shape)

    def momentum_forcing(self, chart, r, theta, phi, t):
        return None

    def heat_source(self, chart, r, theta, phi, t):
        return None

    # initial data may differ from boundary data (random heat problem)
    def initial_temperature(self, chart, r, theta, phi, t):
        return self.temperature(chart, r, theta, phi, t)


class ManufacturedProblem(Problem):
    name = "manufactured"
    has_exact = True
    has_forcing = True

    def __init__(self, sol=None):
        self.sol = sol or ManufacturedSolution()

    def temperature(self, chart, r, theta, phi, t):
        return manufactured_eval(t, chart, r, theta, phi, self.sol)[2]

    def velocity(self, chart, r, theta, phi, t):
        return manufactured_eval(t, chart, r, theta, phi, self.sol)[0]

    def pressure(self, chart, r, theta, phi, t):
        return manufactured_eval(t, chart, r, theta, phi, self.sol)[1]

    def momentum_forcing(self, chart, r, theta, phi, t):
        return manufactured_forcing(t, chart, r, theta, phi, self.sol)[0]

    def heat_source(self, chart, r, theta, phi, t):
        return manufactured_forcing(t, chart, r, theta, phi, self.sol)[1]


class LandauProblem(Problem):
    """Steady jet; temperature stays zero (no buoyancy coupling)."""

    name = "landau"
    has_exact = True

    def __init__(self, sol=None):
        self.sol = sol or LandauSolution()

    def velocity(self, chart, r, theta, phi, t):
        return landau_eval(self.sol, chart, r, theta, phi)[0]

    def pressure(self, chart, r, theta, phi, t):
        return landau_eval(self.sol, chart, r, theta, phi)[1]


class RandomHeatProblem(Problem):
    """Bounded random initial temperature with homogeneous walls and fringe."""

    name = "heat_only"

    def __init__(self, seed=0, amplitude=1.0):
        self.seed = seed
        self.amplitude = amplitude

    def initial_temperature(self, chart, r, theta, phi, t):
        shape = np.broadcast(r, theta, phi).shape
        rng = np.random.default_rng([self.seed, ChartId(chart).value])
        return self.amplitude * rng.uniform(-1.0, 1.0, shape)


# -- sampling -------------------------------------------------------------

def sample_scalar(fun, grid, chart, t, stag="ccc"):
    r, th, ph = grid.coords(stag)
    return np.broadcast_to(fun(chart, r, th, ph, t), grid.shape(stag)).astype(float)


def sample_velocity(problem, grid, chart, t, fun=None):
    fun = fun or problem.velocity
    out = []
    for c, stag in enumerate(COMPONENT_STAG):
        r, th, ph = grid.coords(stag)
        out.append(np.broadcast_to(fun(chart, r, th, ph, t)[c], grid.shape(stag)).astype(float))
    return tuple(out)


def sample_forcing(problem, grid, chart, t):
    if not problem.has_forcing:
        return None
    return sample_velocity(problem, grid, chart, t, fun=problem.momentum_forcing)


def sample_source(problem, grid, chart, t):
    if not problem.has_forcing:
        return None
    return sample_scalar(problem.heat_source, grid, chart, t)


# -- closures --------------------------------------------------------------

def wall_values(fun, grid, chart, t, stag, comp=None):
    """Exact values on the inner and outer wall for the angular points of ``stag``."""
    _, th, ph = grid.coords(stag)
    out = []
    for R in (grid.r.faces[0], grid.r.faces[-1]):
        v = fun(chart, np.full((1, 1, 1), R), th, ph, t)
        if comp is not None:
            v = v[comp]
        out.append(np.broadcast_to(v, (1,) + grid.shape(stag)[1:])[0].astype(float))
    return out


def apply_walls(grid, stag, f, inner, outer):
    """Impose wall data: mirrored ghost for r-centred values, wall faces for u_r."""
    n = grid.r.n
    if stag[0] == "c":
        f[0] = 2.0 * inner - f[1]
        f[n + 1] = 2.0 * outer - f[n]
    else:
        f[1] = inner
        f[n + 1] = outer
        f[0] = 2.0 * f[1] - f[2]
        f[n + 2] = 2.0 * f[n + 1] - f[n]
    return f


def wall_data_of(grid, stag, f):
    """Recover the wall values implied by an array's closure."""
    n = grid.r.n
    if stag[0] == "c":
        return 0.5 * (f[0] + f[1]), 0.5 * (f[n] + f[n + 1])
    return f[1].copy(), f[n + 1].copy()


def fill_fringe(grid, stag, f, values):
    """Copy angular fringe entries (every r) from ``values``."""
    m = grid.fringe_mask(stag)
    f[:, m] = values[:, m]
    return f


def extrapolate_fringe(grid, stag, f):
    """Fill the angular fringe by linear extrapolation from the chart's own
    unknowns (used for quantities that are not exchanged)."""
    for ax in (1, 2):
        lo, hi = grid.axes[ax].unknown_range(stag[ax])
        n = f.shape[ax]
        sl = [slice(None)] * 3

        def at(i):
            s = list(sl)
            s[ax] = i
            return tuple(s)

        f[at(lo - 1)] = 2.0 * f[at(lo)] - f[at(lo + 1)]
        f[at(hi + 1)] = 2.0 * f[at(hi)] - f[at(hi - 1)]
        if hi + 2 < n:
            f[at(hi + 2)] = 2.0 * f[at(hi + 1)] - f[at(hi)]
    return f


def make_problem(name, **kw):
    if name in ("zero", "custom"):
        return Problem()
    if name == "manufactured":
        return ManufacturedProblem(ManufacturedSolution(**kw))
    if name == "landau":
        return LandauProblem(LandauSolution(**kw))
    if name == "heat_only":
        return RandomHeatProblem(**kw)
    raise ValueError(f"unknown problem {name!r}")
