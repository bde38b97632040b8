"""
Douglas direction splitting for the heat and advection-diffusion equations
on one chart.

One step solves

    [I - tau/2 Lr][I - tau/2 Lth][I - tau/2 Lph] (T^{n+1} - T^n) / tau
        = kappa Lap T* - kappa/2 Lap^ dT^n - a . grad T^n + s^{n+1/2}

with T* = (3T^n - T^{n-1})/2, dT^n = T^n - T^{n-1}, Lap^ the hat Laplacian
and L_d = kappa Lap^_d - a_d (metric) d_d the directional factors.  The
right-hand side is assembled as F(T*) - 1/2 sum_d L_d dT^n with F the full
(non-hat) operator, which is the same expression.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import ChartId
from .operators import (
    WeightKind,
    advection_operator,
    face_gradient_energy,
    interior_coords,
    laplacian_operator,
)
from .problems import Problem, apply_walls, fill_fringe, sample_scalar, wall_values
from .splitting import SplitSolver, with_interior


def extrapolate_half(w_n, w_nm1):
    """w^{*,n+1/2} = (3 w^n - w^{n-1}) / 2."""
    return 1.5 * w_n - 0.5 * w_nm1


class ConfigurationError(ValueError):
    pass


@dataclass
class HeatConfig:
    kappa: float = 1.0
    problem: Problem = field(default_factory=Problem)
    error_reduction: bool = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigurationError("kappa must be positive")


@dataclass
class ThermalState:
    grid: object
    T_n: np.ndarray
    T_nm1: np.ndarray
    t: float
    tau: float
    chart: ChartId = ChartId.YIN

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError("time step tau must be positive")
        if self.T_n.shape != self.T_nm1.shape or self.T_n.shape != self.grid.shape("ccc"):
            raise ConfigurationError("temperature levels must live on the same grid")


def heat_operators(grid, kappa, a=None, hat=True):
    """Directional operators (r, theta, phi); ``a`` is the advecting velocity at
    the cell-centre unknowns (three arrays) or None."""
    ops = []
    for d in range(3):
        op = laplacian_operator(grid, "ccc", d, hat=hat).scaled(kappa)
        if a is not None:
            op = op + advection_operator(grid, "ccc", d, a[d])
        ops.append(op)
    return ops


def heat_rhs(state, cfg, a=None, source=None):
    """Right-hand side (per unit time) on the unknowns, as a padded array."""
    grid = state.grid
    if cfg.problem is None:
        raise ConfigurationError("heat step needs a boundary data provider")
    I = grid.interior("ccc")
    T_star = extrapolate_half(state.T_n, state.T_nm1)
    dT = state.T_n - state.T_nm1
    rhs = np.zeros(grid.shape("ccc"))
    for full, hat in zip(heat_operators(grid, cfg.kappa, a, hat=False), heat_operators(grid, cfg.kappa, a, hat=True)):
        rhs[I] += full.apply(T_star)[I] - 0.5 * hat.apply(dT)[I]
    if source is None and cfg.problem.has_forcing:
        source = sample_scalar(cfg.problem.heat_source, grid, state.chart, state.t + 0.5 * state.tau)
    if source is not None:
        rhs[I] += source[I]
    return rhs


class HeatStepper:
    """Everything of one temperature step that does not change between
    Schwarz iterates: factorised operator and right-hand side."""

    def __init__(self, state, cfg, a=None, workers=1, source=None):
        self.state = state
        self.cfg = cfg
        grid = state.grid
        self.I = grid.interior("ccc")
        ops = heat_operators(grid, cfg.kappa, a, hat=True)
        self.solver = SplitSolver(grid, "ccc", ops, state.tau, workers=workers, check_dominance=a is None)
        self.G = state.tau * heat_rhs(state, cfg, a, source)[self.I]

    def solve(self, base, previous=None):
        """New temperature from padded ``base`` holding the level-(n+1)
        boundary data.  With error reduction, ``previous`` supplies the interior
        of the lifting."""
        grid = self.state.grid
        iterate = self.cfg.error_reduction and previous is not None
        base = with_interior(base, previous if iterate else self.state.T_n, grid, "ccc")
        return self.solver.advance(self.G, self.state.T_n, base, iterate)


def boundary_fill(grid, chart, problem, t, T):
    """Impose the provider's wall and fringe data at time ``t`` on ``T``."""
    inner, outer = wall_values(problem.temperature, grid, chart, t, "ccc")
    if problem.has_exact:
        fill_fringe(grid, "ccc", T, sample_scalar(problem.temperature, grid, chart, t))
    else:
        T[:, grid.fringe_mask("ccc")] = 0.0
    return apply_walls(grid, "ccc", T, inner, outer)


def initial_state(grid, problem, tau, t0=0.0, chart=ChartId.YIN):
    T0 = sample_scalar(problem.initial_temperature, grid, chart, t0)
    T0 = boundary_fill(grid, chart, problem, t0, T0)
    # two-level start: T^{-1} := T^0
    return ThermalState(grid, T0, T0.copy(), t0, tau, chart)


def douglas_step(state, cfg, a=None, workers=1):
    """Advance one chart by tau with the provider's boundary data."""
    stepper = HeatStepper(state, cfg, a, workers)
    base = boundary_fill(state.grid, state.chart, cfg.problem, state.t + state.tau, state.T_n.copy())
    T_new = stepper.solve(base)
    return replace(state, T_n=T_new, T_nm1=state.T_n, t=state.t + state.tau)


def discrete_energy(state):
    """1/2 ||grad T^N||^2_omega + 1/4 (||d_th dT||^2_omega1 + ||d_ph dT||^2_omega2).

    Face-sum forms; equal to 1/2 (-Lap T, T) + 1/4 ((Lap - Lap^) dT, dT) for
    homogeneous data, which the split scheme cannot increase.
    """
    g = state.grid
    dT = state.T_n - state.T_nm1
    e = 0.5 * sum(face_gradient_energy(g, state.T_n, d) for d in range(3))
    e += 0.25 * (face_gradient_energy(g, dT, 1, WeightKind.OMEGA1) + face_gradient_energy(g, dT, 2, WeightKind.OMEGA2))
    return e
