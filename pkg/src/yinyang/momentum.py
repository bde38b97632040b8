"""
Artificial-compressibility Navier-Stokes step on one chart.

Two systems are advanced: (u1, p1), first order in time, and the bootstrapped
(u2, p2), second order.  Every velocity component is updated by a
three-factor direction-split solve sharing the template of the heat scheme,

    prod_d (I - tau/2 L^_{c,d}) (u_c^{n+1} - u_c^n)
        = tau [ L_c u_c^* - 1/2 sum_d L^_{c,d} du_c^n + E_c ],

with L_c the full component operator (viscous terms including the
curvature terms acting on u_c, the diagonal grad-div term D_cc / 2chi and
linearised advection by the extrapolated u2), L^ the same with hat
Laplacians, and E_c the explicit terms: off-diagonal grad-div terms,
curvature couplings, explicit inertial terms, pressure gradient, buoyancy and
forcing.  Components are solved in the order r, theta, phi so that the
theta and phi equations see the new r (and theta) values at level n+1/2.
"""

from dataclasses import dataclass, replace

import numpy as np

from .geometry import COMPONENT_STAG, ChartId
from .heat import ConfigurationError, extrapolate_half
from .operators import (
    advecting_components,
    advection_operator,
    cross_curvature_terms,
    divergence,
    grad_div_operator,
    grad_div_term,
    grad_piece,
    interior_coords,
    laplacian_operator,
    own_curvature_operator,
    reaction,
    restagger,
)
from .problems import (
    Problem,
    apply_walls,
    fill_fringe,
    sample_forcing,
    sample_scalar,
    sample_velocity,
    wall_values,
)
from .splitting import SplitSolver, with_interior

# printed factor order (left to right) per component
FACTOR_ORDER = {0: (1, 2, 0), 1: (2, 0, 1), 2: (0, 1, 2)}


class SequencingError(RuntimeError):
    pass


@dataclass
class ACParams:
    chi: float = 1.0
    nu: float = 1.0
    Ra: float = 1.0
    Pr: float = 1.0
    gravity: str = "radial"  # "radial" (g = -e_r), "none"
    literal_rhs: bool = False
    error_reduction: bool = False

    def __post_init__(self):
        if not self.chi > 0:
            raise ConfigurationError("chi must be positive")
        if not self.nu > 0:
            raise ConfigurationError("nu must be positive")
        if self.gravity not in ("radial", "none"):
            raise ConfigurationError(f"gravity must be 'radial' or 'none', got {self.gravity!r}")


@dataclass
class FlowState:
    grid: object
    u1_n: tuple
    u1_nm1: tuple
    u2_n: tuple
    u2_nm1: tuple
    p1_n: np.ndarray
    p2_n: np.ndarray
    t: float
    tau: float
    chart: ChartId = ChartId.YIN

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError("time step tau must be positive")
        for u in (self.u1_n, self.u1_nm1, self.u2_n, self.u2_nm1):
            for c, stag in enumerate(COMPONENT_STAG):
                if u[c].shape != self.grid.shape(stag):
                    raise ConfigurationError(f"velocity component {c} has shape {u[c].shape}, expected {self.grid.shape(stag)}")

    def velocity(self, system, level="n"):
        return {(1, "n"): self.u1_n, (1, "nm1"): self.u1_nm1, (2, "n"): self.u2_n, (2, "nm1"): self.u2_nm1}[(system, level)]

    def pressure(self, system):
        return self.p1_n if system == 1 else self.p2_n


def component_operator(grid, c, d, params, adv, hat):
    """L_{c,d}: the d-direction part of the c-component operator."""
    stag = COMPONENT_STAG[c]
    op = laplacian_operator(grid, stag, d, hat=hat).scaled(params.nu)
    op = op + advection_operator(grid, stag, d, adv[d])
    if c == d:
        own = own_curvature_operator(grid, c, d)
        if own is not None:
            op = op + own.scaled(params.nu)
        op = op + grad_div_operator(grid, c).scaled(0.5 / params.chi)
        r, t, _ = interior_coords(grid, stag)
        if c == 1:
            op = op + reaction(grid, stag, 1, -adv[0] / r)
        elif c == 2:
            op = op + reaction(grid, stag, 2, -(adv[0] + adv[1] * np.cos(t) / np.sin(t)) / r)
    return op


def solve_order():
    return (0, 1, 2)


class MomentumStepper:
    """Operators, factorisations and static right-hand sides of one
    momentum step on one chart (reused across Schwarz iterates)."""

    def __init__(self, state, params, T_half=None, problem=None, workers=1, forcing=None):
        self.state = state
        self.params = params
        grid = self.grid = state.grid
        tau = state.tau
        problem = problem or Problem()
        self.a = tuple(extrapolate_half(x, y) for x, y in zip(state.u2_n, state.u2_nm1))
        self.adv = [advecting_components(grid, self.a, s) for s in COMPONENT_STAG]
        self.I = [grid.interior(s) for s in COMPONENT_STAG]
        self.hat = [[component_operator(grid, c, d, params, self.adv[c], True) for d in range(3)] for c in range(3)]
        self.full = [[component_operator(grid, c, d, params, self.adv[c], False) for d in range(3)] for c in range(3)]
        # with error reduction the iteration targets Crank-Nicolson with the
        # full operators; the hat factors only precondition it
        self.target = self.full if params.error_reduction else self.hat
        self.solvers = [
            SplitSolver(
                grid, COMPONENT_STAG[c], [self.hat[c][d] for d in FACTOR_ORDER[c]], tau,
                workers=workers, residual_ops=self.target[c],
            )
            for c in range(3)
        ]
        if forcing is None and problem.has_forcing:
            forcing = sample_forcing(problem, grid, state.chart, state.t + 0.5 * tau)
        buoy = None
        if T_half is not None and params.gravity == "radial":
            buoy = -params.Pr * params.Ra * restagger(grid, T_half, "ccc", "fcc")
        self.G_static = {s: self._static(s, buoy, forcing) for s in (1, 2)}
        self.G_upper = {}
        for s in (1, 2):
            w = tuple(extrapolate_half(x, y) for x, y in zip(self.state.velocity(s, "n"), self.state.velocity(s, "nm1")))
            self.G_upper[s] = [self.upper(c, w) for c in range(3)]

    def upper(self, c, v):
        """(sum_{j>c} D_cj v_j) / 2chi: the grad-div terms of components not yet advanced."""
        out = 0.0
        for j in range(c + 1, 3):
            out = out + grad_div_term(self.grid, c, j, v[j])[self.I[c]]
        return out * (0.5 / self.params.chi)

    def _static(self, system, buoy, forcing):
        st, p, grid = self.state, self.params, self.grid
        u_n, u_nm1 = st.velocity(system, "n"), st.velocity(system, "nm1")
        w = tuple(extrapolate_half(x, y) for x, y in zip(u_n, u_nm1))
        du = tuple(x - y for x, y in zip(u_n, u_nm1))
        half_old = tuple(0.5 * (x + y) for x, y in zip(u_n, u_nm1))
        pn = st.pressure(system)
        out = []
        for c in range(3):
            stag = COMPONENT_STAG[c]
            I = self.I[c]
            r, t, _ = interior_coords(grid, stag)
            g = np.zeros(grid.shape(stag))[I]
            for d in range(3):
                g += self.full[c][d].apply(w[c])[I]
                if p.literal_rhs:
                    g += p.nu * laplacian_operator(grid, stag, d, hat=True).apply(half_old[c])[I]
                else:
                    g -= 0.5 * self.target[c][d].apply(du[c])[I]
            adv = self.adv[c]
            if c == 0:
                wt = restagger(grid, w[1], "cfc", stag)[I]
                wp = restagger(grid, w[2], "ccf", stag)[I]
                g += (adv[1] * wt + adv[2] * wp) / r
                if buoy is not None:
                    g += buoy[I]
            elif c == 1:
                wp = restagger(grid, w[2], "ccf", stag)[I]
                g += adv[2] * wp * np.cos(t) / (np.sin(t) * r)
            g -= grad_piece(grid, c, pn)[I]
            if forcing is not None:
                g += forcing[c][I]
            out.append(g)
        return out

    def dynamic(self, system, c, u_new, p1_new=None):
        """Explicit terms that depend on the current iterate."""
        grid, p, st = self.grid, self.params, self.state
        I = self.I[c]
        u_n = st.velocity(system, "n")
        g = 0.0
        if c >= 1:
            h = tuple(0.5 * (x + y) for x, y in zip(u_new, u_n))
            terms = grad_div_term(grid, c, 0, h[0])
            if c == 2:
                terms = terms + grad_div_term(grid, 2, 1, h[1])
            g = terms[I] * (0.5 / p.chi) + p.nu * cross_curvature_terms(grid, c, h)[I]
        if system == 2:
            if p1_new is None:
                raise SequencingError("system 2 needs the updated p1")
            g = g - 0.5 * grad_piece(grid, c, p1_new - st.p1_n)[I]
        return g

    def solve_component(self, c, system, base, current, previous=None, p1_new=None):
        """Advance component ``c`` of ``system``.

        ``current`` holds the newest available components (level n+1 for those
        already advanced, ``None`` for the rest); ``base`` carries the
        component's level-(n+1) boundary data.  With error reduction,
        ``previous`` is the system's previous iterate: it supplies the
        lifting's interior and the level n+1/2 of the components not yet
        advanced in the grad-div terms, so that the fixed point treats the
        whole grad-div operator at n+1/2.
        """
        st, grid = self.state, self.grid
        u_n = st.velocity(system, "n")
        if any(current[k] is None for k in range(c)):
            raise SequencingError("components must be advanced in the order r, theta, phi")
        cur = tuple(current[k] if current[k] is not None else u_n[k] for k in range(3))
        iterate = self.params.error_reduction and previous is not None
        if iterate and c < 2:
            up = self.upper(c, tuple(0.5 * (x + y) for x, y in zip(previous, u_n)))
        else:
            up = self.G_upper[system][c]
        G = st.tau * (self.G_static[system][c] + up + self.dynamic(system, c, cur, p1_new))
        src = previous[c] if iterate else u_n[c]
        base = with_interior(base, src, grid, COMPONENT_STAG[c])
        return self.solvers[c].advance(G, u_n[c], base, iterate)

    def solve_system(self, system, bases, previous=None, p1_new=None):
        """Advance one system's three components in the order r, theta, phi."""
        new = [None, None, None]
        for c in solve_order():
            new[c] = self.solve_component(c, system, bases[c], new, previous, p1_new)
        return tuple(new)


def pressure_update(grid, system, p_n, u_new, u_n, chi, p1_new=None, p1_n=None):
    """p1: p^n - div u^{n+1/2} / chi;  p2: p2^n + (p1^{n+1} - p1^n) - div u2^{n+1/2} / chi.

    Only the unknown cell centres are updated; the fringe is left to the caller.
    """
    I = grid.interior("ccc")
    half = tuple(0.5 * (x + y) for x, y in zip(u_new, u_n))
    div = divergence(grid, half)
    out = p_n.copy()
    out[I] = p_n[I] - div[I] / chi
    if system == 2:
        if p1_new is None or p1_n is None:
            raise SequencingError("system 2 pressure update needs both p1 levels")
        out[I] += p1_new[I] - p1_n[I]
    return out


def velocity_boundary_fill(grid, chart, problem, t, u):
    """Wall and fringe data of the provider at time ``t`` (single-chart use)."""
    exact = sample_velocity(problem, grid, chart, t) if problem.has_exact else None
    out = []
    for c, stag in enumerate(COMPONENT_STAG):
        f = u[c].copy()
        if exact is not None:
            fill_fringe(grid, stag, f, exact[c])
        else:
            f[:, grid.fringe_mask(stag)] = 0.0
        inner, outer = wall_values(problem.velocity, grid, chart, t, stag, comp=c)
        out.append(apply_walls(grid, stag, f, inner, outer))
    return tuple(out)


def ns_time_step(state, params, T_half=None, problem=None, workers=1, p_fringe=None):
    """Advance both systems on one chart with provider boundary data.

    ``p_fringe`` optionally fills the new pressures' fringe (callable taking
    the pressure array and the time); by default the fringe keeps the
    provider's exact pressure when available.
    """
    problem = problem or Problem()
    grid = state.grid
    stepper = MomentumStepper(state, params, T_half, problem, workers)
    t1 = state.t + state.tau
    b1 = velocity_boundary_fill(grid, state.chart, problem, t1, state.u1_n)
    b2 = velocity_boundary_fill(grid, state.chart, problem, t1, state.u2_n)
    u1 = stepper.solve_system(1, b1)
    p1 = pressure_update(grid, 1, state.p1_n, u1, state.u1_n, params.chi)
    u2 = stepper.solve_system(2, b2, p1_new=p1)
    p2 = pressure_update(grid, 2, state.p2_n, u2, state.u2_n, params.chi, p1_new=p1, p1_n=state.p1_n)
    for p in (p1, p2):
        if p_fringe is not None:
            p_fringe(p, t1)
        elif problem.has_exact:
            fill_fringe(grid, "ccc", p, sample_scalar(problem.pressure, grid, state.chart, t1))
    return replace(state, u1_n=u1, u1_nm1=state.u1_n, u2_n=u2, u2_nm1=state.u2_n, p1_n=p1, p2_n=p2, t=t1)


def initial_flow(grid, problem, tau, t0=0.0, chart=ChartId.YIN):
    u0 = velocity_boundary_fill(grid, chart, problem, t0, sample_velocity(problem, grid, chart, t0))
    p0 = sample_scalar(problem.pressure, grid, chart, t0)
    # two-level start: u^{-1} := u^0
    return FlowState(grid, u0, u0, u0, u0, p0, p0.copy(), t0, tau, chart)
