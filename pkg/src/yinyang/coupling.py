"""
Yin-Yang Schwarz iteration.

Each chart's angular fringe (the padded layer just outside its box) is filled
by Lagrange interpolation from the other chart's unknowns.  Stencils are
built once per staggering class; vector components are interpolated from the
donor's own (u_theta, u_phi) and rotated into the target basis, while u_r
passes through because both charts share the radial direction.

One time step repeats the sequence

    exchange T -> temperature solve -> exchange u -> [flux fix] ->
    system 1 -> p1 -> system 2 -> p2 -> exchange p

on both charts, one after the other (multiplicative) or concurrently
against the previous iterate (additive), until the largest l2 difference
between successive iterates drops below ``tol``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .geometry import COMPONENT_STAG, ChartId, GeometryError, sibling_coords, unit_vectors
from .heat import HeatConfig, HeatStepper, ThermalState, extrapolate_half, initial_state
from .momentum import ACParams, FlowState, MomentumStepper, initial_flow, pressure_update
from .operators import advecting_components
from .problems import Problem, apply_walls, extrapolate_fringe, wall_values
from .verify import field_error

ANGULAR_CLASSES = ("cc", "fc", "cf")


class OverlapTooSmallError(GeometryError):
    def __init__(self, message, eps_min):
        super().__init__(message)
        self.eps_min = eps_min


class FluxFixError(RuntimeError):
    pass


def lagrange_weights(nodes, x):
    """Weights of the Lagrange interpolant through ``nodes`` (m, k) at ``x`` (m,)."""
    nodes = np.asarray(nodes, float)
    x = np.asarray(x, float)[:, None]
    k = nodes.shape[1]
    w = np.ones_like(nodes)
    for j in range(k):
        for m in range(k):
            if m != j:
                w[:, j] *= (x[:, 0] - nodes[:, m]) / (nodes[:, j] - nodes[:, m])
    return w


@dataclass
class InterpolationStencil:
    """Donor blocks and weights for a set of target points (one donor class)."""

    start_theta: np.ndarray
    start_phi: np.ndarray
    w_theta: np.ndarray
    w_phi: np.ndarray

    @property
    def k(self):
        return self.w_theta.shape[1]

    def apply(self, donor):
        """Interpolate a padded donor array (all radial rows) to the targets."""
        k = self.k
        J = self.start_theta[:, None, None] + np.arange(k)[None, :, None]
        K = self.start_phi[:, None, None] + np.arange(k)[None, None, :]
        block = donor[:, J, K]  # (nr, m, k, k)
        return np.einsum("rmab,ma,mb->rm", block, self.w_theta, self.w_phi)


@dataclass
class TargetSet:
    """Fringe points of one angular staggering class of the target chart."""

    J: np.ndarray
    K: np.ndarray
    stencils: dict  # donor angular class -> InterpolationStencil
    rotation: np.ndarray | None = None  # (2, 2, m) for the theta/phi component classes


@dataclass
class ExchangeMap:
    target: ChartId
    k: int
    sets: dict  # target angular class -> TargetSet

    def points(self):
        return sum(s.J.size for s in self.sets.values())


def _stencil_1d(pts, lo, hi, x, k):
    """Start indices and weights of k-point stencils within pts[lo..hi]."""
    if hi - lo + 1 < k:
        raise GeometryError(f"interpolation order {k} exceeds the donor's {hi - lo + 1} unknowns")
    i = np.searchsorted(pts, x) - 1
    if k % 2:
        near = np.where(x - pts[np.clip(i, 0, len(pts) - 1)] < pts[np.clip(i + 1, 0, len(pts) - 1)] - x, i, i + 1)
        start = near - (k - 1) // 2
    else:
        start = i - k // 2 + 1
    start = np.clip(start, lo, hi - k + 1)
    nodes = pts[start[:, None] + np.arange(k)[None, :]]
    return start, lagrange_weights(nodes, x)


def build_exchange_map(domain, target, k=3):
    """Stencils filling ``target``'s fringe from the other chart."""
    if k not in (2, 3, 4):
        raise ValueError("interpolation order k must be 2, 3 or 4")
    target = ChartId(target)
    tg, dg = domain.grid(target), domain.grid(target.other)
    sets = {}
    deficit = 0.0
    for cls in ANGULAR_CLASSES:
        st, sp = cls
        mask = tg.fringe_mask("c" + cls)
        J, K = np.nonzero(mask)
        th, ph = tg.theta.points(st)[J], tg.phi.points(sp)[K]
        _, th2, ph2 = sibling_coords(target, np.ones_like(th), th, ph)
        donors = ("cc",) if cls == "cc" else ("fc", "cf")
        stencils = {}
        for dcls in donors:
            dt, dp = dcls
            out = []
            for ax, s, x in ((dg.theta, dt, th2), (dg.phi, dp, ph2)):
                pts = ax.points(s)
                lo, hi = ax.unknown_range(s)
                deficit = max(deficit, float(np.max(pts[lo] - x)), float(np.max(x - pts[hi])))
                out.append(_stencil_1d(pts, lo, hi, x, k))
            stencils[dcls] = InterpolationStencil(out[0][0], out[1][0], out[0][1], out[1][1])
        rot = None
        if cls != "cc":
            _, et, ep = unit_vectors(target, th, ph)
            _, dt_, dp_ = unit_vectors(target.other, th2, ph2)
            dot = lambda a, b: np.sum(a * b, axis=0)
            rot = np.array([[dot(et, dt_), dot(et, dp_)], [dot(ep, dt_), dot(ep, dp_)]])
        sets[cls] = TargetSet(J, K, stencils, rot)
    if deficit > 0:
        eps = domain.extents.epsilon
        raise OverlapTooSmallError(
            f"fringe points of the {target.name} chart fall {deficit:.3e} rad outside the donor's "
            f"unknowns; overlap parameter must be at least about {eps + deficit:.4f}",
            eps_min=eps + deficit,
        )
    return ExchangeMap(target, k, sets)


def build_exchange_maps(domain, k=3):
    """(map filling Yin from Yang, map filling Yang from Yin)."""
    return {c: build_exchange_map(domain, c, k) for c in ChartId}


# -- exchange ----------------------------------------------------------------

def exchange_scalar(target, donor, xmap):
    """Overwrite the fringe of a cell-centred ``target`` from ``donor``."""
    ts = xmap.sets["cc"]
    out = target.copy()
    out[:, ts.J, ts.K] = ts.stencils["cc"].apply(donor)
    return out


def exchange_boundary(target, donor, xmap, kind="scalar"):
    """Fill the fringe of a scalar (``kind="scalar"``) or of a velocity
    (tuple of three padded components) from the donor chart."""
    if kind == "scalar":
        return exchange_scalar(target, donor, xmap)
    out = [target[0].copy(), target[1].copy(), target[2].copy()]
    s = xmap.sets["cc"]
    out[0][:, s.J, s.K] = s.stencils["cc"].apply(donor[0])
    for c, cls in ((1, "fc"), (2, "cf")):
        s = xmap.sets[cls]
        vt = s.stencils["fc"].apply(donor[1])
        vp = s.stencils["cf"].apply(donor[2])
        row = s.rotation[c - 1]
        out[c][:, s.J, s.K] = row[0][None, :] * vt + row[1][None, :] * vp
    return tuple(out)


# -- mass-flux correction -------------------------------------------------------

def flux_fix(values, weights, r_flux=0.0, area=None, eps_hat=1e-6, tol=1e-12, maxiter=None):
    """Minimiser of J(v) = 1/2 |v - u|^2 + (w.v + F)^2 / (2 eps_hat A^2).

    ``values`` are the boundary normal velocities u, ``weights`` their signed
    face areas w (outward normal), ``r_flux`` the fixed wall flux F and
    ``area`` the boundary measure A (default sum |w|).  Solved by conjugate
    gradients on the normal equations.
    """
    u = np.asarray(values, float).ravel()
    w = np.asarray(weights, float).ravel()
    A = float(np.sum(np.abs(w))) if area is None else float(area)
    flux = float(w @ u + r_flux)
    if abs(flux) < tol or not np.isfinite(eps_hat):
        return u.copy()
    c = 1.0 / (eps_hat * A * A)
    H = LinearOperator((u.size, u.size), matvec=lambda v: v + c * w * (w @ v), dtype=float)
    b = u - c * w * r_flux
    history = []

    def track(v):
        d = v - u
        history.append(0.5 * d @ d + 0.5 * c * (w @ v + r_flux) ** 2)
        if len(history) > 50 and min(history[-50:]) >= min(history[:-50]):
            raise FluxFixError("conjugate gradients stagnated: no decrease of J over 50 iterations")

    v, info = cg(H, b, x0=u.copy(), rtol=1e-14, atol=0.0, maxiter=maxiter or 10 * u.size, callback=track)
    if info > 0:
        raise FluxFixError(f"conjugate gradients did not converge in {info} iterations")
    return v


def flux_fix_closed_form(values, weights, r_flux=0.0, area=None, eps_hat=1e-6):
    """Rank-one closed form of the same minimiser (test oracle)."""
    u = np.asarray(values, float).ravel()
    w = np.asarray(weights, float).ravel()
    A = float(np.sum(np.abs(w))) if area is None else float(area)
    return u - w * (w @ u + r_flux) / (eps_hat * A * A + w @ w)


def boundary_flux_data(grid, u):
    """Normal velocities on the chart's outer fringe faces, their signed areas
    and the wall flux through the enclosed part of the r-walls."""
    r_c = grid.r.cpts[:, None, None]
    dr = grid.r.widths("c")[:, None, None]
    ir = grid.r.interior("c")
    vals, wts, where = [], [], []
    # theta faces: index 0 and n+2 of u_theta
    th_f = grid.theta.fpts
    ip = grid.phi.interior("c")
    dph = grid.phi.widths("c")[None, None, :]
    for j, sgn in ((0, -1.0), (grid.theta.size("f") - 1, 1.0)):
        a = (r_c * dr * np.sin(th_f[j]) * dph)[ir, 0, ip]
        vals.append(u[1][ir, j, ip].ravel())
        wts.append(sgn * a.ravel())
        where.append((1, j))
    # phi faces: index 0 and n+2 of u_phi
    it = grid.theta.interior("c")
    dth = grid.theta.widths("c")[None, :, None]
    for k, sgn in ((0, -1.0), (grid.phi.size("f") - 1, 1.0)):
        a = (r_c * dr * dth)[ir, it, 0]
        vals.append(u[2][ir, it, k].ravel())
        wts.append(sgn * a.ravel())
        where.append((2, k))
    # r walls over the angular cells enclosed by those faces
    th_c = grid.theta.cpts[None, :, None]
    dth_all = grid.theta.widths("c")[None, :, None]
    wall_area = np.sin(th_c) * dth_all * dph
    n = grid.r.n
    F = 0.0
    for i, R, sgn in ((1, grid.r.faces[0], -1.0), (n + 1, grid.r.faces[-1], 1.0)):
        F += sgn * R * R * float(np.sum((u[0][i][None] * wall_area)[0, 0:grid.theta.n + 2, ip]))
    return vals, wts, where, F


def apply_flux_fix(grid, u, eps_hat=1e-6, tol=1e-12):
    vals, wts, where, F = boundary_flux_data(grid, u)
    sizes = [v.size for v in vals]
    fixed = flux_fix(np.concatenate(vals), np.concatenate(wts), F, eps_hat=eps_hat, tol=tol)
    out = [u[0], u[1].copy(), u[2].copy()]
    ir, it, ip = grid.r.interior("c"), grid.theta.interior("c"), grid.phi.interior("c")
    pos = 0
    for (c, idx), m in zip(where, sizes):
        chunk = fixed[pos:pos + m]
        pos += m
        if c == 1:
            out[1][ir, idx, ip] = chunk.reshape(out[1][ir, idx, ip].shape)
        else:
            out[2][ir, it, idx] = chunk.reshape(out[2][ir, it, idx].shape)
    return tuple(out)


# -- splitting-error reduction ------------------------------------------------------

def error_reduction_rhs(psi_k_minus_1, psi_prev_time, L_parts, G):
    """Right-hand side of the factorised correction P (psi^k - psi^{k-1}) = rhs.

    With d = psi^{k-1} - psi^{n-1}: rhs = G - d + sum_d L_d(d), the residual
    of the unsplit equation (I - sum L) d = G.  ``L_parts`` are callables
    (already scaled by tau/2).  For the first iterate it returns G.
    """
    if psi_k_minus_1 is None:
        return G
    d = psi_k_minus_1 - psi_prev_time
    out = G - d
    for L in L_parts:
        out = out + L(d)
    return out


# -- global state -----------------------------------------------------------------

@dataclass
class SchwarzConfig:
    mode: str = "multiplicative"
    tol: float = 1e-6
    max_iters: int = 100
    flux_fix: bool = False
    error_reduction: bool = True
    k: int = 3
    pressure_exchange: bool = True
    eps_hat: float = 1e-6
    workers: int = 1
    accel: str = "anderson"  # "anderson" or "none"
    depth: int = 8

    def __post_init__(self):
        if self.mode not in ("additive", "multiplicative"):
            raise ValueError(f"mode must be 'additive' or 'multiplicative', got {self.mode!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.k not in (2, 3, 4):
            raise ValueError("k must be 2, 3 or 4")
        if self.accel not in ("anderson", "none"):
            raise ValueError(f"accel must be 'anderson' or 'none', got {self.accel!r}")


@dataclass
class ChartState:
    thermal: ThermalState
    flow: FlowState


@dataclass
class StepReport:
    iterations: int
    converged: bool
    residuals: dict  # quantity -> last successive-iterate difference
    history: list = field(default_factory=list)


@dataclass
class GlobalState:
    domain: object
    charts: dict  # ChartId -> ChartState
    t: float
    tau: float
    iterations: int = 0
    residuals: dict = field(default_factory=dict)

    def grid(self, chart):
        return self.domain.grid(chart)


QUANTITIES = ("T", "u1r", "u1t", "u1p", "u2r", "u2t", "u2p", "p1", "p2")


def _fields(cs):
    f = cs.flow
    return {"T": cs.thermal.T_n, "u1": f.u1_n, "u2": f.u2_n, "p1": f.p1_n, "p2": f.p2_n}


def _wall_fill(grid, chart, problem, t, f, stag, comp=None):
    fun = problem.temperature if stag == "ccc" and comp is None else problem.velocity
    inner, outer = wall_values(fun, grid, chart, t, stag, comp=comp)
    return apply_walls(grid, stag, f.copy(), inner, outer)


def initialize_global(domain, problem, tau, maps=None, t0=0.0, k=3):
    """Both charts at t0, fringes made consistent by one exchange."""
    charts = {}
    for c in ChartId:
        g = domain.grid(c)
        charts[c] = ChartState(initial_state(g, problem, tau, t0, c), initial_flow(g, problem, tau, t0, c))
    maps = maps or build_exchange_maps(domain, k)
    if not problem.has_exact:
        # no exact fringe: take it from the other chart's initial data
        snap = {c: _fields(charts[c]) for c in ChartId}
        for c in ChartId:
            m, d = maps[c], snap[c.other]
            T = exchange_boundary(charts[c].thermal.T_n, d["T"], m)
            u = exchange_boundary(charts[c].flow.u1_n, d["u1"], m, "vector")
            p = exchange_boundary(charts[c].flow.p1_n, d["p1"], m)
            charts[c] = ChartState(
                replace(charts[c].thermal, T_n=T, T_nm1=T.copy()),
                replace(charts[c].flow, u1_n=u, u1_nm1=u, u2_n=u, u2_nm1=u, p1_n=p, p2_n=p.copy()),
            )
    return GlobalState(domain, charts, t0, tau)


class _ChartStep:
    """Per-step data of one chart: steppers, boundary bases and current iterate."""

    def __init__(self, gs, chart, cfg, params, heat_cfg, problem):
        self.chart = chart
        self.grid = g = gs.grid(chart)
        cs = gs.charts[chart]
        th, fl = cs.thermal, cs.flow
        t1 = gs.t + gs.tau
        self.params = replace(params, error_reduction=cfg.error_reduction)
        hcfg = replace(heat_cfg, problem=problem, error_reduction=cfg.error_reduction)
        a = advecting_components(g, tuple(extrapolate_half(x, y) for x, y in zip(fl.u2_n, fl.u2_nm1)), "ccc")
        self.heat = HeatStepper(th, hcfg, a, workers=cfg.workers)
        self.mom = MomentumStepper(fl, self.params, extrapolate_half(th.T_n, th.T_nm1), problem, cfg.workers)
        self.th, self.fl = th, fl
        # boundary bases: walls at t^{n+1}; fringes are overwritten by exchange
        self.bT = _wall_fill(g, chart, problem, t1, th.T_n, "ccc")
        self.b1 = tuple(_wall_fill(g, chart, problem, t1, fl.u1_n[c], s, c) for c, s in enumerate(COMPONENT_STAG))
        self.b2 = tuple(_wall_fill(g, chart, problem, t1, fl.u2_n[c], s, c) for c, s in enumerate(COMPONENT_STAG))
        # current iterate, seeded by extrapolation (only its fringe is read by the donor side)
        ex = lambda x, y: 2.0 * x - y
        self.cur = {
            "T": ex(th.T_n, th.T_nm1),
            "u1": tuple(ex(x, y) for x, y in zip(fl.u1_n, fl.u1_nm1)),
            "u2": tuple(ex(x, y) for x, y in zip(fl.u2_n, fl.u2_nm1)),
            "p1": fl.p1_n.copy(),
            "p2": fl.p2_n.copy(),
        }
        self.solved = False

    def donor_view(self):
        return {k: v for k, v in self.cur.items()}

    def pass_(self, donor, xmap, cfg):
        g = self.grid
        prev = self.cur if self.solved else None
        bT = exchange_boundary(self.bT, donor["T"], xmap)
        T = self.heat.solve(bT, previous=prev["T"] if prev else None)
        b1 = exchange_boundary(self.b1, donor["u1"], xmap, "vector")
        b2 = exchange_boundary(self.b2, donor["u2"], xmap, "vector")
        if cfg.flux_fix:
            b1 = apply_flux_fix(g, b1, cfg.eps_hat)
            b2 = apply_flux_fix(g, b2, cfg.eps_hat)
        chi = self.params.chi

        def p_fringe(p, name):
            if cfg.pressure_exchange:
                return exchange_boundary(p, donor[name], xmap)
            return extrapolate_fringe(g, "ccc", p)

        u1 = self.mom.solve_system(1, b1, previous=prev["u1"] if prev else None)
        p1 = p_fringe(pressure_update(g, 1, self.fl.p1_n, u1, self.fl.u1_n, chi), "p1")
        u2 = self.mom.solve_system(2, b2, previous=prev["u2"] if prev else None, p1_new=p1)
        p2 = pressure_update(g, 2, self.fl.p2_n, u2, self.fl.u2_n, chi, p1_new=p1, p1_n=self.fl.p1_n)
        p2 = p_fringe(p2, "p2")
        new = {"T": T, "u1": u1, "u2": u2, "p1": p1, "p2": p2}
        diffs = self.differences(new)
        self.cur = new
        self.solved = True
        return diffs

    def pack(self):
        c = self.cur
        parts = [c["T"], *c["u1"], *c["u2"], c["p1"], c["p2"]]
        return np.concatenate([a.ravel() for a in parts])

    def unpack(self, vec):
        shapes = [self.cur["T"].shape] + [a.shape for a in self.cur["u1"]] * 2 + [self.cur["p1"].shape] * 2
        arrs, pos = [], 0
        for sh in shapes:
            m = int(np.prod(sh))
            arrs.append(vec[pos:pos + m].reshape(sh).copy())
            pos += m
        self.cur = {"T": arrs[0], "u1": tuple(arrs[1:4]), "u2": tuple(arrs[4:7]), "p1": arrs[7], "p2": arrs[8]}
        return pos

    def differences(self, new):
        g, old = self.grid, self.cur
        out = {"T": field_error(g, new["T"], old["T"], "ccc")}
        for s in ("u1", "u2"):
            for c, (tag, stag) in enumerate(zip("rtp", COMPONENT_STAG)):
                out[f"{s}{tag}"] = field_error(g, new[s][c], old[s][c], stag)
        for s in ("p1", "p2"):
            out[s] = field_error(g, new[s], old[s], "ccc")
        return out

    def finish(self, t1):
        c = self.cur
        th = replace(self.th, T_n=c["T"], T_nm1=self.th.T_n, t=t1)
        fl = replace(self.fl, u1_n=c["u1"], u1_nm1=self.fl.u1_n, u2_n=c["u2"], u2_nm1=self.fl.u2_n,
                     p1_n=c["p1"], p2_n=c["p2"], t=t1)
        return ChartState(th, fl)


def schwarz_time_step(gs, cfg, params=None, heat_cfg=None, problem=None, maps=None):
    """Advance both charts by tau.  Returns (new state, StepReport); a step
    that hits ``max_iters`` is still accepted and flagged in the report."""
    params = params or ACParams()
    heat_cfg = heat_cfg or HeatConfig()
    problem = problem or Problem()
    maps = maps or build_exchange_maps(gs.domain, cfg.k)
    steps = {c: _ChartStep(gs, c, cfg, params, heat_cfg, problem) for c in ChartId}
    history = []
    converged = False
    it = 0
    pool = ThreadPoolExecutor(2) if (cfg.mode == "additive" and cfg.workers > 1) else None
    acc = _Anderson(cfg.depth) if cfg.accel == "anderson" else None
    try:
        for it in range(1, cfg.max_iters + 1):
            x = _pack(steps) if (acc is not None and it > 1) else None
            diffs = {}
            if cfg.mode == "multiplicative":
                for c in ChartId:
                    _merge(diffs, steps[c].pass_(steps[c.other].donor_view(), maps[c], cfg))
            else:
                snap = {c: steps[c].donor_view() for c in ChartId}
                run = lambda c: steps[c].pass_(snap[c.other], maps[c], cfg)
                results = list(pool.map(run, list(ChartId))) if pool else [run(c) for c in ChartId]
                for d in results:
                    _merge(diffs, d)
            history.append(max(diffs.values()))
            if history[-1] < cfg.tol:
                converged = True
                break
            if x is not None:
                _unpack(steps, acc.update(x, _pack(steps)))
    finally:
        if pool is not None:
            pool.shutdown()
    t1 = gs.t + gs.tau
    charts = {c: steps[c].finish(t1) for c in ChartId}
    report = StepReport(it, converged, diffs, history)
    return GlobalState(gs.domain, charts, t1, gs.tau, it, diffs), report


class _Anderson:
    """Anderson mixing of a fixed-point map x -> Phi(x), solved through the
    small normal equations of the least-squares problem."""

    def __init__(self, depth):
        self.depth = depth
        self.dX = self.dF = None
        self.count = 0
        self.last = None

    def update(self, x, fx):
        f = fx - x
        if self.last is not None:
            x0, f0 = self.last
            if self.dX is None:
                self.dX = np.empty((self.depth, x.size))
                self.dF = np.empty((self.depth, x.size))
            slot = self.count % self.depth
            np.subtract(x, x0, out=self.dX[slot])
            np.subtract(f, f0, out=self.dF[slot])
            self.count += 1
        self.last = (x, f)
        m = min(self.count, self.depth)
        if m == 0:
            return fx
        F, X = self.dF[:m], self.dX[:m]
        gram = F @ F.T
        gram[np.diag_indices(m)] *= 1.0 + 1e-10
        gamma = np.linalg.lstsq(gram, F @ f, rcond=None)[0]
        return x + f - gamma @ (X + F)


def _pack(steps):
    return np.concatenate([steps[c].pack() for c in ChartId])


def _unpack(steps, vec):
    pos = 0
    for c in ChartId:
        pos += steps[c].unpack(vec[pos:])


def _merge(acc, d):
    for k, v in d.items():
        acc[k] = max(acc.get(k, 0.0), v)
