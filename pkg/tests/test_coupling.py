import numpy as np
import pytest

from yinyang.coupling import (
    OverlapTooSmallError,
    SchwarzConfig,
    build_exchange_map,
    build_exchange_maps,
    error_reduction_rhs,
    exchange_boundary,
    exchange_scalar,
    flux_fix,
    flux_fix_closed_form,
    initialize_global,
    lagrange_weights,
    schwarz_time_step,
)
from yinyang.geometry import COMPONENT_STAG, ChartId, GridSpec, ShellExtents, build_domain, sibling_coords, unit_vectors
from yinyang.heat import HeatConfig, HeatStepper, boundary_fill, heat_operators, initial_state
from yinyang.momentum import ACParams
from yinyang.problems import make_problem
from yinyang.splitting import SplitSolver, with_interior
from yinyang.verify import field_error, vector_error

EXT = ShellExtents(1.0, 2.0, 0.1)


def sample_on(grid, fun, stag="ccc"):
    r, t, p = grid.coords(stag)
    return np.broadcast_to(fun(r, t, p), grid.shape(stag)).copy()


def test_lagrange_weights_partition_unity():
    nodes = np.array([[0.0, 1.0, 2.0], [1.0, 1.5, 3.0]])
    w = lagrange_weights(nodes, np.array([0.3, 2.2]))
    np.testing.assert_allclose(w.sum(axis=1), 1.0, rtol=0, atol=1e-15)
    np.testing.assert_allclose(np.sum(w * nodes**2, axis=1), [0.09, 4.84], rtol=1e-14)


def test_constant_scalar_exchange_exact(small_domain):
    for c in ChartId:
        xmap = build_exchange_map(small_domain, c)
        donor = np.full(small_domain.grid(c.other).shape("ccc"), 2.5)
        out = exchange_scalar(np.zeros(small_domain.grid(c).shape("ccc")), donor, xmap)
        s = xmap.sets["cc"]
        np.testing.assert_allclose(out[:, s.J, s.K], 2.5, rtol=0, atol=1e-14)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_polynomial_exchange_exact(k):
    dom = build_domain(EXT, GridSpec(4, 12, 24))
    target = ChartId.YANG
    xmap = build_exchange_map(dom, target, k)
    s = xmap.sets["cc"]
    tg = dom.grid(target)
    _, th2, ph2 = sibling_coords(target, np.ones(s.J.size), tg.theta.cpts[s.J], tg.phi.cpts[s.K])
    poly = lambda t, p: (t ** (k - 1) - 0.5 * t + 1.0) * (2.0 * p ** (k - 1) + p)
    donor = sample_on(dom.grid(target.other), lambda r, t, p: r * poly(t, p))
    out = exchange_scalar(np.zeros(tg.shape("ccc")), donor, xmap)
    r = tg.r.cpts[:, None]
    np.testing.assert_allclose(out[:, s.J, s.K], r * poly(th2, ph2)[None, :], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_smooth_exchange_order(k):
    errs = []
    ns = (12, 24, 48)
    for n in ns:
        dom = build_domain(EXT, GridSpec(2, n, 2 * n))
        tg, dg = dom.grid(ChartId.YIN), dom.grid(ChartId.YANG)
        xmap = build_exchange_map(dom, ChartId.YIN, k)
        s = xmap.sets["cc"]
        f = lambda t, p: np.sin(t) * np.cos(p)
        donor = sample_on(dg, lambda r, t, p: f(t, p) + 0 * r)
        _, th2, ph2 = sibling_coords(ChartId.YIN, np.ones(s.J.size), tg.theta.cpts[s.J], tg.phi.cpts[s.K])
        out = exchange_scalar(np.zeros(tg.shape("ccc")), donor, xmap)
        errs.append(np.max(np.abs(out[1, s.J, s.K] - f(th2, ph2))))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert slopes[-1] >= k - 0.2, (errs, slopes)


def test_zero_donor_and_idempotence(small_domain, rng):
    xmap = build_exchange_map(small_domain, ChartId.YIN)
    g = small_domain.grid(ChartId.YIN)
    target = rng.standard_normal(g.shape("ccc"))
    out = exchange_scalar(target, np.zeros(small_domain.grid(ChartId.YANG).shape("ccc")), xmap)
    s = xmap.sets["cc"]
    assert np.all(out[:, s.J, s.K] == 0.0)
    mask = g.fringe_mask("ccc")
    assert np.array_equal(out[:, ~mask], target[:, ~mask])
    donor = rng.standard_normal(small_domain.grid(ChartId.YANG).shape("ccc"))
    once = exchange_scalar(target, donor, xmap)
    assert np.array_equal(exchange_scalar(once, donor, xmap), once)


def _constant_vector_field(grid, chart, V):
    out = []
    for c, stag in enumerate(COMPONENT_STAG):
        r, t, p = grid.coords(stag)
        e = unit_vectors(chart, *np.broadcast_arrays(t, p))[c]
        comp = np.tensordot(V, e, axes=1)
        out.append(np.broadcast_to(comp, grid.shape(stag)).copy())
    return tuple(out)


def test_rigid_vector_field_rotated_consistently():
    """A constant Cartesian field sampled on the donor reappears on the target
    fringe in the target basis, up to the interpolation error."""
    V = np.array([0.3, -0.5, 0.8])
    errs = []
    for n in (12, 24, 48):
        dom = build_domain(EXT, GridSpec(2, n, 2 * n))
        xmap = build_exchange_map(dom, ChartId.YANG, 3)
        tg, dg = dom.grid(ChartId.YANG), dom.grid(ChartId.YIN)
        exact = _constant_vector_field(tg, ChartId.YANG, V)
        donor = _constant_vector_field(dg, ChartId.YIN, V)
        zero = tuple(np.zeros_like(e) for e in exact)
        out = exchange_boundary(zero, donor, xmap, kind="vector")
        e = 0.0
        for c, cls in enumerate(("cc", "fc", "cf")):
            s = xmap.sets[cls]
            e = max(e, float(np.max(np.abs(out[c][:, s.J, s.K] - exact[c][:, s.J, s.K]))))
        errs.append(e)
    assert errs[-1] < 1e-4
    assert np.log2(errs[-2] / errs[-1]) > 2.8, errs


def test_small_overlap_rejected():
    dom = build_domain(ShellExtents(1.0, 2.0, 0.0), GridSpec(4, 12, 24))
    with pytest.raises(OverlapTooSmallError) as info:
        build_exchange_maps(dom)
    assert info.value.eps_min > 0.0


def test_bad_interpolation_order(small_domain):
    with pytest.raises(ValueError):
        build_exchange_map(small_domain, ChartId.YIN, 5)


def test_flux_fix_leaves_balanced_data_unchanged():
    u = np.array([1.0, 1.0, -1.0, -1.0])
    w = np.array([1.0, 1.0, 1.0, 1.0])
    assert np.array_equal(flux_fix(u, w), u)


def test_flux_fix_matches_closed_form(rng):
    u = 0.7 + 0.1 * rng.standard_normal(40)
    w = np.abs(rng.standard_normal(40))
    for eps in (1e-2, 1e-6):
        v = flux_fix(u, w, r_flux=0.3, eps_hat=eps)
        np.testing.assert_allclose(v, flux_fix_closed_form(u, w, 0.3, eps_hat=eps), rtol=1e-10, atol=1e-12)
    v = flux_fix(u, w, r_flux=0.3, eps_hat=1e-12)
    assert abs(w @ v + 0.3) < 1e-8 * np.sum(w)


def test_flux_fix_infinite_penalty_parameter_is_identity(rng):
    u = rng.standard_normal(10)
    assert np.array_equal(flux_fix(u, np.ones(10), eps_hat=np.inf), u)


def test_error_reduction_rhs():
    G = np.arange(6.0)
    L = [lambda d: 2.0 * d, lambda d: -0.5 * d]
    assert error_reduction_rhs(None, np.zeros(6), L, G) is G
    prev = np.linspace(0.0, 1.0, 6)
    np.testing.assert_array_equal(error_reduction_rhs(prev.copy(), prev, L, G), G)
    a, b = np.ones(6), np.full(6, 3.0)
    lin = error_reduction_rhs(a + b, np.zeros(6), L, G) - G
    sep = (error_reduction_rhs(a, np.zeros(6), L, G) - G) + (error_reduction_rhs(b, np.zeros(6), L, G) - G)
    np.testing.assert_allclose(lin, sep, rtol=1e-14)
    np.testing.assert_allclose(lin, (a + b) * 0.5, rtol=1e-14)


def test_error_reduction_fixed_point_solves_unsplit_equation():
    dom = build_domain(EXT, GridSpec(6, 12, 24))
    g = dom.grid(ChartId.YIN)
    prob = make_problem("manufactured")
    tau = 0.01
    st = initial_state(g, prob, tau)
    cfg = HeatConfig(problem=prob, error_reduction=True)
    stepper = HeatStepper(st, cfg)
    base = boundary_fill(g, ChartId.YIN, prob, tau, st.T_n.copy())
    solver = stepper.solver

    def residual(T):
        r = stepper.G - solver.unsplit_lhs(T - st.T_n)
        return float(np.max(np.abs(r)))

    T = stepper.solve(base)
    plain = residual(T)
    for _ in range(60):
        T_new = stepper.solve(base, previous=T)
        if np.max(np.abs(T_new - T)) < 1e-14:
            break
        T = T_new
    assert residual(T_new) < 1e-12
    assert plain > 1e3 * residual(T_new)


def test_error_reduction_fixed_point_independent_of_factor_order():
    g = build_domain(EXT, GridSpec(6, 12, 24)).grid(ChartId.YIN)
    prob = make_problem("manufactured")
    tau = 0.01
    st = initial_state(g, prob, tau)
    stepper = HeatStepper(st, HeatConfig(problem=prob, error_reduction=True))
    base = boundary_fill(g, ChartId.YIN, prob, tau, st.T_n.copy())
    ops = heat_operators(g, 1.0)
    fixed = []
    for order in ((0, 1, 2), (2, 0, 1), (1, 2, 0)):
        solver = SplitSolver(g, "ccc", [ops[d] for d in order], tau)
        T = solver.advance(stepper.G, st.T_n, with_interior(base, st.T_n, g, "ccc"))
        for _ in range(60):
            T = solver.advance(stepper.G, st.T_n, with_interior(base, T, g, "ccc"), iterate=True)
        fixed.append(T)
    for T in fixed[1:]:
        assert field_error(g, T, fixed[0], "ccc") < 1e-12


def test_schwarz_config_validation():
    with pytest.raises(ValueError):
        SchwarzConfig(mode="sideways")
    with pytest.raises(ValueError):
        SchwarzConfig(tol=0.0)
    with pytest.raises(ValueError):
        SchwarzConfig(max_iters=0)
    with pytest.raises(ValueError):
        SchwarzConfig(accel="magic")


def _steps(mode, n_steps=2, spec=GridSpec(6, 18, 36), tau=0.01, tol=1e-9):
    dom = build_domain(EXT, spec)
    prob = make_problem("manufactured")
    maps = build_exchange_maps(dom)
    gs = initialize_global(dom, prob, tau, maps)
    cfg = SchwarzConfig(mode=mode, tol=tol, max_iters=200)
    reports = []
    for _ in range(n_steps):
        gs, rep = schwarz_time_step(gs, cfg, ACParams(), HeatConfig(), prob, maps)
        reports.append(rep)
    return gs, reports


def test_schwarz_converges_and_modes_agree():
    tol = 1e-9
    a, ra = _steps("additive", tol=tol)
    m, rm = _steps("multiplicative", tol=tol)
    assert all(r.converged for r in ra + rm)
    for c in ChartId:
        g, x, y = a.grid(c), a.charts[c], m.charts[c]
        assert field_error(g, x.thermal.T_n, y.thermal.T_n, "ccc") < 10 * tol
        assert vector_error(g, x.flow.u1_n, y.flow.u1_n) < 10 * tol
        assert vector_error(g, x.flow.u2_n, y.flow.u2_n) < 10 * tol
        assert field_error(g, x.flow.p1_n, y.flow.p1_n, "ccc") < 10 * tol
        assert field_error(g, x.flow.p2_n, y.flow.p2_n, "ccc") < 10 * tol


def _second_iterate_difference(tau, spec=GridSpec(12, 36, 72)):
    dom = build_domain(EXT, spec)
    prob = make_problem("manufactured")
    maps = build_exchange_maps(dom)
    gs = initialize_global(dom, prob, tau, maps)
    _, rep = schwarz_time_step(gs, SchwarzConfig(max_iters=2, accel="none"), ACParams(), HeatConfig(), prob, maps)
    return rep.residuals


def test_exact_seed_first_correction_shrinks_with_tau():
    """Seeded from the exact solution, the change between the first two
    iterates comes from the spatial truncation error over one step, so it
    falls faster than linearly in tau."""
    coarse, fine = _second_iterate_difference(1e-3), _second_iterate_difference(5e-4)
    assert coarse["T"] < 2e-4
    assert coarse["T"] / fine["T"] > 2.5
