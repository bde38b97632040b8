import numpy as np
import pytest

from yinyang.geometry import COMPONENT_STAG, ChartId, GridSpec, ShellExtents, make_grid
from yinyang.operators import (
    WeightKind,
    advect_scalar,
    apply_directional,
    apply_laplacian,
    divergence,
    grad,
    grad_div_term,
    laplacian_operator,
    vector_laplacian_extras,
    weight,
    weighted_norm,
    weighted_product,
)
from yinyang.problems import apply_walls
from yinyang.verify import to_spherical

EXT = ShellExtents(1.0, 2.0, 0.1)


def grid(m=1, base=(4, 12, 24)):
    return make_grid(EXT, GridSpec(*(m * n for n in base)))


def sample(g, fun, stag="ccc"):
    r, t, p = g.coords(stag)
    return np.broadcast_to(fun(r, t, p), g.shape(stag)).astype(float)


def slope(errors, hs):
    return np.polyfit(np.log(hs), np.log(errors), 1)[0]


def test_radial_laplacian_of_inverse_r_second_order():
    errs, hs = [], []
    for n in (16, 32, 64):
        g = make_grid(EXT, GridSpec(n, 4, 4))
        L = laplacian_operator(g, "ccc", "r")
        out = apply_directional(L, sample(g, lambda r, t, p: 1 / r))
        errs.append(np.max(np.abs(out[g.interior("ccc")])))
        hs.append(1.0 / g.r.n)
    assert slope(errs, hs) >= 1.9


def test_hat_phi_laplacian_of_sin_phi():
    errs = []
    for m in (1, 2):
        g = grid(m)
        f = sample(g, lambda r, t, p: np.sin(p))
        out = laplacian_operator(g, "ccc", "phi", hat=True).apply(f)
        exact = -f / (g.R1 * np.sin(g.theta1)) ** 2
        I = g.interior("ccc")
        errs.append(np.max(np.abs(out[I] - exact[I])))
    assert errs[0] < 0.02 and 3.8 < errs[0] / errs[1] < 4.2


@pytest.mark.parametrize("direction", ["r", "theta", "phi"])
@pytest.mark.parametrize("hat", [False, True])
def test_constant_is_annihilated(direction, hat):
    g = grid()
    out = laplacian_operator(g, "ccc", direction, hat=hat).apply(np.full(g.shape("ccc"), 3.7))
    assert np.all(out == 0.0)


def test_laplacian_of_r_squared():
    g = grid(2)
    out = apply_laplacian(g, sample(g, lambda r, t, p: r * r))
    I = g.interior("ccc")
    h = g.r.faces[1] - g.r.faces[0]
    assert np.max(np.abs(out[I] - 6.0)) <= h * h


def test_hat_equals_full_for_radial_fields():
    g = grid()
    f = sample(g, lambda r, t, p: np.exp(r))
    assert np.array_equal(apply_laplacian(g, f, hat=True), apply_laplacian(g, f, hat=False))


def test_laplacian_is_sum_of_directions(rng):
    g = grid()
    f = rng.standard_normal(g.shape("ccc"))
    parts = sum(laplacian_operator(g, "ccc", d).apply(f) for d in ("r", "theta", "phi"))
    np.testing.assert_allclose(apply_laplacian(g, f), parts, rtol=0, atol=1e-14 * np.max(np.abs(parts)))


def _homogeneous_padding(g, stag, x):
    f = np.zeros(g.shape(stag))
    f[g.interior(stag)] = x
    z = np.zeros(g.shape(stag)[1:])
    return apply_walls(g, stag, f, z, z)


def test_hat_operators_commute(rng):
    g = grid()
    I = g.interior("ccc")
    ops = [laplacian_operator(g, "ccc", d, hat=True) for d in ("r", "theta", "phi")]
    x = rng.standard_normal(g.shape("ccc"))[I]

    def A(op, v):
        return op.apply(_homogeneous_padding(g, "ccc", v))[I]

    for i in range(3):
        for j in range(i + 1, 3):
            ab = A(ops[i], A(ops[j], x))
            ba = A(ops[j], A(ops[i], x))
            assert np.max(np.abs(ab - ba)) <= 1e-12 * np.max(np.abs(ab))


def test_full_operators_do_not_commute(rng):
    # sanity check that the commutation test is sensitive
    g = grid()
    I = g.interior("ccc")
    Lr, Lt = (laplacian_operator(g, "ccc", d) for d in ("r", "theta"))
    x = rng.standard_normal(g.shape("ccc"))[I]
    A = lambda op, v: op.apply(_homogeneous_padding(g, "ccc", v))[I]
    ab, ba = A(Lr, A(Lt, x)), A(Lt, A(Lr, x))
    assert np.max(np.abs(ab - ba)) > 1e-3 * np.max(np.abs(ab))


def test_advection_identities():
    g = grid()
    zero = tuple(np.zeros(g.shape(s)) for s in COMPONENT_STAG)
    f = sample(g, lambda r, t, p: r)
    assert np.all(advect_scalar(g, zero, f) == 0.0)
    ur = (np.ones(g.shape("fcc")), np.zeros(g.shape("cfc")), np.zeros(g.shape("ccf")))
    np.testing.assert_allclose(advect_scalar(g, ur, f)[g.interior("ccc")], 1.0, rtol=1e-13)
    assert np.all(advect_scalar(g, ur, np.full(g.shape("ccc"), 2.0)) == 0.0)


def test_divergence_of_radial_inverse_square():
    g = grid()
    u = (sample(g, lambda r, t, p: 1 / r**2, "fcc"), np.zeros(g.shape("cfc")), np.zeros(g.shape("ccf")))
    assert np.max(np.abs(divergence(g, u)[g.interior("ccc")])) < 1e-13


def test_gradient_of_constant():
    g = grid()
    for gp in grad(g, np.full(g.shape("ccc"), 1.5)):
        assert np.all(gp == 0.0)


def test_div_grad_duality(rng):
    """(div u, p)_w + (u, grad p)_w = 0 for data vanishing at the boundary."""
    g = grid()
    p = np.zeros(g.shape("ccc"))
    p[g.interior("ccc")] = rng.standard_normal(g.shape("ccc"))[g.interior("ccc")]
    # zero wall value: mirrored ghosts
    p = apply_walls(g, "ccc", p, np.zeros(g.shape("ccc")[1:]), np.zeros(g.shape("ccc")[1:]))
    u = []
    for s in COMPONENT_STAG:
        v = np.zeros(g.shape(s))
        I = list(g.interior(s))
        # strictly inside the box: no flux through any boundary face
        I = tuple(slice(i.start + (1 if s[k] == "f" and k > 0 else 0), i.stop - (1 if s[k] == "f" and k > 0 else 0))
                  for k, i in enumerate(I))
        v[I] = rng.standard_normal(v[I].shape)
        u.append(v)
    lhs = weighted_product(g, divergence(g, u), p, "ccc")
    gp = grad(g, p)
    rhs = sum(weighted_product(g, ui, gi, s) for ui, gi, s in zip(u, gp, COMPONENT_STAG))
    assert abs(lhs + rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_grad_div_elementary_terms():
    g = grid()
    ur = sample(g, lambda r, t, p: 1 / r**2, "fcc")
    I = g.interior("fcc")
    assert np.max(np.abs(grad_div_term(g, 0, 0, ur)[I])) < 1e-12
    uphi = sample(g, lambda r, t, p: r * np.sin(t), "ccf")
    assert np.all(grad_div_term(g, 0, 2, uphi)[I] == 0.0)


def _cart_field(chart, r, t, p):
    # u = (x^2 y, y z, x z^2): div = 2xy + z + 2xz, grad div = (2y + 2z, 2x, 1 + 2x)
    from yinyang.geometry import chart_to_cartesian

    x, y, z = chart_to_cartesian(chart, r, t, p)
    return to_spherical(chart, t, p, (x * x * y, y * z, x * z * z)), to_spherical(chart, t, p, (2 * y + 2 * z, 2 * x, 1 + 2 * x))


def test_grad_div_second_order():
    errs, hs = [], []
    for m in (1, 2, 4):
        g = grid(m, (4, 8, 16))
        u = []
        for c, s in enumerate(COMPONENT_STAG):
            r, t, p = g.coords(s)
            u.append(np.broadcast_to(_cart_field(ChartId.YIN, r, t, p)[0][c], g.shape(s)).astype(float))
        e = 0.0
        for i, s in enumerate(COMPONENT_STAG):
            num = sum(grad_div_term(g, i, j, u[j]) for j in range(3))
            r, t, p = g.coords(s)
            ex = np.broadcast_to(_cart_field(ChartId.YIN, r, t, p)[1][i], g.shape(s))
            # stay one layer away from the closure rows
            I = tuple(slice(k.start + 1, k.stop - 1) for k in g.interior(s))
            e = max(e, float(np.max(np.abs(num[I] - ex[I]))))
            ref = grad(g, divergence(g, u))[i]
            np.testing.assert_allclose(num, ref, rtol=0, atol=1e-12 * np.max(np.abs(ref)))
        errs.append(e)
        hs.append(1.0 / g.r.n)
    assert slope(errs, hs) >= 1.9


def test_weighted_norm_of_one():
    a = 0.3
    errs = []
    for n in (16, 32):
        g = make_grid(EXT, GridSpec(n // 2, n, 2 * n), theta_range=(a, np.pi - a), phi_range=(0.0, 2 * np.pi))
        exact = 7.0 / 3.0 * 2 * np.cos(a) * 2 * np.pi
        errs.append(abs(weighted_norm(g, np.ones(g.shape("ccc"))) ** 2 - exact))
    assert errs[1] < 1e-3 * exact and 3.5 < errs[0] / errs[1] < 4.5
    # a -> 0 recovers the full shell value 28 pi / 3
    assert abs(7.0 / 3.0 * 2 * np.cos(0.0) * 2 * np.pi - 28 * np.pi / 3) < 1e-14
    assert weighted_norm(g, np.zeros(g.shape("ccc"))) == 0.0


def test_omega1_vanishes_on_inner_wall():
    g = grid()
    w = weight(g, "fcc", WeightKind.OMEGA1)
    assert np.all(w[1] == 0.0)


def test_curvature_extras_radial_inverse_square():
    errs = []
    for n in (32, 64):
        g = make_grid(EXT, GridSpec(n, 4, 4))
        c = 1.3
        u = (sample(g, lambda r, t, p: c / r**2, "fcc"), np.zeros(g.shape("cfc")), np.zeros(g.shape("ccf")))
        out = vector_laplacian_extras(g, 0, u)
        r, _, _ = g.coords("fcc")
        I = g.interior("fcc")
        # symbolic oracle: -2 u/r^2 - (2/(r^2 sin)) d_t(u_t sin) - ... = -2c/r^4
        errs.append(np.max(np.abs(out[I] - np.broadcast_to(-2 * c / r**4, out.shape)[I])))
    assert errs[0] < 0.01 and errs[0] / errs[1] > 3.5


def test_curvature_extras_linear(rng):
    g = grid()
    u = tuple(rng.standard_normal(g.shape(s)) for s in COMPONENT_STAG)
    for comp in range(3):
        zero = vector_laplacian_extras(g, comp, tuple(np.zeros_like(x) for x in u))
        assert np.all(zero == 0.0)
        a = vector_laplacian_extras(g, comp, tuple(2.5 * x for x in u))
        b = 2.5 * vector_laplacian_extras(g, comp, u)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14 * np.max(np.abs(b)))
