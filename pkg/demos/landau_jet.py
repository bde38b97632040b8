"""
Landau jet
==========

The Landau jet is an exact steady solution of the Navier-Stokes equations
with a point force at the origin.  Started from the exact state, the solver
should stay close to it, and the drift shrinks as the grid is refined.
"""

from yinyang.cli import compute_errors, build_problem, load_config, simulate

for n in (4, 8):
    cfg = load_config(None, ["problem=landau", "gravity=none", "Re=1", f"n_r={n}", f"n_theta={3 * n}",
                             f"n_phi={6 * n}", "dt=0.01", "t_final=0.05", "threads=1"])
    gs = simulate(cfg).state
    rep = compute_errors(gs, build_problem(cfg))
    print(f"{n}x{3 * n}x{6 * n}: " + ", ".join(f"{q} {rep.combined(q):.3e}" for q in ("u2", "p2")))
