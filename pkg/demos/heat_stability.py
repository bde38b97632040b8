"""
Heat-scheme stability for large time steps
==========================================

The Douglas direction-split heat step is unconditionally stable: with
homogeneous boundary data its discrete energy never increases, whatever the
time step.  Here a random initial temperature on one chart is advanced with
time steps far beyond the explicit limit and the energy is printed.
"""

import numpy as np

from yinyang.cli import stability_study
from yinyang.geometry import GridSpec, ShellExtents, make_grid
from yinyang.heat import HeatConfig, discrete_energy, douglas_step, initial_state
from yinyang.problems import Problem, make_problem

###############################################################################
# One chart, random data, zero walls and fringe.

grid = make_grid(ShellExtents(1.0, 2.0, 0.1), GridSpec(6, 18, 36))
h = float(np.min(np.diff(grid.r.faces)))
print(f"smallest radial cell {h:.3f}; explicit limit is about tau ~ {h * h / 6:.1e}")

problem = make_problem("heat_only", seed=1)
for tau in (0.01, 1.0, 100.0):
    st = initial_state(grid, problem, tau)
    cfg = HeatConfig(problem=Problem())
    energies = []
    for _ in range(20):
        st = douglas_step(st, cfg)
        energies.append(discrete_energy(st))
    e = np.array(energies)
    print(f"tau={tau:g}: energy {e[0]:.3e} -> {e[-1]:.3e}, largest step-to-step change "
          f"{np.max(np.diff(e)) / e[0]:.1e}")

###############################################################################
# The same sweep as the ``yinyang stability`` subcommand.

for row in stability_study((6, 18, 36), (0.1, 10.0), steps=50, seed=2):
    print(f"tau={row['tau']:g}: finite {bool(row['finite'])}, max|T| ratio {row['max_ratio']:.3f}, "
          f"energy growth {row['energy_growth']:.1e}")
