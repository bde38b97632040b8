"""
Shared machinery for one factorised Crank-Nicolson update

    prod_d (I - tau/2 Lhat_d) delta = G,    psi^{n+1} = psi^n + delta,

used by the temperature and every velocity component.

Boundary values are handled by lifting: the increment is written as a
prescribed part ``delta0`` (carrying the Dirichlet data on the padding layer,
plus the previous iterate's interior when iterating) and a correction ``c``
with homogeneous closure.  A plain step lifts with the factored operator,

    P c = G - P delta0,    delta = delta0 + c,

so the factors see the smooth increment with its boundary values on every
intermediate stage.  An iterate lifts with the unsplit operator,

    P c = G - (I - tau/2 sum_d Lhat_d) delta0,

which is the splitting-error reduction: with ``delta0`` taken from the
previous Schwarz iterate a fixed point satisfies the unsplit
(I - tau/2 sum Lhat) delta = G.
"""

import numpy as np

from .operators import closure_kind
from .tridiag import LineBatch, SingularSystemError


class SplitSolver:
    def __init__(self, grid, stag, ops, tau, workers=1, check_dominance=False, residual_ops=None):
        """``ops`` are the hat directional operators in factor order (left to right).

        ``residual_ops`` replace them in the unsplit operator that the lifting
        (and hence the error-reduction fixed point) uses; by default the
        factors themselves.
        """
        self.grid = grid
        self.stag = stag
        self.ops = list(ops)
        self.residual_ops = list(residual_ops) if residual_ops is not None else self.ops
        self.tau = float(tau)
        self.I = grid.interior(stag)
        self.batches = []
        for op in self.ops:
            a, b, c = op.tridiagonal(0.5 * self.tau, closure_kind(grid, stag, op.axis))
            try:
                batch = LineBatch(a, b, c, direction=op.direction, workers=workers)
            except SingularSystemError as exc:
                raise SingularSystemError(f"{stag} factor: {exc}", line=exc.line, direction=op.direction) from None
            if check_dominance and batch.dominance_margin() <= 0:
                raise SingularSystemError(
                    f"{stag} factor along {op.direction} is not diagonally dominant "
                    f"(margin {batch.dominance_margin():.3e})", direction=op.direction,
                )
            self.batches.append(batch)

    def factor_solve(self, g):
        """Apply P^{-1} to an array over the unknown region."""
        x = g
        for op, batch in zip(self.ops, self.batches):
            ax = op.axis
            moved = np.moveaxis(x, ax, -1)
            shape = moved.shape
            sol = batch.solve(moved.reshape(-1, shape[-1]))
            x = np.moveaxis(sol.reshape(shape), -1, ax)
        return np.ascontiguousarray(x)

    def sum_apply(self, f):
        """sum_d L_d f over the unknown region (residual operators)."""
        out = None
        for op in self.residual_ops:
            v = op.apply(f)[self.I]
            out = v if out is None else out + v
        return out

    def unsplit_lhs(self, delta):
        return delta[self.I] - 0.5 * self.tau * self.sum_apply(delta)

    def factored_lhs(self, delta):
        """P delta over the unknown region; the padding of ``delta`` (its
        boundary values) is kept on every intermediate stage."""
        I = self.I
        x = delta
        for op in reversed(self.ops):
            y = x.copy()
            y[I] = x[I] - 0.5 * self.tau * op.apply(x)[I]
            if self.stag[0] == "c":
                n = self.grid.r.n
                J = I[1:]
                y[(0,) + J] = delta[(0,) + J] + delta[(1,) + J] - y[(1,) + J]
                y[(n + 1,) + J] = delta[(n + 1,) + J] + delta[(n,) + J] - y[(n,) + J]
            x = y
        return x[I]

    def advance(self, G, psi_n, base, iterate=False):
        """psi^{n+1} from G (unknown region) and a padded guess ``base``.

        ``base`` carries the new boundary data on its padding; its interior is
        the lifting's interior: psi^n for a plain step, the previous iterate
        (``iterate=True``) for splitting-error reduction.
        """
        d0 = base - psi_n
        lhs = self.unsplit_lhs(d0) if iterate else self.factored_lhs(d0)
        c = self.factor_solve(G - lhs)
        out = base.copy()
        out[self.I] += c
        if self.stag[0] == "c":
            # keep the wall value fixed under the mirrored closure
            n = self.grid.r.n
            J = self.I[1:]
            out[(0,) + J] -= c[0]
            out[(n + 1,) + J] -= c[-1]
        return out


def with_interior(base, interior_src, grid, stag):
    """Copy of ``base`` whose unknowns come from ``interior_src``; r-ghosts are
    shifted so that the implied wall values are unchanged."""
    I = grid.interior(stag)
    out = base.copy()
    out[I] = interior_src[I]
    if stag[0] == "c":
        n = grid.r.n
        J = I[1:]
        out[(0,) + J] = base[(0,) + J] + base[(1,) + J] - out[(1,) + J]
        out[(n + 1,) + J] = base[(n + 1,) + J] + base[(n,) + J] - out[(n,) + J]
    return out
