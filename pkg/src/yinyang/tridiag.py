"""
Tridiagonal solvers for the one-dimensional factors of the split schemes.

Bands follow the usual convention: row i reads

    a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]

with ``a[0]`` and ``c[-1]`` ignored.  Batched kernels take 2-D arrays of shape
(lines, n) and are compiled with numba; lines are split into contiguous
chunks handed to a thread pool (the kernels release the GIL).  Each line is
solved by the same arithmetic whatever the chunking, so results do not
depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

PIVOT_TOL = 1e-14


class SingularSystemError(ArithmeticError):
    def __init__(self, message, line=None, direction=None):
        self.line = line
        self.direction = direction
        super().__init__(message)


@njit(cache=True, nogil=True)
def _factor_lines(a, b, c, cp, inv, tol):
    m, n = b.shape
    for l in range(m):
        den = b[l, 0]
        if abs(den) <= tol:
            return l
        inv[l, 0] = 1.0 / den
        cp[l, 0] = c[l, 0] * inv[l, 0]
        for i in range(1, n):
            den = b[l, i] - a[l, i] * cp[l, i - 1]
            if abs(den) <= tol:
                return l
            inv[l, i] = 1.0 / den
            cp[l, i] = c[l, i] * inv[l, i]
    return -1


@njit(cache=True, nogil=True)
def _solve_factored(a, cp, inv, d, x):
    m, n = d.shape
    for l in range(m):
        x[l, 0] = d[l, 0] * inv[l, 0]
        for i in range(1, n):
            x[l, i] = (d[l, i] - a[l, i] * x[l, i - 1]) * inv[l, i]
        for i in range(n - 2, -1, -1):
            x[l, i] -= cp[l, i] * x[l, i + 1]


def default_workers():
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


_POOLS = {}


def _pool(workers):
    if workers not in _POOLS:
        _POOLS[workers] = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="tridiag")
    return _POOLS[workers]


def _chunks(m, workers):
    k = max(1, min(workers, m))
    edges = np.linspace(0, m, k + 1).astype(int)
    return [(edges[i], edges[i + 1]) for i in range(k) if edges[i + 1] > edges[i]]


def _run(fn, m, workers, *arrays):
    """Call fn(*[arr[s:e] for arr in arrays]) over line chunks."""
    if workers <= 1 or m < 2:
        return [fn(*arrays)]
    futs = [_pool(workers).submit(fn, *(arr[s:e] for arr in arrays)) for s, e in _chunks(m, workers)]
    return [f.result() for f in futs]


def _as_lines(*bands):
    out = [np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float))) for x in bands]
    shape = out[-1].shape
    out = [np.ascontiguousarray(np.broadcast_to(x, shape)) for x in out]
    return out


@dataclass
class TridiagonalSystem:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray = None

    def __post_init__(self):
        self.a, self.b, self.c = (np.asarray(x, dtype=float).copy() for x in (self.a, self.b, self.c))
        n = self.b.size
        if n < 1 or self.a.shape != (n,) or self.c.shape != (n,):
            raise ValueError("bands must be 1-D arrays of equal length n >= 1")
        self.a[0] = 0.0
        self.c[-1] = 0.0
        if self.d is not None:
            self.d = np.asarray(self.d, dtype=float)

    @property
    def n(self):
        return self.b.size

    def matvec(self, x):
        y = self.b * x
        y[1:] += self.a[1:] * x[:-1]
        y[:-1] += self.c[:-1] * x[1:]
        return y

    def dense(self):
        return np.diag(self.b) + np.diag(self.a[1:], -1) + np.diag(self.c[:-1], 1)


def thomas_solve(sys, rhs=None, line=None):
    d = sys.d if rhs is None else rhs
    if d is None:
        raise ValueError("no right-hand side given")
    a, b, c = (x[None, :] for x in (sys.a, sys.b, sys.c))
    cp = np.empty_like(b)
    inv = np.empty_like(b)
    if _factor_lines(a, b, c, cp, inv, PIVOT_TOL) >= 0:
        raise SingularSystemError(f"pivot breakdown in tridiagonal line {line if line is not None else 0}", line=line)
    x = np.empty_like(b)
    _solve_factored(a, cp, inv, np.ascontiguousarray(np.asarray(d, dtype=float)[None, :]), x)
    return x[0]


class LineBatch:
    """Independent tridiagonal systems sharing one direction, pre-factorised.

    The factorisation is kept so that several right-hand sides (both
    artificial-compressibility systems, successive Schwarz iterates) reuse it.
    """

    def __init__(self, a, b, c, direction=None, workers=1):
        self.a, self.b, self.c = _as_lines(a, b, c)
        self.direction = direction
        self.workers = int(workers)
        m, n = self.b.shape
        self.cp = np.empty((m, n))
        self.inv = np.empty((m, n))
        fails = _run(
            lambda a_, b_, c_, cp_, inv_: _factor_lines(a_, b_, c_, cp_, inv_, PIVOT_TOL),
            m, self.workers, self.a, self.b, self.c, self.cp, self.inv,
        )
        offsets = [s for s, _ in _chunks(m, self.workers)] if self.workers > 1 and m >= 2 else [0]
        for off, f in zip(offsets, fails):
            if f >= 0:
                raise SingularSystemError(
                    f"pivot breakdown in direction {direction!r}, line {off + f}",
                    line=off + f, direction=direction,
                )

    @property
    def shape(self):
        return self.b.shape

    def dominance_margin(self):
        """min_i |b_i| - |a_i| - |c_i| over all rows."""
        off = np.abs(self.a) + np.abs(self.c)
        off[:, 0] -= np.abs(self.a[:, 0])
        off[:, -1] -= np.abs(self.c[:, -1])
        return float(np.min(np.abs(self.b) - off))

    def solve(self, d, workers=None):
        workers = self.workers if workers is None else int(workers)
        d = np.ascontiguousarray(np.asarray(d, dtype=float).reshape(self.b.shape))
        x = np.empty_like(d)
        _run(_solve_factored, d.shape[0], workers, self.a, self.cp, self.inv, d, x)
        return x


def batch_solve(a, b, c, d, direction=None, workers=1):
    """Solve every line of (lines, n) band arrays; see :class:`LineBatch`."""
    return LineBatch(a, b, c, direction=direction, workers=workers).solve(d)


# -- partitioned (Schur complement) solve --------------------------------------

@dataclass
class PartitionPlan:
    """Segment layout plus everything that depends only on the matrix.

    The last unknown of every segment but the final one is an interface
    unknown.  Segment interiors are eliminated in terms of the two adjacent
    interface values; the interface values then satisfy a tridiagonal Schur
    system of size ``segments - 1``.
    """

    system: TridiagonalSystem
    segments: int
    bounds: list = field(init=False)
    ifaces: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.system.n
        if not (2 <= self.segments <= n):
            raise ValueError(f"segments must lie in [2, n={n}], got {self.segments}")
        edges = np.linspace(0, n, self.segments + 1).round().astype(int)
        self.bounds = [(int(edges[s]), int(edges[s + 1])) for s in range(self.segments)]
        self.ifaces = np.array([e - 1 for _, e in self.bounds[:-1]])
        sysm = self.system
        self._interiors = []
        for s, (s0, s1) in enumerate(self.bounds):
            lo = s0
            hi = s1 - 1 if s < self.segments - 1 else s1
            if hi > lo:
                sub = TridiagonalSystem(sysm.a[lo:hi], sysm.b[lo:hi], sysm.c[lo:hi])
                eL = np.zeros(hi - lo)
                eR = np.zeros(hi - lo)
                eL[0] = -sysm.a[lo] if s > 0 else 0.0
                eR[-1] = -sysm.c[hi - 1] if s < self.segments - 1 else 0.0
                v = thomas_solve(sub, eL, line=s)
                w = thomas_solve(sub, eR, line=s)
                self._interiors.append((lo, hi, sub, v, w))
            else:
                self._interiors.append((lo, hi, None, None, None))
        # Schur matrix
        k = self.segments - 1
        sa, sb, sc = np.zeros(k), np.zeros(k), np.zeros(k)
        for s in range(k):
            i = int(self.ifaces[s])
            bl, gl = self._neighbour_coef(s, left=True)
            br, gr = self._neighbour_coef(s + 1, left=False)
            a_i = sysm.a[i] if i > 0 else 0.0
            c_i = sysm.c[i] if i < sysm.n - 1 else 0.0
            sa[s] = a_i * bl
            sb[s] = sysm.b[i] + a_i * gl + c_i * br
            sc[s] = c_i * gr
        self._schur = TridiagonalSystem(sa, sb, sc)
        if k:
            try:
                thomas_solve(self._schur, np.zeros(k))
            except SingularSystemError as exc:
                raise SingularSystemError(f"singular Schur matrix at interface {exc.line}", line=exc.line) from None

    def _neighbour_coef(self, seg, left):
        """Coefficients of (previous interface, next interface) expressing the
        unknown of segment ``seg`` adjacent to an interface: its last interior
        unknown when ``left`` is true, its first one otherwise.
        """
        lo, hi, sub, v, w = self._interiors[seg]
        if sub is None:
            # empty interior: the neighbour is the previous interface itself
            return (1.0, 0.0) if left else (0.0, 1.0)
        if left:
            return v[-1], w[-1]
        return v[0], w[0]

    def _neighbour_const(self, seg, y, left):
        lo, hi, sub, _, _ = self._interiors[seg]
        if sub is None:
            return 0.0
        return y[seg][-1] if left else y[seg][0]


def partitioned_solve(sys, plan, rhs=None, workers=1):
    d = np.asarray(sys.d if rhs is None else rhs, dtype=float)
    if plan.system is not sys and not (
        np.array_equal(plan.system.a, sys.a) and np.array_equal(plan.system.b, sys.b) and np.array_equal(plan.system.c, sys.c)
    ):
        raise ValueError("partition plan was built for a different matrix")
    S = plan.segments

    def seg_solve(s):
        lo, hi, sub, _, _ = plan._interiors[s]
        return None if sub is None else thomas_solve(sub, d[lo:hi], line=s)

    if workers > 1:
        y = list(_pool(workers).map(seg_solve, range(S)))
    else:
        y = [seg_solve(s) for s in range(S)]
    # interface right-hand side
    k = S - 1
    g = np.empty(k)
    for s in range(k):
        i = int(plan.ifaces[s])
        a_i = sys.a[i] if i > 0 else 0.0
        c_i = sys.c[i] if i < sys.n - 1 else 0.0
        g[s] = d[i] - a_i * plan._neighbour_const(s, y, True) - c_i * plan._neighbour_const(s + 1, y, False)
    xi = thomas_solve(plan._schur, g)
    x = np.empty(sys.n)
    x[plan.ifaces] = xi

    def back(s):
        lo, hi, sub, v, w = plan._interiors[s]
        if sub is None:
            return
        xl = xi[s - 1] if s > 0 else 0.0
        xr = xi[s] if s < k else 0.0
        x[lo:hi] = y[s] + v * xl + w * xr

    if workers > 1:
        list(_pool(workers).map(back, range(S)))
    else:
        for s in range(S):
            back(s)
    return x
