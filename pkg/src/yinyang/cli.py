"""
Configuration, experiment drivers and output writers.

Subcommands: run, conv-time, conv-space, landau, stability.  Configuration
is a flat ``key = value`` text file; ``key=value`` arguments on the command
line override it.  Exit codes: 0 success, 2 validation error, 3 solver
failure, 4 a Schwarz step exceeded ``max_iters``.
"""

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .coupling import OverlapTooSmallError, SchwarzConfig, build_exchange_maps, initialize_global, schwarz_time_step
from .geometry import COMPONENT_STAG, ChartId, GeometryError, GridSpec, ShellExtents, build_domain, make_grid, max_cell_diameter
from .heat import ConfigurationError, HeatConfig, discrete_energy, douglas_step, initial_state
from .momentum import ACParams
from .operators import divergence
from .problems import Problem, make_problem, sample_scalar, sample_velocity
from .tridiag import SingularSystemError
from .verify import ConvergenceTable, DegenerateFitError, ErrorReport, convergence_slope, field_error, vector_error

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 2, 3, 4
PROBLEMS = ("manufactured", "landau", "heat_only", "custom")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class SolverFailure(RuntimeError):
    pass


# -- configuration ------------------------------------------------------------

@dataclass
class RunConfig:
    # shell extents
    R1: float = 1.0
    R2: float = 2.0
    epsilon: float = 0.1
    # cells per chart
    n_r: int = 12
    n_theta: int = 36
    n_phi: int = 72
    # physics; nu defaults to Pr (1/Re for the Landau problem)
    Ra: float = 1.0
    Pr: float = 1.0
    Re: float = 1.0
    nu: float | None = None
    chi: float = 1.0
    gravity: str = "radial"
    # time
    dt: float = 0.01
    t_final: float = 0.1
    # Schwarz iteration
    mode: str = "multiplicative"
    tol: float = 1e-6
    max_iters: int = 100
    flux_fix: bool = False
    error_reduction: bool = True
    interp_order: int = 3
    pressure_exchange: bool = True
    accel: str = "anderson"
    # problem data
    problem: str = "manufactured"
    landau_A: float = 2.0
    seed: int = 0
    amplitude: float = 1.0
    # output
    csv: str = ""
    dump_every: int = 0
    dump_path: str = "dump"
    threads: int = 0  # 0 = machine parallelism

    def validate(self):
        positive = ("R1", "R2", "epsilon", "n_r", "n_theta", "n_phi", "Pr", "Re", "chi", "dt", "t_final", "tol", "max_iters")
        for key in positive:
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(key, f"must be positive, got {v!r}")
        if self.nu is not None and not self.nu > 0:
            raise ConfigError("nu", f"must be positive, got {self.nu!r}")
        if self.R2 <= self.R1:
            raise ConfigError("R2", "must exceed R1")
        if self.Ra < 0:
            raise ConfigError("Ra", "must be non-negative")
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"must be one of {', '.join(PROBLEMS)}")
        if self.gravity not in ("radial", "none"):
            raise ConfigError("gravity", "must be 'radial' or 'none'")
        if self.mode not in ("multiplicative", "additive"):
            raise ConfigError("mode", "must be 'multiplicative' or 'additive'")
        if self.accel not in ("anderson", "none"):
            raise ConfigError("accel", "must be 'anderson' or 'none'")
        if self.interp_order not in (2, 3, 4):
            raise ConfigError("interp_order", "must be 2, 3 or 4")
        if self.problem == "landau" and not self.landau_A > 1:
            raise ConfigError("landau_A", "must exceed 1")
        if self.dump_every < 0:
            raise ConfigError("dump_every", "must be non-negative")
        if self.threads < 0:
            raise ConfigError("threads", "must be non-negative")
        n = round(self.t_final / self.dt)
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ConfigError("dt", f"t_final={self.t_final} is not an integer multiple of dt={self.dt}")
        return self

    @property
    def steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def viscosity(self):
        if self.nu is not None:
            return self.nu
        return 1.0 / self.Re if self.problem == "landau" else self.Pr

    @property
    def workers(self):
        return self.threads or (os.cpu_count() or 1)


def _coerce(key, value, default):
    text = value.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return None if text.lower() == "none" else float(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r}") from None
    return text


def parse_assignments(lines, base=None):
    """Apply ``key = value`` lines (comments with '#') to a RunConfig."""
    cfg = base or RunConfig()
    known = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    updates = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, "expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        updates[key] = _coerce(key, value, known[key])
    return replace(cfg, **updates)


def load_config(path=None, overrides=()):
    cfg = RunConfig()
    if path:
        with open(path) as fh:
            cfg = parse_assignments(fh, cfg)
    return parse_assignments(overrides, cfg).validate()


def format_config(cfg):
    return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in asdict(cfg).items())


# -- building blocks ------------------------------------------------------------

def build_problem(cfg):
    if cfg.problem == "manufactured":
        return make_problem("manufactured", Pr=cfg.Pr, Ra=cfg.Ra, gravity=cfg.gravity)
    if cfg.problem == "landau":
        return make_problem("landau", nu=cfg.viscosity, A=cfg.landau_A)
    if cfg.problem == "heat_only":
        return make_problem("heat_only", seed=cfg.seed, amplitude=cfg.amplitude)
    return Problem()


def physics(cfg):
    # the Landau jet and the heat-only problem carry no buoyancy
    gravity = cfg.gravity if cfg.problem in ("manufactured", "custom") else "none"
    return ACParams(chi=cfg.chi, nu=cfg.viscosity, Ra=cfg.Ra, Pr=cfg.Pr, gravity=gravity)


def schwarz_config(cfg):
    return SchwarzConfig(
        mode=cfg.mode, tol=cfg.tol, max_iters=cfg.max_iters, flux_fix=cfg.flux_fix,
        error_reduction=cfg.error_reduction, k=cfg.interp_order, pressure_exchange=cfg.pressure_exchange,
        workers=cfg.workers, accel=cfg.accel,
    )


def chart_fields(cs):
    f = cs.flow
    return {"T": cs.thermal.T_n, "u1": f.u1_n, "u2": f.u2_n, "p1": f.p1_n, "p2": f.p2_n}


def exact_fields(problem, grid, chart, t):
    u = sample_velocity(problem, grid, chart, t)
    p = sample_scalar(problem.pressure, grid, chart, t)
    return {"T": sample_scalar(problem.temperature, grid, chart, t), "u1": u, "u2": u, "p1": p, "p2": p}


def field_differences(grid, a, b):
    """Per-quantity l2 norms of a - b for two chart field dicts."""
    out = {}
    for q in ("u1", "u2"):
        out[q] = vector_error(grid, a[q], b[q])
    for q in ("p1", "p2", "T"):
        out[q] = field_error(grid, a[q], b[q], "ccc")
    return out


def compute_errors(gs, problem):
    report = ErrorReport(gs.t)
    for c in ChartId:
        g = gs.grid(c)
        for q, v in field_differences(g, chart_fields(gs.charts[c]), exact_fields(problem, g, c, gs.t)).items():
            report.add(q, c, v)
    return report


def divergence_norms(gs):
    out = {}
    for q in ("u1", "u2"):
        total = 0.0
        for c in ChartId:
            g = gs.grid(c)
            d = divergence(g, getattr(gs.charts[c].flow, f"{q}_n"))
            total += field_error(g, d, np.zeros_like(d), "ccc") ** 2
        out[f"div_{q}"] = math.sqrt(total)
    return out


def csv_columns(problem_kind):
    """Column set depends on the problem kind only."""
    cols = ["step", "time", "iterations", "converged", "div_u1", "div_u2"]
    if problem_kind in ("manufactured", "landau"):
        for q in ("u1", "u2", "p1", "p2", "T"):
            cols += [f"err_{q}_yin", f"err_{q}_yang", f"err_{q}"]
    if problem_kind == "heat_only":
        cols += ["energy", "T_max"]
    return cols


def _row(cfg, step, gs, report, problem):
    row = {"step": step, "time": gs.t, "iterations": report.iterations if report else 0,
           "converged": int(report.converged) if report else 1}
    row.update(divergence_norms(gs))
    if problem.has_exact:
        row.update({k: v for k, v in compute_errors(gs, problem).as_row().items() if k != "time"})
    if cfg.problem == "heat_only":
        row["energy"] = sum(discrete_energy(gs.charts[c].thermal) for c in ChartId)
        row["T_max"] = max(float(np.max(np.abs(gs.charts[c].thermal.T_n))) for c in ChartId)
    return row


def _check_finite(gs, step):
    for c in ChartId:
        for name, v in chart_fields(gs.charts[c]).items():
            arrs = v if isinstance(v, tuple) else (v,)
            if not all(np.all(np.isfinite(a)) for a in arrs):
                raise SolverFailure(f"non-finite {name} on chart {c.name.lower()} at step {step}")


@dataclass
class RunResult:
    state: object
    rows: list = field(default_factory=list)
    nonconverged: list = field(default_factory=list)  # step numbers

    @property
    def exit_code(self):
        return EXIT_NONCONVERGED if self.nonconverged else EXIT_OK


def simulate(cfg, on_row=None, on_state=None):
    """Run from t = 0 to t_final; returns a RunResult.  Raises ConfigError,
    SolverFailure."""
    problem = build_problem(cfg)
    try:
        domain = build_domain(ShellExtents(cfg.R1, cfg.R2, cfg.epsilon), GridSpec(cfg.n_r, cfg.n_theta, cfg.n_phi))
        maps = build_exchange_maps(domain, cfg.interp_order)
    except OverlapTooSmallError as exc:
        raise ConfigError("epsilon", f"{exc} (need epsilon >= {exc.eps_min:.4g})") from None
    except (GeometryError, ValueError) as exc:
        raise ConfigError("grid", str(exc)) from None
    params, scfg = physics(cfg), schwarz_config(cfg)
    heat_cfg = HeatConfig(kappa=1.0)
    gs = initialize_global(domain, problem, cfg.dt, maps, 0.0, cfg.interp_order)
    result = RunResult(gs)
    emit = lambda row: (result.rows.append(row), on_row and on_row(row))
    if on_state:
        on_state(0, gs)
    for step in range(1, cfg.steps + 1):
        try:
            gs, report = schwarz_time_step(gs, scfg, params, heat_cfg, problem, maps)
        except (SingularSystemError, FloatingPointError) as exc:
            raise SolverFailure(f"step {step}: {exc}") from exc
        _check_finite(gs, step)
        if not report.converged:
            log.warning("step %d: Schwarz iteration stopped at max_iters=%d (last difference %.3e)",
                        step, report.iterations, report.history[-1])
            result.nonconverged.append(step)
        emit(_row(cfg, step, gs, report, problem))
        if on_state:
            on_state(step, gs)
    result.state = gs
    return result


class CsvWriter:
    def __init__(self, path, columns):
        self.columns = columns
        self.fh = open(path, "w", newline="") if path else None
        if self.fh:
            self.w = csv.DictWriter(self.fh, columns, extrasaction="ignore", restval="")
            self.w.writeheader()

    def __call__(self, row):
        if self.fh:
            self.w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
            self.fh.flush()

    def close(self):
        if self.fh:
            self.fh.close()


def run(cfg):
    """Single run with CSV time series and optional field dumps; returns a RunResult."""
    writer = CsvWriter(cfg.csv, csv_columns(cfg.problem))

    def dump(step, gs):
        if cfg.dump_every and step % cfg.dump_every == 0:
            for c in ChartId:
                write_field_dump(f"{cfg.dump_path}_{c.name.lower()}_{step:06d}.yyd", gs, c)

    try:
        return simulate(cfg, writer, dump)
    finally:
        writer.close()


# -- studies ----------------------------------------------------------------------

@dataclass
class StudyResult:
    tables: dict  # name -> ConvergenceTable
    slopes: dict  # name -> {quantity: slope}
    failed: list = field(default_factory=list)  # level indices
    nonconverged: bool = False

    @property
    def exit_code(self):
        if self.failed:
            return EXIT_SOLVER
        return EXIT_NONCONVERGED if self.nonconverged else EXIT_OK


def _final_fields(gs):
    return {c: chart_fields(gs.charts[c]) for c in ChartId}


def _combined(grid_of, a, b):
    tot = {}
    for c in ChartId:
        for q, v in field_differences(grid_of(c), a[c], b[c]).items():
            tot[q] = tot.get(q, 0.0) + v * v
    return {q: math.sqrt(v) for q, v in tot.items()}


def _safe_slopes(table):
    """Per-quantity fits; quantities with zero or non-finite errors are skipped."""
    out = {}
    for q in table.rows[0][1] if table.rows else ():
        sub = ConvergenceTable(table.kind, [(x, {q: e[q]}) for x, e in table.rows])
        try:
            out.update(convergence_slope(sub))
        except DegenerateFitError as exc:
            log.warning("slope fit failed: %s", exc)
    return out


def time_study(base, levels=4, reference="self"):
    """Halve dt ``levels - 1`` times on a fixed grid.

    ``reference="self"`` measures each level against the next finer time
    step (one extra run), isolating the temporal error from the spatial one;
    the table of errors against the exact solution is always reported too.
    """
    if levels < 3:
        raise ConfigError("levels", "a study needs at least three levels")
    runs = levels + 1 if reference == "self" else levels
    exact = ConvergenceTable("tau")
    finals, failed, nonconv = [], [], False
    for i in range(runs):
        cfg = replace(base, dt=base.dt / 2**i).validate()
        try:
            res = simulate(cfg)
        except SolverFailure as exc:
            log.error("level %d failed: %s", i, exc)
            failed.append(i)
            finals.append(None)
            continue
        nonconv |= bool(res.nonconverged)
        gs = res.state
        finals.append((gs, _final_fields(gs)))
        if i < levels and build_problem(base).has_exact:
            rep = compute_errors(gs, build_problem(base))
            exact.add(cfg.dt, {q: rep.combined(q) for q in rep.quantities})
        log.info("dt=%g done", cfg.dt)
    tables = {"exact": exact}
    if reference == "self":
        selfc = ConvergenceTable("tau")
        for i in range(levels):
            if finals[i] is None or finals[i + 1] is None:
                continue
            gs = finals[i][0]
            selfc.add(base.dt / 2**i, _combined(gs.grid, finals[i][1], finals[i + 1][1]))
        tables["self"] = selfc
    slopes = {k: _safe_slopes(t) for k, t in tables.items() if len(t.rows) >= 3}
    return StudyResult(tables, slopes, failed, nonconv)


def space_study(base, levels=3):
    """Double the cell counts ``levels - 1`` times; abscissa is the largest
    Cartesian MAC-cell diameter."""
    if levels < 3:
        raise ConfigError("levels", "a study needs at least three levels")
    table = ConvergenceTable("h")
    failed, nonconv = [], False
    for i in range(levels):
        m = 2**i
        cfg = replace(base, n_r=base.n_r * m, n_theta=base.n_theta * m, n_phi=base.n_phi * m).validate()
        try:
            res = simulate(cfg)
        except SolverFailure as exc:
            log.error("level %d failed: %s", i, exc)
            failed.append(i)
            continue
        nonconv |= bool(res.nonconverged)
        gs = res.state
        rep = compute_errors(gs, build_problem(cfg))
        table.add(max_cell_diameter(gs.grid(ChartId.YIN)), {q: rep.combined(q) for q in rep.quantities})
        log.info("grid %dx%dx%d done", cfg.n_r, cfg.n_theta, cfg.n_phi)
    tables = {"exact": table}
    slopes = {"exact": _safe_slopes(table)} if len(table.rows) >= 3 else {}
    return StudyResult(tables, slopes, failed, nonconv)


def overlap_study(base, epsilons=(0.05, 0.1, 0.2)):
    """Final errors at a fixed cell count for several overlap widths."""
    out = {}
    for eps in epsilons:
        cfg = replace(base, epsilon=eps).validate()
        rep = compute_errors(simulate(cfg).state, build_problem(cfg))
        out[eps] = {q: rep.combined(q) for q in rep.quantities}
    return out


def landau_base(cfg):
    return replace(cfg, problem="landau", gravity="none")


def stability_study(grid_cells=(8, 24, 48), taus=(0.1, 1.0, 10.0, 100.0), steps=200, seed=0, extents=None, workers=1):
    """Single-chart heat scheme with homogeneous data from random initial values.

    Per tau: finite flag, max |T| over the run divided by the initial max,
    and the largest relative energy increase after the first step.
    """
    extents = extents or ShellExtents(1.0, 2.0, 0.1)
    grid = make_grid(extents, GridSpec(*grid_cells))
    problem = make_problem("heat_only", seed=seed)
    rows = []
    for tau in taus:
        st = initial_state(grid, problem, tau)
        hcfg = HeatConfig(problem=Problem())
        m0 = float(np.max(np.abs(st.T_n)))
        mmax, energies, finite = m0, [], True
        for _ in range(steps):
            st = douglas_step(st, hcfg, workers=workers)
            if not np.all(np.isfinite(st.T_n)):
                finite = False
                break
            mmax = max(mmax, float(np.max(np.abs(st.T_n))))
            energies.append(discrete_energy(st))
        e = np.array(energies)
        growth = float(np.max((e[1:] - e[:-1]) / max(e[0], np.finfo(float).tiny))) if finite and len(e) > 1 else math.inf
        rows.append({"tau": tau, "steps": steps, "finite": int(finite), "max_ratio": mmax / m0,
                     "energy_growth": growth, "energy_first": e[0] if len(e) else math.nan,
                     "energy_last": e[-1] if len(e) else math.nan})
    return rows


def write_study_csv(path, study):
    if not path:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["table", "abscissa", "quantity", "error"])
        for name, table in study.tables.items():
            for x, errs in table.rows:
                for q, e in errs.items():
                    w.writerow([name, repr(x), q, repr(e)])
            for q, s in study.slopes.get(name, {}).items():
                w.writerow([name, "slope", q, repr(s)])


def _write_rows(path, rows):
    if not path or not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]))
        w.writeheader()
        w.writerows(rows)


# -- field dumps ----------------------------------------------------------------------

DUMP_MAGIC = "YYDUMP"
DUMP_VERSION = 1


class DumpFormatError(ValueError):
    pass


@dataclass
class FieldDump:
    header: dict
    arrays: dict  # name -> ndarray


def _dump_arrays(gs, chart):
    f = chart_fields(gs.charts[chart])
    out = {"T": f["T"], "p1": f["p1"], "p2": f["p2"]}
    for s in ("u1", "u2"):
        for tag, a in zip("rtp", f[s]):
            out[f"{s}{tag}"] = a
    return out


def dump_staggering(name):
    return {"r": "fcc", "t": "cfc", "p": "ccf"}[name[-1]] if name.startswith("u") else "ccc"


def write_field_dump(path, gs_or_fields, chart, time=None, grid_cells=None):
    """Text header followed by raw little-endian float64 arrays.

    Header lines: ``YYDUMP <version>``, ``chart``, ``time`` (repr), ``grid``
    (cell counts), one ``array <name> <staggering> <shape...>`` line per
    field, then ``end``.  Arrays follow in header order, C order.
    """
    if isinstance(gs_or_fields, dict):
        arrays = gs_or_fields
    else:
        arrays = _dump_arrays(gs_or_fields, chart)
        time = gs_or_fields.t if time is None else time
        grid_cells = gs_or_fields.grid(chart).counts
    lines = [f"{DUMP_MAGIC} {DUMP_VERSION}", f"chart {ChartId(chart).name.lower()}", f"time {float(time)!r}",
             "grid " + " ".join(str(int(n)) for n in grid_cells)]
    for name, a in arrays.items():
        lines.append(f"array {name} {dump_staggering(name)} " + " ".join(str(n) for n in a.shape))
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_field_dump(path):
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"\nend\n")
    if end < 0:
        raise DumpFormatError(f"{path}: header terminator missing")
    lines = data[:end].decode("ascii", errors="replace").split("\n")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != DUMP_MAGIC:
        raise DumpFormatError(f"{path}: not a field dump")
    if int(magic[1]) != DUMP_VERSION:
        raise DumpFormatError(f"{path}: unsupported format version {magic[1]}")
    header, specs = {"version": int(magic[1])}, []
    for line in lines[1:]:
        key, *rest = line.split()
        if key == "chart":
            header["chart"] = rest[0]
        elif key == "time":
            header["time"] = float(rest[0])
        elif key == "grid":
            header["grid"] = tuple(int(x) for x in rest)
        elif key == "array":
            specs.append((rest[0], rest[1], tuple(int(x) for x in rest[2:])))
        else:
            raise DumpFormatError(f"{path}: unknown header line {line!r}")
    header["staggering"] = {n: s for n, s, _ in specs}
    pos, arrays = end + len(b"\nend\n"), {}
    for name, _, shape in specs:
        nbytes = 8 * int(np.prod(shape))
        if pos + nbytes > len(data):
            raise DumpFormatError(f"{path}: truncated in array {name!r}")
        arrays[name] = np.frombuffer(data[pos:pos + nbytes], dtype="<f8").reshape(shape).astype(float)
        pos += nbytes
    if pos != len(data):
        raise DumpFormatError(f"{path}: {len(data) - pos} trailing bytes")
    return FieldDump(header, arrays)


def export_vtk(path, grid, chart, scalars):
    """Legacy ASCII structured grid: cell-corner points in Cartesian
    coordinates, one CELL_DATA scalar per cell-centred field."""
    from .geometry import chart_to_cartesian

    R, TH, PH = np.meshgrid(*(a.faces for a in grid.axes), indexing="ij")
    x, y, z = chart_to_cartesian(chart, R, TH, PH)
    dims = R.shape
    out = ["# vtk DataFile Version 3.0", f"yinyang {ChartId(chart).name.lower()}", "ASCII", "DATASET STRUCTURED_GRID",
           f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}", f"POINTS {R.size} double"]
    # VTK orders points with the first index fastest
    pts = np.stack([a.transpose(2, 1, 0).ravel() for a in (x, y, z)], axis=1)
    out += [" ".join(repr(float(v)) for v in p) for p in pts]
    I = grid.interior("ccc")
    ncell = (dims[0] - 1) * (dims[1] - 1) * (dims[2] - 1)
    out.append(f"CELL_DATA {ncell}")
    for name, a in scalars.items():
        vals = a[I]
        if vals.size != ncell:
            raise DumpFormatError(f"field {name!r} has {vals.size} cells, grid has {ncell}")
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [repr(float(v)) for v in vals.transpose(2, 1, 0).ravel()]
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


# -- command line -------------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="yinyang", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="key = value configuration file")
        sp.add_argument("--threads", type=int, help="worker count (default: machine parallelism)")
        sp.add_argument("overrides", nargs="*", metavar="key=value")

    common(sub.add_parser("run", help="single run with CSV time series"))
    for name in ("conv-time", "conv-space"):
        sp = sub.add_parser(name, help=f"{name.split('-')[1]} convergence study")
        common(sp)
        sp.add_argument("--levels", type=int, default=3 if name == "conv-space" else 4)
        if name == "conv-time":
            sp.add_argument("--reference", choices=("self", "exact"), default="self")
    sp = sub.add_parser("landau", help="Landau jet spatial and overlap study")
    common(sp)
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    sp = sub.add_parser("stability", help="heat-scheme stability sweep")
    common(sp)
    sp.add_argument("--taus", type=float, nargs="+", default=[0.1, 1.0, 10.0, 100.0])
    sp.add_argument("--steps", type=int, default=200)
    return p


def _report_slopes(study):
    for name, s in study.slopes.items():
        print(f"{name}: " + ", ".join(f"{q} {v:.3f}" for q, v in s.items()))


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = list(args.overrides)
        if args.threads is not None:
            overrides.append(f"threads={args.threads}")
        cfg = load_config(args.config, overrides)
        if args.command == "run":
            res = run(cfg)
            last = res.rows[-1]
            print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in last.items()))
            return res.exit_code
        if args.command in ("conv-time", "conv-space", "landau"):
            if args.command == "conv-time":
                study = time_study(cfg, args.levels, args.reference)
            else:
                base = landau_base(cfg) if args.command == "landau" else cfg
                study = space_study(base, args.levels)
            if args.command == "landau":
                ov = overlap_study(replace(landau_base(cfg), n_r=cfg.n_r, n_theta=cfg.n_theta, n_phi=cfg.n_phi), args.eps)
                for q in ("u2", "p2"):
                    vals = [ov[e][q] for e in args.eps]
                    print(f"overlap {q}: " + ", ".join(f"eps={e:g} {v:.4e}" for e, v in zip(args.eps, vals))
                          + f"; max/min {max(vals) / min(vals):.3f}")
                t = ConvergenceTable("epsilon")
                for e in args.eps:
                    t.add(e, ov[e])
                study.tables["overlap"] = t
            write_study_csv(cfg.csv, study)
            _report_slopes(study)
            return study.exit_code
        rows = stability_study((cfg.n_r, cfg.n_theta, cfg.n_phi), tuple(args.taus), args.steps, cfg.seed,
                               ShellExtents(cfg.R1, cfg.R2, cfg.epsilon), cfg.workers)
        _write_rows(cfg.csv, rows)
        for r in rows:
            print(" ".join(f"{k}={v:.6g}" for k, v in r.items()))
        return EXIT_OK if all(r["finite"] for r in rows) else EXIT_SOLVER
    except (ConfigError, ConfigurationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
