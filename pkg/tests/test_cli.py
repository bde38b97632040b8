import csv
import math

import numpy as np
import pytest

from yinyang.cli import (
    EXIT_OK,
    EXIT_VALIDATION,
    ConfigError,
    DumpFormatError,
    RunConfig,
    _safe_slopes,
    csv_columns,
    export_vtk,
    format_config,
    load_config,
    main,
    parse_assignments,
    read_field_dump,
    run,
    write_field_dump,
)
from yinyang.geometry import ChartId, GridSpec, ShellExtents, make_grid
from yinyang.verify import ConvergenceTable

SMALL = ["n_r=4", "n_theta=12", "n_phi=24", "dt=0.01", "t_final=0.05"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# shell\nR1 = 0.5\nn_theta = 18  # cells\nflux_fix = yes\nnu = none\n")
    cfg = load_config(str(p), ["n_theta=24", "mode=additive"])
    assert cfg.R1 == 0.5 and cfg.n_theta == 24 and cfg.flux_fix is True
    assert cfg.mode == "additive" and cfg.nu is None
    again = parse_assignments(format_config(cfg).splitlines())
    assert again == cfg


@pytest.mark.parametrize(
    "line,key",
    [("dt=-0.1", "dt"), ("bogus=1", "bogus"), ("n_r=abc", "n_r"), ("mode=sideways", "mode"), ("R2=0.5", "R2")],
)
def test_config_errors_name_the_key(line, key):
    with pytest.raises(ConfigError) as info:
        load_config(None, [line])
    assert info.value.key == key


def test_t_final_must_be_multiple_of_dt():
    with pytest.raises(ConfigError) as info:
        load_config(None, ["dt=0.03", "t_final=0.1"])
    assert info.value.key == "dt"


def test_viscosity_defaults():
    assert RunConfig(Pr=0.7).viscosity == 0.7
    assert RunConfig(problem="landau", Re=4.0).viscosity == 0.25
    assert RunConfig(nu=0.3, problem="landau").viscosity == 0.3


def test_main_rejects_negative_dt(capsys):
    assert main(["run", "dt=-1"]) == EXIT_VALIDATION
    assert "dt" in capsys.readouterr().err


def test_main_reports_small_overlap(capsys):
    assert main(["run", "epsilon=0.001", *SMALL]) == EXIT_VALIDATION
    assert "epsilon" in capsys.readouterr().err


def test_heat_only_zero_amplitude_gives_zero_series(tmp_path):
    out = tmp_path / "h.csv"
    code = main(["run", *SMALL, "problem=heat_only", "amplitude=0", f"csv={out}", "--threads", "1"])
    assert code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 5
    assert list(rows[0]) == csv_columns("heat_only")
    for r in rows:
        for k in ("div_u1", "div_u2", "energy", "T_max"):
            assert float(r[k]) == 0.0


def test_manufactured_run_rows(tmp_path):
    out = tmp_path / "m.csv"
    cfg = load_config(None, [*SMALL, f"csv={out}", "threads=1"])
    res = run(cfg)
    assert res.exit_code == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == cfg.steps
    assert [int(r["step"]) for r in rows] == list(range(1, cfg.steps + 1))
    assert float(rows[-1]["time"]) == pytest.approx(cfg.t_final)
    for r in rows:
        for q in ("u1", "u2", "p1", "p2", "T"):
            v = float(r[f"err_{q}"])
            assert math.isfinite(v) and v >= 0.0
            assert v == pytest.approx(math.hypot(float(r[f"err_{q}_yin"]), float(r[f"err_{q}_yang"])), rel=1e-12)


def test_nonconverged_exit_code(tmp_path):
    assert main(["run", *SMALL, "max_iters=1", "tol=1e-14", "--threads", "1"]) == 4


def test_dump_written_and_round_trips(tmp_path):
    base = tmp_path / "d"
    cfg = load_config(None, [*SMALL, "dump_every=5", f"dump_path={base}", "threads=1"])
    res = run(cfg)
    path = tmp_path / "d_yang_000005.yyd"
    dump = read_field_dump(str(path))
    assert dump.header["chart"] == "yang"
    assert dump.header["grid"] == (4, 12, 24)
    assert dump.header["time"] == res.state.t
    flow = res.state.charts[ChartId.YANG].flow
    assert np.array_equal(dump.arrays["p2"], flow.p2_n)
    assert np.array_equal(dump.arrays["u2t"], flow.u2_n[1])
    assert dump.header["staggering"]["u1r"] == "fcc"
    assert (tmp_path / "d_yin_000000.yyd").exists()


def test_dump_format_errors(tmp_path, rng):
    arrays = {"T": rng.standard_normal((3, 4, 5)), "u2p": rng.standard_normal((3, 4, 6))}
    p = tmp_path / "x.yyd"
    write_field_dump(str(p), arrays, ChartId.YIN, time=0.25, grid_cells=(1, 2, 3))
    back = read_field_dump(str(p))
    assert back.header["time"] == 0.25
    for k, a in arrays.items():
        assert np.array_equal(back.arrays[k], a)
    data = p.read_bytes()
    (tmp_path / "short.yyd").write_bytes(data[:-8])
    with pytest.raises(DumpFormatError):
        read_field_dump(str(tmp_path / "short.yyd"))
    (tmp_path / "long.yyd").write_bytes(data + b"\0" * 8)
    with pytest.raises(DumpFormatError):
        read_field_dump(str(tmp_path / "long.yyd"))
    (tmp_path / "bad.yyd").write_bytes(b"NOTADUMP 1\nend\n")
    with pytest.raises(DumpFormatError):
        read_field_dump(str(tmp_path / "bad.yyd"))
    (tmp_path / "v2.yyd").write_bytes(data.replace(b"YYDUMP 1", b"YYDUMP 2", 1))
    with pytest.raises(DumpFormatError):
        read_field_dump(str(tmp_path / "v2.yyd"))


def test_vtk_export(tmp_path):
    g = make_grid(ShellExtents(1.0, 2.0, 0.1), GridSpec(2, 3, 4))
    T = np.arange(np.prod(g.shape("ccc")), dtype=float).reshape(g.shape("ccc"))
    p = tmp_path / "t.vtk"
    export_vtk(str(p), g, ChartId.YIN, {"T": T})
    lines = p.read_text().splitlines()
    assert "DIMENSIONS 3 4 5" in lines
    assert "POINTS 60 double" in lines
    i = lines.index("CELL_DATA 24")
    vals = [float(v) for v in lines[i + 3:]]
    assert len(vals) == 24
    # first index fastest
    assert vals[0] == T[1, 1, 1] and vals[1] == T[2, 1, 1]
    with pytest.raises(DumpFormatError):
        export_vtk(str(p), g, ChartId.YIN, {"bad": np.zeros((3, 3, 3))})


def test_stability_subcommand(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["stability", "n_r=4", "n_theta=8", "n_phi=16", f"csv={out}", "--taus", "1", "100", "--steps", "10"])
    assert code == EXIT_OK
    rows = read_csv(out)
    assert [float(r["tau"]) for r in rows] == [1.0, 100.0]
    assert all(float(r["energy_growth"]) <= 1e-10 for r in rows)


def test_conv_time_writes_self_table(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code = main(["conv-time", "problem=heat_only", "n_r=3", "n_theta=6", "n_phi=12", "dt=0.02", "t_final=0.04",
                 f"csv={out}", "--levels", "3"])
    assert code == EXIT_OK
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["table", "abscissa", "quantity", "error"]
    assert sum(r[0] == "self" and r[1] != "slope" for r in rows[1:]) == 3 * 5
    assert "self:" in capsys.readouterr().out


def test_study_slopes_skip_degenerate_quantities():
    t = ConvergenceTable("h")
    for h in (0.4, 0.2, 0.1):
        t.add(h, {"u2": h * h, "T": 0.0})
    s = _safe_slopes(t)
    assert set(s) == {"u2"} and s["u2"] == pytest.approx(2.0)
