import contextlib
import io

import numpy as np
import pytest

from genfilippov.cli import (
    EXIT_FAIL,
    EXIT_INVALID,
    EXIT_NO_LIMIT,
    EXIT_OK,
    EXIT_USAGE,
    ParseError,
    figure_fig1,
    figure_fig3,
    main,
    parse_scenario_text,
    read_trajectory_csv,
    scenario_from_mapping,
    scenario_to_text,
    write_trajectory_csv,
)
from genfilippov.core_types import ScenarioConfig, Trajectory, TrajectorySegment


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def _rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


# ---------------------------------------------------------------------------
# scenario files


def test_parse_scenario_text():
    d = parse_scenario_text("system = example2  # comment\n\nx0 = 1, 0\nT = 1.5\n")
    assert d == {"system": "example2", "x0": "1, 0", "T": "1.5"}
    sc = scenario_from_mapping(d)
    assert sc.system_id == "example2" and sc.x0 == (1.0, 0.0) and sc.T == 1.5 and sc.t_end == 2.0
    with pytest.raises(ParseError):
        parse_scenario_text("colour = blue")
    with pytest.raises(ParseError):
        parse_scenario_text("T = 1\nT = 2")
    with pytest.raises(ParseError):
        parse_scenario_text("just words")
    with pytest.raises(ParseError):
        scenario_from_mapping({"x0": "1,a"})


def test_scenario_defaults_and_round_trip():
    sc = scenario_from_mapping({})
    assert sc == ScenarioConfig("example1", (1.0, 0.0))
    assert (sc.t0, sc.T, sc.t_end, sc.k1, sc.k2) == (0.0, 1.0, 2.0, 1.5, 1.1)
    assert (sc.rtol, sc.atol, sc.min_step_fraction, sc.event_tol, sc.conv_radius) == (1e-9, 1e-9, 0.25, 1e-10, 1e-7)
    other = ScenarioConfig("supertwisting", (0.1, -0.2), t0=1.0, t_end=3.0, k1=2.0, output="a.csv")
    assert scenario_from_mapping(parse_scenario_text(scenario_to_text(other))) == other


def test_csv_round_trip_is_bit_exact(tmp_path):
    t = np.array([0.0, 0.1, 1 / 3, 0.7])
    x = np.column_stack([np.sqrt(t), -np.exp(t) * 1e-300])
    tr = Trajectory((TrajectorySegment(t, x, "classical"),
                     TrajectorySegment([0.7, 2.0], [x[-1], x[-1]], "zero-continuation")), continuity_tol=1.0)
    p = tmp_path / "t.csv"
    with open(p, "w", encoding="utf-8", newline="\n") as f:
        write_trajectory_csv(tr, f)
    back = read_trajectory_csv(p)
    assert back.modes == tr.modes
    for a, b in zip(tr.segments, back.segments):
        np.testing.assert_array_equal(a.t, b.t)
        np.testing.assert_array_equal(a.x, b.x)
    assert p.read_bytes().count(b"\r") == 0


# ---------------------------------------------------------------------------
# simulate


def test_simulate_example1(tmp_path):
    p = tmp_path / "e1.csv"
    code, out, _ = run("simulate", "--system", "example1", "--x0", "1,0", "-o", str(p), "--stride", "8")
    assert code == EXIT_OK and "continued-with-zero" in out
    header, rows = _rows(p)
    assert header == ["t", "x1", "x2", "mode", "segment"]
    assert float(rows[0][0]) == 0.0 and float(rows[-1][0]) == 2.0
    last = rows[-1]
    assert np.hypot(float(last[1]), float(last[2])) <= 1e-6 and last[3] == "zero-continuation"


def test_simulate_example2_exit_2(tmp_path):
    p = tmp_path / "e2.csv"
    code, out, _ = run("simulate", "--system", "example2", "--x0", "1,0", "-o", str(p))
    assert code == EXIT_NO_LIMIT and "no-limit-exists" in out
    _, rows = _rows(p)
    assert float(rows[-1][0]) < 1.0


def test_simulate_zero_state(tmp_path):
    p = tmp_path / "z.csv"
    code, _, _ = run("simulate", "--system", "example1", "--x0", "0,0", "-o", str(p))
    assert code == EXIT_OK
    _, rows = _rows(p)
    assert all(float(r[1]) == 0.0 and float(r[2]) == 0.0 for r in rows)


def test_simulate_stdout_and_scenario_file(tmp_path):
    sc = tmp_path / "s.txt"
    sc.write_text("system = supertwisting\nx0 = 0.1, 0\nt_end = 0.5\n", encoding="utf-8")
    code, out, err = run("simulate", "--scenario", str(sc))
    assert code == EXIT_OK
    assert out.startswith("t,x1,x2,mode,segment\n") and "horizon-reached" in err
    # flags override the file
    code, out2, _ = run("simulate", "--scenario", str(sc), "--t-end", "0.25")
    assert code == EXIT_OK and out2 != out


def test_simulate_defaults_are_stable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("simulate", "-o", str(a), "--stride", "64")[0] == EXIT_OK
    assert run("simulate", "-o", str(b), "--stride", "64")[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes_usage_and_invalid(tmp_path):
    assert run("simulate", "--system", "nope")[0] == EXIT_USAGE
    assert run("simulate", "--x0", "1,zz")[0] == EXIT_USAGE
    assert run("frobnicate")[0] == EXIT_USAGE
    assert run()[0] == EXIT_USAGE
    sc = tmp_path / "bad.txt"
    sc.write_text("colour = blue\n", encoding="utf-8")
    assert run("simulate", "--scenario", str(sc))[0] == EXIT_USAGE
    assert run("simulate", "--scenario", str(tmp_path / "missing.txt"))[0] == EXIT_USAGE
    assert run("simulate", "--t0", "1.5")[0] == EXIT_INVALID
    assert run("simulate", "--k1", "-1")[0] == EXIT_INVALID
    assert run("simulate", "--x0", "1,0,0")[0] == EXIT_INVALID
    assert run("figure", "fig9")[0] == EXIT_USAGE


# ---------------------------------------------------------------------------
# figures


def test_figure_data():
    header, d = figure_fig1()
    assert header == ["t", "x1", "x2"]
    np.testing.assert_allclose(d[0], [0.0, 1.0, 0.0], atol=1e-15)
    assert d[-1, 0] == 1.0 and not np.any(d[-1, 1:])
    header, d = figure_fig3()
    assert header == ["t", "classical_x2", "generalized_x2"]
    assert d[0, 0] == 0.0 and d[-1, 0] == 6.0
    assert not np.any(d[:, 1])
    for t in (0.0, 2.0, 4.0):
        row = d[d[:, 0] == t]
        assert row.shape[0] == 1 and row[0, 2] == 0.0


def test_figure_command(tmp_path):
    for name in ("fig1", "fig2", "fig3"):
        p = tmp_path / f"{name}.csv"
        assert run("figure", name, "-o", str(p))[0] == EXIT_OK
        header, rows = _rows(p)
        assert header[0] == "t" and len(rows) > 1000
    _, rows = _rows(tmp_path / "fig2.csv")
    assert float(rows[0][0]) == 0.0 and float(rows[-1][0]) < 1.0


# ---------------------------------------------------------------------------
# analyze and verify


def test_analyze_tv(tmp_path):
    p = tmp_path / "tv.csv"
    code, out, _ = run("analyze", "tv", "--system", "example1", "--component", "2",
                       "--deltas", "1e-2,1e-3,1e-4,1e-5", "-o", str(p))
    assert code == EXIT_OK
    slope = float(out.split("slope = ")[1].split(",")[0])
    assert slope > 0
    header, rows = _rows(p)
    assert header == ["delta", "variation"] and len(rows) == 4


def test_analyze_residual_and_bound():
    code, out, _ = run("analyze", "residual", "--system", "example3", "--use-oracle")
    assert code == EXIT_OK and out.strip().endswith("pass")
    code, out, _ = run("analyze", "bound", "--system", "example1", "--interval", "0,0.5")
    assert code == EXIT_OK and out.strip().endswith("pass")
    code, _, _ = run("analyze", "bound", "--system", "example1", "--interval", "0,1.5")
    assert code == EXIT_FAIL


def test_analyze_csv_round_trip_matches(tmp_path):
    p = tmp_path / "e2.csv"
    assert run("simulate", "--system", "example2", "-o", str(p))[0] == EXIT_NO_LIMIT
    code, from_csv, _ = run("analyze", "oscillation", "--system", "example2", "--input", str(p),
                            "--deltas", "1e-2,1e-3,1e-4")
    assert code == EXIT_OK
    code, fresh, _ = run("analyze", "oscillation", "--system", "example2", "--deltas", "1e-2,1e-3,1e-4")
    assert code == EXIT_OK and from_csv == fresh


def test_verify_list_and_subset():
    code, out, _ = run("verify", "--list")
    assert code == EXIT_OK and len(out.strip().splitlines()) == 10
    code, out, _ = run("verify", "--only", "6")
    assert code == EXIT_OK and out.startswith("[PASS]  6")


def test_verify_detects_perturbed_matrix(monkeypatch):
    from genfilippov import acceptance, systems

    def perturbed(tau):
        M = systems.fundamental_matrix_pt(tau).copy()
        M[..., 0, 0] *= 1.001
        return M

    monkeypatch.setattr(acceptance, "fundamental_matrix_pt", perturbed)
    code, out, _ = run("verify", "--only", "6")
    assert code == EXIT_FAIL and out.startswith("[FAIL]  6")
