import csv
import json

import numpy as np
import pytest

from heatchain.cli import (EXIT_CONFIG, EXIT_IO, EXIT_NO_STEADY, EXIT_OK, EXIT_SOLVER, load_config, main,
                           validate)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) if v[:1] in "-0123456789in" else v for v in r] for r in rows[1:]]


def run(tmp_path, *args, out="out"):
    d = tmp_path / out
    return main([*args, "--out", str(d)]), d


def write_cfg(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_baseline_steady(tmp_path):
    code, d = run(tmp_path, "steady", "--scenario", "baseline")
    assert code == EXIT_OK
    cols, rows = read_csv(d / "steady_sites.csv")
    assert cols == ["site", "occupation", "thermal_current"]
    assert len(rows) == 25
    assert rows[0][1] > rows[-1][1] > rows[12][1] > 10.0
    assert sum(r[2] for r in rows) == pytest.approx(-15.0, rel=1e-9)
    rep = json.loads((d / "report.json").read_text())
    assert rep["summary"]["mean_energy"] == pytest.approx(412.5, rel=1e-10)
    assert rep["provenance"]["relative_residual"] <= 1e-10
    _, res = read_csv(d / "steady_reservoirs.csv")
    per = {r[0]: r[1] for r in res}
    assert per["A"] == pytest.approx(10.0) and per["B"] == pytest.approx(5.0)


def test_case2_evolve_table(tmp_path):
    cfg = write_cfg(tmp_path, "scenario: caseII\ntimes: [1, 10, 20, 30]\n")
    code, d = run(tmp_path, "evolve", "--config", cfg)
    assert code == EXIT_OK
    cols, rows = read_csv(d / "evolve.csv")
    assert cols[:3] == ["t", "energy", "total_current"] and len(cols) == 3 + 25
    t = np.array([r[0] for r in rows])
    np.testing.assert_array_equal(t, [1, 10, 20, 30])
    np.testing.assert_allclose([r[1] for r in rows], 12.5 + 15 * t, rtol=1e-12)
    np.testing.assert_allclose([r[2] for r in rows], 15.0, rtol=1e-12)


def test_fourier_sweep_long_format(tmp_path):
    cfg = write_cfg(tmp_path, "scenario: caseIV\nsweep: {kind: fourier, ns: [3, 4, 5]}\n")
    code, d = run(tmp_path, "sweep", "--config", cfg)
    assert code == EXIT_OK
    cols, rows = read_csv(d / "sweep.csv")
    assert cols == ["n", "k", "J1"]
    assert len(rows) == 4 + 5 + 6
    rep = json.loads((d / "report.json").read_text())
    assert rep["provenance"]["sweep"]["endpoint_max_rel_error"] <= 1e-8


def test_size_sweep(tmp_path):
    code, d = run(tmp_path, "sweep", "--config",
                  write_cfg(tmp_path, "scenario: baseline\nsweep: {kind: size, ns: [5, 25]}\n"))
    assert code == EXIT_OK
    cols, rows = read_csv(d / "sweep.csv")
    assert [r[cols.index("sum_thermal")] for r in rows] == pytest.approx([-15.0, -15.0], rel=1e-9)


def test_spectrum(tmp_path):
    code, d = run(tmp_path, "spectrum", "--scenario", "caseVI", "--set", "n=10")
    assert code == EXIT_OK
    _, ev = read_csv(d / "spectrum.csv")
    _, nu = read_csv(d / "mode_frequencies.csv")
    im = np.sort([r[2] for r in ev if r[2] > 0])
    np.testing.assert_allclose(im, np.sort([r[1] for r in nu]), atol=1e-9)


@pytest.mark.parametrize("argv", [
    ["steady", "--scenario", "caseV", "--seed", "5"],
    ["evolve", "--scenario", "caseIII", "--set", "n=5"],
])
def test_round_trip_bit_identical(tmp_path, argv):
    if argv[0] == "evolve":
        argv = [*argv[:-2], "--config", write_cfg(tmp_path, "scenario: caseIII\nparams: {n: 5}\ntimes: [0, 2.5]\n")]
    code, d1 = run(tmp_path, *argv, out="a")
    assert code == EXIT_OK
    code, d2 = run(tmp_path, argv[0], "--config", str(d1 / "report.json"), out="b")
    assert code == EXIT_OK
    for f in d1.glob("*.csv"):
        assert (d2 / f.name).read_bytes() == f.read_bytes()
    t1 = json.loads((d1 / "report.json").read_text())["tables"]
    t2 = json.loads((d2 / "report.json").read_text())["tables"]
    assert t1 == t2


def test_csv_and_json_agree(tmp_path):
    code, d = run(tmp_path, "steady", "--scenario", "caseI")
    assert code == EXIT_OK
    tables = json.loads((d / "report.json").read_text())["tables"]
    for name, table in tables.items():
        cols, rows = read_csv(d / f"{name}.csv")
        assert cols == table["columns"]
        assert rows == table["rows"]


def test_formats(tmp_path):
    code, d = run(tmp_path, "steady", "--scenario", "baseline", "--set", "n=4", "--format", "csv")
    assert code == EXIT_OK and not (d / "report.json").exists() and (d / "steady_sites.csv").exists()
    code, d = run(tmp_path, "steady", "--scenario", "baseline", "--set", "n=4", "--format", "json", out="j")
    assert code == EXIT_OK and (d / "report.json").exists() and not list(d.glob("*.csv"))


def test_no_temp_files_left(tmp_path):
    code, d = run(tmp_path, "steady", "--scenario", "baseline", "--set", "n=4")
    assert code == EXIT_OK
    assert sorted(p.name for p in d.iterdir()) == ["report.json", "steady_reservoirs.csv", "steady_sites.csv"]


def test_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "steady", "--scenario", "caseII")[0] == EXIT_NO_STEADY
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == EXIT_NO_STEADY
    assert run(tmp_path, "steady", "--config", write_cfg(tmp_path, "scenario: baseline\nbogus: 1\n"))[0] \
        == EXIT_CONFIG
    assert run(tmp_path, "steady", "--scenario", "baseline", "--set", "zeta=-0.1")[0] == EXIT_CONFIG
    assert run(tmp_path, "steady", "--config", str(tmp_path / "missing.yaml"))[0] == EXIT_CONFIG
    assert run(tmp_path, "evolve", "--scenario", "baseline")[0] == EXIT_CONFIG
    assert run(tmp_path, "steady", "--config",
               write_cfg(tmp_path, "scenario: baseline\nmode: evolve\ntimes: [1]\n"))[0] == EXIT_CONFIG
    # an unreachable residual tolerance is a solver failure
    assert run(tmp_path, "steady", "--config", write_cfg(
        tmp_path, "scenario: baseline\nparams: {n: 4}\ntolerances: {residual: 1.0e-30}\n"))[0] == EXIT_SOLVER
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["steady", "--scenario", "baseline", "--set", "n=3", "--out", str(blocker / "sub")]) == EXIT_IO


def test_validate_messages():
    diag = validate({"scenario": "baseline", "params": {"zeta": -0.1}})
    assert any("params.zeta" in e and "-0.1" in e for e in diag["physics_errors"])
    diag = validate({"scenario": "caseII", "mode": "steady"})
    assert any("no steady state exists" in w for w in diag["warnings"])
    assert validate({"scenario": "baseline"}) == {"schema_errors": [], "physics_errors": [], "warnings": []}
    diag = validate({"scenario": "baseline", "extra": True})
    assert diag["schema_errors"]
    assert validate(["not", "a", "mapping"])["schema_errors"]


def test_validate_command_never_fails(tmp_path, capsys):
    assert main(["validate", "--scenario", "caseII"]) == EXIT_OK
    assert "no steady state exists" in capsys.readouterr().out
    assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["schema_errors"]


def test_load_config_json_and_yaml(tmp_path):
    assert load_config(write_cfg(tmp_path, '{"scenario": "caseI"}', "c.json")) == {"scenario": "caseI"}
    assert load_config(write_cfg(tmp_path, "scenario: caseI\n")) == {"scenario": "caseI"}
    from heatchain.cli import ConfigError
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, "- 1\n- 2\n"))
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, "a: [\n"))
