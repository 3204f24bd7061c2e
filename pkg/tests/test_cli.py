import json
import subprocess
import sys

import numpy as np
import pytest

from hetcache.cli import SweepSpec, apply_sweep_value, main
from hetcache.errors import InvalidArgument
from hetcache.model import scenario_to_dict


@pytest.fixture(scope="module")
def coeff_file(tmp_path_factory, scaled_coeffs):
    path = tmp_path_factory.mktemp("co") / "coeffs.json"
    path.write_text(json.dumps(scaled_coeffs.to_dict()))
    return str(path)


def run(argv):
    return main([str(a) for a in argv])


def test_solve_icp_writes_report_and_trace(tmp_path, coeff_file):
    out, trace = tmp_path / "r.json", tmp_path / "t.csv"
    assert run(["solve", "--coeffs", coeff_file, "--algo", "icp", "--out", out, "--trace", trace]) == 0
    rep = json.loads(out.read_text())
    assert rep["algorithm"] == "icp"
    assert all(r["monotone"] and r["single_fractional"] for r in rep["structure"])
    assert len(rep["trace"]["objectives"]) <= 11
    obj = [float(line.split(",")[1]) for line in trace.read_text().splitlines()[1:]]
    assert np.all(np.diff(obj) <= 1e-12 * np.array(obj[:-1]))


def test_solve_oceb_not_better_than_icp(tmp_path, coeff_file):
    res = {}
    for algo in ("icp", "oceb"):
        out = tmp_path / f"{algo}.json"
        assert run(["solve", "--coeffs", coeff_file, "--algo", algo, "--out", out]) == 0
        res[algo] = json.loads(out.read_text())["objective"]
    assert res["icp"] <= res["oceb"] * (1 + 1e-9)


def test_solve_greedy_init(tmp_path, coeff_file):
    out = tmp_path / "g.json"
    assert run(["solve", "--coeffs", coeff_file, "--init", "greedy", "--out", out]) == 0
    obj = json.loads(out.read_text())["trace"]["objectives"]
    assert np.all(np.diff(obj) <= 1e-12 * np.array(obj[:-1]))


def test_solve_is_byte_identical(tmp_path, coeff_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["solve", "--coeffs", coeff_file, "--out", a, "--seed", 3])
    run(["solve", "--coeffs", coeff_file, "--out", b, "--seed", 3])
    assert a.read_bytes() == b.read_bytes()


def test_malformed_scenario_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert run(["solve", "--scenario", bad, "--out", tmp_path / "x.json"]) == 2
    assert not (tmp_path / "x.json").exists()


def test_invalid_scenario_exit_2(tmp_path, scaled, coeff_file):
    d = scenario_to_dict(scaled)
    d["storage"] = [2e9, 1e8, 1e8]
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    assert run(["solve", "--scenario", path, "--coeffs", coeff_file]) == 2


def test_mismatched_coefficients_exit_2(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"a": [1.0, 1.0], "b": [1.0]}))
    assert run(["solve", "--coeffs", path]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--algo", "magic"])
    assert exc.value.code == 2


def test_sweep_csv(tmp_path, coeff_file):
    out = tmp_path / "s.csv"
    assert run(["sweep", "--coeffs", coeff_file, "--sweep", "C=200,50,100", "--out", out]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# hetcache-sweep v1 param=C unit=Mbit")
    assert lines[1] == "param,value,algorithm,delay,hit_ratio,sweeps"
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 9
    keys = [(float(r[1]), r[2]) for r in rows]
    assert keys == sorted(keys)
    icp = [float(r[3]) for r in rows if r[2] == "icp"]
    assert np.all(np.diff(icp) <= 0)


def test_sweep_parallel_matches_serial(tmp_path, coeff_file):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "--coeffs", coeff_file, "--sweep", "D=1,5", "--algo", "icp,ocfbob"]
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b, "--jobs", 2]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_bad_value_removes_nothing_and_exits_2(tmp_path, coeff_file):
    out = tmp_path / "s.csv"
    # 2000 Mbit exceeds the 1000 Mbit catalog
    assert run(["sweep", "--coeffs", coeff_file, "--sweep", "C=50,2000", "--out", out]) == 2
    assert not out.exists()
    assert not (tmp_path / "s.csv.partial").exists()


def test_sweep_spec_parsing():
    spec = SweepSpec.parse("W=2,5,10")
    assert spec.param == "W" and spec.values == (2.0, 5.0, 10.0)
    for bad in ("W", "Q=1", "W=", "W=a,b"):
        with pytest.raises(InvalidArgument):
            SweepSpec.parse(bad)
    with pytest.raises(InvalidArgument):
        SweepSpec.parse("W=1", ["lru"])


def test_sweep_units(scaled):
    assert apply_sweep_value(scaled, "W", 5).total_bandwidth == 5e6
    assert apply_sweep_value(scaled, "C", 50).storage.tolist() == [5e7] * 3
    assert apply_sweep_value(scaled, "D", 2).buffer_delay_rate == 2.0
    cat = apply_sweep_value(scaled, "nu", 1.2).catalog
    assert cat.popularities[0] > scaled.catalog.popularities[0]
    np.testing.assert_array_equal(cat.lengths, scaled.catalog.lengths)


def test_coeffs_command_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(["coeffs", "--samples", 20000, "--seed", 5, "--out", a]) == 0
    assert run(["coeffs", "--samples", 20000, "--seed", 5, "--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert len(doc["a"]) == 4 and len(doc["monte_carlo"]) == 7


def test_coeffs_gap_bound_exit_4(tmp_path):
    assert run(["coeffs", "--samples", 2000, "--gap-bound", 1e-9, "--out", tmp_path / "c.json"]) == 4


def test_validate_command(tmp_path):
    out = tmp_path / "v.json"
    assert run(["validate", "special-fn", "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["passed"] and all(c["passed"] for c in doc["checks"])


def test_validate_failure_exit_4(tmp_path, monkeypatch):
    from hetcache import cli, validate

    def broken(**_):
        return [validate.Check("x", "always fails", 1.0, 0.0, False)]

    monkeypatch.setitem(validate.SUITES, "bandwidth", broken)
    assert cli.main(["validate", "bandwidth", "--out", str(tmp_path / "v.json")]) == 4


def test_numeric_failure_exit_3(tmp_path, monkeypatch):
    from hetcache import cli
    from hetcache.errors import NumericError

    def no_budget(*_):
        raise NumericError("quadrature budget exhausted")

    monkeypatch.setattr(cli, "compute_coefficients", no_budget)
    assert cli.main(["solve", "--out", str(tmp_path / "x.json")]) == 3
    assert not (tmp_path / "x.json").exists()


def test_module_entry_point(tmp_path, coeff_file):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "hetcache", "solve", "--coeffs", coeff_file,
                           "--algo", "ocfbob", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["algorithm"] == "ocfbob"
