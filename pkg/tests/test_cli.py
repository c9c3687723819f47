import csv
import json
import math

import pytest

from mixtype import cli


def _run(tmp_path, command, config, name="out"):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / name
    code = cli.main([command, "--config", str(cfg), "--out", str(out)])
    return code, out


def _report(out):
    return json.loads((out / "report.json").read_text())


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_check_sp_optics_polar_q_is_zero(tmp_path):
    code, out = _run(tmp_path, "check-sp", {
        "system": {"id": "optics-polar"},
        "domain": {"kind": "omega5", "params": {"eps0": 0.1}},
        "verification": {"resolution": 16, "expect_zero": True},
    })
    assert code == 0
    rep = _report(out)
    q0 = [r for r in rep["reports"] if r["condition"] == "Q = 0"]
    assert len(q0) == 1 and q0[0]["pass"] and q0[0]["worst"] == 0.0


def test_classify_hodge_case3(tmp_path):
    code, out = _run(tmp_path, "classify", {"system": {"id": "hodge-case3"}, "verification": {"n": 41}})
    assert code == 0
    rows = _rows(out / "classify.csv")
    assert rows[0] == ["x", "y", "class"]
    assert len(rows) == 1 + 41 * 41
    for x, y, c in rows[1:]:
        rr = float(x) ** 2 + float(y) ** 2
        if rr < 0.99:
            assert c == "elliptic"
        elif rr > 1.01:
            assert c == "hyperbolic"


@pytest.mark.parametrize("config", [
    {"system": {"id": "no-such-system"}},
    {"system": {"id": "hodge-case1"}, "bogus": 1},
    {"command": "energy", "system": {"id": "hodge-case1"}},
    {"system": {"id": "hodge-case1"}, "seed": -1},
    {"system": "hodge-case1"},
    [],
])
def test_bad_config_exits_2_without_output(tmp_path, config):
    code, out = _run(tmp_path, "classify", config)
    assert code == 2
    assert not out.exists()


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["classify", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["classify", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("command, config", [
    ("solve", {"solve": {"case": "optics-polar", "resolutions": [16]}}),
    ("solve", {"solve": {"case": "heat"}}),
    ("energy", {"energy": {"case": 4}}),
    ("energy", {"energy": {"case": 1, "resolutions": [4, 8]}}),
    ("optics", {"optics": {"t_min": -30}}),
    ("check-adm", {"domain": {"kind": "omega2"}}),
])
def test_command_specific_config_errors(tmp_path, command, config):
    code, out = _run(tmp_path, command, config)
    assert code == 2 and not out.exists()


def test_reruns_are_byte_identical(tmp_path):
    config = {"seed": 7, "system": {"id": "hodge-case3"}, "verification": {"n": 21}}
    _, a = _run(tmp_path, "classify", config, "a")
    _, b = _run(tmp_path, "classify", config, "b")
    for name in ("report.json", "classify.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = _report(a)
    assert rep["seed"] == 7 and len(rep["config_hash"]) == 64


def test_env_var_sets_output(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": {"id": "hodge-case1"}, "verification": {"n": 5}}))
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env-out"))
    assert cli.main(["classify", "--config", str(cfg)]) == 0
    assert (tmp_path / "env-out" / "report.json").exists()


def test_reports_carry_resolution_and_tolerance(tmp_path):
    code, out = _run(tmp_path, "solve", {"solve": {"case": "optics-polar", "resolutions": [8, 16]}})
    assert code == 0
    rep = _report(out)
    assert rep["pass"] == all(r["pass"] for r in rep["reports"])
    for r in rep["reports"]:
        assert "resolution" in r and "tol" in r
    for row in rep["tables"]["convergence"]:
        assert "resolution" in row and "tol" in row
    rows = _rows(out / "fields.csv")
    assert rows[0] == ["c1", "c2", "u1", "u2"]
    assert all(math.isfinite(float(v)) for v in rows[1])


def test_energy_case2(tmp_path):
    code, out = _run(tmp_path, "energy", {"energy": {"case": 2, "resolutions": [16, 32], "scan_resolution": 64}})
    assert code == 0
    Ks = [row["K"] for row in _report(out)["tables"]["K"]]
    assert all(k > 0 for k in Ks)


def test_check_adm_default(tmp_path):
    code, out = _run(tmp_path, "check-adm", {})
    assert code == 0
    sel = _report(out)["tables"]["select_M"]
    assert sel["feasible"] and sel["M"] > 0


def test_check_adm_infeasible(tmp_path):
    code, out = _run(tmp_path, "check-adm", {"verification": {"sigma": 1.0, "tau": 1.0}})
    assert code == 1
    rep = _report(out)
    assert not rep["pass"]
    assert any(r["condition"] == "feasible M exists" and not r["pass"] for r in rep["reports"])


def test_optics_oscillatory_range(tmp_path):
    code, out = _run(tmp_path, "optics", {"optics": {"t_min": -10, "t_max": 2, "n": 25, "samples": 20}})
    assert code == 0
    rows = _rows(out / "airy.csv")
    assert rows[0] == ["t", "Z", "dZ"] and len(rows) == 26


def test_failures_name_condition_and_location(tmp_path, capsys):
    code, out = _run(tmp_path, "check-sp", {
        "system": {"id": "hodge-perturbed", "params": {"eps1": 0.01, "eps2": 0, "eps3": 0, "eps4": 0.01}},
        "verification": {"xlim": [-0.5, 0.5], "ylim": [-1.2, 1.2], "resolution": 16},
    })
    assert code == 1
    failed = [r for r in _report(out)["reports"] if not r["pass"]]
    assert failed and all(r["condition"] and r["location"] is not None for r in failed)
    assert "FAIL" in capsys.readouterr().out
