import json

import numpy as np
import pytest

from haarfactor.cli import main
from haarfactor.operators import FactorizationCertificate, identity, operator_from_json
from haarfactor.runner import (ConfigError, RunReport, ScenarioConfig, assertions_pass,
                               bundled_scenario, run)


def cfg(**kw):
    base = dict(n=1, delta=0.5, seeds=[0, 1], overrides={"N": 7, "ntilde": 1, "m": 6,
                                                          "threshold": 0.025, "width": 0.1})
    base.update(kw)
    return ScenarioConfig(**base)


def test_identity_fixture_runs_clean():
    report = run(cfg(operator="identity"))
    assert report.success_rate == 1
    assert all(r.certificate["residual"] == 0 for r in report.records)


def test_smoke_scenario_is_deterministic_and_reloads():
    config = ScenarioConfig.load(bundled_scenario("smoke"))
    assert (config.n, config.override("m"), config.N, len(config.seeds)) == (1, 6, 7, 10)
    a, b = run(config), run(config)
    assert a.to_json(timings=False) == b.to_json(timings=False)
    assert assertions_pass(config, a)
    back = RunReport.from_json(json.loads(json.dumps(a.to_json())))
    assert back.to_json() == a.to_json()
    from haarfactor.runner import make_operator
    for rec, cert in zip([r for r in back.records if r.certificate], back.certificates()):
        T = make_operator(config, rec.seed)
        assert cert.measure_residual(T) <= 1e-8
    rows = a.to_csv().splitlines()
    assert rows[0].startswith("seed,stage,ok") and len(rows) == 1 + 3 * 10


def test_failures_are_recorded_per_seed():
    report = run(cfg(overrides={"N": 7, "ntilde": 1, "m": 6, "threshold": 1e-9}))
    assert report.success_rate == 0
    assert all(r.error.startswith("SearchExhausted") for r in report.records)


def test_signed_mode_runs():
    config = cfg(n=0, mode="signed-diagonal", seeds=[3],
                 overrides={"N": 2, "Ntilde": 8, "ntilde": 0, "m": 0, "threshold_off": 1.0,
                            "threshold_diag": 1e-9})
    report = run(config)
    assert report.success_rate == 1 and "corollary_ntilde" in report.paper_sizes


@pytest.mark.parametrize("bad", [{"n": -1}, {"n": 1, "mode": "zigzag"}, {"n": 1, "wat": 2},
                                 {"gamma": 1}, [1, 2]])
def test_malformed_config_rejected(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_json(bad)


def test_cli_malformed_config(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["run", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"


def test_cli_roundtrip(tmp_path, capsys):
    op = tmp_path / "T.json"
    cert = tmp_path / "c.json"
    assert main(["gen-operator", "--N", "6", "--seed", "2", "--out", str(op)]) == 0
    assert main(["factorize", "--n", "1", "--ntilde", "1", "--m", "5", "--threshold", "0.05",
                 "--width", "0.2", "--seed", "2", "--operator", str(op),
                 "--certificate-out", str(cert)]) == 0
    capsys.readouterr()
    assert main(["verify-certificate", "--certificate", str(cert), "--operator", str(op)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] and out["residual"] <= 1e-8
    c = FactorizationCertificate.from_json(json.loads(cert.read_text()))
    assert c.measure_residual(operator_from_json(json.loads(op.read_text()))) <= 1e-8


def test_cli_other_commands(tmp_path, capsys):
    assert main(["nmin", "--n", "1", "--K", "1", "--N", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["nmin"] == 1064 and out["nmin_unconditional"] == 560 and out["ntilde_min"] == 192
    vec = tmp_path / "x.json"
    vec.write_text(json.dumps({"ambient": 1, "coeffs": [1, 1, 0]}))
    assert main(["norm", str(vec), "--spec", "2,constant", "--seed", "0"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(np.sqrt(6) / 2)
    op = tmp_path / "I.json"
    op.write_text(json.dumps(identity(3).to_json()))
    assert main(["norm", str(op), "--seed", "0", "--budget", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["exact"] == pytest.approx(1)
    assert main(["diagonalize", "--n", "1", "--m", "2", "--seed", "0", "--operator", str(op),
                 "--threshold", "1e-6"]) == 0
    assert json.loads(capsys.readouterr().out)["success"]
    assert main(["reduce-positive", "--N", "1", "--Ntilde", "8", "--seed", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["sigma"] in (1, -1)
    assert main(["reduce-positive", "--N", "1", "--Ntilde", "4", "--seed", "1"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ValueError"
    assert main(["reduce-positive", "--N", "1", "--Ntilde", "4", "--seed", "1", "--override"]) == 0
    assert json.loads(capsys.readouterr().out)["override"] is True
    assert main(["run", "--scenario", "smoke", "--seed", "4"]) == 0


def test_cli_requires_seed():
    with pytest.raises(SystemExit):
        main(["gen-operator", "--N", "3"])
