import json

import pytest

from qshape_collapse.cli import main
from qshape_collapse.lab import ScenarioError, list_scenarios, load_scenario, run_scenario, validate_scenario
from qshape_collapse.lab.runner import content_hash, round_sig

REQUIRED = {"schroedingers_dyad_state", "and_dyad_born", "zeno_sweep", "fredkin_feedforward", "ruin_reference"}


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def base(**kw):
    doc = {"name": "t", "kind": "collapse", "network": "and_dyad",
           "initial_state": {"[00]": 0.6**0.5, "[11]": 0.4**0.5}, "dynamics": {"t_max": 5.0, "seed": 1}}
    doc.update(kw)
    return doc


def test_bundled_scenarios_validate():
    names = {s["name"] for s in list_scenarios()}
    assert REQUIRED <= names
    for s in list_scenarios():
        assert validate_scenario(s["file"])["valid"]


def test_malformed_amplitude_names_the_field(tmp_path):
    p = write(tmp_path, base(initial_state={"[00]": "big", "[11]": 0.5}))
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert "initial_state['[00]']" in str(err.value)
    assert err.value.line is not None


def test_bad_label_and_unknown_field(tmp_path):
    with pytest.raises(ScenarioError, match="initial_state"):
        load_scenario(write(tmp_path, base(initial_state={"[000]": 1.0})))
    with pytest.raises(ScenarioError, match="dynamics"):
        load_scenario(write(tmp_path, base(dynamics={"lamda": 1.0})))


def test_unit_cap(tmp_path):
    names = [f"U{i}" for i in range(13)]
    net = {"units": names, "rules": {u: {"type": "noise", "p_on": 0.5} for u in names}}
    with pytest.raises(ScenarioError, match="12"):
        load_scenario(write(tmp_path, base(network=net, initial_state=[1.0])))


def test_normalization_tolerance(tmp_path):
    sc = load_scenario(write(tmp_path, base(initial_state={"[00]": 1.0005})))
    assert sc.notices and abs(abs(sc.amplitudes[0]) - 1) < 1e-12
    with pytest.raises(ScenarioError, match="norm"):
        load_scenario(write(tmp_path, base(initial_state={"[00]": 1.01})))


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "name": "x",\n  "kind": \n}')
    with pytest.raises(ScenarioError) as err:
        load_scenario(p)
    assert err.value.line == 4


def test_round_sig_and_hash():
    assert round_sig(1 / 3) == 0.333333333333
    assert round_sig({"a": [float("nan"), 2]}) == {"a": [None, 2]}
    # git blob hash of "{}"
    assert content_hash({}) == "9e26dfeeb6e641a33dae4961196235bdb965b21b"


def test_rerun_is_byte_identical(tmp_path):
    p = write(tmp_path, base(kind="ensemble", trials=50))
    a = run_scenario(p, out=tmp_path / "a")
    b = run_scenario(p, out=tmp_path / "b")
    assert a.summary_hash == b.summary_hash and a.config_hash == b.config_hash
    da, db = a.meta["output_dir"], b.meta["output_dir"]
    for f in ("summary.txt",):
        assert (tmp_path / "a" / da.split("/")[-1] / f).read_bytes() == (tmp_path / "b" / db.split("/")[-1] / f).read_bytes()
    c = run_scenario(p, seed=2)
    assert c.config_hash != a.config_hash


def test_bundle_layout(tmp_path):
    bundle = run_scenario(write(tmp_path, base()), out=tmp_path / "runs")
    run_dir = tmp_path / "runs" / f"t-{bundle.config_hash[:10]}"
    assert (run_dir / "bundle.json").is_file() and (run_dir / "summary.txt").is_file()
    rows = (run_dir / "series" / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,p[00],p[10],p[01],p[11],norm"
    doc = json.loads((run_dir / "bundle.json").read_text())
    assert doc["config_hash"] == bundle.config_hash and doc["summary_hash"] == bundle.summary_hash


def test_ruin_and_zeno_scenarios():
    r = run_scenario("ruin_reference", trials=2000)
    assert abs(r.summary["p1"] - 0.6) < 0.04
    z = run_scenario("zeno_sweep", trials=2000)
    assert z.summary["max_abs_error"] < 0.04


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["phi", "swap_dyad", "[10]"]) == 0
    assert json.loads(capsys.readouterr().out)["phi"] == 1.0
    assert main(["emd", "0.5,0.5", "0,1"]) == 0
    assert json.loads(capsys.readouterr().out)["emd"] == 0.5
    assert main(["list", "--format", "csv"]) == 0
    assert "zeno_sweep" in capsys.readouterr().out
    assert main(["validate", str(write(tmp_path, base(initial_state={"[00]": 2.0})))]) == 1
    assert main(["phi", "swap_dyad", "[102]"]) == 1
    assert main(["run", "ruin_reference", "--trials", "200", "--out", str(tmp_path / "o")]) == 0
    # runtime failure: a huge fixed step trips the norm bound
    bad = write(tmp_path, base(dynamics={"dt": 0.05, "t_max": 1.0, "lambda": 1000.0, "integrator": "euler"}), "rt.json")
    assert main(["collapse", str(bad)]) == 2
