import json

import numpy as np

from qlin import scenarios as sc
from qlin.cli import main
from qlin.serialize import model_from_dict, model_to_dict, system_from_dict, system_to_dict


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_scenario_emits_reference_matrices(capsys):
    code, out, _ = run_cli(capsys, "scenario", "michelson")
    assert code == 0
    sys_back = system_from_dict(json.loads(out))
    ref = sc.michelson()
    assert np.allclose(sys_back.G, ref.G)
    assert np.allclose(sys_back.C, ref.C)


def test_scenario_param_override(capsys):
    code, out, _ = run_cli(capsys, "scenario", "two_port_cavity",
                           "--param", "kappa1=2.0")
    assert code == 0
    sys_back = system_from_dict(json.loads(out))
    assert np.allclose(sys_back.A, -3.0 * np.eye(2))


def test_scenario_unknown_name(capsys):
    code, _, err = run_cli(capsys, "scenario", "not_a_scenario")
    assert code == 2
    assert "available" in err


def test_analyze_memory_reports_dfs(tmp_path, capsys):
    path = write_json(tmp_path, "mem.json", system_to_dict(sc.lambda_memory(1.0, 0.5, 1.0)))
    code, out, _ = run_cli(capsys, "analyze", path, "--goal", "dfs")
    assert code == 0
    report = json.loads(out)
    verdict = report["verdicts"][0]
    assert verdict["goal"] == "DFS"
    assert verdict["achieved"] is True
    assert len(verdict["witnesses"]) == 2
    assert report["provenance"]["tool_version"]
    assert "residual_base" in report["provenance"]["tolerances"]


def test_analyze_uncoupled_system_trivial_verdicts(tmp_path, capsys):
    sys_json = {
        "modes": 1,
        "G": [[1.0, 0.0], [0.0, 1.0]],
        "C": [[0.0, 0.0], [0.0, 0.0]],
        "channels": [{"label": "W", "role": "environment"}],
    }
    path = write_json(tmp_path, "sys.json", sys_json)
    code, out, _ = run_cli(capsys, "analyze", path, "--goal", "all",
                           "--ba-port", "W.Q", "--output-port", "W.out.P")
    assert code == 0
    report = json.loads(out)
    by_goal = {v["goal"]: v for v in report["verdicts"]}
    assert by_goal["BAE"]["achieved"] is True      # no back-action path at all
    assert by_goal["DFS"]["achieved"] is True      # everything is decoupled
    assert by_goal["QND"]["achieved"] is False     # nothing shows in the output
    assert all(v["method_agreement"] for v in report["verdicts"])


def test_analyze_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run_cli(capsys, "analyze", str(path))
    assert code == 2
    assert "error" in err


def test_analyze_bae_requires_ports(tmp_path, capsys):
    path = write_json(tmp_path, "m.json", system_to_dict(sc.michelson()))
    code, _, err = run_cli(capsys, "analyze", path, "--goal", "bae")
    assert code == 2
    assert "ba-port" in err


def test_closedloop_cf2_matches_reference(tmp_path, capsys):
    plant = write_json(tmp_path, "plant.json", system_to_dict(sc.michelson()))
    ctrl_obj = sc.michelson_cf_controller(sc.MichelsonParams())
    ctrl = write_json(tmp_path, "ctrl.json", {
        "scheme": "cf2",
        "G_K": ctrl_obj.G_K.tolist(),
        "C_K": ctrl_obj.C_K.tolist(),
        "S": ctrl_obj.S.tolist(),
    })
    code, out, _ = run_cli(capsys, "closedloop", plant, ctrl)
    assert code == 0
    loop = system_from_dict(json.loads(out))
    ref = sc.michelson_cf_loop()
    assert np.allclose(loop.A, ref.A)
    assert np.allclose(loop.C, ref.C)
    assert np.allclose(loop.force, ref.force)


def test_closedloop_zero_mf1_echoes_plant(tmp_path, capsys):
    plant_sys = sc.optomech_reduced()
    plant = write_json(tmp_path, "plant.json", system_to_dict(plant_sys))
    ctrl = write_json(tmp_path, "ctrl.json", {
        "scheme": "mf1", "A_K": [], "B_K": [], "C_K": [[], []], "measure": "P"})
    code, out, _ = run_cli(capsys, "closedloop", plant, ctrl)
    assert code == 0
    got = model_from_dict(json.loads(out))
    from qlin import homodyne_split

    ref = plant_sys.to_state_space(homodyne_split(1, "P"))
    assert np.allclose(got.A, ref.A)
    assert np.allclose(got.B, ref.B)
    assert np.allclose(got.C, ref.C)
    assert np.allclose(got.D, ref.D)


def test_closedloop_scheme_mismatch(tmp_path, capsys):
    plant = write_json(tmp_path, "plant.json", system_to_dict(sc.michelson()))
    ctrl = write_json(tmp_path, "ctrl.json", {"scheme": "cf2", "G_K": [[0, 0], [0, 0]],
                                              "C_K": [[0, 0], [0, 0]]})
    code, _, err = run_cli(capsys, "closedloop", plant, ctrl, "--scheme", "mf1")
    assert code == 2
    assert "contradicts" in err


def test_closedloop_direct(tmp_path, capsys):
    kappa = 1.0
    plant_json = {
        "modes": 1,
        "G": [[0.0, -kappa / 2], [-kappa / 2, 0.0]],
        "C": [[np.sqrt(kappa), 0.0], [0.0, np.sqrt(kappa)]],
        "channels": [{"label": "W", "role": "feedback"}],
    }
    plant = write_json(tmp_path, "plant.json", plant_json)
    ctrl = write_json(tmp_path, "ctrl.json", {"scheme": "direct", "tau": 0.0})
    code, out, _ = run_cli(capsys, "closedloop", plant, ctrl)
    assert code == 0
    model = model_from_dict(json.loads(out))
    assert model.nstates == 2


def test_spectrum_basic_and_single_point(tmp_path, capsys):
    path = write_json(tmp_path, "m.json", system_to_dict(sc.michelson()))
    code, out, _ = run_cli(capsys, "spectrum", path, "--output", "W2.out.P",
                           "--omega-min", "0.1", "--omega-max", "10", "--points", "5",
                           "--gw-normalize", "1,1", "--sql", "1,1")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "omega,S,S_sql"
    assert len(lines) == 6

    code, out, _ = run_cli(capsys, "spectrum", path, "--output", "W2.out.P",
                           "--omega-min", "1", "--omega-max", "1", "--points", "1")
    assert code == 0
    assert len(out.strip().split("\n")) == 2


def test_spectrum_rejects_zero_omega(tmp_path, capsys):
    path = write_json(tmp_path, "m.json", system_to_dict(sc.michelson()))
    code, _, err = run_cli(capsys, "spectrum", path, "--output", "W2.out.P",
                           "--omega-min", "0", "--omega-max", "1")
    assert code == 2


def test_spectrum_squeezed_cf_michelson_below_sql(tmp_path, capsys):
    path = write_json(tmp_path, "cf.json", system_to_dict(sc.michelson_cf_loop()))
    code, out, _ = run_cli(capsys, "spectrum", path, "--output", "W2.out.P",
                           "--omega-min", "0.5", "--omega-max", "10", "--points", "20",
                           "--squeeze", "W2.P:2", "--gw-normalize", "1,1",
                           "--sql", "1,1")
    assert code == 0
    rows = [line.split(",") for line in out.strip().split("\n")[1:]]
    for _, s, ref in rows:
        assert float(s) < float(ref)


def test_nogo_cli(tmp_path, capsys):
    path = write_json(tmp_path, "plant.json", system_to_dict(sc.optomech_reduced()))
    code, out, _ = run_cli(capsys, "nogo", path, "--goal", "bae", "--scheme", "mf1",
                           "--trials", "25", "--seed", "1")
    assert code == 0
    report = json.loads(out)
    assert report["violations"] == 0
    assert report["theorem"] == 1
    assert report["trials"] == 25

    code, out, _ = run_cli(capsys, "nogo", path, "--goal", "bae", "--scheme", "mf1",
                           "--trials", "0", "--seed", "1")
    assert code == 0
    assert json.loads(out)["violations"] == 0


def test_nogo_cli_hypothesis_violation(tmp_path, capsys):
    path = write_json(tmp_path, "loop.json", system_to_dict(sc.tsang_caves_loop()))
    code, _, err = run_cli(capsys, "nogo", path, "--goal", "bae", "--scheme", "mf1",
                           "--trials", "5", "--seed", "1")
    assert code == 2
    assert "hypothesis" in err


def test_emitted_systems_reingest(capsys):
    for name in sc.SCENARIOS:
        code, out, _ = run_cli(capsys, "scenario", name)
        assert code == 0
        sys_back = system_from_dict(json.loads(out))
        assert sys_back.n >= 1


def test_qlin_tol_env(tmp_path, capsys, monkeypatch):
    path = write_json(tmp_path, "m.json", system_to_dict(sc.lambda_memory()))
    monkeypatch.setenv("QLIN_TOL", "1e-7")
    code, out, _ = run_cli(capsys, "analyze", path, "--goal", "dfs")
    assert code == 0
    assert json.loads(out)["provenance"]["tolerances"]["residual_base"] == 1e-7


def test_model_json_roundtrip():
    model = sc.michelson_cf_loop().to_state_space()
    back = model_from_dict(model_to_dict(model))
    assert np.array_equal(back.A, model.A)
    assert np.array_equal(back.D, model.D)
    assert back.inputs.names == model.inputs.names
    assert back.outputs.names == model.outputs.names
