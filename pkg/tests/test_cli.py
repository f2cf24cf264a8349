import json

import numpy as np
import pytest

from loccrounds.cli import dumps, main
from loccrounds.qalg import StateVector
from loccrounds.states import StateFamily, family


@pytest.fixture
def files(tmp_path):
    f6 = tmp_path / "f6.json"
    assert main(["generate", "--d", "6", "--out", str(f6)]) == 0
    return tmp_path, f6


def test_dumps_uses_17_significant_digits():
    assert dumps({"x": 0.1, "n": 3, "y": 1.0}) == '{\n  "x": 0.10000000000000001,\n  "n": 3,\n  "y": 1.0\n}\n'


def test_generate_writes_family(files, capsys):
    _, f6 = files
    fam = StateFamily.load(f6)
    assert len(fam) == 36 and np.allclose(fam.matrix(), family(6).matrix())


@pytest.mark.parametrize("d,n", [(2, 4), (8, 64)])
def test_generate_json_summary(d, n, capsys):
    assert main(["generate", "--d", str(d), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["states"] == n and out["is_basis"] is True


@pytest.mark.parametrize("party,dim,trivial", [("alice", 2, False), ("bob", 1, True)])
def test_opm_command(files, capsys, party, dim, trivial):
    _, f6 = files
    capsys.readouterr()
    assert main(["opm", str(f6), "--party", party, "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["dim"] == dim and out["trivial"] is trivial


def test_bound_command_writes_trace(files, capsys):
    tmp, f6 = files
    capsys.readouterr()
    assert main(["bound", str(f6), "--out", str(tmp / "t.json"), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["lower_bound"] == 10
    trace = json.loads((tmp / "t.json").read_text())
    assert trace["rounds"] == 10 and trace["root"]["projector_ranks"] == [1, 5]


@pytest.mark.parametrize("kind,expected", [("one-ebit", 6), ("two-ebit", 4)])
def test_build_then_run(files, capsys, kind, expected):
    tmp, f6 = files
    proto = tmp / f"{kind}.locc"
    assert main(["build", kind, "--d", "6", "--out", str(proto)]) == 0
    capsys.readouterr()
    assert main(["run", str(proto), str(f6)]) == 0
    first = capsys.readouterr().out
    report = json.loads(first)
    assert report["max_rounds"] == expected
    assert report["success_probability"] == pytest.approx(1.0, abs=1e-9)
    assert main(["run", str(proto), str(f6)]) == 0
    assert capsys.readouterr().out == first


def test_run_fails_on_broken_family(files, capsys):
    tmp, f6 = files
    proto = tmp / "one.locc"
    main(["build", "one-ebit", "--d", "6", "--out", str(proto)])
    fam = StateFamily.load(f6)
    v = fam.by_label(5).vector.amplitudes + 0.2 * fam.by_label(6).vector.amplitudes
    fam.replace(5, StateVector(fam.layout, v)).save(tmp / "bad.json")
    assert main(["run", str(proto), str(tmp / "bad.json")]) == 1


def test_run_exit_codes_for_parse_and_layout_errors(files, capsys):
    tmp, f6 = files
    bad = tmp / "bad.locc"
    bad.write_text('protocol "x" { registers { A: alice dim 2; } round 1 by alice { }')
    assert main(["run", str(bad), str(f6)]) == 3
    assert "1:" in capsys.readouterr().err
    proto = tmp / "plain.locc"
    main(["build", "plain", "--d", "4", "--out", str(proto)])
    assert main(["run", str(proto), str(f6)]) == 2


def test_run_exit_code_for_invalid_protocol(files):
    tmp, f6 = files
    p = tmp / "inc.locc"
    p.write_text('protocol "x" { registers { A: alice dim 6; B: bob dim 6; }\n'
                 '  round 1 by alice { outcome A1 = proj[A:0] => identify 1; } }\n')
    assert main(["run", str(p), str(f6)]) == 2


def test_check_and_parse_commands(files, capsys):
    tmp, f6 = files
    proto = tmp / "plain.locc"
    main(["build", "plain", "--d", "6", "--out", str(proto)])
    capsys.readouterr()
    assert main(["check", str(proto), str(f6), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] and out["warnings"] == [] and out["rounds"] == 10
    assert main(["parse", str(proto)]) == 0
    assert capsys.readouterr().out == proto.read_text()
    assert main(["check", str(f6)]) == 0


def test_seed_env_override(files, capsys, monkeypatch):
    tmp, f6 = files
    monkeypatch.setenv("LOCC_SEED", "9")
    capsys.readouterr()
    main(["bound", "--d", "2", "--json"])
    assert json.loads(capsys.readouterr().out)["seed"] == 9


def test_odd_d_is_rejected(capsys):
    assert main(["generate", "--d", "5"]) == 2
    assert "even" in capsys.readouterr().err
