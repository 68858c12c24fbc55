from __future__ import annotations

import json
import subprocess
import sys

import pytest

from selfsim.cli import main


def run(capsys, *args):
    status = main(list(args))
    out = capsys.readouterr().out
    return status, json.loads(out)


def test_check(capsys):
    status, rep = run(capsys, "check", "grigorchuk.grp", "--depth", "3")
    assert status == 0
    assert rep["contracting"] is True and rep["nucleus_size"] == 5
    assert rep["level_transitive"] == {"1": True, "2": True, "3": True}
    assert rep["recurrent"]["certified"]


def test_portrait_identity(capsys):
    status, rep = run(capsys, "portrait", "grigorchuk.grp", "--element", "1", "--depth", "2")
    assert status == 0
    assert set(rep["labels"].values()) == {"()"}


def test_orbit_and_verify(capsys, tmp_path):
    out = tmp_path / "orbit.json"
    assert main(["orbit", "grigorchuk.grp", "1(1)", "0(1)", "-o", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["same_orbit"] and rep["certificate"]["cycle"]
    status, ver = run(capsys, "verify", "grigorchuk.grp", str(out))
    assert status == 0 and ver["valid"]


def test_orbit_false(capsys):
    status, rep = run(capsys, "orbit", "grigorchuk.grp", "(0)", "(1)")
    assert status == 1 and rep["same_orbit"] is False


def test_accepts_and_verify(capsys, tmp_path):
    out = tmp_path / "acc.json"
    assert main(["accepts", "grigorchuk.grp", "--element", "abacd", "-o", str(out)]) == 0
    status, ver = run(capsys, "verify", "grigorchuk.grp", str(out))
    assert status == 0 and ver["valid"]
    data = json.loads(out.read_text())
    data["certificate"]["element"] = "abacb"
    out.write_text(json.dumps(data))
    status, ver = run(capsys, "verify", "grigorchuk.grp", str(out))
    assert status == 1 and not ver["valid"]


def test_branch(capsys):
    status, rep = run(capsys, "branch", "grigorchuk.grp", "--level", "4")
    assert status == 0 and rep["Q_order"] == 16
    status, rep = run(capsys, "branch", "adding.grp", "--level", "3")
    assert status == 1 and rep["refuting_level"] == 3


def test_subgroup_and_equal(capsys, tmp_path):
    status, rep = run(capsys, "equal", "grigorchuk.grp", "--left", "a,b,c,d", "--right", "a,b,c,ab")
    assert status == 0 and rep["result"]
    out = tmp_path / "sub.json"
    assert main(["subgroup", "grigorchuk.grp", "--sub", "ab,ac", "-o", str(out)]) == 0
    status, ver = run(capsys, "verify", "grigorchuk.grp", str(out))
    assert status == 0 and ver["valid"]


def test_hdim(capsys):
    status, rep = run(capsys, "hdim", "grigorchuk.grp", "--max-level", "6", "--fit", "3,4", "--verify", "2")
    assert status == 0
    assert rep["report"]["limit"] == "5/8"
    status, rep = run(capsys, "hdim", "identity.grp", "--full", "2")
    assert status == 0 and rep["report"]["limit"] == "1"


def test_hdim_rejected_fit(capsys):
    status, rep = run(capsys, "hdim", "grigorchuk.grp", "--fit", "1,2", "--max-level", "4")
    assert status == 1 and "fit_rejected" in rep


def test_build_automaton(capsys):
    status, rep = run(capsys, "build-automaton", "grigorchuk.grp", "--contracting")
    assert status == 0 and len(rep["automaton"]["states"]) == 21


def test_ray_orbit(capsys):
    status, rep = run(capsys, "ray-orbit", "grigorchuk.grp", "(1)")
    assert status == 0 and rep["transitions"]


def test_budget_is_unknown(capsys):
    status, rep = run(capsys, "check", "grigorchuk.grp", "--bound", "2")
    assert status == 0 and rep["contracting"] == "unknown"
    status, rep = run(capsys, "orbit", "grigorchuk.grp", "(1)", "(0)", "--bound", "2")
    assert status == 2


@pytest.mark.parametrize(
    "args",
    [
        ["check", "no-such-group.grp"],
        ["orbit", "grigorchuk.grp", "1(1", "0(1)"],
        ["accepts", "grigorchuk.grp", "--element", "xyz"],
        ["portrait", "grigorchuk.grp", "--element", "a", "--depth", "two"],
        ["check", "grigorchuk.grp", "--no-such-flag"],
    ],
)
def test_input_errors(args, capsys):
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(args))
    assert exc.value.code == 3


def test_bad_group_file(tmp_path, capsys):
    p = tmp_path / "bad.grp"
    p.write_text("alphabet 1\n")
    status, rep = run(capsys, "check", str(p))
    assert status == 3


def test_deterministic_output():
    cmd = [sys.executable, "-m", "selfsim", "orbit", "grigorchuk.grp", "1(1)", "0(1)"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
