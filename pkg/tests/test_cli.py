from __future__ import annotations

import json
import os
import stat

import pytest

from retreet.cli import main


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("RETREET_SOLVER_BIN", raising=False)
    monkeypatch.delenv("RETREET_SMT_BIN", raising=False)


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def _json(capsys, *argv):
    code, out = _run(capsys, *argv, "--format", "json")
    return code, json.loads(out.out)


def test_bounded_race_on_the_running_example(capsys):
    code, out = _run(capsys, "race", "odd_even", "--backend", "bounded")
    assert code == 3
    assert "no race on trees of height <= 3" in out.out


def test_bounded_race_finds_parallel_writes(capsys):
    code, rep = _json(capsys, "race", "par_write", "--backend", "bounded", "--height", "1")
    assert code == 1 and rep["exit_code"] == 1
    assert rep["replay"]["status"] == "confirmed"
    assert rep["config"]["backend"] == "bounded"


def test_invalid_fusion_is_refuted_with_a_witness(capsys, tmp_path):
    code, out = _run(
        capsys, "equiv", "odd_even_seq", "odd_even_fused_bad", "--backend", "bounded", "--witness-out", "w.json"
    )
    assert code == 1
    assert "not equivalent" in out.out
    w = json.loads((tmp_path / "w.json").read_text())
    assert w["kind"] == "conflict"
    code, out = _run(capsys, "replay", "w.json")
    assert code == 0 and out.out.startswith("confirmed")


def test_rejected_program(capsys):
    code, out = _run(capsys, "check", "selfcall")
    assert code == 1
    assert "SelfCall" in out.out


def test_check_accepts_a_valid_program(capsys):
    code, out = _run(capsys, "check", "odd_even")
    assert code == 0


def test_missing_solver_is_a_configuration_error(capsys, tmp_path):
    code, out = _run(capsys, "race", "odd_even")
    assert code == 2 and "no WS2S solver configured" in out.err + out.out
    code, _ = _run(capsys, "race", "odd_even", "--solver-bin", str(tmp_path / "absent"))
    assert code == 2


def test_failing_solver_is_unknown(capsys, tmp_path):
    binary = tmp_path / "broken-mona"
    binary.write_text("#!/bin/sh\necho 'syntax error' >&2\nexit 4\n")
    binary.chmod(binary.stat().st_mode | stat.S_IEXEC)
    code, _ = _run(capsys, "race", "odd_even", "--solver-bin", str(binary), "--workdir", "work")
    assert code == 3
    kept = [f for _, _, files in os.walk("work") for f in files]
    assert "race.mona" in kept and "race.out" in kept


def test_unknown_program_file(capsys):
    code, _ = _run(capsys, "check", "no_such_program")
    assert code == 2


def test_oracle_commands(capsys):
    code, out = _run(capsys, "oracle-race", "par_write")
    assert code == 1 and "(s0, root) and (s1, root) both access f at root" in out.out
    code, rep = _json(capsys, "oracle-race", "odd_even")
    assert code == 0 and rep["verdict"].startswith("race-free")
    code, _ = _run(capsys, "oracle-equiv", "odd_even_seq", "odd_even_fused")
    assert code == 0
    code, out = _run(capsys, "oracle-equiv", "odd_even_seq", "odd_even_fused_bad")
    assert code == 1 and "outcomes differ" in out.out


def test_bisim_command(capsys):
    code, out = _run(capsys, "bisim", "odd_even_seq", "odd_even_fused")
    assert code == 0
    assert out.out.startswith("accepted (largest consistent)")


def test_blocks_and_pathcond(capsys):
    code, out = _run(capsys, "pathcond", "wp_example", "s0", "s2")
    assert code == 0
    assert out.out.strip() == "PathCond[s0,s2] = v = u.l & !(isNil(u)) & M.p - M.r0 >= -1"
    code, out = _run(capsys, "blocks", "odd_even")
    assert code == 0 and "s10" in out.out
    code, rep = _json(capsys, "blocks", "odd_even")
    assert code == 0 and rep["command"] == "blocks"


def test_encoders_write_formulas(capsys):
    code, out = _run(capsys, "encode-race", "odd_even")
    assert code == 0 and "ws2s;" in out.out
    code, out = _run(capsys, "encode-equiv", "odd_even_seq", "odd_even_fused")
    assert code == 0 and "ws2s;" in out.out


def test_usage_errors(capsys):
    assert _run(capsys, "race")[0] == 2
    assert _run(capsys, "pathcond", "odd_even", "s0", "s99")[0] == 2
