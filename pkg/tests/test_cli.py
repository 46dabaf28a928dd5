import json

import pytest

from routedmpst.cli import main

from corpus import PROTOCOL_DIR

TRAVEL = str(PROTOCOL_DIR / "TravelAgency.scr")
PINGPONG = str(PROTOCOL_DIR / "PingPong.scr")
GAME = str(PROTOCOL_DIR / "Game.scr")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_pretty_prints_module(capsys, tmp_path):
    code, out, err = run(capsys, "parse", TRAVEL)
    assert code == 0
    assert "global protocol TravelAgency(role A, role B, role S)" in out
    # the output reparses to the same module
    again = tmp_path / "again.scr"
    again.write_text(out)
    code2, out2, _ = run(capsys, "parse", str(again))
    assert code2 == 0 and out2 == out


def test_parse_empty_module(capsys, tmp_path):
    empty = tmp_path / "empty.scr"
    empty.write_text("// nothing here\n")
    code, out, err = run(capsys, "parse", str(empty))
    assert code == 0 and out == ""


def test_parse_syntax_error_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.scr"
    bad.write_text("global protocol P(role A, role B) { M() from A; }")
    code, out, err = run(capsys, "parse", str(bad))
    assert code == 1
    assert "expected" in err


def test_missing_file_is_usage_error(capsys):
    code, out, err = run(capsys, "parse", "no/such/file.scr")
    assert code == 2


def test_project_prints_local_type(capsys):
    code, out, _ = run(capsys, "project", TRAVEL, "TravelAgency", "A")
    assert code == 0
    assert out.startswith("rec t0 . B?Suggest(string)")


def test_check_wf_and_router(capsys):
    code, out, _ = run(capsys, "check", TRAVEL, "TravelAgency")
    assert code == 0 and "wf=ok" in out
    code, out, err = run(capsys, "check", TRAVEL, "TravelAgency", "--router", "S")
    assert code == 1 and "wf^S=fail" in out and "centroid" in err
    code, out, _ = run(capsys, "check", PINGPONG, "PingPong", "--router", "S")
    assert code == 0 and "wf^S=ok" in out


def test_encode_prints_routed_type(capsys):
    code, out, _ = run(capsys, "encode", TRAVEL, "TravelAgency", "--router", "S")
    assert code == 0
    assert "B->A via S" in out


def test_traces_listing(capsys):
    code, out, _ = run(capsys, "traces", PINGPONG, "PingPong", "--depth", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert "<empty>" in lines[0]
    assert any("C->S!PING" in line for line in lines)
    code, out_cfg, _ = run(capsys, "traces", PINGPONG, "PingPong",
                           "--depth", "2", "--config")
    assert code == 0 and out_cfg == out


def test_verify_reports_and_exit_code(capsys):
    code, out, _ = run(capsys, "verify", TRAVEL, "TravelAgency",
                       "--router", "S", "--depth", "8")
    assert code == 0
    assert out.count("verdict=pass") == 4
    assert "check=trace_equivalence" in out
    assert "check=deadlock_freedom" in out
    assert "check=encoding_bisim" in out
    assert "states=" in out


def test_verify_fails_on_unprojectable_protocol(capsys, tmp_path):
    bad = tmp_path / "bad.scr"
    bad.write_text("""
global protocol Bad(role A, role B, role C) {
  choice at A { L() from A to B; X() from C to A; }
  or { R() from A to B; Y() from A to C; }
}
""")
    code, out, err = run(capsys, "verify", str(bad), "Bad", "--router", "A")
    assert code == 1


def test_efsm_dot_and_ir_outputs(capsys, tmp_path):
    dot = tmp_path / "a.dot"
    ir = tmp_path / "a.json"
    code, out, _ = run(capsys, "efsm", TRAVEL, "TravelAgency", "A",
                       "--dot", str(dot), "--ir", str(ir))
    assert code == 0
    text = dot.read_text()
    assert text.count("[shape=circle]") == 8
    assert text.count("[shape=doublecircle]") == 1
    payload = json.loads(ir.read_text())
    assert len(payload["states"]) == 9 and len(payload["transitions"]) == 10


def test_gen_writes_under_output_dir_only(capsys, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "gen", TRAVEL, "TravelAgency", "S",
                       "--flavor", "server", "-o", str(out_dir))
    assert code == 0
    produced = sorted(p.name for p in (out_dir / "TravelAgency" / "S").iterdir())
    assert produced == ["factory.ts", "handler.ts", "message.ts", "state.ts"]


def test_simulate_round_trips_and_conformance(capsys):
    code, out, _ = run(capsys, "simulate", PINGPONG, "PingPong",
                       "--router", "S", "--rounds", "3", "--seed", "1")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[-1] == "# conformance=ok"
    assert sum(1 for line in lines if ",data," in line) == 6  # 3 pings + 2 pongs + bye


def test_simulate_with_cancellation(capsys):
    code, out, _ = run(capsys, "simulate", TRAVEL, "TravelAgency",
                       "--router", "S", "--cancel", "A@3")
    assert code == 0
    assert "# cancelled by A notified B,S" in out


def test_usage_error_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", PINGPONG, "PingPong"])  # missing --router
    assert exc.value.code == 2
