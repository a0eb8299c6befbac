from __future__ import annotations

import hashlib
import json
from pathlib import Path

import pytest

from rvoskit.cli import build_parser, main

def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


def test_sample_uniform_exact_output(capsys):
    assert run_cli("sample", "--frames", 100, "--kfs-strategy", "uniform",
                   "--kfs-number", 10) == 0
    assert capsys.readouterr().out.strip() == "[0,11,22,33,44,55,66,77,88,99]"


def test_sample_head_continue_budget_beyond_length(capsys):
    assert run_cli("sample", "--frames", 3, "--kfs-strategy", "head-continue",
                   "--kfs-number", 40) == 0
    assert capsys.readouterr().out.strip() == "[0,1,2]"


def test_invalid_strategy_is_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        run_cli("sample", "--frames", 10, "--kfs-strategy", "clairvoyant")
    assert excinfo.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_synth_is_deterministic(tmp_path, capsys):
    def digest(root: Path) -> str:
        h = hashlib.sha256()
        for path in sorted(root.rglob("*")):
            if path.is_file():
                h.update(str(path.relative_to(root)).encode())
                h.update(path.read_bytes())
        return h.hexdigest()

    for name in ("a", "b"):
        assert run_cli("synth", "--out", tmp_path / name, "--videos", 2,
                       "--frames", 3, "--seed", 7) == 0
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


def test_synth_then_load_and_oracle_round_trip(tmp_path, capsys):
    root = tmp_path / "ds"
    assert run_cli("synth", "--out", root, "--videos", 2, "--expressions-per-video", 2,
                   "--frames", 4, "--seed", 3) == 0
    out = tmp_path / "pred"
    assert run_cli("run", "--dataset", root, "--out", out, "--segmenter", "oracle",
                   "--kfs-strategy", "uniform", "--kfs-number", 999) == 0
    assert run_cli("eval", "--pred", out, "--dataset", root) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "J&F: 100.00" in lines


def test_eval_identical_trees_scores_hundred(tmp_path, capsys):
    root = tmp_path / "ds"
    run_cli("synth", "--out", root, "--videos", 1, "--frames", 3, "--seed", 5)
    assert run_cli("eval", "--pred", root, "--dataset", root) == 0
    out = capsys.readouterr().out
    assert "J&F: 100.00" in out


def test_run_gated_expression_scores_zero(tmp_path, capsys):
    root = tmp_path / "ds"
    run_cli("synth", "--out", root, "--videos", 1, "--expressions-per-video", 2,
            "--absent-per-video", 1, "--frames", 3, "--seed", 2)
    out = tmp_path / "pred"
    assert run_cli("run", "--dataset", root, "--out", out, "--segmenter", "oracle",
                   "--vlc", "mock", "--kfs-number", 999) == 0
    report_path = tmp_path / "report.json"
    assert run_cli("eval", "--pred", out, "--dataset", root, "--out", report_path) == 0
    report = json.loads(report_path.read_text())
    scores = report["per_expression"]
    # one expression gated to zero, one oracle-perfect
    values = sorted(entry["J"] for entry in scores.values())
    assert values == [0.0, 100.0]


def test_eval_missing_predictions_exit_code(tmp_path, capsys):
    root = tmp_path / "ds"
    run_cli("synth", "--out", root, "--videos", 1, "--frames", 3, "--seed", 1)
    empty = tmp_path / "none"
    empty.mkdir()
    assert run_cli("eval", "--pred", empty, "--dataset", root) == 1
    assert run_cli("eval", "--pred", empty, "--dataset", root,
                   "--score-missing-zero") == 1
    assert "J&F: 0.00" in capsys.readouterr().out


def test_eval_bound_th_override_changes_f(tmp_path, capsys):
    root = tmp_path / "ds"
    # moving object: propagating a single key frame leaves most frames offset
    run_cli("synth", "--out", root, "--videos", 2, "--frames", 6, "--seed", 8)
    out = tmp_path / "pred"
    run_cli("run", "--dataset", root, "--out", out, "--segmenter", "oracle",
            "--kfs-strategy", "head-continue", "--kfs-number", 1)
    strict_report = tmp_path / "strict.json"
    loose_report = tmp_path / "loose.json"
    run_cli("eval", "--pred", out, "--dataset", root, "--bound-th", 0,
            "--out", strict_report)
    run_cli("eval", "--pred", out, "--dataset", root, "--bound-th", 500,
            "--out", loose_report)
    strict = json.loads(strict_report.read_text())["aggregate"]
    loose = json.loads(loose_report.read_text())["aggregate"]
    assert loose["F"] > strict["F"]
    assert loose["J"] == strict["J"]


def test_check_command_verdicts(tmp_path, capsys):
    root = tmp_path / "ds"
    run_cli("synth", "--out", root, "--videos", 1, "--expressions-per-video", 2,
            "--absent-per-video", 1, "--frames", 3, "--seed", 4)
    capsys.readouterr()
    assert run_cli("check", "--dataset", root, "--video", "video_000",
                   "--expression", "00000", "--vlc", "mock") == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["matches"] is True
    assert run_cli("check", "--dataset", root, "--video", "video_000",
                   "--expression", "00001", "--vlc", "mock") == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["matches"] is False
    assert verdict["backend_id"] == "mock"


def test_ablate_renders_grid_table(tmp_path, capsys):
    root = tmp_path / "ds"
    run_cli("synth", "--out", root, "--videos", 2, "--frames", 3, "--seed", 6)
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"rows": [
        {"vlc": False, "strategy": "head-continue", "number": 40},
        {"vlc": False, "strategy": "uniform", "number": 10},
        {"vlc": True, "strategy": "hybrid", "number": 40},
    ]}))
    capsys.readouterr()
    out = tmp_path / "ablate"
    assert run_cli("ablate", "--dataset", root, "--grid", grid, "--out", out,
                   "--segmenter", "oracle", "--vlc", "mock") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["VLC", "KFS", "Number", "J&F"]
    assert len(lines) == 4
    assert (out / "vlc_hybrid_040" / "report.json").is_file()


def test_config_file_supplies_defaults(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frames": 100, "kfs_strategy": "uniform",
                               "kfs_number": 10}))
    assert run_cli("sample", "--config", cfg) == 0
    assert capsys.readouterr().out.strip() == "[0,11,22,33,44,55,66,77,88,99]"


def test_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frames": 100, "kfs_strategy": "uniform",
                               "kfs_number": 10}))
    assert run_cli("sample", "--config", cfg, "--kfs-number", "3") == 0
    assert capsys.readouterr().out.strip() == "[0,50,99]"


def test_toml_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('frames = 100\nkfs_strategy = "uniform"\nkfs_number = 10\n')
    assert run_cli("sample", "--config", cfg) == 0
    assert capsys.readouterr().out.strip() == "[0,11,22,33,44,55,66,77,88,99]"


def test_toml_grid_spec(tmp_path, capsys):
    root = tmp_path / "ds"
    run_cli("synth", "--out", root, "--videos", 1, "--frames", 3, "--seed", 13)
    grid = tmp_path / "grid.toml"
    grid.write_text(
        '[[rows]]\nvlc = false\nstrategy = "uniform"\nnumber = 40\n'
        '[[rows]]\nvlc = true\nstrategy = "head-continue"\nnumber = 5\n'
    )
    capsys.readouterr()
    assert run_cli("ablate", "--dataset", root, "--grid", grid,
                   "--out", tmp_path / "grid_out", "--segmenter", "oracle",
                   "--vlc", "mock") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert lines[1].split()[:3] == ["off", "uniform", "40"]


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"framez": 100}))
    assert run_cli("sample", "--config", cfg, "--frames", "10") == 2


def test_dump_config_round_trips(tmp_path, capsys):
    dumped = tmp_path / "effective.json"
    assert run_cli("sample", "--frames", 10, "--kfs-strategy", "uniform",
                   "--kfs-number", 4, "--dump-config", dumped) == 0
    first = capsys.readouterr().out
    payload = json.loads(dumped.read_text())
    assert payload["command"] == "sample"
    payload.pop("command")
    rerun_cfg = tmp_path / "rerun.json"
    rerun_cfg.write_text(json.dumps(payload))
    assert run_cli("sample", "--config", rerun_cfg) == 0
    assert capsys.readouterr().out == first


def test_help_enumerates_every_flag():
    parser = build_parser()
    sub_actions = next(a for a in parser._actions
                       if isinstance(a, type(parser._subparsers._group_actions[0])))
    helps = []
    for sub in sub_actions.choices.values():
        helps.append(sub.format_help())
    combined = "\n".join(helps)
    for flag in ["--kfs-strategy", "--kfs-number", "--kfs-head-fraction", "--vlc",
                 "--vlc-strict", "--strict", "--segmenter", "--pool", "--bound-th",
                 "--score-missing-zero", "--config", "--log-level", "--seed",
                 "--grid", "--dump-config", "--worker-timeout", "--frames"]:
        assert flag in combined, flag
