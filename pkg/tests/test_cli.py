import json

import pytest

from cprglove.cli import main

SCRIPT = {
    "quiet_s": 11.0,
    "stages": [
        {"kind": "free", "cpm": 110.0, "count": 5, "force_range_n": [150.0, 250.0]},
        {"kind": "free", "cpm": 110.0, "count": 5, "force_range_n": [350.0, 405.0]},
        {"kind": "free", "cpm": 110.0, "count": 5, "force_range_n": [450.0, 550.0]},
        {"kind": "pose_series", "pose": "correct", "count": 3},
        {"kind": "pose_series", "pose": "left_skewed", "count": 3},
        {"kind": "pose_series", "pose": "right_skewed", "count": 3},
        {"kind": "pose_series", "pose": "finger_release", "count": 3},
    ],
}

EVAL_SCRIPT = {
    "quiet_s": 2.0,
    "stages": [
        {"kind": "free", "cpm": 110.0, "count": 10, "force_range_n": [350.0, 405.0]},
    ],
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    script = root / "script.json"
    script.write_text(json.dumps(SCRIPT))
    assert main(["--seed", "7", "simulate", "--script", str(script),
                 "--out", str(root / "calib.jsonl")]) == 0
    assert main(["calibrate", "--in", str(root / "calib.jsonl"),
                 "--subject", "s1", "--weight-kg", "70",
                 "--out", str(root / "models")]) == 0
    return root


def test_simulate_writes_log(workdir):
    lines = (workdir / "calib.jsonl").read_text().splitlines()
    kinds = {json.loads(l)["k"] for l in lines}
    assert {"meta", "frame", "force", "pose"} <= kinds


def test_calibrate_writes_bundles(workdir):
    mdir = workdir / "models"
    for name in ("force.cprmodel.json", "pose.cprmodel.json", "calibration.json"):
        assert (mdir / name).exists()
    calib = json.loads((mdir / "calibration.json").read_text())
    assert calib["prominence"] > 0
    assert len(calib["baseline_palm"]) == 13


def test_run_replay_and_report(workdir, capsys):
    script = workdir / "eval.json"
    script.write_text(json.dumps(EVAL_SCRIPT))
    assert main(["--seed", "8", "simulate", "--script", str(script),
                 "--out", str(workdir / "eval.jsonl")]) == 0
    capsys.readouterr()
    assert main(["run", "--replay", str(workdir / "eval.jsonl"),
                 "--models", str(workdir / "models"),
                 "--subject", "s1", "--weight-kg", "70",
                 "--report", str(workdir / "report.json"),
                 "--log-out", str(workdir / "run.jsonl")]) == 0
    out = capsys.readouterr().out
    assert "fraction correct" in out
    report = json.loads((workdir / "report.json").read_text())
    assert report["compressions"] == 10
    assert "latency" in report
    # summarize the emitted run log
    assert main(["report", "--in", str(workdir / "run.jsonl"), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["compressions"] == report["compressions"]


def test_train_alias(workdir, tmp_path):
    assert main(["train", "--method", "ridge",
                 "--in", str(workdir / "calib.jsonl"),
                 "--subject", "s1", "--weight-kg", "70",
                 "--out", str(tmp_path / "models-ridge")]) == 0
    assert (tmp_path / "models-ridge" / "force.cprmodel.json").exists()


def test_haptic_test_lists_all_states(capsys):
    assert main(["haptic-test"]) == 0
    out = capsys.readouterr().out
    assert sum("pulse(s)" in line for line in out.splitlines()) == 36


def test_characterize_command(tmp_path, capsys):
    rows = ["cycle,force_N,c0"]
    for cycle in range(25):
        for i, f in enumerate((0.0, 50.0, 100.0, 50.0, 0.0)):
            rows.append(f"{cycle},{f},{f + (2.0 if i == 3 else 0.0)}")
    trace = tmp_path / "trace.csv"
    trace.write_text("\n".join(rows) + "\n")
    assert main(["characterize", "--in", str(trace)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cycles"] == 25 and out["hysteresis_pct"] > 0


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])  # missing required --script/--out
    assert exc.value.code == 1


def test_missing_file_is_data_error(tmp_path):
    assert main(["report", "--in", str(tmp_path / "nope.jsonl")]) == 2


def test_corrupt_log_is_data_error(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    assert main(["report", "--in", str(bad)]) == 2
