from pathlib import Path

import pytest

from dcmsg.cli import main
from dcmsg.dataset import save_dataset

FIXTURES = Path(__file__).parent / "fixtures"


def test_generate_data_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["generate-data", "--individuals", "30", "--tasks", "4",
            "--seed", "1"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unknown_flag_exit_1(capsys):
    assert main(["generate-data", "--bogus"]) == 1


def test_runtime_failure_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["replay", "--journal", str(bad), "--dataset", str(bad)]) == 2


def test_analyze_fixture_log(tmp_path):
    out = tmp_path / "report"
    rc = main(["analyze", "--export", str(FIXTURES / "five_user_log.csv"),
               "--min-support", "0.7", "--out", str(out)])
    assert rc == 0
    assert (out / "transitions.csv").read_text() == \
        (FIXTURES / "transitions.csv").read_text()
    assert (out / "timelines.csv").exists()
    patterns = (out / "patterns.csv").read_text().splitlines()
    assert patterns[0] == "pattern,length,support"
    assert len(patterns) > 1


def test_replay_round_trip(tmp_path, small_ds):
    from dcmsg.estimation import EstimationOptions
    from dcmsg.modelspec import MNL, ModelSpecification
    from dcmsg.session import GameEngine

    data = tmp_path / "data.csv"
    save_dataset(small_ds, data)
    engine = GameEngine({"default": small_ds},
                        opts=EstimationOptions(draws=250),
                        journal_dir=tmp_path / "journals")
    s = engine.create_session("u")
    engine.perform_da_tool(s, 1)
    mid, _ = engine.request_estimation(s, ModelSpecification(MNL, asc=True))
    engine.submit_report(s, [mid], "done")
    journal = tmp_path / "journals" / f"{s.session_id}.jsonl"
    export = tmp_path / "replayed.csv"
    rc = main(["replay", "--journal", str(journal), "--dataset", str(data),
               "--export", str(export)])
    assert rc == 0
    assert export.read_text() == engine.export_csv(s.session_id)


def test_precompute_fills_repository(tmp_path, small_ds, capsys):
    data = tmp_path / "data.csv"
    save_dataset(small_ds, data)
    rc = main(["precompute", "--dataset", str(data), "--draws", "20",
               "--limit", "1"])
    assert rc == 0
    assert "precomputed 1 specifications" in capsys.readouterr().out
