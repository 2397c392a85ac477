import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from dcmsg.errors import (
    EmptyReport,
    InvalidSpec,
    SessionClosed,
    UnknownAction,
    UnknownDataset,
    UnknownModelId,
)
from dcmsg.estimation import EstimationOptions
from dcmsg.modelspec import LC, MNL, ModelSpecification
from dcmsg.session import (
    DA_TOOLS,
    OI_TOOLS,
    TELEMETRY_COLUMNS,
    GameEngine,
    format_timestamp,
    parse_timestamp,
    replay_journal,
)

FULL = ModelSpecification(MNL, asc=True)
T0 = datetime(2026, 2, 1, 9, 0, tzinfo=timezone.utc)


def ticking_clock(step=30):
    state = {"n": 0}

    def clock():
        state["n"] += 1
        return T0 + timedelta(seconds=step * state["n"])
    return clock


@pytest.fixture
def engine(small_ds):
    return GameEngine({"default": small_ds}, opts=EstimationOptions(draws=30),
                      clock=ticking_clock())


def test_action_code_ranges_disjoint():
    assert set(DA_TOOLS) == set(range(1, 16))
    assert set(OI_TOOLS) == set(range(21, 39))
    assert not set(DA_TOOLS) & set(OI_TOOLS)


def test_timestamp_round_trip():
    ts = datetime(2026, 3, 4, 5, 6, 7, 89000, tzinfo=timezone.utc)
    text = format_timestamp(ts)
    assert text == "2026-03-04T05:06:07.089Z"
    assert parse_timestamp(text) == ts


def test_create_session_unknown_dataset(engine):
    with pytest.raises(UnknownDataset):
        engine.create_session("u", dataset_ref="nope")


def test_free_phase_order(engine):
    s = engine.create_session("u")
    engine.perform_da_tool(s, 1)
    mid, _ = engine.request_estimation(s, FULL)
    engine.perform_oi_tool(s, 22, {"model_id": mid})
    engine.perform_da_tool(s, 4)          # OI back to DA is allowed
    engine.request_estimation(s, ModelSpecification(MNL, asc=False))
    phases = []
    for ev in s.events:
        if 1 <= ev.task_id <= 15:
            phases.append("DA")
        elif 21 <= ev.task_id <= 38:
            phases.append("OI")
        else:
            phases.append("MS")
    assert phases == ["DA", "MS", "OI", "DA", "MS"]


def test_unknown_tool_rejected(engine):
    s = engine.create_session("u")
    with pytest.raises(UnknownAction):
        engine.perform_da_tool(s, 16)
    with pytest.raises(UnknownAction):
        engine.perform_oi_tool(s, 1)


def test_estimation_requires_complete_data(missing_ds):
    engine = GameEngine({"default": missing_ds}, clock=ticking_clock())
    s = engine.create_session("u")
    with pytest.raises(InvalidSpec):
        engine.request_estimation(s, FULL)
    engine.perform_da_tool(s, 8)   # delete missing rows
    mid, res = engine.request_estimation(s, FULL)
    assert res.converged


def test_invalid_spec_rejected_without_telemetry(engine):
    s = engine.create_session("u")
    before = len(s.events)
    with pytest.raises(InvalidSpec):
        engine.request_estimation(s, ModelSpecification(LC, asc=True, n_class=9))
    assert len(s.events) == before


def test_cache_hit_identical_results(engine):
    s = engine.create_session("u")
    m1, r1 = engine.request_estimation(s, FULL)
    m2, r2 = engine.request_estimation(s, FULL)
    assert m1 != m2
    assert s.registry[m2].cached and not s.registry[m1].cached
    assert r1.to_dict() == r2.to_dict()
    assert r1 is r2     # shared repository object


def test_cache_shared_across_sessions(engine):
    a = engine.create_session("u1")
    b = engine.create_session("u2")
    engine.request_estimation(a, FULL)
    _, r = engine.request_estimation(b, FULL)
    assert b.registry[1].cached


def test_cache_respects_working_dataset(missing_ds):
    engine = GameEngine({"default": missing_ds}, clock=ticking_clock())
    a = engine.create_session("u1")
    engine.perform_da_tool(a, 8)            # delete rows
    engine.request_estimation(a, FULL)
    b = engine.create_session("u2")
    engine.perform_da_tool(b, 13, {"statistic": "mean"})   # replace instead
    _, r = engine.request_estimation(b, FULL)
    assert not b.registry[1].cached         # different data, no false hit


def test_misspecified_still_logged(small_ds):
    from dcmsg.dataset import ChoiceDataset
    df = small_ds.df.copy()
    for alt in "ABC":
        df[f"transport_{alt}"] = df[f"stores_{alt}"]
    engine = GameEngine({"default": ChoiceDataset(df=df)},
                        clock=ticking_clock())
    s = engine.create_session("u")
    mid, res = engine.request_estimation(s, FULL)
    assert s.registry[mid].status == "misspecified"
    assert len(s.events) == 1
    with pytest.raises(UnknownModelId):
        engine.submit_report(s, [mid], "broken model")


def test_report_validation(engine):
    s = engine.create_session("u")
    mid, _ = engine.request_estimation(s, FULL)
    with pytest.raises(EmptyReport):
        engine.submit_report(s, [mid], "   ")
    with pytest.raises(UnknownModelId):
        engine.submit_report(s, [99], "text")
    engine.submit_report(s, [mid], "cost dominates")
    assert s.closed and s.report["r_models"] == [mid]
    with pytest.raises(SessionClosed):
        engine.perform_da_tool(s, 1)
    with pytest.raises(SessionClosed):
        engine.submit_report(s, [mid], "again")


def test_telemetry_schema_and_order(engine):
    s = engine.create_session("u")
    engine.perform_da_tool(s, 2)
    mid, _ = engine.request_estimation(s, FULL)
    engine.submit_report(s, [mid], "done")
    rows = engine.export_rows()
    assert len(rows) == 3
    assert list(rows[0]) == TELEMETRY_COLUMNS
    stamps = [r["timestamp"] for r in rows]
    assert stamps == sorted(stamps)
    ms_row = rows[1]
    assert ms_row["model"] == 1 and ms_row["ASC"] == 1 and ms_row["model_id"] == mid
    assert all(ms_row[f"att_{i}"] == 1 for i in range(1, 7))
    report_row = rows[2]
    assert report_row["r_models"] == str(mid)
    assert report_row["reporting"] == "done"


def test_export_sorted_across_users(engine):
    b = engine.create_session("bob")
    a = engine.create_session("alice")
    engine.perform_da_tool(b, 1)
    engine.perform_da_tool(a, 1)
    rows = engine.export_rows()
    assert [r["user_id"] for r in rows] == ["alice", "bob"]


def test_empty_export_header_only(engine):
    engine.create_session("u")
    csv_text = engine.export_csv()
    lines = csv_text.splitlines()
    assert len(lines) == 1
    assert lines[0] == ",".join(TELEMETRY_COLUMNS)


def test_overtime_flag(small_ds):
    engine = GameEngine({"default": small_ds}, clock=ticking_clock(step=1200),
                        time_limit=2700)
    s = engine.create_session("u")
    engine.perform_da_tool(s, 1)      # +1200s: inside the limit
    engine.perform_da_tool(s, 2)      # +2400s: still inside
    engine.perform_da_tool(s, 3)      # +3600s: over 45 minutes
    flags = [r["overtime"] for r in engine.export_rows()]
    assert flags == [0, 0, 1]


def test_jsonl_export_matches_rows(engine):
    s = engine.create_session("u")
    engine.perform_da_tool(s, 1)
    parsed = [json.loads(line) for line in engine.export_jsonl().splitlines()]
    assert parsed == engine.export_rows()


def test_journal_replay_bit_for_bit(small_ds, tmp_path):
    engine = GameEngine({"default": small_ds}, opts=EstimationOptions(draws=30),
                        journal_dir=tmp_path, clock=ticking_clock())
    s = engine.create_session("u")
    engine.perform_da_tool(s, 1)
    engine.perform_da_tool(s, 7, {"variable": "Cost"})
    mid, _ = engine.request_estimation(s, FULL)
    engine.perform_oi_tool(s, 29, {"model_id": mid})
    engine.submit_report(s, [mid], "report text")
    fresh = GameEngine({"default": small_ds}, opts=EstimationOptions(draws=30))
    replayed = replay_journal(tmp_path / f"{s.session_id}.jsonl", fresh)
    assert fresh.export_csv() == engine.export_csv()
    assert fresh.registry_fingerprint(replayed) == engine.registry_fingerprint(s)
    assert replayed.closed


def test_export_models_table(engine):
    s = engine.create_session("u")
    mid, _ = engine.request_estimation(s, FULL)
    rows = engine.export_models()
    assert len(rows) == 1
    assert rows[0]["model_id"] == mid
    assert rows[0]["status"] == "estimated"
    assert rows[0]["bic"] == pytest.approx(
        -2 * s.registry[mid].result.ll_final
        + s.registry[mid].result.n_params * np.log(s.registry[mid].result.n_obs))
