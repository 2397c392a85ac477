"""Game engine: session lifecycle, free-order phase navigation, action
telemetry, estimation dispatch with repository caching, and report capture.

Every participant action becomes one telemetry event in the fixed export
schema.  Sessions journal their actions to an append-only JSONL file and can
be rebuilt bit-for-bit by replaying the journal (estimation is deterministic
given the engine seed, so registries reproduce exactly; wall time is the one
diagnostic excluded from persisted payloads).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import dataset as dsmod
from . import postest
from .dataset import ChoiceDataset
from .draws import halton_draws
from .errors import (
    EmptyReport,
    InvalidSpec,
    SessionClosed,
    UnknownAction,
    UnknownDataset,
    UnknownModelId,
)
from .estimation import (
    EstimationOptions,
    EstimationResult,
    estimate_lc,
    estimate_mmnl,
    estimate_mnl,
)
from .modelspec import LC, MMNL, MNL, ModelSpecification, canonical_key, validate_spec

PHASES = ("DA", "MS", "OI", "R")

DA_TOOLS = {
    1: "view_summary_statistics",
    2: "view_data_dictionary",
    3: "check_missing_data",
    4: "view_first_rows",
    5: "view_choice_shares",
    6: "view_choice_task_example",
    7: "view_histogram",
    8: "delete_missing_values",
    9: "view_boxplot",
    10: "sort_dataset",
    11: "view_correlation",
    12: "view_scatter_plot",
    13: "replace_missing_values",
    14: "view_pie_chart",
    15: "view_bar_chart",
}

OI_TOOLS = {
    21: "view_result_table",
    22: "view_final_loglik",
    23: "view_initial_loglik",
    24: "view_null_loglik",
    25: "view_likelihood_ratio",
    26: "view_rho2",
    27: "view_adj_rho2",
    28: "view_aic",
    29: "view_bic",
    30: "view_n_parameters",
    31: "view_n_rows",
    32: "view_n_individuals",
    33: "view_gradient_norm",
    34: "view_estimation_time",
    35: "calculate_wtp",
    36: "compare_models",
    37: "elbow_graph",
    38: "view_draws_used",
}

DA_CODES = {name: code for code, name in DA_TOOLS.items()}
OI_CODES = {name: code for code, name in OI_TOOLS.items()}

#: telemetry export schema; ``overtime`` is the auxiliary flag column
TELEMETRY_COLUMNS = (
    ["timestamp", "user_id", "task_id", "model_id", "model", "ASC"]
    + [f"att_{i}" for i in range(1, 7)]
    + [f"s_{i}" for i in range(1, 7)]
    + [f"t_{i}" for i in range(1, 7)]
    + [f"int_{i}" for i in range(1, 7)]
    + [f"dist_{i}" for i in range(1, 7)]
    + ["n_class"]
    + [f"covariates_{j}" for j in range(1, 7)]
    + ["r_models", "reporting", "overtime"]
)

ESTIMATED, MISSPECIFIED = "estimated", "misspecified"


def _now() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    return ts.strftime("%Y-%m-%dT%H:%M:%S.") + f"{ts.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


@dataclass
class TelemetryEvent:
    timestamp: datetime
    user_id: str
    task_id: int = 0
    model_id: int = 0
    spec: ModelSpecification | None = None
    r_models: tuple = ()
    reporting: str = ""
    overtime: bool = False

    def to_row(self) -> dict:
        spec_fields = (self.spec.to_json() if self.spec is not None
                       else ModelSpecification(MNL).to_json() | {"model": 0, "ASC": 0,
                                                                 **{f"att_{i}": 0 for i in range(1, 7)},
                                                                 **{f"t_{i}": 0 for i in range(1, 7)}})
        row = {"timestamp": format_timestamp(self.timestamp),
               "user_id": self.user_id,
               "task_id": self.task_id,
               "model_id": self.model_id}
        row.update(spec_fields)
        row["r_models"] = ";".join(str(m) for m in self.r_models)
        row["reporting"] = self.reporting
        row["overtime"] = int(self.overtime)
        return row


@dataclass
class RegistryEntry:
    model_id: int
    spec: ModelSpecification
    result: EstimationResult
    status: str
    cached: bool


@dataclass
class SessionState:
    session_id: str
    user_id: str
    dataset_ref: str
    init_time: datetime
    time_limit: int = 2700
    end_time: datetime | None = None
    current_phase: str = "DA"
    events: list = field(default_factory=list)
    registry: dict = field(default_factory=dict)
    report: dict | None = None
    working_dataset: ChoiceDataset | None = None

    @property
    def closed(self) -> bool:
        return self.end_time is not None


def _dataset_fingerprint(ds: ChoiceDataset) -> str:
    buf = io.BytesIO()
    import numpy as np
    values = ds.df.to_numpy(dtype=float)
    buf.write(np.ascontiguousarray(np.nan_to_num(values, nan=-1e308)).tobytes())
    return hashlib.sha256(buf.getvalue()).hexdigest()[:16]


class GameEngine:
    """Owns datasets, the shared estimation repository and all sessions.

    One writer per session; distinct sessions are independent.  The
    repository is keyed by (working-dataset fingerprint, canonical spec key)
    so a cache hit is only possible against identical data.
    """

    def __init__(self, datasets: dict | None = None,
                 opts: EstimationOptions | None = None,
                 journal_dir: str | Path | None = None,
                 time_limit: int = 2700,
                 clock=None):
        self.datasets = dict(datasets or {})
        self.opts = opts or EstimationOptions()
        self.journal_dir = Path(journal_dir) if journal_dir else None
        self.time_limit = time_limit
        self.clock = clock or _now
        self.repository: dict = {}
        self.sessions: dict[str, SessionState] = {}
        self._draw_cache: dict = {}

    # -- journalling ---------------------------------------------------------

    def _journal(self, session: SessionState, entry: dict) -> None:
        if self.journal_dir is None:
            return
        self.journal_dir.mkdir(parents=True, exist_ok=True)
        path = self.journal_dir / f"{session.session_id}.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    # -- lifecycle -----------------------------------------------------------

    def create_session(self, user_id: str, dataset_ref: str = "default",
                       time_limit: int | None = None,
                       session_id: str | None = None,
                       at: datetime | None = None) -> SessionState:
        if dataset_ref not in self.datasets:
            raise UnknownDataset(dataset_ref)
        ts = at or self.clock()
        session = SessionState(
            session_id=session_id or uuid.uuid4().hex,
            user_id=user_id,
            dataset_ref=dataset_ref,
            init_time=ts,
            time_limit=time_limit if time_limit is not None else self.time_limit,
            working_dataset=self.datasets[dataset_ref],
        )
        self.sessions[session.session_id] = session
        self._journal(session, {"type": "create", "session_id": session.session_id,
                                "user_id": user_id, "dataset_ref": dataset_ref,
                                "time_limit": session.time_limit,
                                "ts": format_timestamp(ts)})
        return session

    def _stamp(self, session: SessionState, at: datetime | None) -> datetime:
        ts = at or self.clock()
        if session.events and ts < session.events[-1].timestamp:
            ts = session.events[-1].timestamp
        return ts

    def _append(self, session: SessionState, event: TelemetryEvent) -> TelemetryEvent:
        event.overtime = (
            (event.timestamp - session.init_time).total_seconds() > session.time_limit)
        session.events.append(event)
        return event

    # -- descriptive analysis ------------------------------------------------

    def perform_da_tool(self, session: SessionState, tool, payload: dict | None = None,
                        at: datetime | None = None):
        """Execute a DA tool against the session's working dataset, log the
        event, and return (payload, event)."""
        if session.closed:
            raise SessionClosed(session.session_id)
        code = DA_CODES.get(tool, tool)
        if code not in DA_TOOLS:
            raise UnknownAction(f"unknown DA tool {tool!r}")
        payload = payload or {}
        result = self._run_da_tool(session, code, payload)
        ts = self._stamp(session, at)
        session.current_phase = "DA"
        event = self._append(session, TelemetryEvent(
            timestamp=ts, user_id=session.user_id, task_id=code))
        self._journal(session, {"type": "da", "code": code, "payload": payload,
                                "ts": format_timestamp(ts)})
        return result, event

    def _run_da_tool(self, session: SessionState, code: int, payload: dict):
        ds = session.working_dataset
        name = DA_TOOLS[code]
        if name == "view_summary_statistics":
            table = dsmod.summary_statistics(ds, payload.get("variable"))
            return {"statistics": {idx: row.to_dict() for idx, row in table.iterrows()}}
        if name == "view_data_dictionary":
            return {"dictionary": [vars(d) | {"levels": list(d.levels),
                                              "numeric_codes": list(d.numeric_codes)}
                                   for d in dsmod.data_dictionary(ds)]}
        if name == "check_missing_data":
            return {"missing": dsmod.missing_report(ds)}
        if name == "view_first_rows":
            frame = dsmod.head(ds, int(payload.get("n", 5)))
            return {"columns": list(frame.columns),
                    "rows": [[None if v != v else v for v in row]
                             for row in frame.itertuples(index=False)]}
        if name == "view_choice_shares":
            return {"shares": dsmod.choice_shares(ds)}
        if name == "view_choice_task_example":
            respondent = int(payload.get("respondent", ds.df["ID"].iloc[0]))
            task = int(payload.get("task", ds.df["TaskID"].iloc[0]))
            return dsmod.choice_task_example(ds, respondent, task)
        if name == "view_histogram":
            return dsmod.chart_data(ds, "histogram", [payload["variable"]])
        if name == "view_boxplot":
            return dsmod.chart_data(ds, "boxplot", [payload["variable"]])
        if name == "view_pie_chart":
            return dsmod.chart_data(ds, "pie", [payload["variable"]])
        if name == "view_bar_chart":
            return dsmod.chart_data(ds, "bar", [payload["variable"]])
        if name == "view_scatter_plot":
            return dsmod.chart_data(ds, "scatter", list(payload["variables"]))
        if name == "view_correlation":
            table = dsmod.correlation_matrix(ds, list(payload["variables"]))
            return {"variables": list(table.columns),
                    "matrix": table.to_numpy().tolist()}
        if name == "sort_dataset":
            session.working_dataset = dsmod.sort_dataset(
                ds, payload["variable"], payload.get("order", "asc"))
            return {"sorted_by": payload["variable"]}
        if name == "delete_missing_values":
            session.working_dataset = dsmod.handle_missing(ds, "delete")
            return {"rows": session.working_dataset.n_rows}
        if name == "replace_missing_values":
            strategy = "replace_" + payload.get("statistic", "mean")
            session.working_dataset = dsmod.handle_missing(ds, strategy)
            return {"rows": session.working_dataset.n_rows, "strategy": strategy}
        raise UnknownAction(name)

    # -- model specification / estimation -----------------------------------

    def request_estimation(self, session: SessionState, spec: ModelSpecification,
                           at: datetime | None = None,
                           model_id: int | None = None):
        """Estimate (or fetch from the repository) and log the MS event."""
        if session.closed:
            raise SessionClosed(session.session_id)
        violations = validate_spec(spec)
        if violations:
            raise InvalidSpec("; ".join(v.constraint for v in violations))
        ds = session.working_dataset
        if ds.df.isna().any().any():
            # estimating requires complete data; mirror the delete-first rule
            raise InvalidSpec("dataset still has missing values; handle them in DA first")
        key = (_dataset_fingerprint(ds), canonical_key(spec))
        cached = key in self.repository
        if cached:
            result = self.repository[key]
        else:
            result = self._estimate(spec, ds)
            self.repository[key] = result
        if model_id is None:
            model_id = len(session.registry) + 1
        status = MISSPECIFIED if result.misspecified else ESTIMATED
        session.registry[model_id] = RegistryEntry(model_id, spec, result, status, cached)
        ts = self._stamp(session, at)
        session.current_phase = "MS"
        self._append(session, TelemetryEvent(
            timestamp=ts, user_id=session.user_id, model_id=model_id, spec=spec))
        self._journal(session, {"type": "estimate", "spec": spec.to_json(),
                                "ts": format_timestamp(ts)})
        return model_id, result

    def _estimate(self, spec: ModelSpecification, ds: ChoiceDataset) -> EstimationResult:
        if spec.family == MNL:
            return estimate_mnl(spec, ds, self.opts)
        if spec.family == MMNL:
            dims = sum(d != 0 for d in spec.dist)
            draw_key = (ds.n_individuals, dims)
            if draw_key not in self._draw_cache:
                self._draw_cache[draw_key] = halton_draws(
                    ds.n_individuals, self.opts.draws, dims)
            return estimate_mmnl(spec, ds, self.opts, draws=self._draw_cache[draw_key])
        return estimate_lc(spec, ds, self.opts)

    # -- outcome interpretation ----------------------------------------------

    def perform_oi_tool(self, session: SessionState, tool, payload: dict | None = None,
                        at: datetime | None = None):
        if session.closed:
            raise SessionClosed(session.session_id)
        code = OI_CODES.get(tool, tool)
        if code not in OI_TOOLS:
            raise UnknownAction(f"unknown OI tool {tool!r}")
        payload = payload or {}
        result = self._run_oi_tool(session, code, payload)
        ts = self._stamp(session, at)
        session.current_phase = "OI"
        event = self._append(session, TelemetryEvent(
            timestamp=ts, user_id=session.user_id, task_id=code))
        self._journal(session, {"type": "oi", "code": code, "payload": payload,
                                "ts": format_timestamp(ts)})
        return result, event

    def _entry(self, session: SessionState, model_id) -> RegistryEntry:
        try:
            return session.registry[int(model_id)]
        except (KeyError, TypeError, ValueError):
            raise UnknownModelId(str(model_id))

    def _run_oi_tool(self, session: SessionState, code: int, payload: dict):
        name = OI_TOOLS[code]
        if name == "compare_models":
            entries = [self._entry(session, m) for m in payload["model_ids"]]
            return postest.compare_models([e.result for e in entries])
        if name == "elbow_graph":
            results = [e.result for e in session.registry.values()
                       if e.status == ESTIMATED]
            return postest.elbow_data(results)
        entry = self._entry(session, payload["model_id"])
        res = entry.result
        if name == "view_result_table":
            return {"status": entry.status,
                    "parameters": [
                        {"name": n, "estimate": float(b), "robust_se": float(s),
                         "t_stat": float(t), "p_value": float(p)}
                        for n, b, s, t, p in zip(res.param_names, res.estimates,
                                                 res.robust_se, res.t_stat,
                                                 res.p_value)]}
        if name == "calculate_wtp":
            return {"wtp": [e.to_dict() for e in postest.wtp_table(res)]}
        metrics = postest.fit_metrics(res)
        simple = {
            "view_final_loglik": metrics.ll_final,
            "view_initial_loglik": metrics.ll_init,
            "view_null_loglik": metrics.ll_null,
            "view_likelihood_ratio": metrics.lr_test_null,
            "view_rho2": metrics.rho2,
            "view_adj_rho2": metrics.adj_rho2,
            "view_aic": metrics.aic,
            "view_bic": metrics.bic,
            "view_n_parameters": metrics.n_params,
            "view_n_rows": metrics.sample_size,
            "view_n_individuals": metrics.n_individuals,
            "view_gradient_norm": metrics.gradient_norm,
            "view_estimation_time": metrics.est_time,
            "view_draws_used": res.draws_used,
        }
        return {name.removeprefix("view_"): simple[name]}

    # -- reporting -----------------------------------------------------------

    def submit_report(self, session: SessionState, model_ids: list, text: str,
                      at: datetime | None = None) -> SessionState:
        if session.closed:
            raise SessionClosed(session.session_id)
        if not text or not text.strip():
            raise EmptyReport("report text must be nonempty")
        ids = [int(m) for m in model_ids]
        for mid in ids:
            entry = session.registry.get(mid)
            if entry is None or entry.status != ESTIMATED:
                raise UnknownModelId(str(mid))
        ts = self._stamp(session, at)
        session.current_phase = "R"
        session.end_time = ts
        session.report = {"r_models": ids, "reporting": text}
        self._append(session, TelemetryEvent(
            timestamp=ts, user_id=session.user_id, r_models=tuple(ids),
            reporting=text))
        self._journal(session, {"type": "report", "model_ids": ids, "text": text,
                                "ts": format_timestamp(ts)})
        return session

    # -- export --------------------------------------------------------------

    def export_rows(self, scope: str = "all") -> list:
        if scope == "all":
            sessions = list(self.sessions.values())
        else:
            if scope not in self.sessions:
                raise UnknownDataset(f"unknown session {scope}")
            sessions = [self.sessions[scope]]
        rows = []
        for session in sessions:
            rows.extend(ev.to_row() for ev in session.events)
        rows.sort(key=lambda r: (r["user_id"], r["timestamp"]))
        return rows

    def export_csv(self, scope: str = "all") -> str:
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=TELEMETRY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.export_rows(scope))
        return out.getvalue()

    def export_jsonl(self, scope: str = "all") -> str:
        return "".join(json.dumps(row, sort_keys=False) + "\n"
                       for row in self.export_rows(scope))

    def export_models(self, scope: str = "all") -> list:
        """Per-model metrics table consumed by workflow analytics."""
        if scope == "all":
            sessions = list(self.sessions.values())
        else:
            sessions = [self.sessions[scope]]
        rows = []
        for session in sessions:
            for entry in sorted(session.registry.values(), key=lambda e: e.model_id):
                res = entry.result
                metrics = postest.fit_metrics(res)
                rows.append({
                    "user_id": session.user_id,
                    "model_id": entry.model_id,
                    "family": entry.spec.family,
                    "status": entry.status,
                    "cached": int(entry.cached),
                    "n_params": metrics.n_params,
                    "ll_final": metrics.ll_final,
                    "aic": metrics.aic,
                    "bic": metrics.bic,
                    "rho2": metrics.rho2,
                    "adj_rho2": metrics.adj_rho2,
                })
        rows.sort(key=lambda r: (r["user_id"], r["model_id"]))
        return rows

    def registry_fingerprint(self, session: SessionState) -> str:
        payload = [{"model_id": e.model_id, "spec": e.spec.to_json(),
                    "status": e.status, "result": e.result.to_dict()}
                   for e in sorted(session.registry.values(), key=lambda e: e.model_id)]
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()).hexdigest()


def replay_journal(path: str | Path, engine: GameEngine) -> SessionState:
    """Rebuild a session from its journal inside ``engine`` (which must hold
    the same dataset and options).  Timestamps are taken from the journal so
    the rebuilt export matches byte-for-byte."""
    session = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            entry = json.loads(line)
            ts = parse_timestamp(entry["ts"])
            kind = entry["type"]
            if kind == "create":
                session = engine.create_session(
                    entry["user_id"], entry["dataset_ref"],
                    time_limit=entry.get("time_limit"),
                    session_id=entry["session_id"], at=ts)
            elif kind == "da":
                engine.perform_da_tool(session, entry["code"], entry["payload"], at=ts)
            elif kind == "oi":
                engine.perform_oi_tool(session, entry["code"], entry["payload"], at=ts)
            elif kind == "estimate":
                engine.request_estimation(
                    session, ModelSpecification.from_json(entry["spec"]), at=ts)
            elif kind == "report":
                engine.submit_report(session, entry["model_ids"], entry["text"], at=ts)
    return session
