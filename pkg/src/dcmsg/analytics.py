"""Workflow analytics over telemetry exports: phase transition matrices,
time allocation, frequent sequential patterns (SPADE-style vertical mining),
improvement grouping and Welch two-sample comparisons."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import t as student_t

from .errors import (
    DegenerateGroups,
    NoModels,
    NoTransitions,
    SchemaMismatch,
)
from .session import DA_TOOLS, OI_TOOLS, TELEMETRY_COLUMNS, parse_timestamp

PHASE_LABELS = ("DA", "MS", "OI", "R")
FAMILY_LABELS = ("MNL", "MMNL", "LC", "Miss")


@dataclass(frozen=True)
class SequenceItem:
    timestamp: object
    phase: str
    action_code: int
    label: str
    dwell: float


@dataclass
class WorkflowSequence:
    user_id: str
    items: list = field(default_factory=list)


@dataclass(frozen=True)
class SequentialPattern:
    items: tuple
    support: float
    per_user_count: dict

    @property
    def label(self) -> str:
        return " -> ".join(str(s) for s in self.items)


# -- telemetry ingest --------------------------------------------------------

_INT_FIELDS = {"task_id", "model_id", "model", "ASC", "n_class", "overtime"}


def load_telemetry_csv(path) -> list:
    """Read an export back into typed rows; inverse of the CSV export."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(TELEMETRY_COLUMNS):
            raise SchemaMismatch("export header does not match telemetry schema")
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in row:
                if key in _INT_FIELDS or key.split("_")[0] in ("att", "s", "t",
                                                              "int", "dist"):
                    row[key] = int(row[key])
                elif key.startswith("covariates_"):
                    row[key] = int(row[key])
            rows.append(row)
        return rows


def _phase_of(row: dict) -> str:
    code = int(row["task_id"])
    if 1 <= code <= 15:
        return "DA"
    if 21 <= code <= 38:
        return "OI"
    if int(row["model_id"]) > 0:
        return "MS"
    if str(row.get("reporting", "")) or str(row.get("r_models", "")):
        return "R"
    raise SchemaMismatch(f"cannot infer phase for row {row!r}")


def _ms_label(row: dict, misspecified: set | None) -> str:
    if misspecified and (row["user_id"], int(row["model_id"])) in misspecified:
        return "Miss"
    return {1: "MNL", 2: "MMNL", 3: "LC"}[int(row["model"])]


def build_sequences(rows: list, models: list | None = None) -> list:
    """One WorkflowSequence per user; dwell is the gap to the next event and
    0 for the last.  Out-of-order rows are re-sorted with a warning.

    ``models`` (the per-model export) lets misspecified requests be labelled
    'Miss' instead of their family.
    """
    missing = [c for c in ("timestamp", "user_id", "task_id", "model_id", "model")
               if rows and c not in rows[0]]
    if missing:
        raise SchemaMismatch(f"export rows lack columns {missing}")
    misspecified = None
    if models is not None:
        misspecified = {(m["user_id"], int(m["model_id"])) for m in models
                        if m["status"] == "misspecified"}
    by_user: dict[str, list] = {}
    for row in rows:
        by_user.setdefault(row["user_id"], []).append(row)
    sequences = []
    for user_id in sorted(by_user):
        user_rows = by_user[user_id]
        stamps = [parse_timestamp(r["timestamp"]) if isinstance(r["timestamp"], str)
                  else r["timestamp"] for r in user_rows]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            warnings.warn(f"telemetry rows for {user_id} out of order; re-sorting")
            order = sorted(range(len(stamps)), key=lambda i: stamps[i])
            user_rows = [user_rows[i] for i in order]
            stamps = [stamps[i] for i in order]
        seq = WorkflowSequence(user_id=user_id)
        for i, (row, ts) in enumerate(zip(user_rows, stamps)):
            phase = _phase_of(row)
            code = int(row["task_id"])
            if phase == "DA":
                label = DA_TOOLS[code]
            elif phase == "OI":
                label = OI_TOOLS[code]
            elif phase == "MS":
                label = _ms_label(row, misspecified)
            else:
                label = "report"
            dwell = (stamps[i + 1] - ts).total_seconds() if i + 1 < len(stamps) else 0.0
            seq.items.append(SequenceItem(ts, phase, code, label, dwell))
        sequences.append(seq)
    return sequences


# -- transition matrices -----------------------------------------------------

def transition_matrix(sequences: list, level: str = "phase") -> dict:
    """Row-stochastic transition probabilities plus raw counts.

    level 'phase' walks every event; level 'family' walks only the MS events
    (model-trajectory transitions).  Rows are emitted only for labels with at
    least one outgoing transition; columns cover every level label.
    """
    if level == "phase":
        cols = PHASE_LABELS
        walks = [[it.phase for it in seq.items] for seq in sequences]
    elif level == "family":
        cols = FAMILY_LABELS
        walks = [[it.label for it in seq.items if it.phase == "MS"]
                 for seq in sequences]
    else:
        raise ValueError(f"unknown level {level!r}")
    index = {lab: i for i, lab in enumerate(cols)}
    counts = np.zeros((len(cols), len(cols)), dtype=int)
    for walk in walks:
        for a, b in zip(walk, walk[1:]):
            counts[index[a], index[b]] += 1
    keep = counts.sum(axis=1) > 0
    if not keep.any():
        raise NoTransitions("no consecutive event pairs in any sequence")
    rows = [lab for lab, k in zip(cols, keep) if k]
    sub = counts[keep]
    probs = sub / sub.sum(axis=1, keepdims=True)
    return {"labels": list(cols), "rows": rows,
            "counts": sub.tolist(), "probabilities": probs.tolist()}


def time_allocation(sequences: list) -> dict:
    """Per-user seconds in each phase (final dwell is 0 by construction) and
    the per-user timeline segmentation."""
    per_user, timelines = {}, {}
    for seq in sequences:
        totals = {lab: 0.0 for lab in PHASE_LABELS}
        segments = []
        for item in seq.items:
            totals[item.phase] += item.dwell
            segments.append({"timestamp": item.timestamp, "phase": item.phase,
                             "dwell": item.dwell})
        per_user[seq.user_id] = totals
        timelines[seq.user_id] = segments
    mean = {lab: (float(np.mean([t[lab] for t in per_user.values()]))
                  if per_user else 0.0) for lab in PHASE_LABELS}
    return {"per_user": per_user, "mean": mean, "timelines": timelines}


# -- improvement grouping ----------------------------------------------------

_RULES = {"bic": ("bic", False), "aic": ("aic", False),
          "ll": ("ll_final", True), "rho2": ("rho2", True)}


def classify_improvement(export_rows: list, models: list,
                         rule: str = "bic") -> dict:
    """Map user -> 'improved' / 'not_improved'.

    Improved means the reported model beats the user's first successfully
    estimated model on the rule metric.  Users without a report fall back to
    the best model among their final three requests.
    """
    metric, higher_better = _RULES[rule]
    reported: dict[str, list] = {}
    for row in export_rows:
        if str(row.get("r_models", "")):
            reported[row["user_id"]] = [int(m) for m in
                                        str(row["r_models"]).split(";") if m]
    by_user: dict[str, list] = {}
    for m in models:
        by_user.setdefault(m["user_id"], []).append(m)
    if not by_user:
        raise NoModels("no models in the export")
    groups = {}
    for user_id, user_models in by_user.items():
        user_models.sort(key=lambda m: int(m["model_id"]))
        estimated = [m for m in user_models if m["status"] == "estimated"]
        if not estimated:
            raise NoModels(f"user {user_id} has no successfully estimated model")
        first = float(estimated[0][metric])
        ids = reported.get(user_id)
        if ids:
            pool = [m for m in estimated if int(m["model_id"]) in ids]
        else:
            # no report: last high-performing model among the final 3 requests
            tail_ids = {int(m["model_id"]) for m in user_models[-3:]}
            pool = [m for m in estimated if int(m["model_id"]) in tail_ids]
        if not pool:
            raise NoModels(f"user {user_id} reported only misspecified models")
        values = [float(m[metric]) for m in pool]
        final = max(values) if higher_better else min(values)
        better = final > first if higher_better else final < first
        groups[user_id] = "improved" if better else "not_improved"
    return groups


# -- sequential pattern mining ----------------------------------------------

def mine_patterns(database: list, min_support: float = 0.7,
                  max_len: int = 6) -> list:
    """All subsequence patterns with support >= min_support, lengths 1..max_len.

    ``database`` is a list of symbol sequences (one per user).  Support is the
    fraction of sequences containing the pattern as a not-necessarily
    contiguous subsequence.  The lattice is grown depth-first by temporal
    joins over earliest-embedding id-lists, so anti-monotone pruning applies.
    Per-user occurrence counts are leftmost-greedy non-overlapping embeddings.
    """
    if not 0.0 < min_support <= 1.0:
        raise ValueError("min_support must be in (0, 1]")
    n = len(database)
    if n == 0:
        return []
    min_count = min_support * n - 1e-9

    # vertical format: symbol -> per-sequence sorted event-id lists
    occurrences: dict = {}
    for sid, seq in enumerate(database):
        for eid, symbol in enumerate(seq):
            occurrences.setdefault(symbol, {}).setdefault(sid, []).append(eid)
    atoms = {sym: occ for sym, occ in occurrences.items()
             if len(occ) >= min_count}

    results = []

    def extend(prefix: tuple, idlist: dict):
        # idlist: sid -> eid of the earliest embedding of ``prefix``
        results.append((prefix, len(idlist) / n))
        if len(prefix) >= max_len:
            return
        for symbol in sorted(atoms, key=str):
            joined = {}
            for sid, eid in idlist.items():
                events = atoms[symbol].get(sid)
                if events is None:
                    continue
                pos = _first_after(events, eid)
                if pos is not None:
                    joined[sid] = pos
            if len(joined) >= min_count:
                extend(prefix + (symbol,), joined)

    for symbol in sorted(atoms, key=str):
        idlist = {sid: events[0] for sid, events in atoms[symbol].items()}
        extend((symbol,), idlist)

    patterns = []
    for items, support in results:
        counts = {sid: _greedy_count(database[sid], items) for sid in range(n)}
        patterns.append(SequentialPattern(items, support, counts))
    patterns.sort(key=lambda p: (len(p.items), [str(s) for s in p.items]))
    return patterns


def _first_after(sorted_events: list, eid: int):
    lo, hi = 0, len(sorted_events)
    while lo < hi:
        mid = (lo + hi) // 2
        if sorted_events[mid] <= eid:
            lo = mid + 1
        else:
            hi = mid
    return sorted_events[lo] if lo < len(sorted_events) else None


def _greedy_count(seq: list, pattern: tuple) -> int:
    count = pos = 0
    while True:
        needed = 0
        for i in range(pos, len(seq)):
            if seq[i] == pattern[needed]:
                needed += 1
                if needed == len(pattern):
                    count += 1
                    pos = i + 1
                    break
        else:
            return count


def contains_subsequence(seq: list, pattern: tuple) -> bool:
    """Brute-force subsequence check (oracle helper)."""
    it = iter(seq)
    return all(any(sym == want for sym in it) for want in pattern)


def sequence_symbols(seq: WorkflowSequence, level: str = "phase") -> list:
    if level == "phase":
        return [it.phase for it in seq.items]
    if level == "action":
        return [it.label for it in seq.items]
    if level == "family":
        return [it.label for it in seq.items if it.phase == "MS"]
    raise ValueError(f"unknown level {level!r}")


# -- two-sample comparison ---------------------------------------------------

def welch_t_test(a, b) -> tuple:
    """Welch two-sample t statistic, Welch-Satterthwaite df, two-sided p."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateGroups("each group needs at least two values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise DegenerateGroups("both groups are constant")
    sa, sb = va / len(a), vb / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa ** 2 / (len(a) - 1) + sb ** 2 / (len(b) - 1))
    p = 2.0 * float(student_t.sf(abs(t), df))
    return float(t), float(df), p


@dataclass(frozen=True)
class GroupComparison:
    label: str
    mean_improved: float
    mean_not_improved: float
    t_statistic: float
    df: float
    p_value: float
    significant: bool


def tool_usage(sequences: list) -> dict:
    """label -> {user: total uses} for every DA and OI tool seen."""
    table: dict = {}
    for seq in sequences:
        for item in seq.items:
            if item.phase in ("DA", "OI"):
                table.setdefault(item.label, {}).setdefault(seq.user_id, 0)
                table[item.label][seq.user_id] += 1
    return table


def group_pattern_comparison(sequences: list, patterns: list, groups: dict,
                             alpha: float = 0.05,
                             include_tools: bool = True) -> list:
    """One Welch comparison per pattern (and optionally per tool) between the
    improved and not-improved groups; per-user frequency vectors, zero for
    users without the pattern.  Groups with fewer than two users are skipped
    with a warning."""
    users = [seq.user_id for seq in sequences]
    improved = [u for u in users if groups.get(u) == "improved"]
    not_improved = [u for u in users if groups.get(u) == "not_improved"]
    user_index = {seq.user_id: i for i, seq in enumerate(sequences)}

    features, seen = [], set()
    for pattern in patterns:
        counts = {u: pattern.per_user_count.get(user_index[u], 0) for u in users}
        features.append((pattern.label, counts))
        seen.add(pattern.label)
    if include_tools:
        # single-item patterns already cover their tool; no duplicate rows
        for label, counts in sorted(tool_usage(sequences).items()):
            if label not in seen:
                features.append((label, {u: counts.get(u, 0) for u in users}))

    rows = []
    for label, counts in features:
        va = [counts[u] for u in improved]
        vb = [counts[u] for u in not_improved]
        if len(va) < 2 or len(vb) < 2:
            warnings.warn(f"{label}: a group has fewer than two users; skipped")
            continue
        try:
            t, df, p = welch_t_test(va, vb)
        except DegenerateGroups:
            continue
        rows.append(GroupComparison(label, float(np.mean(va)), float(np.mean(vb)),
                                    t, df, p, p < alpha))
    return rows


# -- CSV renderings for the analyze CLI --------------------------------------

def transitions_csv(tm: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["from"] + list(tm["labels"]))
    for label, probs in zip(tm["rows"], tm["probabilities"]):
        writer.writerow([label] + [f"{p:.6f}" for p in probs])
    return out.getvalue()


def timelines_csv(allocation: dict) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["user_id", "timestamp", "phase", "dwell_seconds"])
    for user_id in sorted(allocation["timelines"]):
        for seg in allocation["timelines"][user_id]:
            ts = seg["timestamp"]
            writer.writerow([user_id, ts if isinstance(ts, str) else
                             ts.strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z",
                             seg["phase"], f"{seg['dwell']:.3f}"])
    return out.getvalue()


def patterns_csv(patterns: list) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["pattern", "length", "support"])
    for p in patterns:
        writer.writerow([p.label, len(p.items), f"{p.support:.6f}"])
    return out.getvalue()


def comparisons_csv(rows: list) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["label", "mean_improved", "mean_not_improved",
                     "t_statistic", "df", "p_value", "significant"])
    for row in rows:
        writer.writerow([row.label, f"{row.mean_improved:.4f}",
                         f"{row.mean_not_improved:.4f}",
                         f"{row.t_statistic:.4f}", f"{row.df:.4f}",
                         f"{row.p_value:.6f}", int(row.significant)])
    return out.getvalue()
