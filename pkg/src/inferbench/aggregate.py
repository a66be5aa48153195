"""Leaderboard aggregation: ingest suite files, filter outliers, rank.

Outliers are removed per metric with a modified z-score rule before
averaging, and the aggregate AI score is recomputed from the aggregated
runtimes (never averaged directly) so the score column always agrees with
the runtime columns.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, fields as dc_fields
from statistics import median

from .errors import AggregationError
from .runner import Measurement, MemoryProbeResult, SuiteResult
from .scoring import ReferenceProfile, aggregate_score

MODIFIED_Z_CUTOFF = 3.5
MAX_DROP_FRACTION = 0.3


@dataclass
class DeviceRecord:
    device_name: str
    soc_name: str
    ram_gb: float
    metadata: dict
    suite: SuiteResult


@dataclass
class RankingRow:
    group_key: str
    per_test_ms: list  # tests 1..8; None where nothing passed
    memory_units: float
    ai_score: float
    sample_count: int


def _record_from_suite(suite, lineno):
    meta = suite.metadata
    device = (meta.get("device_name") or "").strip()
    soc = (meta.get("soc_name") or "").strip()
    if not device:
        raise AggregationError(
            f"line {lineno}: header missing device_name", line=lineno,
            field="device_name",
        )
    if not soc:
        raise AggregationError(
            f"line {lineno}: header missing soc_name", line=lineno,
            field="soc_name",
        )
    return DeviceRecord(
        device_name=device,
        soc_name=soc,
        ram_gb=meta.get("ram_gb", 0.0),
        metadata=meta,
        suite=suite,
    )


def _build(cls, doc, lineno):
    allowed = {f.name for f in dc_fields(cls)}
    for key in doc:
        if key not in allowed:
            raise AggregationError(
                f"line {lineno}: unexpected field {key!r}", line=lineno, field=key
            )
    for f in dc_fields(cls):
        required = (f.default is dataclasses.MISSING
                    and f.default_factory is dataclasses.MISSING)
        if required and f.name not in doc:
            raise AggregationError(
                f"line {lineno}: missing field {f.name!r}", line=lineno,
                field=f.name,
            )
    return cls(**doc)


def ingest(path):
    """Parse one runner JSONL file into device records.

    A file may hold several concatenated suites; malformed lines are
    rejected with their line number and offending field.
    """
    records = []
    current = None
    current_line = 0
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as e:
                raise AggregationError(
                    f"line {lineno}: invalid JSON: {e}", line=lineno
                ) from None
            kind = doc.pop("type", None)
            if kind == "header":
                if current is not None:
                    records.append(_record_from_suite(current, current_line))
                current = SuiteResult(metadata=doc)
                current_line = lineno
            elif kind == "measurement":
                if current is None:
                    raise AggregationError(
                        f"line {lineno}: measurement before header", line=lineno
                    )
                current.measurements.append(_build(Measurement, doc, lineno))
            elif kind == "memory_probe":
                if current is None:
                    raise AggregationError(
                        f"line {lineno}: probe before header", line=lineno
                    )
                current.memory_probe = _build(MemoryProbeResult, doc, lineno)
            else:
                raise AggregationError(
                    f"line {lineno}: unknown record type {kind!r}",
                    line=lineno, field="type",
                )
    if current is not None:
        records.append(_record_from_suite(current, current_line))
    return records


def ingest_dir(path):
    records = []
    for name in sorted(os.listdir(path)):
        if name.endswith(".jsonl"):
            records.extend(ingest(os.path.join(path, name)))
    return records


def remove_outliers(samples):
    """Modified z-score filter with a bounded drop count.

    Drops x where 0.6745 * |x - median| / MAD > 3.5; keeps everything when
    MAD is zero, and never removes more than 30% of the samples (largest
    deviations go first).
    """
    xs = list(samples)
    n = len(xs)
    if n == 0:
        return []
    med = median(xs)
    mad = median(abs(x - med) for x in xs)
    if mad == 0:
        return xs
    flagged = [
        (abs(x - med), i)
        for i, x in enumerate(xs)
        if 0.6745 * abs(x - med) / mad > MODIFIED_Z_CUTOFF
    ]
    flagged.sort(reverse=True)
    drop = {i for _, i in flagged[: math.floor(MAX_DROP_FRACTION * n)]}
    return [x for i, x in enumerate(xs) if i not in drop]


def _filtered_mean(samples):
    kept = remove_outliers(samples)
    if not kept:
        return None
    return sum(kept) / len(kept)


def rank(records, group_by, profile: ReferenceProfile):
    """Aggregate records per device or SoC into sorted ranking rows."""
    if group_by not in ("device", "soc"):
        raise AggregationError(f"group_by must be 'device' or 'soc', got {group_by!r}")
    groups = {}
    for rec in records:
        key = rec.device_name if group_by == "device" else rec.soc_name
        groups.setdefault(key, []).append(rec)
    rows = []
    for key, recs in groups.items():
        per_test = []
        for t in range(1, 9):
            samples = [
                m.avg_ms
                for rec in recs
                for m in rec.suite.measurements
                if m.test_id == t and m.passed and m.avg_ms
            ]
            per_test.append(_filtered_mean(samples))
        mem_samples = [
            rec.suite.memory_probe.max_resolution_units
            for rec in recs
            if rec.suite.memory_probe is not None
        ]
        mem = _filtered_mean(mem_samples)
        score = _score_from_aggregates(per_test, mem, profile)
        rows.append(
            RankingRow(
                group_key=key,
                per_test_ms=per_test,
                memory_units=mem,
                ai_score=score,
                sample_count=len(recs),
            )
        )
    rows.sort(key=lambda r: (-r.ai_score, r.group_key))
    return rows


def _score_from_aggregates(per_test_ms, mem_units, profile):
    """Recompute the AI score from aggregated metrics via the scoring module."""
    suite = SuiteResult(metadata={})
    for t, ms in enumerate(per_test_ms, start=1):
        suite.measurements.append(
            Measurement(
                test_id=t, backend_id="aggregated", images_processed=1,
                per_image_ms=[ms] if ms else [], avg_ms=ms,
                passed=ms is not None, budget_s=0.0,
            )
        )
    suite.memory_probe = MemoryProbeResult(
        max_resolution_units=mem_units or 0,
        limiting_cause="aggregated",
        bytes_at_limit=0,
    )
    return aggregate_score(suite, profile).total


# --- export ---------------------------------------------------------------

_HEADER = (
    ["group", *(f"test{t}_ms" for t in range(1, 9)), "test9_100px", "ai_score",
     "samples"]
)


def _cells(row):
    return [
        row.group_key,
        *(("" if v is None else f"{v:.3f}") for v in row.per_test_ms),
        "" if row.memory_units is None else f"{row.memory_units:.2f}",
        f"{row.ai_score:.2f}",
        str(row.sample_count),
    ]


def _csv_field(s):
    if any(c in s for c in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def export(rows, fmt) -> str:
    """Render ranking rows as markdown, csv, or json text."""
    if fmt == "csv":
        lines = [",".join(_HEADER)]
        lines += [",".join(_csv_field(c) for c in _cells(r)) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(_HEADER) + " |",
            "|" + "|".join(["---"] * len(_HEADER)) + "|",
        ]
        lines += ["| " + " | ".join(_cells(r)) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        docs = [
            {
                "group": r.group_key,
                **{f"test{t}_ms": r.per_test_ms[t - 1] for t in range(1, 9)},
                "test9_100px": r.memory_units,
                "ai_score": r.ai_score,
                "samples": r.sample_count,
            }
            for r in rows
        ]
        return json.dumps(docs, indent=1) + "\n"
    raise AggregationError(f"unknown export format {fmt!r}")


def export_path(directory, group_by, fmt):
    ext = {"csv": "csv", "markdown": "md", "json": "json"}[fmt]
    return os.path.join(directory, f"{group_by}-ranking.{ext}")
