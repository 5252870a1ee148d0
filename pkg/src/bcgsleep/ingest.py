"""Night-record and label-file parsing, serialization, and label alignment.

Two on-disk sample formats share identical field names:

  - ndjson: one ``{"t":0,"hr":62.0,"rr":14.0,"sv":48.0,"hrv":35.0,"b2b":960.0}``
    object per line
  - csv: header ``t,hr,rr,sv,hrv,b2b`` then one row per sample

Floats are written as shortest round-trip decimal text, so a record survives
write -> parse bit-exactly. Label files are a single JSON document:
``{"night_id": "...", "levels": [{"level": "wake", "start_t": 0, "seconds": 300}, ...]}``.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime
from typing import Iterable, Iterator, Optional

from .core import (
    EPOCH_ZERO,
    NightRecord,
    Stage,
    StageInterval,
    VitalsSample,
    compute_gaps,
)
from .errors import (
    MalformedRow,
    NegativeVital,
    NonMonotonicTimestamp,
    OverlappingIntervals,
    UnknownLevel,
)

SAMPLE_FIELDS = ("t", "hr", "rr", "sv", "hrv", "b2b")
CSV_HEADER = ",".join(SAMPLE_FIELDS)
LEVEL_NAMES = frozenset(s.level_name for s in Stage)

FORMATS = ("ndjson", "csv")


def _check_format(fmt: str) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}, expected one of {FORMATS}")
    return fmt


def _sample_from_fields(t, vitals, line_no: int) -> VitalsSample:
    if not isinstance(t, int) or isinstance(t, bool):
        raise MalformedRow(line_no, f"t must be an integer, got {t!r}")
    try:
        return VitalsSample(t=t, **vitals)
    except NegativeVital:
        raise
    except (TypeError, ValueError) as exc:
        raise MalformedRow(line_no, str(exc)) from exc


def _parse_ndjson_row(line: str, line_no: int) -> VitalsSample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRow(line_no, f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise MalformedRow(line_no, "expected a JSON object")
    missing = [k for k in SAMPLE_FIELDS if k not in obj]
    if missing:
        raise MalformedRow(line_no, f"missing fields: {', '.join(missing)}")
    vitals = {}
    for k in SAMPLE_FIELDS[1:]:
        v = obj[k]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise MalformedRow(line_no, f"{k} must be a number, got {v!r}")
        vitals[k] = float(v)
    return _sample_from_fields(obj["t"], vitals, line_no)


def _parse_csv_row(row: list[str], line_no: int) -> VitalsSample:
    if len(row) != len(SAMPLE_FIELDS):
        raise MalformedRow(line_no, f"expected {len(SAMPLE_FIELDS)} columns, got {len(row)}")
    try:
        t = int(row[0])
    except ValueError as exc:
        raise MalformedRow(line_no, f"t must be an integer, got {row[0]!r}") from exc
    vitals = {}
    for k, text in zip(SAMPLE_FIELDS[1:], row[1:]):
        try:
            vitals[k] = float(text)
        except ValueError as exc:
            raise MalformedRow(line_no, f"{k} is not a number: {text!r}") from exc
    return _sample_from_fields(t, vitals, line_no)


def parse_night(
    lines: Iterable[str],
    fmt: str,
    night_id: str = "",
    subject_id: str = "",
    start_epoch: Optional[datetime] = None,
) -> NightRecord:
    """Parse a stream of sample lines into a NightRecord.

    Timestamps must be strictly increasing; every missing second between
    consecutive samples is recorded as a gap. Metadata (ids, start time) is
    not carried by the sample formats and is supplied by the caller.
    """
    _check_format(fmt)
    samples: list[VitalsSample] = []
    prev_t: Optional[int] = None

    if fmt == "csv":
        rows = csv.reader(lines)
        try:
            header = next(rows)
        except StopIteration:
            raise MalformedRow(1, "missing csv header") from None
        if [h.strip() for h in header] != list(SAMPLE_FIELDS):
            raise MalformedRow(1, f"bad csv header: {','.join(header)!r}")
        parsed: Iterator[VitalsSample] = (
            _parse_csv_row(row, i) for i, row in enumerate(rows, start=2) if row
        )
    else:
        parsed = (
            _parse_ndjson_row(line, i)
            for i, line in enumerate(lines, start=1)
            if line.strip()
        )

    for sample in parsed:
        if prev_t is not None and sample.t <= prev_t:
            raise NonMonotonicTimestamp(sample.t)
        prev_t = sample.t
        samples.append(sample)

    return NightRecord(
        night_id=night_id,
        subject_id=subject_id,
        start_epoch=start_epoch if start_epoch is not None else EPOCH_ZERO,
        samples=tuple(samples),
        gaps=compute_gaps([s.t for s in samples]),
    )


def sample_line(s: VitalsSample) -> str:
    """One sample as an NDJSON line body; floats use repr() so the decimal
    text recovers the exact double."""
    return (
        f'{{"t":{s.t},"hr":{s.hr!r},"rr":{s.rr!r},"sv":{s.sv!r},'
        f'"hrv":{s.hrv!r},"b2b":{s.b2b!r}}}'
    )


def write_night(record: NightRecord, fmt: str) -> Iterator[str]:
    """Serialize a record as lines (without trailing newlines).

    parse_night(write_night(r)) == r for matching metadata.
    """
    _check_format(fmt)
    if fmt == "csv":
        yield CSV_HEADER
        for s in record.samples:
            yield f"{s.t},{s.hr!r},{s.rr!r},{s.sv!r},{s.hrv!r},{s.b2b!r}"
    else:
        for s in record.samples:
            yield sample_line(s)


def load_night(path, fmt: Optional[str] = None, **meta) -> NightRecord:
    """Read a night file; format inferred from the extension unless given."""
    path = str(path)
    if fmt is None:
        fmt = "csv" if path.endswith(".csv") else "ndjson"
    with open(path, "r", encoding="utf-8") as fh:
        return parse_night(fh, fmt, **meta)


def save_night(record: NightRecord, path, fmt: Optional[str] = None) -> None:
    path = str(path)
    if fmt is None:
        fmt = "csv" if path.endswith(".csv") else "ndjson"
    with open(path, "w", encoding="utf-8") as fh:
        for line in write_night(record, fmt):
            fh.write(line)
            fh.write("\n")


def parse_labels(document) -> list[StageInterval]:
    """Parse a label file (JSON text, file object, or already-decoded dict).

    Returns intervals sorted by start time. Unknown level names and
    overlapping intervals are rejected; a structurally bad level entry
    (missing keys, non-positive duration) raises MalformedRow with the
    entry's index.
    """
    if isinstance(document, (str, bytes)):
        doc = json.loads(document)
    elif hasattr(document, "read"):
        doc = json.load(document)
    else:
        doc = document
    if not isinstance(doc, dict) or not isinstance(doc.get("levels"), list):
        raise MalformedRow(0, 'label file must be an object with a "levels" array')

    entries = []
    for i, level in enumerate(doc["levels"]):
        if not isinstance(level, dict):
            raise MalformedRow(i, "level entry must be an object")
        try:
            name = level["level"]
            start_t = level["start_t"]
            seconds = level["seconds"]
        except KeyError as exc:
            raise MalformedRow(i, f"level entry missing {exc.args[0]!r}") from exc
        if not isinstance(name, str) or name.lower() not in LEVEL_NAMES:
            raise UnknownLevel(name)
        if not isinstance(start_t, int) or isinstance(start_t, bool):
            raise MalformedRow(i, f"start_t must be an integer, got {start_t!r}")
        if not isinstance(seconds, int) or isinstance(seconds, bool) or seconds <= 0:
            raise MalformedRow(i, f"seconds must be a positive integer, got {seconds!r}")
        entries.append((i, StageInterval(Stage.from_name(name), start_t, seconds)))

    entries.sort(key=lambda e: e[1].start_t)
    for (i, a), (j, b) in zip(entries, entries[1:]):
        if b.start_t < a.end_t:
            raise OverlappingIntervals(i, j)
    return [iv for _, iv in entries]


def write_labels(night_id: str, intervals: Iterable[StageInterval]) -> str:
    """Serialize intervals to the label-file JSON document."""
    levels = [
        {"level": iv.stage.level_name, "start_t": iv.start_t, "seconds": iv.duration}
        for iv in sorted(intervals, key=lambda iv: iv.start_t)
    ]
    return json.dumps({"night_id": night_id, "levels": levels}, indent=2, sort_keys=True)


def load_labels(path) -> list[StageInterval]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_labels(fh)


def align_labels(
    record: NightRecord, intervals: Iterable[StageInterval]
) -> list[Optional[Stage]]:
    """Expand intervals to one label per second over [0, last_t].

    Seconds covered by no interval are None (unlabeled): the reference
    tracker's log does not necessarily span the whole recording.
    """
    n = record.last_t + 1
    labels: list[Optional[Stage]] = [None] * max(n, 0)
    for iv in intervals:
        lo = max(iv.start_t, 0)
        hi = min(iv.end_t, n)
        for s in range(lo, hi):
            labels[s] = iv.stage
    return labels
