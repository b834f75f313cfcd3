"""Embedding and signal CSV files, and JSON reports.

Embedding CSV header::

    index,phase,true_label,predicted_label,softmax_0..softmax_{v-1},e_0..e_{k-1}

``true_label`` and the softmax cells may be empty. Floats are written with
``repr`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from depthmon.charting import SignalRecord
from depthmon.errors import DataError, ParseError
from depthmon.reference import EmbeddingRecord, Phase

FIXED_COLUMNS = ("index", "phase", "true_label", "predicted_label")
SIGNAL_COLUMNS = ("index", "class_used", "statistic", "signal", "phase")


def _numbered(prefix: str, names: Sequence[str]) -> int:
    for i, name in enumerate(names):
        if name != f"{prefix}{i}":
            raise ParseError(f"expected column {prefix}{i}, found {name!r}", 1)
    return len(names)


def _split_header(header: Sequence[str]) -> tuple[int, int]:
    header = [h.strip() for h in header]
    if tuple(header[:4]) != FIXED_COLUMNS:
        raise ParseError(f"header must start with {','.join(FIXED_COLUMNS)}", 1)
    rest = header[4:]
    n_soft = sum(1 for h in rest if h.startswith("softmax_"))
    v = _numbered("softmax_", rest[:n_soft])
    k = _numbered("e_", rest[n_soft:])
    if k == 0:
        raise ParseError("no embedding columns e_0..", 1)
    return v, k


def _int(cell: str, what: str, line: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ParseError(f"{what} {cell!r} is not an integer", line) from None


def _float(cell: str, what: str, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"{what} {cell!r} is not numeric", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} is not finite", line)
    return value


def parse_embeddings_csv(path: str | os.PathLike) -> list[EmbeddingRecord]:
    """Read records from an embedding CSV.

    Raises:
        ParseError: Bad header, ragged row, non-numeric cell, unknown phase
            or a record that violates the record invariants; the message
            carries the 1-based line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, header missing", 1) from None
        v, k = _split_header(header)
        width = 4 + v + k
        records = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} cells, found {len(row)}", line)
            row = [c.strip() for c in row]
            index = _int(row[0], "index", line)
            try:
                phase = Phase(row[1])
            except ValueError:
                raise ParseError(f"unknown phase {row[1]!r}", line) from None
            true_label = _int(row[2], "true_label", line) if row[2] else None
            if not row[3]:
                raise ParseError("predicted_label is empty", line)
            predicted = _int(row[3], "predicted_label", line)
            soft_cells = row[4 : 4 + v]
            if v and all(c == "" for c in soft_cells):
                softmax = None
            elif any(c == "" for c in soft_cells):
                raise ParseError("softmax cells must be all filled or all empty", line)
            else:
                softmax = np.array([_float(c, "softmax", line) for c in soft_cells]) if v else None
            emb = np.array([_float(c, f"e_{j}", line) for j, c in enumerate(row[4 + v :])])
            try:
                records.append(EmbeddingRecord(index, emb, predicted, phase, true_label, softmax))
            except DataError as exc:
                raise ParseError(str(exc), line) from None
    return records


def _fmt(x: float) -> str:
    return repr(float(x))


def write_embeddings_csv(path: str | os.PathLike, records: Sequence[EmbeddingRecord]) -> None:
    if not records:
        raise DataError("no records to write")
    k = records[0].embedding.size
    v = max((r.softmax.size for r in records if r.softmax is not None), default=0)
    header = list(FIXED_COLUMNS) + [f"softmax_{j}" for j in range(v)] + [f"e_{j}" for j in range(k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in records:
            if r.embedding.size != k:
                raise DataError(f"record {r.index}: embedding length {r.embedding.size} != {k}")
            soft = [""] * v if r.softmax is None else [_fmt(s) for s in r.softmax]
            w.writerow(
                [r.index, r.phase.value, "" if r.true_label is None else r.true_label, r.predicted_label]
                + soft
                + [_fmt(e) for e in r.embedding]
            )


def write_dataset_csv(path: str | os.PathLike, x: np.ndarray, phases: Sequence[Phase], labels) -> None:
    """Raw inputs as ``index,phase,true_label,x_0..x_{d-1}``."""
    x = np.atleast_2d(x)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "phase", "true_label"] + [f"x_{j}" for j in range(x.shape[1])])
        for i, (row, phase, label) in enumerate(zip(x, phases, labels)):
            w.writerow([i, Phase(phase).value, "" if label is None else label] + [_fmt(v) for v in row])


def write_signals_csv(path: str | os.PathLike, signals: Iterable[SignalRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGNAL_COLUMNS)
        for s in signals:
            w.writerow([s.index, s.class_used, _fmt(s.statistic), int(s.signal), s.phase.value])


def read_signals_csv(path: str | os.PathLike) -> list[SignalRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SIGNAL_COLUMNS:
            raise ParseError(f"header must be {','.join(SIGNAL_COLUMNS)}", 1)
        out = []
        for row in reader:
            line = reader.line_num
            if len(row) != len(SIGNAL_COLUMNS):
                raise ParseError(f"expected {len(SIGNAL_COLUMNS)} cells, found {len(row)}", line)
            try:
                phase = Phase(row[4])
            except ValueError:
                raise ParseError(f"unknown phase {row[4]!r}", line) from None
            if row[3] not in ("0", "1"):
                raise ParseError(f"signal must be 0 or 1, found {row[3]!r}", line)
            out.append(
                SignalRecord(
                    _int(row[0], "index", line),
                    _int(row[1], "class_used", line),
                    _float(row[2], "statistic", line),
                    row[3] == "1",
                    phase,
                )
            )
    return out


def write_json(path: str | os.PathLike, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | os.PathLike) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def safe_label(label: str) -> str:
    """File-name friendly version of a method label."""
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)
