"""CSV persistence.

Every file starts with a block of ``#`` lines (schema version, config hash,
seed) followed by a plain CSV header.  Numbers are written with ``repr`` so
files round-trip exactly and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import ParseError

__all__ = [
    "SCHEMA_VERSION",
    "TRAJECTORY_COLUMNS",
    "write_csv",
    "read_csv",
    "write_trajectories",
    "ingest_outcomes",
    "read_trajectory_file",
]

SCHEMA_VERSION = 1
TRAJECTORY_COLUMNS = ("trajectory_id", "step_index", "time_us", "true_n", "true_parity", "outcome", "filter_parity")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        if np.isnan(v):
            return ""
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows, meta: dict | None = None) -> Path:
    """Write rows under a commented metadata block; ``meta`` keys are written sorted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    for k in sorted(meta or {}):
        buf.write(f"# {k}={meta[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path):
    """Return ``(meta, header, rows)`` with ``rows`` as ``(line_number, list_of_str)``."""
    path = Path(path)
    meta = {}
    header = None
    rows = []
    with path.open(newline="") as fh:
        data_lines = []
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
                continue
            if line.strip():
                data_lines.append((lineno, line))
    reader = csv.reader([ln for _, ln in data_lines])
    for (lineno, _), fields in zip(data_lines, reader):
        if header is None:
            header = [f.strip() for f in fields]
        else:
            rows.append((lineno, fields))
    if header is None:
        raise ParseError(f"{path}: no CSV header found")
    return meta, header, rows


def write_trajectories(path, records, filter_parity=None, meta=None, trajectory_ids=None) -> Path:
    """One row per (trajectory, step) in the ``TRAJECTORY_COLUMNS`` layout."""
    ids = list(trajectory_ids) if trajectory_ids is not None else list(range(len(records)))

    def rows():
        for j, (tid, rec) in enumerate(zip(ids, records)):
            fp = filter_parity[j] if filter_parity is not None else None
            for k in range(len(rec.times)):
                yield (
                    tid,
                    k,
                    float(rec.times[k]),
                    int(rec.photon_number[k]),
                    int(rec.true_parity[k]),
                    int(rec.outcomes[k]),
                    None if fp is None else float(fp[k]),
                )

    return write_csv(path, TRAJECTORY_COLUMNS, rows(), meta)


def _parse_outcome(text: str, where: str) -> int:
    t = text.strip()
    if t in ("1", "+1"):
        return 1
    if t == "-1":
        return -1
    if t in ("0", "+0", "-0"):
        return 0
    raise ParseError(f"{where}: outcome {text!r} not in {{+1, -1, 0}}")


def read_trajectory_file(path):
    """Parse a trajectory/outcome CSV.

    Returns ``(meta, data)`` where ``data`` maps trajectory id to a dict with
    ``outcomes`` (int8 array) and, when every row carries one, ``filter_parity``.
    Rows must form gap-free step sequences starting at 0 for each trajectory.
    """
    meta, header, rows = read_csv(path)
    for col in ("trajectory_id", "step_index", "outcome"):
        if col not in header:
            raise ParseError(f"{path}: missing required column {col!r}")
    i_id, i_step, i_out = (header.index(c) for c in ("trajectory_id", "step_index", "outcome"))
    i_fp = header.index("filter_parity") if "filter_parity" in header else None
    seqs: dict[int, dict[int, tuple[int, float | None]]] = {}
    for lineno, fields in rows:
        where = f"{path}:{lineno}"
        if len(fields) != len(header):
            raise ParseError(f"{where}: expected {len(header)} fields, got {len(fields)}")
        try:
            tid = int(fields[i_id])
            step = int(fields[i_step])
        except ValueError:
            raise ParseError(f"{where}: trajectory_id and step_index must be integers") from None
        if step < 0:
            raise ParseError(f"{where}: negative step_index {step}")
        out = _parse_outcome(fields[i_out], where)
        fp = None
        if i_fp is not None and fields[i_fp].strip():
            try:
                fp = float(fields[i_fp])
            except ValueError:
                raise ParseError(f"{where}: filter_parity {fields[i_fp]!r} is not a number") from None
        seq = seqs.setdefault(tid, {})
        if step in seq:
            raise ParseError(f"{where}: duplicate step {step} for trajectory {tid}")
        seq[step] = (out, fp)
    data = {}
    for tid in sorted(seqs):
        seq = seqs[tid]
        n = len(seq)
        if set(seq) != set(range(n)):
            missing = sorted(set(range(max(seq) + 1)) - set(seq))
            raise ParseError(f"{path}: trajectory {tid} has gaps at steps {missing[:5]}")
        outcomes = np.array([seq[k][0] for k in range(n)], dtype=np.int8)
        fps = [seq[k][1] for k in range(n)]
        entry = {"outcomes": outcomes}
        if all(v is not None for v in fps):
            entry["filter_parity"] = np.array(fps, dtype=float)
        data[tid] = entry
    return meta, data


def ingest_outcomes(path, config=None) -> dict[int, np.ndarray]:
    """Outcome sequences keyed by trajectory id, validated and gap-free.

    With ``config`` given, every sequence must fit in the configured record
    length.
    """
    _, data = read_trajectory_file(path)
    out = {tid: d["outcomes"] for tid, d in data.items()}
    if config is not None:
        n_steps = config.sims[0].n_steps
        for tid, seq in out.items():
            if len(seq) > n_steps:
                raise ParseError(f"{path}: trajectory {tid} has {len(seq)} steps, config allows {n_steps}")
    return out
