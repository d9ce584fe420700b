"""File formats: dense tensors (QTD1), sparse observations (QTO1), and the
sweep record CSV.

QTD1 is a UTF-8 header line ``qtensor-dense v1``, a line of space-separated
extents, then the row-major little-endian float64 payload.  QTO1 is UTF-8
CSV with two comment headers (``# shape n1 ... nK`` and ``# W <levels>``)
followed by ``i1,...,iK,label`` rows with 1-based indices.
"""

from __future__ import annotations

import csv

import numpy as np

from .quantization import QuantizedObservations
from .tensor_core import ObservationSet

__all__ = [
    "FileFormatError",
    "read_observations",
    "read_records",
    "read_tensor",
    "write_observations",
    "write_records",
    "write_tensor",
]

TENSOR_MAGIC = "qtensor-dense v1"

RECORD_COLUMNS = [
    "run_id",
    "seed",
    "shape",
    "r_true",
    "r_est",
    "sigma_true",
    "sigma_est",
    "levels",
    "obs_rate",
    "boundaries_known",
    "rel_error",
    "pred_error",
    "iterations",
    "wall_time_ms",
    "omega_hat",
]


class FileFormatError(ValueError):
    """Malformed input file; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def write_tensor(path, x: np.ndarray) -> None:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ValueError("expected a tensor of at least two modes")
    with open(path, "wb") as fh:
        fh.write(f"{TENSOR_MAGIC}\n".encode("utf-8"))
        fh.write((" ".join(str(n) for n in x.shape) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(x).astype("<f8").tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    head, sep, rest = blob.partition(b"\n")
    if not sep or head.decode("utf-8", errors="replace") != TENSOR_MAGIC:
        raise FileFormatError(f"bad magic, expected {TENSOR_MAGIC!r}", line=1)
    extents_raw, sep, payload = rest.partition(b"\n")
    if not sep:
        raise FileFormatError("missing extents line", line=2)
    try:
        shape = tuple(int(tok) for tok in extents_raw.decode("utf-8").split())
    except ValueError as exc:
        raise FileFormatError(f"bad extents line: {exc}", line=2) from None
    if len(shape) < 2 or any(n < 1 for n in shape):
        raise FileFormatError(f"invalid tensor shape {shape}", line=2)
    count = int(np.prod(shape))
    if len(payload) < 8 * count:
        raise FileFormatError(
            f"payload holds {len(payload)} bytes, expected {8 * count}"
        )
    if len(payload) > 8 * count:
        raise FileFormatError(f"{len(payload) - 8 * count} trailing bytes after payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)


def write_observations(path, qobs: QuantizedObservations) -> None:
    idx = qobs.observations.tuples_1based()
    k = idx.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# shape " + " ".join(str(n) for n in qobs.shape) + "\n")
        fh.write(f"# W {qobs.levels}\n")
        fh.write(",".join(f"i{j + 1}" for j in range(k)) + ",label\n")
        for row, label in zip(idx, qobs.labels):
            fh.write(",".join(str(v) for v in row) + f",{label}\n")


def read_observations(path) -> QuantizedObservations:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 4:
        raise FileFormatError("file too short for the observation format")
    if not lines[0].startswith("# shape "):
        raise FileFormatError("expected '# shape n1 ... nK'", line=1)
    try:
        shape = tuple(int(tok) for tok in lines[0][len("# shape ") :].split())
    except ValueError as exc:
        raise FileFormatError(f"bad shape header: {exc}", line=1) from None
    if not lines[1].startswith("# W "):
        raise FileFormatError("expected '# W <levels>'", line=2)
    try:
        levels = int(lines[1][len("# W ") :].strip())
    except ValueError as exc:
        raise FileFormatError(f"bad level header: {exc}", line=2) from None
    k = len(shape)
    expected_header = ",".join(f"i{j + 1}" for j in range(k)) + ",label"
    if lines[2] != expected_header:
        raise FileFormatError(f"expected CSV header {expected_header!r}", line=3)
    rows = []
    labels = []
    for lineno, line in enumerate(lines[3:], start=4):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != k + 1:
            raise FileFormatError(f"expected {k + 1} fields, got {len(parts)}", line=lineno)
        try:
            values = [int(p) for p in parts]
        except ValueError as exc:
            raise FileFormatError(f"bad integer: {exc}", line=lineno) from None
        idx = values[:k]
        if any(not 1 <= idx[j] <= shape[j] for j in range(k)):
            raise FileFormatError(f"index {tuple(idx)} outside shape {shape}", line=lineno)
        if not 1 <= values[k] <= levels:
            raise FileFormatError(f"label {values[k]} outside 1..{levels}", line=lineno)
        rows.append(idx)
        labels.append(values[k])
    if not rows:
        raise FileFormatError("no observation rows")
    idx = np.asarray(rows, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    lin = np.ravel_multi_index(tuple((idx - 1).T), shape)
    order = np.argsort(lin, kind="stable")
    lin = lin[order]
    dup = np.flatnonzero(np.diff(lin) == 0)
    if dup.size:
        raise FileFormatError(f"duplicate index tuple at sorted position {dup[0] + 1}")
    try:
        obs = ObservationSet(shape, lin)
        return QuantizedObservations(observations=obs, labels=labels[order], levels=levels)
    except ValueError as exc:
        raise FileFormatError(str(exc)) from None


def _format_float(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if np.isnan(value):
        return "nan"
    return repr(value)


def write_records(path, records) -> None:
    """Records CSV in the exact RunRecord column order, UTF-8 with LF."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.run_id,
                    rec.seed,
                    "x".join(str(n) for n in rec.shape),
                    rec.r_true,
                    rec.r_est,
                    _format_float(rec.sigma_true),
                    _format_float(rec.sigma_est),
                    rec.levels,
                    _format_float(rec.obs_rate),
                    "true" if rec.boundaries_known else "false",
                    _format_float(rec.rel_error),
                    _format_float(rec.pred_error),
                    rec.iterations,
                    _format_float(rec.wall_time_ms),
                    ";".join(repr(float(w)) for w in rec.omega_hat),
                ]
            )


def read_records(path) -> list:
    """Parse a records CSV back into RunRecord objects."""
    from .experiments import RunRecord

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError("empty records file") from None
        if header != RECORD_COLUMNS:
            raise FileFormatError(f"unexpected header {header}", line=1)
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORD_COLUMNS):
                raise FileFormatError(
                    f"expected {len(RECORD_COLUMNS)} fields, got {len(row)}", line=lineno
                )
            try:
                out.append(
                    RunRecord(
                        run_id=row[0],
                        seed=int(row[1]),
                        shape=tuple(int(n) for n in row[2].split("x")),
                        r_true=int(row[3]),
                        r_est=int(row[4]),
                        sigma_true=float(row[5]),
                        sigma_est=float(row[6]),
                        levels=int(row[7]),
                        obs_rate=float(row[8]),
                        boundaries_known=row[9] == "true",
                        rel_error=float(row[10]),
                        pred_error=float(row[11]) if row[11] else None,
                        iterations=int(row[12]),
                        wall_time_ms=float(row[13]),
                        omega_hat=tuple(float(w) for w in row[14].split(";")) if row[14] else (),
                    )
                )
            except ValueError as exc:
                raise FileFormatError(f"bad record: {exc}", line=lineno) from None
    return out
