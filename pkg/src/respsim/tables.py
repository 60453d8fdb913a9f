"""Plain-text persistence of Green's tables and 1-d series.

A table is a CSV with header ``t_m,t_int,G,sigma_G``; rows run over ``t_m``
(outer) and ``t_int`` (inner).  Numbers use 17 significant digits, which
round-trips IEEE doubles exactly.  A JSON sidecar next to the CSV holds the
grid step, the shape and the table metadata.
"""

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .continuum import GreensTable

TABLE_HEADER = ("t_m", "t_int", "G", "sigma_G")
FLOAT_FORMAT = ".17g"
# longest '.17g' rendering of a double, e.g. "-1.2345678901234567e-100"
MAX_FIELD_WIDTH = 24


class TableFormatError(ValueError):
    pass


def _fmt(x):
    return format(float(x), FLOAT_FORMAT)


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def table_size_bound(M, K):
    """Upper bound in bytes of the CSV for an ``M x K`` table."""
    per_row = len(TABLE_HEADER) * MAX_FIELD_WIDTH + len(TABLE_HEADER)
    return len(",".join(TABLE_HEADER)) + 1 + M * K * per_row


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    return obj


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_table(table, path):
    M, K = table.shape
    lines = [",".join(TABLE_HEADER)]
    t_m, t_int = table.t_m, table.t_int
    for j in range(M):
        tj = _fmt(t_m[j])
        for k in range(K):
            lines.append(f"{tj},{_fmt(t_int[k])},{_fmt(table.values[j, k])},{_fmt(table.errors[j, k])}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    write_json(sidecar_path(path), {"dt": table.dt, "shape": [M, K], "metadata": table.metadata})


def read_table(path):
    path = Path(path)
    side = sidecar_path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such table")
    if not side.exists():
        raise TableFormatError(f"{path}: missing sidecar {side.name}")
    meta = json.loads(side.read_text())
    try:
        dt = float(meta["dt"])
        M, K = (int(n) for n in meta["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise TableFormatError(f"{side}: needs 'dt' and 'shape' entries") from exc
    values = np.empty((M, K))
    errors = np.empty((M, K))
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(h.strip() for h in header) != TABLE_HEADER:
            raise TableFormatError(f"{path}: line 1: expected header {','.join(TABLE_HEADER)!r}, got {','.join(header or [])!r}")
        n = 0
        for line, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != len(TABLE_HEADER):
                raise TableFormatError(f"{path}: line {line}: expected {len(TABLE_HEADER)} columns, got {len(row)}")
            if n >= M * K:
                raise TableFormatError(f"{path}: line {line}: more rows than the declared {M}x{K} shape")
            try:
                nums = [float(x) for x in row]
            except ValueError as exc:
                col = next(c for c, x in enumerate(row) if not _is_float(x))
                raise TableFormatError(f"{path}: line {line}, column {TABLE_HEADER[col]}: not a number: {row[col]!r}") from exc
            j, k = divmod(n, K)
            for col, expect in ((0, j * dt), (1, k * dt)):
                if abs(nums[col] - expect) > 1e-9 * max(1.0, abs(expect)):
                    raise TableFormatError(
                        f"{path}: line {line}, column {TABLE_HEADER[col]}: expected {expect!r}, got {nums[col]!r}"
                    )
            values[j, k], errors[j, k] = nums[2], nums[3]
            n += 1
    if n != M * K:
        raise TableFormatError(f"{path}: {n} data rows, expected {M * K} for shape {M}x{K}")
    return GreensTable(dt, values, errors, meta.get("metadata", {}))


def _is_float(x):
    try:
        float(x)
    except ValueError:
        return False
    return True


def write_series(path, columns, metadata=None):
    """CSV of equal-length named columns, plus an optional JSON sidecar."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    if len({d.shape for d in data}) > 1:
        raise ValueError("series columns must have equal length")
    lines = [",".join(names)]
    lines += [",".join(_fmt(d[i]) for d in data) for i in range(data[0].size if data else 0)]
    atomic_write_text(path, "\n".join(lines) + "\n")
    if metadata is not None:
        write_json(sidecar_path(path), metadata)


def read_series(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TableFormatError(f"{path}: empty file")
    names = rows[0]
    body = [r for r in rows[1:] if r]
    for line, r in enumerate(body, start=2):
        if len(r) != len(names):
            raise TableFormatError(f"{path}: line {line}: expected {len(names)} columns, got {len(r)}")
    return {n: np.array([float(r[c]) for r in body]) for c, n in enumerate(names)}
