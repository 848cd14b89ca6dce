"""Atomic file writes and small text formats shared by the modules."""
from __future__ import annotations

import csv
import io
import os
import tempfile

import numpy as np


def atomic_write_bytes(path, data: bytes):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode())


def fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_polylines(path, polylines):
    """One 'L' block per polyline: vertex count, then x y z lines."""
    out = []
    for p in polylines:
        p = np.asarray(p)
        out.append(f"L {len(p)}")
        out += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in p]
    atomic_write_text(path, "\n".join(out) + ("\n" if out else ""))


def read_polylines(path):
    lines = [l.split() for l in open(path) if l.strip()]
    polys, i = [], 0
    while i < len(lines):
        if lines[i][0] != "L":
            raise ValueError(f"malformed polyline file at line {i + 1}")
        k = int(lines[i][1])
        polys.append(np.array([[float(v) for v in lines[i + 1 + j]] for j in range(k)]).reshape(-1, 3))
        i += k + 1
    return polys
