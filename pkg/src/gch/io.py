"""Binary field snapshots and the versioned diagnostics CSV stream."""
from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .spectral import Field, Grid

MAGIC = b"GCHFLD01"
FORMAT_VERSION = 1
# magic, version, L, N, n, Q, t, profile hash (16 ascii hex chars)
_HEADER = struct.Struct("<8sIdQqqd16s")

CSV_VERSION = "gch-diagnostics v1"
CSV_COLUMNS = ["t", "E", "F", "sup_norm", "lipschitz_norm", "besov_1_inf_1", "restricted_norm"]
CSV_EXTRA = ["n", "Q", "initial_norm", "ratio"]


def write_field(path, f: Field, *, n: int = 0, Q: int = 0, t: float = 0.0, profile_hash: str = "0" * 16):
    h = profile_hash.encode("ascii")
    if len(h) != 16:
        raise ValueError("profile hash must be 16 ascii characters")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, f.grid.L, f.grid.N, int(n), int(Q), float(t), h)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(f.samples, dtype="<f8").tobytes())


def read_field(path) -> tuple:
    """Return ``(Field, header dict)``; rejects foreign or truncated files."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("file too short for a field header")
    magic, version, L, N, n, Q, t, h = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a gch field file")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported field format version {version}")
    payload = data[_HEADER.size:]
    if len(payload) != 8 * N:
        raise ValueError(f"payload holds {len(payload)} bytes, expected {8 * N}")
    samples = np.frombuffer(payload, dtype="<f8")
    meta = {"L": L, "N": N, "n": n, "Q": Q, "t": t, "profile_hash": h.decode("ascii"), "version": version}
    return Field(Grid(L, N), samples), meta


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_diagnostics(path, rows, extra: bool = False):
    """Write rows (dicts keyed by column name) under the frozen, versioned header."""
    cols = CSV_COLUMNS + (CSV_EXTRA if extra else [])
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


def read_diagnostics(path) -> list:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {CSV_VERSION}":
            raise ValueError(f"unexpected diagnostics header {first!r}")
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]
