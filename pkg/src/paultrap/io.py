"""CSV tables with ``#`` metadata lines and a little-endian wavefunction format."""
import csv
import struct

import numpy as np

from .quantum import Grid, WaveState

SNAPSHOT_MAGIC = b"PTWS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIddQdd")


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(path, header, columns, meta=None):
    """Write equal-length ``columns`` under ``header``.

    Floats use 17 significant digits so that reading back is lossless.
    ``meta`` entries become ``# key: value`` lines above the header.
    """
    columns = [np.asarray(c) for c in columns]
    if len(columns) != len(header):
        raise ValueError("one column per header entry")
    n = len(columns[0]) if columns else 0
    if any(len(c) != n for c in columns):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {_fmt(value)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([_fmt(c[i].item() if hasattr(c[i], "item") else c[i]) for c in columns])


def read_csv(path):
    """Return ``(meta, header, data)`` with ``data`` a float array (rows x columns)."""
    meta = {}
    rows = []
    header = None
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif header is None:
                header = next(csv.reader([line]))
            elif line.strip():
                rows.append([float(v) for v in next(csv.reader([line]))])
    data = np.array(rows, dtype=float).reshape(-1, len(header or []))
    return meta, header, data


def write_snapshot(path, state):
    g = state.grid
    head = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.x_min, g.x_max,
                        g.n_points, state.t, state.hbar)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(state.psi, dtype="<c16").tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, version, x_min, x_max, n, t, hbar = _HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a wavefunction snapshot")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    data = raw[_HEADER.size:]
    if len(data) != 16 * n:
        raise ValueError(f"expected {n} amplitudes, found {len(data) // 16}")
    psi = np.frombuffer(data, dtype="<c16").astype(complex)
    return WaveState(Grid(x_min, x_max, int(n)), psi, hbar, t)
