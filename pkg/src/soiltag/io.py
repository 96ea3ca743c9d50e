"""File formats: deterministic JSON/CSV with atomic writes, plus round-trip readers."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from collections import defaultdict
from pathlib import Path

import numpy as np

from .channel import CsiProfile
from .estimator import Dataset
from .features import FeatureVector

CSI_HEADER = ("packet", "channel", "subcarrier", "freq_hz", "rx_element", "re", "im")
FEATURE_HEADER = ("freq_hz", "gain_db")
DATASET_META = ("env", "packet", "label")


def atomic_write_text(path, text: str) -> Path:
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
    return path


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays and tuples become Python lists/floats."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, dumps_json(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip form
    return str(v)


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, dumps_csv(header, rows))


def write_table(path, header, rows, fmt: str = "csv") -> Path:
    """A table as CSV, or as a JSON list of records; the suffix follows ``fmt``."""
    path = Path(path).with_suffix("." + fmt)
    if fmt == "csv":
        return write_csv(path, header, rows)
    if fmt == "json":
        return write_json(path, [dict(zip(header, r)) for r in rows])
    raise ValueError(f"unknown table format {fmt!r}")


def read_table(path) -> tuple[list[str], list[list[str]]]:
    """Header and string rows from a CSV or JSON-records table."""
    path = Path(path)
    if path.suffix == ".json":
        recs = read_json(path)
        if not isinstance(recs, list) or not recs:
            raise ValueError(f"{path}: expected a non-empty list of records")
        header = list(recs[0])
        return header, [[str(r[k]) for k in header] for r in recs]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty table")
    return rows[0], rows[1:]


def _require(header, needed, path):
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return [header.index(c) for c in needed]


# --- raw CSI ----------------------------------------------------------------


def csi_rows(packets):
    """Rows for ``packets``: an iterable of (packet_index, list of CsiProfile)."""
    for k, profiles in packets:
        for p in profiles:
            h = p.h if p.h.ndim == 2 else p.h[:, None]
            for s, f in enumerate(p.subcarrier_freqs):
                for m in range(h.shape[1]):
                    z = h[s, m]
                    yield (k, p.channel_index, s, float(f), m, float(z.real), float(z.imag))


def write_csi(path, packets, fmt="csv") -> Path:
    return write_table(path, CSI_HEADER, list(csi_rows(packets)), fmt)


def read_csi(path) -> dict[int, list[CsiProfile]]:
    """Packet index -> per-channel profiles, channels ascending."""
    header, rows = read_table(path)
    ix = _require(header, CSI_HEADER, path)
    acc = defaultdict(lambda: defaultdict(dict))
    for r in rows:
        k, c, s, f, m, re, im = (r[i] for i in ix)
        acc[int(k)][int(c)][(int(s), int(m))] = (float(f), complex(float(re), float(im)))
    out = {}
    for k in sorted(acc):
        profiles = []
        for c in sorted(acc[k]):
            cells = acc[k][c]
            ns = max(s for s, _ in cells) + 1
            nm = max(m for _, m in cells) + 1
            if len(cells) != ns * nm:
                raise ValueError(f"{path}: packet {k} channel {c} has missing cells")
            freqs = np.array([cells[(s, 0)][0] for s in range(ns)])
            h = np.array([[cells[(s, m)][1] for m in range(nm)] for s in range(ns)])
            profiles.append(CsiProfile(c, freqs, h))
        out[k] = profiles
    return out


# --- features and datasets --------------------------------------------------


def write_features(path, fv: FeatureVector, fmt="csv") -> Path:
    return write_table(path, FEATURE_HEADER, list(zip(fv.freqs.tolist(), fv.gain_db.tolist())), fmt)


def read_features(path) -> FeatureVector:
    header, rows = read_table(path)
    i, j = _require(header, FEATURE_HEADER, path)
    return FeatureVector([float(r[i]) for r in rows], [float(r[j]) for r in rows])


def _freq_col(f: float) -> str:
    return f"{f:.1f}"


def write_dataset(path, data: Dataset, fmt="csv") -> Path:
    header = list(DATASET_META) + [_freq_col(f) for f in data.freqs]
    rows = []
    for i in range(len(data)):
        m = data.meta[i]
        rows.append([m.get("env", ""), m.get("packet", i), float(data.y[i])] + data.X[i].tolist())
    return write_table(path, header, rows, fmt)


def read_dataset(path) -> Dataset:
    header, rows = read_table(path)
    _require(header, ("label",), path)
    fcols = [c for c in header if c not in DATASET_META]
    if not fcols:
        raise ValueError(f"{path}: no feature columns")
    fidx = [header.index(c) for c in fcols]
    li = header.index("label")
    meta = []
    for r in rows:
        m = {}
        if "env" in header:
            m["env"] = r[header.index("env")]
        if "packet" in header:
            m["packet"] = int(r[header.index("packet")])
        meta.append(m)
    X = np.array([[float(r[i]) for i in fidx] for r in rows]).reshape(len(rows), len(fcols))
    y = np.array([float(r[li]) for r in rows])
    return Dataset(np.array([float(c) for c in fcols]), X, y, meta)
