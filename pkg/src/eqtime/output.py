"""Buffered output with all-or-nothing commits, CSV/JSON formatting and manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Dict, Sequence

import numpy as np

__all__ = ["OutputSet", "csv_text", "json_text", "sha256"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header: Sequence[str], columns) -> str:
    """Comma-separated text with 17 significant digits, so floats round-trip."""
    cols = [np.asarray(c) if not isinstance(c, list) else c for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(n):
        w.writerow([_fmt(c[i]) for c in cols])
    return buf.getvalue()


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite_floats(obj):
    if isinstance(obj, dict):
        return {k: _finite_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite_floats(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return str(float(obj))
    return obj


def json_text(obj) -> str:
    """JSON with non-finite floats written as the strings "inf" / "nan"."""
    return json.dumps(_finite_floats(obj), indent=2, sort_keys=True, default=_default) + "\n"


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class OutputSet:
    """Files collected in memory and written together by :meth:`commit`.

    Each file goes to a temporary name in the target directory and is then
    renamed, so readers never see a partial file and a failed run writes
    nothing.
    """

    def __init__(self):
        self.files: Dict[str, bytes] = {}

    def add_text(self, name: str, text: str) -> None:
        if name in self.files:
            raise ValueError(f"duplicate output file {name}")
        self.files[name] = text.encode("utf-8")

    def add_csv(self, name: str, header, columns) -> None:
        self.add_text(name, csv_text(header, columns))

    def add_json(self, name: str, obj) -> None:
        self.add_text(name, json_text(obj))

    def merge(self, other: "OutputSet", prefix: str) -> None:
        for name, data in other.files.items():
            self.files[f"{prefix}/{name}"] = data

    def inventory(self) -> Dict[str, dict]:
        return {n: {"sha256": sha256(d), "bytes": len(d)} for n, d in sorted(self.files.items())}

    def commit(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            target = out / name
            target.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".tmp-", suffix=target.suffix)
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(self.files[name])
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
