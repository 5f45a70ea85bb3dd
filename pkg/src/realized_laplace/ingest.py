"""Reading observation files into :class:`PathGrid` and writing results back out.

Path files are CSV with header ``i,x`` and a JSON sidecar (same stem,
``.json`` suffix) that records ``delta_n`` and the simulation settings.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .levy_sim import PathGrid

__all__ = [
    "IngestSpec",
    "ingest",
    "sidecar_path",
    "write_path_csv",
    "curve_csv",
    "to_jsonable",
]


@dataclass
class IngestSpec:
    """How to turn a text file into a path.

    ``fmt`` is ``"auto"`` (one column -> levels, two -> timestamp + level),
    ``"levels"`` or ``"timestamped"``. ``returns=True`` means the level
    column already holds increments. ``delta_n=None`` reads the mesh from
    the sidecar file.
    """

    path: str | Path
    delta_n: float | None = None
    fmt: str = "auto"
    returns: bool = False
    log_transform: bool = False
    strict: bool = False
    tolerance: float = 0.01


def sidecar_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _parse_time(s: str, row: int) -> float:
    try:
        return float(s)
    except ValueError:
        pass
    try:
        return float(np.datetime64(s.strip(), "ns").astype("int64")) / 1e9
    except ValueError:
        raise InputError(f"row {row}: cannot parse timestamp {s!r}") from None


def _read_rows(path: Path) -> list[tuple[int, list[str]]]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        rows.append((lineno, cells))
    if rows and not all(_is_number(c) for c in rows[0][1][-1:]):
        rows = rows[1:]  # header
    return rows


def _check_spacing(times: np.ndarray, spec: IngestSpec) -> None:
    d = np.diff(times)
    if np.any(d <= 0):
        raise InputError("timestamps must be strictly increasing")
    vals, counts = np.unique(np.round(d, 9), return_counts=True)
    mode = vals[np.argmax(counts)]
    bad = np.nonzero(np.abs(d - mode) > spec.tolerance * mode)[0]
    if bad.size:
        msg = (
            f"{bad.size} of {d.size} timestamp gaps deviate from the modal spacing {mode:g} "
            f"by more than {spec.tolerance:.0%} (first at data row {bad[0] + 2})"
        )
        if spec.strict:
            raise InputError(msg)
        warnings.warn(msg + "; using positional indexing", UserWarning, stacklevel=3)


def ingest(spec: IngestSpec) -> PathGrid:
    path = Path(spec.path)
    rows = _read_rows(path)
    if not rows:
        raise InputError(f"{path}: no data rows")
    ncol = len(rows[0][1])
    fmt = spec.fmt
    if fmt == "auto":
        fmt = "levels" if ncol == 1 else "timestamped"
    if fmt not in ("levels", "timestamped"):
        raise InputError(f"unknown format {spec.fmt!r}")
    want = 1 if fmt == "levels" else 2

    times, levels = [], []
    for lineno, cells in rows:
        if len(cells) < want:
            raise InputError(f"row {lineno}: expected {want} column(s), got {len(cells)}")
        try:
            x = float(cells[want - 1])
        except ValueError:
            raise InputError(f"row {lineno}: cannot parse value {cells[want - 1]!r}") from None
        if not math.isfinite(x):
            raise InputError(f"row {lineno}: non-finite value")
        levels.append(x)
        if fmt == "timestamped":
            times.append(_parse_time(cells[0], lineno))

    if fmt == "timestamped" and len(times) > 1:
        _check_spacing(np.asarray(times), spec)

    delta_n = spec.delta_n
    meta = {}
    side = sidecar_path(path)
    if side.exists() and side != path:
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError:
            meta = {}
    if delta_n is None:
        delta_n = meta.get("delta_n")
        if delta_n is None:
            raise InputError("delta_n not given and no sidecar metadata found")
    if not delta_n > 0:
        raise InputError("delta_n must be positive")

    arr = np.asarray(levels, dtype=float)
    if spec.returns:
        if spec.log_transform:
            raise InputError("log_transform applies to price levels, not to returns")
        out = PathGrid.from_increments(arr, float(delta_n), x0=0.0, meta=meta)
    else:
        if spec.log_transform:
            if np.any(arr <= 0):
                raise InputError("log_transform needs strictly positive levels")
            arr = np.log(arr)
        out = PathGrid(arr, float(delta_n), meta)
    if out.values.size < 2:
        raise InputError("need at least two observations")
    return out


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and tuples for ``json.dump``.

    Non-finite floats become ``None`` so the output is strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_path_csv(path: PathGrid, target: str | Path | None = None, meta: dict | None = None) -> str:
    """Write ``i,x`` rows (full float precision); also a sidecar when ``target`` is a file."""
    buf = io.StringIO()
    buf.write("i,x\n")
    for i, x in enumerate(path.values.tolist()):
        buf.write(f"{i},{x!r}\n")
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
        side = dict(path.meta)
        side.update(meta or {})
        side.update({"delta_n": path.delta_n, "t_span": path.t_span, "n_increments": path.n_increments})
        sidecar_path(target).write_text(json.dumps(to_jsonable(side), indent=2, sort_keys=True) + "\n")
    return text


def curve_csv(columns: dict) -> str:
    """CSV from equal-length named columns, in insertion order."""
    names = list(columns)
    data = [np.asarray(columns[n], dtype=float) for n in names]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*data):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
