"""File formats and report serialization.

Relational matrices arrive as whitespace-separated edge lists (0-based
integer ids, optional weight, '#' comments) or square dense CSV; tabular
data as headed CSV with an ``id`` column. Reports serialize to JSON or CSV
with 17-significant-digit floats (exact round-trip for doubles) and embed a
provenance record (seed, config hash, tool version).
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

logger = logging.getLogger("netglm")

EDGELIST = "edgelist"
DENSE_CSV = "dense_csv"


def _sniff_format(path: str) -> str:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            return DENSE_CSV if "," in line else EDGELIST
    raise DataError(f"{path}: empty relational file")


def _load_edgelist(path: str, n: int | None) -> np.ndarray:
    rows = []
    max_id = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise DataError(f"{path}:{lineno}: expected 'i j [w]', got {text!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if i < 0 or j < 0:
                raise DataError(f"{path}:{lineno}: node ids must be nonnegative")
            if n is not None and (i >= n or j >= n):
                raise DataError(f"{path}:{lineno}: node id out of range for n={n}")
            rows.append((i, j, w))
            max_id = max(max_id, i, j)
    size = n if n is not None else max_id + 1
    if size <= 0:
        raise DataError(f"{path}: no edges and no node count given")
    M = np.zeros((size, size))
    for i, j, w in rows:
        M[i, j] += w
        if i != j:
            M[j, i] += w
    return M


def _load_dense(path: str, n: int | None) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: not a numeric dense CSV ({exc})") from exc
    if M.shape[0] != M.shape[1]:
        raise DataError(f"{path}: dense relational matrix must be square, got {M.shape}")
    if n is not None and M.shape[0] != n:
        raise DataError(f"{path}: matrix size {M.shape[0]} does not match n={n}")
    return M


def load_relational(paths, fmt: str = "auto", n: int | None = None) -> np.ndarray:
    """Load one or two relational files; two files are entrywise averaged.

    The result is symmetrized via (M + M') / 2 (with a warning if the input
    was asymmetric beyond 1e-8) and the diagonal is zeroed.
    """
    if isinstance(paths, (str, bytes)):
        paths = [paths]
    if not 1 <= len(paths) <= 2:
        raise DataError("expected one or two relational files")
    mats = []
    for path in paths:
        kind = _sniff_format(path) if fmt == "auto" else fmt
        if kind == EDGELIST:
            mats.append(_load_edgelist(path, n))
        elif kind == DENSE_CSV:
            mats.append(_load_dense(path, n))
        else:
            raise DataError(f"unknown relational format {kind!r}")
    if len(mats) == 2 and mats[0].shape != mats[1].shape:
        raise DataError("the two relational files have different sizes")
    M = mats[0] if len(mats) == 1 else 0.5 * (mats[0] + mats[1])
    if np.max(np.abs(M - M.T)) > 1e-8:
        warnings.warn("relational matrix is asymmetric; symmetrizing", RuntimeWarning)
    M = 0.5 * (M + M.T)
    np.fill_diagonal(M, 0.0)
    return M


@dataclass
class TabularData:
    ids: np.ndarray
    X: np.ndarray
    columns: list
    response: np.ndarray | None = None
    group: np.ndarray | None = None
    dropped_rows: int = 0
    categoricals: dict = field(default_factory=dict)  # raw labels, pre-dummy


def _is_missing(cell: str) -> bool:
    return cell.strip() in ("", "NA", "NaN", "nan", "na", "NULL", "null")


def load_tabular(path: str, response: str | None = None, group: str | None = None) -> TabularData:
    """Load a headed CSV with an ``id`` column into a numeric design.

    Categorical columns expand to dummies against the lexicographically first
    level; rows with any missing cell are dropped (count logged); duplicate
    ids are an error.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    header = [h.strip() for h in header]
    if "id" not in header:
        raise DataError(f"{path}: an 'id' column is required")
    for row in rows:
        if len(row) != len(header):
            raise DataError(f"{path}: ragged row with {len(row)} cells, expected {len(header)}")

    complete = [row for row in rows if not any(_is_missing(c) for c in row)]
    dropped = len(rows) - len(complete)
    if dropped:
        logger.info("%s: dropped %d rows by listwise deletion", path, dropped)
    if not complete:
        raise DataError(f"{path}: no complete rows")

    col = {name: [row[k].strip() for row in complete] for k, name in enumerate(header)}
    try:
        ids = np.array([int(v) for v in col["id"]])
    except ValueError as exc:
        raise DataError(f"{path}: ids must be integers ({exc})") from exc
    if len(set(ids.tolist())) != len(ids):
        raise DataError(f"{path}: duplicate ids")

    y = None
    if response is not None:
        if response not in col:
            raise DataError(f"{path}: response column {response!r} not found")
        try:
            y = np.array([float(v) for v in col[response]])
        except ValueError as exc:
            raise DataError(f"{path}: response must be numeric ({exc})") from exc
    g = None
    if group is not None:
        if group not in col:
            raise DataError(f"{path}: group column {group!r} not found")
        g = np.array(col[group])

    feature_names = [h for h in header if h not in ("id", response, group)]
    blocks, names = [], []
    categoricals = {}
    for name in feature_names:
        values = col[name]
        try:
            blocks.append(np.array([float(v) for v in values])[:, None])
            names.append(name)
        except ValueError:
            categoricals[name] = np.array(values)
            levels = sorted(set(values))
            for level in levels[1:]:
                blocks.append(np.array([1.0 if v == level else 0.0 for v in values])[:, None])
                names.append(f"{name}[{level}]")
    X = np.hstack(blocks) if blocks else np.zeros((len(ids), 0))

    order = np.argsort(ids, kind="stable")
    return TabularData(
        ids=ids[order],
        X=X[order],
        columns=names,
        response=y[order] if y is not None else None,
        group=g[order] if g is not None else None,
        dropped_rows=dropped,
        categoricals={k: v[order] for k, v in categoricals.items()},
    )


def align_to_network(tab: TabularData, n: int) -> tuple[TabularData, np.ndarray]:
    """Drop covariate rows whose id is outside the network; return kept ids."""
    keep = tab.ids < n
    if not np.all(keep):
        warnings.warn(
            f"{int(np.sum(~keep))} covariate rows reference nodes outside the network "
            "and were dropped",
            RuntimeWarning,
        )
    kept = TabularData(
        ids=tab.ids[keep],
        X=tab.X[keep],
        columns=list(tab.columns),
        response=tab.response[keep] if tab.response is not None else None,
        group=tab.group[keep] if tab.group is not None else None,
        dropped_rows=tab.dropped_rows,
        categoricals={k: v[keep] for k, v in tab.categoricals.items()},
    )
    return kept, kept.ids


# -- report serialization ----------------------------------------------------

TOOL_VERSION = "netglm 0.1.0"


def _fmt_float(x: float) -> str:
    if np.isnan(x):
        return "NaN"
    if np.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def _to_json(obj, out: io.StringIO) -> None:
    if isinstance(obj, dict):
        out.write("{")
        for k, key in enumerate(obj):
            if k:
                out.write(", ")
            out.write(f'"{key}": ')
            _to_json(obj[key], out)
        out.write("}")
    elif isinstance(obj, (list, tuple)):
        out.write("[")
        for k, item in enumerate(obj):
            if k:
                out.write(", ")
            _to_json(item, out)
        out.write("]")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        out.write("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(_fmt_float(float(obj)))
    elif obj is None:
        out.write("null")
    elif isinstance(obj, np.ndarray):
        _to_json(obj.tolist(), out)
    else:
        out.write('"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"')


def dumps_report(obj) -> str:
    buf = io.StringIO()
    _to_json(obj, buf)
    return buf.getvalue()


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps_report(config).encode("utf-8")).hexdigest()[:16]


def provenance(seed, config: dict | None) -> dict:
    return {
        "seed": seed,
        "config_hash": config_hash(config or {}),
        "version": TOOL_VERSION,
    }


def write_report(results, fmt: str, path: str, seed=None, config: dict | None = None) -> None:
    """Serialize a report with stable field order and embedded provenance.

    JSON reports get a ``provenance`` object; CSV reports (a list of flat
    dicts or one flat dict) get seed / config_hash / version columns.
    """
    prov = provenance(seed, config)
    try:
        if fmt == "json":
            payload = dict(results) if isinstance(results, dict) else {"results": results}
            payload["provenance"] = prov
            with open(path, "w") as fh:
                fh.write(dumps_report(payload))
                fh.write("\n")
        elif fmt == "csv":
            rows = [results] if isinstance(results, dict) else list(results)
            if not rows:
                raise DataError("cannot write an empty CSV report")
            fieldnames = list(rows[0].keys()) + list(prov.keys())
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(fieldnames)
                for row in rows:
                    cells = [
                        _fmt_float(v) if isinstance(v, (float, np.floating)) else v
                        for v in row.values()
                    ]
                    writer.writerow(list(cells) + list(prov.values()))
        else:
            raise DataError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise DataError(f"cannot write report to {path}: {exc}") from exc


def write_dense_csv(M: np.ndarray, path: str) -> None:
    np.savetxt(path, M, delimiter=",", fmt="%.17g")


def write_edgelist(M: np.ndarray, path: str) -> None:
    iu, ju = np.nonzero(np.triu(M, k=1))
    with open(path, "w") as fh:
        fh.write("# i\tj\tw\n")
        for i, j in zip(iu.tolist(), ju.tolist()):
            w = M[i, j]
            if w == 1.0:
                fh.write(f"{i}\t{j}\n")
            else:
                fh.write(f"{i}\t{j}\t{_fmt_float(w)}\n")
