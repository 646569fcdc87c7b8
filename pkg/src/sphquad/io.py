"""Plain-text node and weight files.

Node files hold one ``x y z`` line per node, weight files one ``x y z c``
line; numbers are written with 17 significant digits so a round trip is
exact. Lines starting with ``#`` are comments; ``# key = value`` comments
are returned as header metadata.
"""
from __future__ import annotations

import numpy as np

from .geometry import FAMILIES, NodeSet, normalize

_FMT = "%.17g"


def _header_lines(header):
    return [f"{k} = {v}" for k, v in (header or {}).items()]


def _read_table(path, ncols):
    header = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                body = s[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    header[k.strip()] = v.strip()
                continue
            parts = s.split()
            if len(parts) != ncols:
                raise ValueError(f"{path}:{lineno}: expected {ncols} columns, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(vals)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data lines")
    return np.array(rows), header


def write_nodes(path, X, header=None):
    P = X.points if isinstance(X, NodeSet) else np.asarray(X, dtype=float)
    h = {"N": len(P)}
    if isinstance(X, NodeSet):
        h["family"] = X.family
    h.update(header or {})
    np.savetxt(path, P, fmt=_FMT, header="\n".join(_header_lines(h)), comments="# ")


def read_nodes(path, family="custom"):
    """Read a node file; points are re-normalized onto the sphere."""
    data, header = _read_table(path, 3)
    fam = header.get("family", family)
    fam = fam if fam in FAMILIES else "custom"
    return NodeSet(normalize(data), family=fam, meta={"header": header})


def write_weights(path, X, c, header=None):
    P = X.points if isinstance(X, NodeSet) else np.asarray(X, dtype=float)
    c = np.asarray(c, dtype=float)
    if len(c) != len(P):
        raise ValueError("weight count differs from node count")
    np.savetxt(path, np.column_stack((P, c)), fmt=_FMT,
               header="\n".join(_header_lines({"N": len(P), **(header or {})})), comments="# ")


def read_weights(path):
    """Return (NodeSet, weights, header)."""
    data, header = _read_table(path, 4)
    fam = header.get("family", "custom")
    X = NodeSet(normalize(data[:, :3]), family=fam if fam in FAMILIES else "custom", meta={"header": header})
    return X, data[:, 3].copy(), header
