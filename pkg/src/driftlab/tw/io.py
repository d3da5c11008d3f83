"""Branch files: one file per branch, binary or CSV.

Binary layout, little-endian throughout::

    b"DLBRANCH"                 magic
    uint32  header length       in bytes
    header                      UTF-8 JSON (version, tolerances, per-point normalisation, history)
    per point: float64 beta, c, mu, m, L, N, then N float64 values of q

The CSV form stores the same content in long format, one row per grid node,
with the per-point scalars repeated.  Either file can be loaded whole or a
single point extracted to restart continuation.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..csvio import read_csv, write_csv
from .continuation import Branch
from .grid import Grid, Normalization, WaveProfile
from .newton import NEWTON_TOL

MAGIC = b"DLBRANCH"
FORMAT_VERSION = 1
CSV_COLUMNS = ["point", "beta", "c", "mu", "m", "L", "N", "norm_kind", "norm_value", "xi", "q"]


def _header(branch: Branch, tol: float) -> dict:
    return {
        "version": FORMAT_VERSION,
        "direction": branch.direction,
        "tolerance": tol,
        "normalization": [[pt.profile.normalization.kind.value, pt.profile.normalization.value]
                          for pt in branch.points],
        "history": branch.history,
    }


def save_branch(branch: Branch, path, tol: float = NEWTON_TOL) -> Path:
    path = Path(path)
    if path.suffix == ".csv":
        return _save_csv(branch, path)
    head = json.dumps(_header(branch, tol), sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for pt in branch.points:
            p = pt.profile
            scalars = [p.beta, p.c, p.mu, p.m, p.grid.L, p.grid.N]
            fh.write(np.asarray(scalars, dtype="<f8").tobytes())
            fh.write(np.asarray(p.q, dtype="<f8").tobytes())
    return path


def _profile(beta, c, mu, m, L, N, q, norm) -> WaveProfile:
    L, N = int(L), int(N)
    if N % L:
        raise ConfigError(f"stored N={N} is not a multiple of L={L}")
    return WaveProfile(Grid(L, N // L), q, c, mu, beta, m, Normalization(norm[0], norm[1]))


def load_branch(path) -> Branch:
    """Read a branch written by :func:`save_branch` (binary or ``.csv``)."""
    path = Path(path)
    if path.suffix == ".csv":
        return _load_csv(path)
    data = path.read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ConfigError(f"{path} is not a branch file")
    pos = len(MAGIC)
    (n_head,) = struct.unpack_from("<I", data, pos)
    pos += 4
    header = json.loads(data[pos:pos + n_head].decode("utf-8"))
    pos += n_head
    if header.get("version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported branch format version {header.get('version')}")
    branch = Branch(direction=header["direction"], history=header["history"])
    for norm in header["normalization"]:
        scalars = np.frombuffer(data, dtype="<f8", count=6, offset=pos)
        pos += 48
        N = int(scalars[5])
        q = np.frombuffer(data, dtype="<f8", count=N, offset=pos).copy()
        pos += 8 * N
        branch.append(_profile(*scalars[:6], q, norm))
    if pos != len(data):
        raise ConfigError(f"{path} has {len(data) - pos} trailing bytes")
    return branch


def _save_csv(branch: Branch, path: Path) -> Path:
    def rows():
        for k, pt in enumerate(branch.points):
            p = pt.profile
            norm = p.normalization
            for x, v in zip(p.grid.xi, p.q):
                yield [k, p.beta, p.c, p.mu, p.m, p.grid.L, p.grid.N, norm.kind.value, norm.value, x, v]

    return write_csv(path, CSV_COLUMNS, rows())


def _load_csv(path: Path) -> Branch:
    header, rows = read_csv(path)
    if header != CSV_COLUMNS:
        raise ConfigError(f"{path}: unexpected columns {header}")
    col = {name: j for j, name in enumerate(header)}
    branch = Branch()
    start = 0
    while start < len(rows):
        first = rows[start]
        N = int(first[col["N"]])
        block = rows[start:start + N]
        q = np.array([r[col["q"]] for r in block])
        norm = (first[col["norm_kind"]], first[col["norm_value"]])
        branch.append(_profile(*(first[col[k]] for k in ("beta", "c", "mu", "m", "L", "N")), q, norm))
        start += N
    if len(branch.points) > 1:
        branch.direction = 1 if branch.points[-1].beta > branch.points[0].beta else -1
    return branch


def load_point(path, index: int = -1) -> WaveProfile:
    """One stored profile, ready to seed :func:`continue_branch`."""
    return load_branch(path).points[index].profile

