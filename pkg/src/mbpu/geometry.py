"""Point-cloud container, file I/O, normalization and exact neighbor queries.

Every routine here is a pure function of its inputs.  Ties are always broken
in favour of the lowest index so results are fully deterministic.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

# rows x columns of a pairwise-distance block; keeps memory under ~100 MB
_BLOCK_ELEMS = 4_000_000


class PointCloudError(ValueError):
    pass


class ParseError(PointCloudError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points stored as an ``(n, 3)`` float64 array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise PointCloudError(f"expected (n, 3) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise PointCloudError("point coordinates must be finite")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.count

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)


def as_points(c) -> np.ndarray:
    """Coerce a PointCloud or array-like into an ``(n, 3)`` float64 array."""
    if isinstance(c, PointCloud):
        return c.points
    return PointCloud(c).points


@dataclass(frozen=True)
class NormalizationTransform:
    center: np.ndarray
    scale: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not (np.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"normalization scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", center)

    def apply(self, c) -> PointCloud:
        return PointCloud((as_points(c) - self.center) / self.scale)

    def invert(self, c) -> PointCloud:
        return PointCloud(as_points(c) * self.scale + self.center)


# ---------------------------------------------------------------------------
# I/O


def load_cloud(path, format: str | None = None, allow_empty: bool = False) -> PointCloud:
    """Read an ASCII ``.xyz`` or ASCII PLY file.

    ``format`` is inferred from the extension when omitted.  A file without
    points is an error unless ``allow_empty``.
    """
    path = os.fspath(path)
    fmt = format or _infer_format(path)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if fmt == "xyz":
        pts = _parse_xyz(path, lines)
    elif fmt in ("ply", "ply-ascii"):
        pts = _parse_ply(path, lines)
    else:
        raise ValueError(f"unknown point cloud format {fmt!r}")
    if len(pts) == 0 and not allow_empty:
        raise PointCloudError(f"{path}: file contains no points")
    return PointCloud(np.array(pts, dtype=np.float64).reshape(-1, 3))


def save_cloud(path, c, format: str | None = None) -> None:
    """Write points with 17 significant digits so a reload is bit-identical."""
    path = os.fspath(path)
    fmt = format or _infer_format(path)
    pts = as_points(c)
    rows = [" ".join(f"{v:.17g}" for v in p) for p in pts]
    if fmt == "xyz":
        text = "\n".join(rows) + ("\n" if rows else "")
    elif fmt in ("ply", "ply-ascii"):
        header = [
            "ply",
            "format ascii 1.0",
            f"element vertex {len(pts)}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
        ]
        text = "\n".join(header + rows) + "\n"
    else:
        raise ValueError(f"unknown point cloud format {fmt!r}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _infer_format(path):
    ext = os.path.splitext(path)[1].lower()
    if ext == ".ply":
        return "ply"
    return "xyz"


def _parse_floats(path, lineno, fields, n):
    if len(fields) < n:
        raise ParseError(path, lineno, f"expected {n} fields, got {len(fields)}")
    try:
        vals = [float(f) for f in fields[:n]]
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from None
    if not all(np.isfinite(vals)):
        raise ParseError(path, lineno, "non-finite coordinate")
    return vals


def _parse_xyz(path, lines):
    pts = []
    for lineno, line in enumerate(lines, start=1):
        fields = line.split("#", 1)[0].split()
        if not fields:
            continue
        if len(fields) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(fields)}")
        pts.append(_parse_floats(path, lineno, fields, 3))
    return pts


def _parse_ply(path, lines):
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    elements = []  # [name, count, [props]]
    fmt_seen = False
    lineno = 1
    for lineno in range(2, len(lines) + 1):
        fields = lines[lineno - 1].split()
        if not fields or fields[0] in ("comment", "obj_info"):
            continue
        key = fields[0]
        if key == "format":
            if len(fields) < 2 or fields[1] != "ascii":
                raise ParseError(path, lineno, "only ASCII PLY is supported")
            fmt_seen = True
        elif key == "element":
            if len(fields) != 3:
                raise ParseError(path, lineno, "malformed element line")
            try:
                elements.append([fields[1], int(fields[2]), []])
            except ValueError:
                raise ParseError(path, lineno, "bad element count") from None
        elif key == "property":
            if not elements:
                raise ParseError(path, lineno, "property before element")
            elements[-1][2].append(fields)
        elif key == "end_header":
            break
        else:
            raise ParseError(path, lineno, f"unexpected header keyword {key!r}")
    else:
        raise ParseError(path, lineno, "missing end_header")
    if not fmt_seen:
        raise ParseError(path, lineno, "missing format line")

    pts = []
    cursor = lineno
    for name, count, props in elements:
        if name == "vertex":
            names = [p[-1] for p in props]
            try:
                cols = [names.index(a) for a in ("x", "y", "z")]
            except ValueError:
                raise ParseError(path, lineno, "vertex element lacks x/y/z") from None
        for _ in range(count):
            cursor += 1
            while cursor <= len(lines) and not lines[cursor - 1].strip():
                cursor += 1
            if cursor > len(lines):
                raise ParseError(path, cursor, f"unexpected end of file in element {name!r}")
            if name != "vertex":
                continue
            fields = lines[cursor - 1].split()
            if any(p[1] == "list" for p in props):
                raise ParseError(path, cursor, "list properties on vertex are not supported")
            if len(fields) != len(props):
                raise ParseError(path, cursor, f"expected {len(props)} fields, got {len(fields)}")
            row = _parse_floats(path, cursor, fields, len(props))
            pts.append([row[i] for i in cols])
    return pts


# ---------------------------------------------------------------------------
# normalization


def normalize_unit_sphere(c) -> tuple[PointCloud, NormalizationTransform]:
    """Center on the centroid and scale so the farthest point has norm 1."""
    pts = as_points(c)
    if len(pts) == 0:
        raise PointCloudError("cannot normalize an empty cloud")
    center = pts.mean(axis=0)
    radius = float(np.sqrt(((pts - center) ** 2).sum(axis=1)).max())
    scale = radius if radius > 0 else 1.0
    tf = NormalizationTransform(center=center, scale=scale)
    return tf.apply(pts), tf


# ---------------------------------------------------------------------------
# neighbor search


def _sqdist_block(q, p):
    # per coordinate on 2-d arrays; same summation order as a reduction over xyz
    d = np.subtract.outer(q[:, 0], p[:, 0])
    d *= d
    for j in (1, 2):
        t = np.subtract.outer(q[:, j], p[:, j])
        t *= t
        d += t
    return d


def pairwise_sqdist(a, b) -> np.ndarray:
    """Full squared Euclidean distance matrix, summed coordinate by coordinate."""
    return _sqdist_block(as_points(a), as_points(b))


def knn(c, query, k: int, exclude_self: bool = False) -> np.ndarray:
    """Indices of the ``k`` nearest points of ``c`` to every query point.

    Rows are sorted by distance, ties go to the lower index.  With
    ``exclude_self`` the query is assumed to be ``c`` itself and row ``i``
    never contains ``i``.
    """
    pts = as_points(c)
    q = as_points(query)
    n = len(pts)
    if exclude_self and len(q) != n:
        raise ValueError("exclude_self requires query to be the cloud itself")
    limit = n - 1 if exclude_self else n
    if k < 1 or k > limit:
        raise ValueError(f"k={k} too large for a cloud of {n} points")
    out = np.empty((len(q), k), dtype=np.int64)
    step = max(1, _BLOCK_ELEMS // max(n, 1))
    for s in range(0, len(q), step):
        d = _sqdist_block(q[s : s + step], pts)
        if exclude_self:
            rows = np.arange(d.shape[0])
            d[rows, rows + s] = np.inf
        out[s : s + step] = _smallest_k(d, k)
    return out


def _smallest_k(d, k):
    if k >= d.shape[1] // 4:
        return np.argsort(d, axis=1, kind="stable")[:, :k]
    # partition first, then resolve boundary ties by a stable sort of the survivors
    kth = np.partition(d, k - 1, axis=1)[:, k - 1 : k]
    out = np.empty((d.shape[0], k), dtype=np.int64)
    for i in range(d.shape[0]):
        cand = np.flatnonzero(d[i] <= kth[i, 0])
        order = np.argsort(d[i, cand], kind="stable")
        out[i] = cand[order[:k]]
    return out


def nearest(c, query) -> tuple[np.ndarray, np.ndarray]:
    """Nearest point of ``c`` for every query: ``(index, squared distance)``."""
    pts = as_points(c)
    q = as_points(query)
    if len(pts) == 0:
        raise PointCloudError("nearest-neighbor query against an empty cloud")
    idx = np.empty(len(q), dtype=np.int64)
    sq = np.empty(len(q))
    step = max(1, _BLOCK_ELEMS // len(pts))
    for s in range(0, len(q), step):
        d = _sqdist_block(q[s : s + step], pts)
        i = d.argmin(axis=1)
        idx[s : s + step] = i
        sq[s : s + step] = d[np.arange(len(i)), i]
    return idx, sq


def farthest_point_sample(c, m: int, start: int = 0) -> np.ndarray:
    """Greedy farthest-point sampling of ``m`` indices beginning at ``start``."""
    pts = as_points(c)
    n = len(pts)
    if m < 1 or m > n:
        raise ValueError(f"cannot sample m={m} points from a cloud of {n}")
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range")
    idx = np.empty(m, dtype=np.int64)
    idx[0] = start
    d = _sqdist_block(pts[start : start + 1], pts)[0]
    for j in range(1, m):
        i = int(np.argmax(d))
        idx[j] = i
        np.minimum(d, _sqdist_block(pts[i : i + 1], pts)[0], out=d)
    return idx


def add_gaussian_noise(c, tau: float, seed: int) -> PointCloud:
    """Perturb every coordinate by ``tau * N(0, 1)`` from a seeded generator."""
    if tau < 0:
        raise ValueError(f"noise level must be non-negative, got {tau}")
    pts = as_points(c)
    if len(pts) == 0:
        raise PointCloudError("cannot add noise to an empty cloud")
    if tau == 0:
        return PointCloud(pts.copy())
    rng = np.random.default_rng(seed)
    return PointCloud(pts + tau * rng.standard_normal(pts.shape))
