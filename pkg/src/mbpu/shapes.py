"""Uniform surface sampling of simple parametric shapes.

Every sampler draws points with density proportional to surface area, so
caps, bases and faces receive their fair share.
"""

from __future__ import annotations

import numpy as np

SHAPES = ("sphere", "torus", "cube", "cylinder", "cone")


def sphere(n, rng, radius=1.0):
    v = rng.standard_normal((n, 3))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def torus(n, rng, major=1.0, minor=0.35):
    # rejection on the tube angle: the area element is (major + minor cos v)
    out = np.empty((0, 3))
    while len(out) < n:
        m = 2 * (n - len(out)) + 16
        u = rng.uniform(0, 2 * np.pi, m)
        v = rng.uniform(0, 2 * np.pi, m)
        keep = rng.uniform(0, 1, m) <= (major + minor * np.cos(v)) / (major + minor)
        u, v = u[keep], v[keep]
        ring = major + minor * np.cos(v)
        pts = np.stack([ring * np.cos(u), ring * np.sin(u), minor * np.sin(v)], axis=1)
        out = np.concatenate([out, pts])
    return out[:n]


def cube(n, rng, half=1.0):
    pts = rng.uniform(-half, half, (n, 3))
    axis = rng.integers(0, 3, n)
    side = rng.choice([-half, half], n)
    pts[np.arange(n), axis] = side
    return pts


def cylinder(n, rng, radius=1.0, half_height=1.0):
    side = 2 * np.pi * radius * 2 * half_height
    cap = np.pi * radius**2
    part = rng.choice(3, n, p=np.array([side, cap, cap]) / (side + 2 * cap))
    theta = rng.uniform(0, 2 * np.pi, n)
    r = np.where(part == 0, radius, radius * np.sqrt(rng.uniform(0, 1, n)))
    z = np.where(part == 0, rng.uniform(-half_height, half_height, n), np.where(part == 1, half_height, -half_height))
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def cone(n, rng, radius=1.0, height=2.0):
    slant = np.pi * radius * np.hypot(radius, height)
    base = np.pi * radius**2
    on_side = rng.uniform(0, 1, n) < slant / (slant + base)
    theta = rng.uniform(0, 2 * np.pi, n)
    s = np.sqrt(rng.uniform(0, 1, n))  # fraction of the way from apex to rim
    r = np.where(on_side, radius * s, radius * np.sqrt(rng.uniform(0, 1, n)))
    z = np.where(on_side, height / 2 - height * s, -height / 2)
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def _segment_distance(u, v, a, b):
    # distance from 2-d points (u, v) to the segment a-b
    ab = np.subtract(b, a, dtype=np.float64)
    t = np.clip(((u - a[0]) * ab[0] + (v - a[1]) * ab[1]) / (ab @ ab), 0.0, 1.0)
    return np.hypot(u - a[0] - t * ab[0], v - a[1] - t * ab[1])


def _profile_distance(pts, segments):
    # surfaces of revolution about z: measure in the meridian half-plane
    rho, z = np.hypot(pts[:, 0], pts[:, 1]), pts[:, 2]
    return np.min([_segment_distance(rho, z, a, b) for a, b in segments], axis=0)


def _cube_distance(pts, half=1.0):
    a = np.abs(pts)
    out = np.full(len(pts), np.inf)
    for axis in range(3):
        others = [j for j in range(3) if j != axis]
        excess = np.maximum(a[:, others] - half, 0.0)
        out = np.minimum(out, np.sqrt((a[:, axis] - half) ** 2 + (excess**2).sum(axis=1)))
    return out


def _torus_distance(pts, major=1.0, minor=0.35):
    return np.abs(np.hypot(np.hypot(pts[:, 0], pts[:, 1]) - major, pts[:, 2]) - minor)


_DISTANCES = {
    "sphere": lambda p: np.abs(np.linalg.norm(p, axis=1) - 1.0),
    "torus": _torus_distance,
    "cube": _cube_distance,
    "cylinder": lambda p: _profile_distance(p, [((0, 1), (1, 1)), ((1, 1), (1, -1)), ((1, -1), (0, -1))]),
    "cone": lambda p: _profile_distance(p, [((0, 1), (1, -1)), ((1, -1), (0, -1))]),
}


def surface_distance(name: str, pts, rotation=None) -> np.ndarray:
    """Exact unsigned distance from ``pts`` to the shape's surface.

    ``rotation`` is the one passed to :func:`sample_surface`; points are
    given in that rotated frame.
    """
    if name not in _DISTANCES:
        raise ValueError(f"unknown shape {name!r}; choose from {', '.join(SHAPES)}")
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    return _DISTANCES[name](pts if rotation is None else pts @ rotation)


_SAMPLERS = {"sphere": sphere, "torus": torus, "cube": cube, "cylinder": cylinder, "cone": cone}


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sample_surface(name: str, n: int, rng, rotation=None) -> np.ndarray:
    try:
        fn = _SAMPLERS[name]
    except KeyError:
        raise ValueError(f"unknown shape {name!r}; choose from {', '.join(SHAPES)}") from None
    pts = fn(n, rng)
    return pts if rotation is None else pts @ rotation.T


def sample_pair(name: str, n_sparse: int, n_dense: int, rng, rotate: bool = True):
    """Independent sparse and dense draws from the same (randomly rotated) surface."""
    rot = random_rotation(rng) if rotate else None
    return sample_surface(name, n_sparse, rng, rot), sample_surface(name, n_dense, rng, rot)
