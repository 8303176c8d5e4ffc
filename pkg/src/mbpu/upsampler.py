"""Midpoint interpolation followed by gradient-descent refinement."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .geometry import PointCloud, as_points, farthest_point_sample, knn, normalize_unit_sphere
from .network import NetworkConfig, NetworkField

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefinementConfig:
    iterations: int = 10
    step: float = 0.1
    apply_shift: bool = True
    k_midpoint: int = 4

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.step < 0:
            raise ValueError("step size must be >= 0")
        if self.k_midpoint < 1:
            raise ValueError("k_midpoint must be >= 1")


def target_count(rate: float, n: int) -> int:
    """``round(rate * n)`` with halves rounded up."""
    return int(np.floor(rate * n + 0.5))


def midpoint_candidates(pts, k: int) -> np.ndarray:
    """Input points followed by the midpoints with their ``k`` nearest neighbors, de-duplicated.

    Duplicates are detected by bitwise coordinate equality; the first
    occurrence is kept so the input points always come first.
    """
    pts = as_points(pts)
    nbr = knn(pts, pts, k, exclude_self=True)
    mids = 0.5 * (pts[:, None, :] + pts[nbr])
    cand = np.concatenate([pts, mids.reshape(-1, 3)])
    keys = np.ascontiguousarray(cand).view(np.dtype((np.void, 24))).ravel()
    _, first = np.unique(keys, return_index=True)
    return cand[np.sort(first)]


def midpoint_interpolate(P_lres, rate: float, k: int = 4) -> PointCloud:
    """Interpolate to ``round(rate * N)`` points by midpoints plus farthest-point sampling.

    When ``k`` neighbors do not yield enough distinct candidates for the
    requested rate, ``k`` is raised one step at a time until they do.
    """
    pts = as_points(P_lres)
    n = len(pts)
    if rate <= 1:
        raise ValueError(f"upsampling rate must be > 1, got {rate}")
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} input points, got {n}")
    m = target_count(rate, n)
    kk = k
    while True:
        cand = midpoint_candidates(pts, kk)
        if len(cand) >= m:
            break
        if kk >= n - 1:
            raise ValueError(f"rate {rate} needs {m} points but only {len(cand)} candidates exist")
        kk += 1
    if kk != k:
        log.debug("midpoint interpolation raised k from %d to %d for rate %s", k, kk, rate)
    return PointCloud(cand[farthest_point_sample(cand, m, start=0)])


def _field(P_I, params, net_cfg):
    if callable(params):
        return params
    return NetworkField(P_I, params, net_cfg)


def refine(P_I, params, cfg: RefinementConfig = RefinementConfig(), net_cfg: NetworkConfig = NetworkConfig()) -> PointCloud:
    """Shift once (optional), then ``p <- p - step * grad d(p)`` for ``iterations`` steps.

    ``params`` is either network parameters or any field callable
    ``field(query, fed_back, need_shift) -> (distance (m, 1), shift (m, 3) | None)``.
    """
    p = np.array(as_points(P_I), dtype=np.float64)
    field = _field(p, params, net_cfg)
    m = len(p)
    zeros = np.zeros((m, 1))
    if cfg.apply_shift:
        _, shift = field(Tensor(p), Tensor(zeros), need_shift=True)
        p = p + shift.data
        _check_finite(p, -1)
    prev = zeros
    for t in range(cfg.iterations):
        tape = Tape()
        q = tape.variable(p)
        dist, _ = field(q, Tensor(prev), need_shift=False)
        (grad,) = tape.gradient(ad.sum_(dist), [q])
        p = p - cfg.step * grad
        _check_finite(p, t)
        prev = dist.data
    return PointCloud(p)


def _check_finite(p, t):
    if not np.all(np.isfinite(p)):
        where = "shift" if t < 0 else f"iteration {t}"
        raise FloatingPointError(f"refinement produced non-finite coordinates at {where}")


def upsample(P_lres, rate: float, params, cfg: RefinementConfig = RefinementConfig(), net_cfg: NetworkConfig = NetworkConfig()) -> PointCloud:
    """Normalize, interpolate, refine and map back to the input frame."""
    normed, tf = normalize_unit_sphere(P_lres)
    P_I = midpoint_interpolate(normed, rate, cfg.k_midpoint)
    refined = refine(P_I, params, cfg, net_cfg)
    return tf.invert(refined)


def interpolate_only(P_lres, rate: float, k: int = 4) -> PointCloud:
    """The interpolation baseline in the input frame (no refinement)."""
    normed, tf = normalize_unit_sphere(P_lres)
    return tf.invert(midpoint_interpolate(normed, rate, k))
