"""Evaluation metrics: Chamfer, Hausdorff, point-to-surface proxy and F-score.

All metrics are computed in the frame the clouds are given in; the pipeline
evaluates in the normalized (unit-sphere) frame of the sparse input.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .geometry import as_points, nearest
from .losses import chamfer_distance


@dataclass(frozen=True)
class Metrics:
    cd: float
    hd: float
    p2f: float | None
    fscore: float

    def as_dict(self):
        return asdict(self)


def _check(P, Q):
    if len(P) == 0 or len(Q) == 0:
        raise ValueError("metrics need non-empty point clouds")


def hausdorff(P, Q) -> float:
    P, Q = as_points(P), as_points(Q)
    _check(P, Q)
    return float(np.sqrt(max(nearest(Q, P)[1].max(), nearest(P, Q)[1].max())))


def p2f(P, Q_dense) -> float:
    """Mean distance from each point of ``P`` to the dense surface proxy."""
    P, Q = as_points(P), as_points(Q_dense)
    _check(P, Q)
    return float(np.sqrt(nearest(Q, P)[1]).mean())


def bbox_diagonal(Q) -> float:
    Q = as_points(Q)
    return float(np.linalg.norm(Q.max(axis=0) - Q.min(axis=0)))


def fscore(P, Q, threshold: float = 0.005) -> float:
    """F-score at ``threshold`` times the bounding-box diagonal of ``Q``."""
    P, Q = as_points(P), as_points(Q)
    _check(P, Q)
    tau = threshold * bbox_diagonal(Q)
    precision = float((np.sqrt(nearest(Q, P)[1]) <= tau).mean())
    recall = float((np.sqrt(nearest(P, Q)[1]) <= tau).mean())
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def metrics(P, Q, threshold: float = 0.005, dense=None) -> Metrics:
    """CD, HD and F-score against ``Q``; P2F against ``dense`` (``None`` without one)."""
    P, Q = as_points(P), as_points(Q)
    _check(P, Q)
    return Metrics(
        cd=chamfer_distance(P, Q),
        hd=hausdorff(P, Q),
        p2f=None if dense is None else p2f(P, dense),
        fscore=fscore(P, Q, threshold),
    )
