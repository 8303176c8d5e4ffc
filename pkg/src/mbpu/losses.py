"""Training losses.

The array functions return floats; the ``*_loss`` variants take a Tensor for
the predicted cloud and return a Tensor on its tape.  Nearest-neighbor
assignments are recomputed from the current values and treated as constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .geometry import as_points, nearest
from .renderer import CameraRig, RenderConfig, render_views, view_loss


@dataclass(frozen=True)
class LossConfig:
    """Weights of the view and Chamfer terms.

    Defaults are tuned on the toy shapes: the view term compares splat
    renders whose differences are dominated by sampling, and even a small
    weight stalls training, so it is off unless asked for.
    """

    alpha: float = 0.0
    beta: float = 300.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


def _nonempty(*clouds):
    for c in clouds:
        if len(c) == 0:
            raise ValueError("loss needs non-empty point clouds")


def chamfer_distance(P, Q) -> float:
    """Mean squared nearest-neighbor distance in both directions, summed."""
    P, Q = as_points(P), as_points(Q)
    _nonempty(P, Q)
    return float(nearest(Q, P)[1].mean() + nearest(P, Q)[1].mean())


def l1_refinement_loss(refined, Q) -> float:
    """Mean Euclidean distance from each refined point to its nearest ground-truth point."""
    R, Q = as_points(refined), as_points(Q)
    _nonempty(R, Q)
    return float(np.sqrt(nearest(Q, R)[1]).mean())


def _record(t: Tensor, name, idx):
    if t.tape is not None:
        t.tape.branches.append((name, idx))


def chamfer_loss(P: Tensor, Q) -> Tensor:
    Q = as_points(Q)
    _nonempty(P.data, Q)
    i_pq, _ = nearest(Q, P.data)
    i_qp, _ = nearest(P.data, Q)
    _record(P, "nn", np.concatenate([i_pq, i_qp]))
    fwd = ad.mean(ad.sum_(ad.square(ad.sub(P, Tensor(Q[i_pq]))), axis=1))
    bwd = ad.mean(ad.sum_(ad.square(ad.sub(ad.gather(P, i_qp), Tensor(Q))), axis=1))
    return ad.add(fwd, bwd)


def l1_loss(refined: Tensor, Q) -> Tensor:
    Q = as_points(Q)
    _nonempty(refined.data, Q)
    idx, _ = nearest(Q, refined.data)
    _record(refined, "nn", idx)
    return ad.mean(ad.norm(ad.sub(refined, Tensor(Q[idx])), axis=1))


def distance_regression_loss(pred: Tensor, query, Q, true=None) -> Tensor:
    """Mean absolute error of predicted distances.

    The truth is the distance to the nearest point of ``Q`` unless ``true``
    supplies it directly (for instance exact distances to a known surface).
    """
    query = as_points(query)
    if pred.shape != (len(query), 1):
        raise ValueError(f"distance predictions {pred.shape} do not match {len(query)} queries")
    if true is None:
        true = np.sqrt(nearest(Q, query)[1])
    true = np.asarray(true, dtype=np.float64).reshape(-1, 1)
    if len(true) != len(query):
        raise ValueError(f"{len(true)} true distances for {len(query)} queries")
    return ad.mean(ad.absolute(ad.sub(pred, Tensor(true))))


def to_unit_ball(P: Tensor) -> Tensor:
    """Radially pull points with norm > 1 back onto the unit sphere."""
    n = ad.norm(P, axis=1)
    f = ad.reciprocal(ad.clamp_min(n, 1.0))
    return ad.mul(P, ad.broadcast(f, 1, 3))


def total_loss(
    refined: Tensor,
    shifted: Tensor,
    Q,
    rig: CameraRig,
    cfg: LossConfig = LossConfig(),
    render_cfg: RenderConfig = RenderConfig(),
    distance: Tensor | None = None,
    query=None,
    reference_images=None,
    distance_target=None,
):
    """``L_d + alpha * L_v + beta * L_cd``; returns ``(loss Tensor, parts dict)``.

    ``L_d`` is the nearest-point L1 loss on ``refined`` plus, when ``distance``
    predictions are given for ``query`` points, their absolute error against
    true distances (``distance_target``, default the nearest distance to
    ``Q``).  ``L_v`` compares depth renders of ``shifted`` with renders of
    ``Q``; ``L_cd`` is the Chamfer distance of ``refined`` to ``Q``.
    """
    Q = as_points(Q)
    L_d = l1_loss(refined, Q)
    if distance is not None:
        L_d = ad.add(L_d, distance_regression_loss(distance, query, Q, distance_target))
    parts = {"L_d": float(L_d.data)}
    total = L_d
    if cfg.alpha > 0:
        if reference_images is None:
            reference_images = render_views(to_unit_ball(Tensor(Q)).data, rig, render_cfg).data
        L_v = view_loss(render_views(to_unit_ball(shifted), rig, render_cfg), Tensor(reference_images))
        parts["L_v"] = float(L_v.data)
        total = ad.add(total, ad.scale(L_v, cfg.alpha))
    if cfg.beta > 0:
        L_cd = chamfer_loss(refined, Q)
        parts["L_cd"] = float(L_cd.data)
        total = ad.add(total, ad.scale(L_cd, cfg.beta))
    parts["total"] = float(total.data)
    return total, parts
