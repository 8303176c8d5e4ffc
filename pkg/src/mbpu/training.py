"""Synthetic-shape training loop and held-out evaluation.

One training sample is a sparse/dense pair drawn independently from the same
randomly rotated parametric surface, both expressed in the sparse cloud's
unit-sphere frame.  Predicted distances are supervised with exact distances
to the generating surface (``exact_distance``); measured against the ground
truth cloud instead, the distance of a near-surface query is mostly the
cloud's own sampling gap.  The forward pass mirrors inference:

* the network is queried at the interpolated cloud with a zero fed-back
  distance, and its shift gives the temporary cloud ``S = P_I + shift``;
* the refinement iterations are replayed from ``S`` (``unroll`` steps, by
  default all of them), with the position gradient of the predicted
  distance taken as a forward difference so the refined points remain
  differentiable in the parameters;
* the view loss sees ``S``; the nearest-point and Chamfer losses see the
  refined points; the distance head is supervised at ``P_I`` and ``S``.

A distance head whose gradient would drag points away from the target is
therefore penalized through the very steps inference takes.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .extractor import extract
from .geometry import add_gaussian_noise, knn, normalize_unit_sphere
from .losses import LossConfig, chamfer_distance, to_unit_ball, total_loss
from .network import NetworkConfig, NetworkField, NetworkParams, init_network
from .optim import AdamState, optimizer_step
from .renderer import RenderConfig, make_camera_rig, render_views
from .shapes import SHAPES, random_rotation, sample_pair, sample_surface, surface_distance
from .upsampler import RefinementConfig, midpoint_interpolate, refine, target_count

log = logging.getLogger(__name__)

_FD_EPS = 1e-5


class DivergenceError(FloatingPointError):
    def __init__(self, epoch, msg="loss became non-finite"):
        super().__init__(f"epoch {epoch}: {msg}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    lr: float = 3e-3
    seed: int = 0
    batch_size: int = 1
    shapes: tuple = SHAPES
    points: int = 256
    rate: float = 4.0
    views: int = 32
    noise: float = 0.0
    exact_distance: bool = True
    instances: int = 3
    unroll: int = 0
    drift_weight: float = 300.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0 or self.batch_size < 1 or self.points < 2 or self.views < 1:
            raise ValueError("lr, batch_size, points and views must be positive")
        if self.rate <= 1:
            raise ValueError("rate must exceed 1")
        if self.unroll < 0 or self.drift_weight < 0:
            raise ValueError("unroll and drift_weight must be >= 0")
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        unknown = [s for s in self.shapes if s not in SHAPES]
        if unknown or not self.shapes:
            raise ValueError(f"shape set must be a non-empty subset of {SHAPES}, got {self.shapes}")


@dataclass
class Sample:
    sparse: np.ndarray
    dense: np.ndarray
    interpolated: np.ndarray
    surface: Callable | None = None
    reference: np.ndarray | None = None


def make_sample(shape, cfg: TrainConfig, rng, k_midpoint=4, noise=None) -> Sample:
    n_dense = target_count(cfg.rate, cfg.points)
    rot = random_rotation(rng)
    sparse = sample_surface(shape, cfg.points, rng, rot)
    dense = sample_surface(shape, n_dense, rng, rot)
    tau = cfg.noise if noise is None else noise
    if tau > 0:
        sparse = add_gaussian_noise(sparse, tau, int(rng.integers(2**31))).points
    normed, tf = normalize_unit_sphere(sparse)
    P_I = midpoint_interpolate(normed, cfg.rate, k_midpoint).points
    surface = None
    if cfg.exact_distance:
        # distances scale with the normalization; the rotation is undone inside
        def surface(q):
            return surface_distance(shape, tf.invert(q).points, rot) / tf.scale

    return Sample(normed.points, tf.apply(dense).points, P_I, surface)


@dataclass
class TrainResult:
    params: NetworkParams
    losses: list = field(default_factory=list)
    parts: list = field(default_factory=list)
    seconds: float = 0.0


def _fd_position_gradient(field_, p, base, prev, index):
    # forward differences in each coordinate, kept on the tape so the
    # parameters see how the refinement step depends on them
    cols = []
    for k in range(3):
        e = np.zeros(p.shape)
        e[:, k] = _FD_EPS
        moved, _ = field_(ad.add(p, Tensor(e)), prev, need_shift=False, index=index)
        cols.append(ad.sub(moved, base))
    return ad.scale(ad.concat(cols, axis=1), 1.0 / _FD_EPS)


def unrolled_refinement(field_, S: Tensor, steps: int, step: float):
    """Replay ``steps`` refinement iterations from ``S`` on the tape.

    The position gradient of the predicted distance is a forward difference
    over fixed interpolation neighbors, so the refined points stay
    differentiable in the parameters without second-order gradients.  The
    fed-back distance stays on the tape as well.
    """
    p, prev = S, Tensor(np.zeros((S.shape[0], 1)))
    for _ in range(steps):
        index = knn(field_.seeds, p.data, 3)
        base, _ = field_(p, prev, need_shift=False, index=index)
        g = _fd_position_gradient(field_, p, base, prev, index)
        p, prev = ad.sub(p, ad.scale(g, step)), base
    return p


def sample_loss(
    params,
    sample: Sample,
    net_cfg: NetworkConfig,
    loss_cfg: LossConfig,
    rig,
    render_cfg,
    unroll: int = 0,
    step: float = 0.1,
    drift_weight: float = 0.0,
    span: float = 1.0,
):
    """Loss and parameter gradients for one sample.

    ``drift_weight`` scales the mean squared displacement ``span * grad d``
    that refinement would apply at ``S`` (``span`` is the total step length
    of inference); it is added to the loss and reported as ``drift``.
    """
    tape = Tape()
    pt = params.as_tensors(tape)
    P_I = sample.interpolated
    field_ = NetworkField(P_I, pt, net_cfg, features=extract(P_I, pt, net_cfg.extractor))
    zeros = Tensor(np.zeros((len(P_I), 1)))
    d_a, shift = field_(Tensor(P_I), zeros)
    S = ad.add(Tensor(P_I), shift)
    p = unrolled_refinement(field_, S, unroll, step)
    # the distance head is supervised where inference first queries it, on
    # detached inputs so the regression cannot move points
    d_s, _ = field_(Tensor(S.data), zeros, need_shift=False)
    query = np.concatenate([P_I, S.data])
    if loss_cfg.alpha > 0 and sample.reference is None:
        sample.reference = render_views(to_unit_ball(Tensor(sample.dense)).data, rig, render_cfg).data
    loss, parts = total_loss(
        p,
        S,
        sample.dense,
        rig,
        loss_cfg,
        render_cfg,
        distance=ad.concat([d_a, d_s], axis=0),
        query=query,
        reference_images=sample.reference,
        distance_target=None if sample.surface is None else sample.surface(query),
    )
    if drift_weight > 0:
        index = knn(P_I, S.data, 3)
        base, _ = field_(S, zeros, need_shift=False, index=index)
        g = ad.scale(_fd_position_gradient(field_, S, base, zeros, index), span)
        drift = ad.mean(ad.sum_(ad.square(g), axis=1))
        loss = ad.add(loss, ad.scale(drift, drift_weight))
        parts = {**parts, "drift": float(drift.data), "total": float(loss.data)}
    if not np.isfinite(loss.data):
        return float(loss.data), None, parts
    grads = tape.gradient(loss, [pt[k] for k in params])
    return float(loss.data), dict(zip(params, grads)), parts


def train(
    cfg: TrainConfig = TrainConfig(),
    loss_cfg: LossConfig = LossConfig(),
    net_cfg: NetworkConfig = NetworkConfig(),
    render_cfg: RenderConfig = RenderConfig(),
    k_midpoint: int = 4,
    params: NetworkParams | None = None,
    progress=None,
    refine_cfg: RefinementConfig = RefinementConfig(),
) -> TrainResult:
    """Fit network parameters; returns them with the per-epoch mean loss.

    Every epoch draws ``instances`` fresh samples per shape (shape order
    fixed, cycled), accumulates gradients over ``batch_size`` samples and
    takes an Adam step.  The replayed refinement covers the same path length as inference: ``unroll``
    steps of ``step * iterations / unroll`` each, which is the inference
    schedule itself when ``unroll`` equals the iteration count.
    """
    span = refine_cfg.step * refine_cfg.iterations
    step = span / cfg.unroll if cfg.unroll else 0.0
    t0 = time.perf_counter()
    params = init_network(net_cfg, cfg.seed) if params is None else params.copy()
    rig = make_camera_rig(cfg.views)
    state = AdamState()
    rng = np.random.default_rng(cfg.seed + 1)
    result = TrainResult(params)
    for epoch in range(cfg.epochs):
        total, parts_sum, count = 0.0, {}, 0
        acc, in_batch = None, 0
        for shape in [s for _ in range(cfg.instances) for s in cfg.shapes]:
            sample = make_sample(shape, cfg, rng, k_midpoint)
            loss, grads, parts = sample_loss(
                params, sample, net_cfg, loss_cfg, rig, render_cfg, cfg.unroll, step, cfg.drift_weight, span
            )
            if grads is None:
                raise DivergenceError(epoch)
            total += loss
            count += 1
            for k, v in parts.items():
                parts_sum[k] = parts_sum.get(k, 0.0) + v
            acc = grads if acc is None else {k: acc[k] + grads[k] for k in acc}
            in_batch += 1
            if in_batch == cfg.batch_size:
                params = _step(params, acc, in_batch, cfg.lr, state, epoch)
                acc, in_batch = None, 0
        if in_batch:
            params = _step(params, acc, in_batch, cfg.lr, state, epoch)
        mean = total / count
        if not np.isfinite(mean):
            raise DivergenceError(epoch)
        result.losses.append(mean)
        result.parts.append({k: v / count for k, v in parts_sum.items()})
        if progress is not None:
            progress(epoch, mean, result.parts[-1])
        log.info("epoch %d loss %.6g", epoch, mean)
    result.params = params
    result.seconds = time.perf_counter() - t0
    return result


def _step(params, acc, n, lr, state, epoch):
    grads = {k: v / n for k, v in acc.items()}
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise DivergenceError(epoch, "gradient became non-finite")
    return NetworkParams(optimizer_step(dict(params.items()), grads, lr, state))


@dataclass
class HeldOutResult:
    shapes: tuple
    model_cd: list
    baseline_cd: list

    @property
    def model_mean(self) -> float:
        return float(np.mean(self.model_cd))

    @property
    def baseline_mean(self) -> float:
        return float(np.mean(self.baseline_cd))

    @property
    def ratio(self) -> float:
        return self.model_mean / self.baseline_mean


def evaluate_heldout(
    params,
    cfg: TrainConfig = TrainConfig(),
    refine_cfg: RefinementConfig = RefinementConfig(),
    net_cfg: NetworkConfig = NetworkConfig(),
    seed: int = 12345,
    instances: int = 2,
    noise: float = 0.0,
    dense_factor: int = 10,
) -> HeldOutResult:
    """CD of refined and interpolation-only clouds on fresh shape instances.

    Held-out instances use a seed disjoint from training; the reference is a
    ``dense_factor``-times denser sampling than the training ground truth.
    Everything is measured in the sparse input's unit-sphere frame.
    """
    rng = np.random.default_rng(seed)
    n_dense = dense_factor * target_count(cfg.rate, cfg.points)
    model, base, names = [], [], []
    for _ in range(instances):
        for shape in cfg.shapes:
            sparse, dense = sample_pair(shape, cfg.points, n_dense, rng)
            if noise > 0:
                sparse = add_gaussian_noise(sparse, noise, int(rng.integers(2**31))).points
            normed, tf = normalize_unit_sphere(sparse)
            Q = tf.apply(dense).points
            P_I = midpoint_interpolate(normed, cfg.rate, refine_cfg.k_midpoint).points
            out = refine(P_I, params, refine_cfg, net_cfg).points
            base.append(chamfer_distance(P_I, Q))
            model.append(chamfer_distance(out, Q))
            names.append(shape)
    return HeldOutResult(tuple(names), model, base)
