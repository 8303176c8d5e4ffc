"""Mamba-based feature extractor and query-time feature interpolation.

Layout: an initial MLP lifts coordinates to ``init_dim`` channels, then each
dense block runs ``n_mixers`` mixers (reduction MLP -> Mamba -> P3DConv), every
mixer reading the concatenation of the block input and all earlier mixer
outputs.  A transition layer compresses the block's concatenation to
``transition_dim`` channels.  The global feature is a max-pool of the last
block's output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .geometry import as_points, knn
from .ssm import MambaConfig, init_mamba, mamba_block


@dataclass(frozen=True)
class ExtractorConfig:
    init_dim: int = 32
    mixer_dim: int = 32
    transition_dim: int = 64
    n_blocks: int = 3
    n_mixers: int = 3
    k_conv: int = 8
    d_state: int = 16
    conv_width: int = 4
    expand: int = 2

    @property
    def mamba(self) -> MambaConfig:
        return MambaConfig(self.mixer_dim, self.d_state, self.conv_width, self.expand)

    def block_in_dim(self, b: int) -> int:
        return self.init_dim if b == 0 else self.transition_dim

    @property
    def local_dims(self) -> list:
        return [self.init_dim] + [self.transition_dim] * self.n_blocks

    @property
    def global_dim(self) -> int:
        return self.transition_dim


@dataclass
class FeatureSet:
    local: list  # l0 .. l3, each (n, c_i)
    glob: Tensor  # (c_g,)
    coords: np.ndarray = field(repr=False)  # the seed points the features live on


def _lin(p, rng, name, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    p[f"{name}.weight"] = rng.uniform(-bound, bound, (fan_in, fan_out))
    p[f"{name}.bias"] = rng.uniform(-bound, bound, fan_out)


def init_extractor(cfg: ExtractorConfig, rng: np.random.Generator, prefix="extractor.") -> dict:
    p: dict = {}
    _lin(p, rng, f"{prefix}init", 3, cfg.init_dim)
    for b in range(cfg.n_blocks):
        c_in = cfg.block_in_dim(b)
        for j in range(cfg.n_mixers):
            mp = f"{prefix}block{b}.mixer{j}."
            _lin(p, rng, mp + "reduce", c_in + j * cfg.mixer_dim, cfg.mixer_dim)
            p.update(init_mamba(cfg.mamba, rng, prefix=mp + "mamba."))
            init_p3dconv(p, rng, mp + "conv.", cfg.mixer_dim, cfg.mixer_dim)
        _lin(
            p,
            rng,
            f"{prefix}block{b}.transition",
            c_in + cfg.n_mixers * cfg.mixer_dim,
            cfg.transition_dim,
        )
    return p


# ---------------------------------------------------------------------------
# P3DConv


def init_p3dconv(p, rng, prefix, c_in, c_out):
    _lin(p, rng, prefix + "edge", c_in + 3, c_out)
    bound = 1.0 / np.sqrt(c_in)
    p[prefix + "self.weight"] = rng.uniform(-bound, bound, (c_in, c_out))


def p3dconv(feat, coords, neighbors, p, prefix="") -> Tensor:
    """Point convolution over a fixed neighborhood.

    For point ``i`` with neighbors ``j``: ``max_j silu(W [f_j - f_i, x_j - x_i] + b)
    + W_self f_i``.  The max makes the result independent of neighbor order.
    """
    feat = ad.as_tensor(feat)
    pts = as_points(coords)
    nbr = np.asarray(neighbors, dtype=np.int64)
    n, c = feat.shape
    if nbr.ndim != 2 or nbr.shape[0] != n:
        raise ValueError(f"p3dconv: neighbor matrix {nbr.shape} does not match {n} points")
    if nbr.size and (nbr.min() < 0 or nbr.max() >= n):
        raise IndexError("p3dconv: neighbor index out of range")
    k = nbr.shape[1]
    rel = Tensor(pts[nbr] - pts[:, None, :])
    diff = ad.sub(ad.gather(feat, nbr), ad.broadcast(feat, 1, k))
    edge = ad.silu(ad.linear(ad.concat([diff, rel], axis=2), p[prefix + "edge.weight"], p[prefix + "edge.bias"]))
    return ad.add(ad.max_(edge, axis=1), ad.matmul(feat, p[prefix + "self.weight"]))


# ---------------------------------------------------------------------------
# extraction


def extract(points, p, cfg: ExtractorConfig = ExtractorConfig(), prefix="extractor.", neighbors=None) -> FeatureSet:
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("extract: empty point cloud")
    if neighbors is None:
        neighbors = knn(pts, pts, min(cfg.k_conv, len(pts) - 1), exclude_self=True) if len(pts) > 1 else np.zeros((1, 1), np.int64)
    x = Tensor(pts)
    l0 = ad.silu(ad.linear(x, p[prefix + "init.weight"], p[prefix + "init.bias"]))
    local = [l0]
    h = l0
    for b in range(cfg.n_blocks):
        feats = [h]
        for j in range(cfg.n_mixers):
            mp = f"{prefix}block{b}.mixer{j}."
            feats.append(mixer(feats, pts, neighbors, p, cfg, mp))
        h = ad.silu(
            ad.linear(
                ad.concat(feats, axis=1),
                p[f"{prefix}block{b}.transition.weight"],
                p[f"{prefix}block{b}.transition.bias"],
            )
        )
        local.append(h)
    return FeatureSet(local=local, glob=global_pool(h), coords=pts)


def global_pool(local: Tensor) -> Tensor:
    """Per-channel max over points; unchanged by duplicating or reordering rows."""
    return ad.max_(local, axis=0)


def mixer(feats, pts, neighbors, p, cfg, mp) -> Tensor:
    inp = feats[0] if len(feats) == 1 else ad.concat(feats, axis=1)
    r = ad.silu(ad.linear(inp, p[mp + "reduce.weight"], p[mp + "reduce.bias"]))
    m = mamba_block(r, p, cfg.mamba, prefix=mp + "mamba.")
    return p3dconv(m, pts, neighbors, p, prefix=mp + "conv.")


# ---------------------------------------------------------------------------
# interpolation


def interpolation_weights(query, seeds, k: int = 3, eps: float = 1e-8, index=None):
    """Inverse-squared-distance weights over the ``k`` nearest seeds.

    Returns ``(index (m, k), weights Tensor (m, k))``.  A query that coincides
    exactly with a seed takes that seed's value with weight one.  A given
    ``index`` fixes the neighbor sets instead of searching them.
    """
    query = ad.as_tensor(query)
    seeds = as_points(seeds)
    if len(seeds) == 0:
        raise ValueError("interpolate_features: no seed points")
    if index is None:
        idx = knn(seeds, query.data, min(k, len(seeds)))
        if query.tape is not None:
            query.tape.branches.append(("knn", idx))
    else:
        idx = np.asarray(index)
        if idx.shape[0] != query.shape[0]:
            raise ValueError(f"neighbor index has {idx.shape[0]} rows for {query.shape[0]} queries")
    k = idx.shape[1]
    diff = ad.sub(ad.broadcast(query, 1, k), Tensor(seeds[idx]))
    d2 = ad.sum_(ad.square(diff), axis=2)
    w = ad.reciprocal(ad.add_scalar(d2, eps))
    w = ad.div(w, ad.broadcast(ad.sum_(w, axis=1), 1, k))
    hit = d2.data == 0
    rows = hit.any(axis=1)
    if rows.any():
        first = np.zeros_like(hit)
        first[np.flatnonzero(rows), hit[rows].argmax(axis=1)] = True
        keep = np.where(rows[:, None], 0.0, 1.0) * np.ones((1, k))
        w = ad.add(ad.mul(w, Tensor(keep)), Tensor(first.astype(np.float64)))
    return idx, w


def interpolate_features(query, seeds, fs: FeatureSet, fed_back_distance, index=None) -> Tensor:
    """Concatenate interpolated local features, coordinates, global feature and fed-back distance."""
    query = ad.as_tensor(query)
    m = query.shape[0]
    fb = ad.as_tensor(fed_back_distance)
    if fb.shape != (m, 1):
        raise ValueError(f"fed-back distance must have shape ({m}, 1), got {fb.shape}")
    idx, w = interpolation_weights(query, seeds, index=index)
    local = ad.concat(fs.local, axis=1) if len(fs.local) > 1 else fs.local[0]
    c = local.shape[1]
    picked = ad.gather(local, idx)
    interp = ad.sum_(ad.mul(picked, ad.broadcast(w, 2, c)), axis=1)
    g = ad.broadcast(fs.glob, 0, m)
    return ad.concat([interp, query, g, fb], axis=1)


def feature_width(cfg: ExtractorConfig) -> int:
    return sum(cfg.local_dims) + 3 + cfg.global_dim + 1
