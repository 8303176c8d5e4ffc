"""Two-headed distance regressor.

A shared three-layer trunk (SiLU between layers) feeds a distance head,
squashed by softplus so predictions are non-negative, and an unconstrained
3D shift head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


@dataclass(frozen=True)
class RegressorConfig:
    in_dim: int
    hidden: tuple = (64, 64, 64)


def init_regressor(cfg: RegressorConfig, rng: np.random.Generator, prefix="regressor.") -> dict:
    p = {}
    dims = (cfg.in_dim,) + tuple(cfg.hidden)
    layers = [(f"mlp{i}", dims[i], dims[i + 1]) for i in range(len(cfg.hidden))]
    layers += [("dist_head", dims[-1], 1), ("shift_head", dims[-1], 3)]
    for name, fi, fo in layers:
        bound = 1.0 / np.sqrt(fi)
        p[f"{prefix}{name}.weight"] = rng.uniform(-bound, bound, (fi, fo))
        p[f"{prefix}{name}.bias"] = rng.uniform(-bound, bound, fo)
    return p


def trunk(X: Tensor, p, n_layers: int = 3, prefix="regressor.") -> Tensor:
    h = X
    for i in range(n_layers):
        h = ad.silu(ad.linear(h, p[f"{prefix}mlp{i}.weight"], p[f"{prefix}mlp{i}.bias"]))
    return h


def regress_points(X, p, prefix="regressor.", need_shift: bool = True):
    """Point-major variant: ``X`` is ``(n, c)``; returns ``(n, 1)`` distance and ``(n, 3)`` shift."""
    X = ad.as_tensor(X)
    w0 = p[f"{prefix}mlp0.weight"]
    if X.ndim != 2 or X.shape[1] != w0.shape[0]:
        raise ShapeError(f"regress: expected (n, {w0.shape[0]}) features, got {X.shape}")
    n_layers = sum(1 for k in p if k.startswith(prefix + "mlp") and k.endswith(".weight"))
    h = trunk(X, p, n_layers, prefix)
    dist = ad.softplus(ad.linear(h, p[f"{prefix}dist_head.weight"], p[f"{prefix}dist_head.bias"]))
    shift = None
    if need_shift:
        shift = ad.linear(h, p[f"{prefix}shift_head.weight"], p[f"{prefix}shift_head.bias"])
    return dist, shift


def regress(X, p, prefix="regressor."):
    """Channel-major interface: ``X`` is ``(b, c, n)``; returns ``(b, 1, n)`` and ``(b, 3, n)``."""
    X = ad.as_tensor(X)
    if X.ndim != 3:
        raise ShapeError(f"regress: expected (b, c, n) input, got {X.shape}")
    b, c, n = X.shape
    flat = ad.reshape(ad.transpose(X, (0, 2, 1)), (b * n, c))
    dist, shift = regress_points(flat, p, prefix)
    dist = ad.transpose(ad.reshape(dist, (b, n, 1)), (0, 2, 1))
    shift = ad.transpose(ad.reshape(shift, (b, n, 3)), (0, 2, 1))
    return dist, shift
