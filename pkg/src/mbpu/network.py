"""Network parameters and the learned distance field used during refinement."""

from __future__ import annotations

from collections.abc import MutableMapping
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .extractor import ExtractorConfig, FeatureSet, extract, feature_width, init_extractor, interpolate_features
from .geometry import as_points
from .regressor import RegressorConfig, init_regressor, regress_points


@dataclass(frozen=True)
class NetworkConfig:
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    hidden: tuple = (64, 64, 64)
    shift_scale: float = 0.1

    @property
    def regressor(self) -> RegressorConfig:
        return RegressorConfig(in_dim=feature_width(self.extractor), hidden=self.hidden)


class NetworkParams(MutableMapping):
    """Named float64 parameter arrays in a fixed insertion order."""

    def __init__(self, arrays=None):
        self._d: dict = {}
        for k, v in (arrays or {}).items():
            self[k] = v

    def __getitem__(self, k):
        return self._d[k]

    def __setitem__(self, k, v):
        arr = np.array(v, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {k!r} has non-finite values")
        self._d[k] = arr

    def __delitem__(self, k):
        del self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def copy(self) -> "NetworkParams":
        return NetworkParams({k: v.copy() for k, v in self._d.items()})

    def as_tensors(self, tape: Tape | None = None) -> dict:
        if tape is None:
            return {k: Tensor(v) for k, v in self._d.items()}
        return {k: tape.variable(v) for k, v in self._d.items()}

    def count(self) -> int:
        return sum(v.size for v in self._d.values())


def init_network(cfg: NetworkConfig = NetworkConfig(), seed: int = 0) -> NetworkParams:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` weights from a seeded generator."""
    rng = np.random.default_rng(seed)
    p = init_extractor(cfg.extractor, rng)
    p.update(init_regressor(cfg.regressor, rng))
    return NetworkParams(p)


def config_from_params(params, base: NetworkConfig = NetworkConfig()) -> NetworkConfig:
    """Recover layer widths from parameter shapes; non-shape settings come from ``base``."""
    ex = base.extractor
    init_dim = params["extractor.init.weight"].shape[1]
    mixer_dim = params["extractor.block0.mixer0.reduce.weight"].shape[1]
    transition_dim = params["extractor.block0.transition.weight"].shape[1]
    n_blocks = sum(1 for k in params if k.startswith("extractor.block") and k.endswith(".transition.weight"))
    n_mixers = sum(1 for k in params if k.startswith("extractor.block0.mixer") and k.endswith(".reduce.weight"))
    d_state = params["extractor.block0.mixer0.mamba.A_log"].shape[1]
    conv_width = params["extractor.block0.mixer0.mamba.conv.weight"].shape[1]
    expand = params["extractor.block0.mixer0.mamba.in_proj.weight"].shape[1] // mixer_dim
    hidden = []
    i = 0
    while f"regressor.mlp{i}.weight" in params:
        hidden.append(params[f"regressor.mlp{i}.weight"].shape[1])
        i += 1
    ext = ExtractorConfig(
        init_dim=init_dim,
        mixer_dim=mixer_dim,
        transition_dim=transition_dim,
        n_blocks=n_blocks,
        n_mixers=n_mixers,
        k_conv=ex.k_conv,
        d_state=d_state,
        conv_width=conv_width,
        expand=expand,
    )
    return NetworkConfig(extractor=ext, hidden=tuple(hidden), shift_scale=base.shift_scale)


class NetworkField:
    """Distance/shift predictor over a fixed interpolated cloud.

    Features are extracted once from the seed cloud; every query re-interpolates
    them at the current positions, so gradients with respect to query
    coordinates flow through the interpolation weights and the coordinate
    channels.
    """

    def __init__(self, seeds, params, cfg: NetworkConfig = NetworkConfig(), features: FeatureSet | None = None):
        self.seeds = as_points(seeds)
        self.params = params if isinstance(next(iter(params.values())), Tensor) else {
            k: Tensor(v) for k, v in params.items()
        }
        self.cfg = cfg
        self.features = features or extract(self.seeds, self.params, cfg.extractor)

    def __call__(self, query, fed_back, need_shift: bool = True, index=None):
        X = interpolate_features(query, self.seeds, self.features, fed_back, index)
        dist, shift = regress_points(X, self.params, need_shift=need_shift)
        if shift is not None and self.cfg.shift_scale != 1.0:
            shift = ad.scale(shift, self.cfg.shift_scale)
        return dist, shift
