import numpy as np
import pytest

from mbpu import autodiff as ad
from mbpu.autodiff import ShapeError, Tensor, finite_diff_check
from mbpu.regressor import RegressorConfig, init_regressor, regress, regress_points

CFG = RegressorConfig(in_dim=8, hidden=(6, 6, 6))


def _params(seed=0, uniform=False):
    rng = np.random.default_rng(seed)
    p = init_regressor(CFG, rng)
    if uniform:
        p = {k: rng.uniform(-1, 1, v.shape) for k, v in p.items()}
    return p


def _t(p):
    return {k: Tensor(v) for k, v in p.items()}


def test_output_shapes_and_non_negative_distance():
    X = np.random.default_rng(1).standard_normal((2, 8, 5))
    d, s = regress(Tensor(X), _t(_params()))
    assert d.shape == (2, 1, 5) and s.shape == (2, 3, 5)
    assert np.all(d.data >= 0)


def test_channel_major_matches_point_major():
    X = np.random.default_rng(2).standard_normal((1, 8, 5))
    d, s = regress(Tensor(X), _t(_params()))
    d2, s2 = regress_points(Tensor(X[0].T), _t(_params()))
    assert np.array_equal(d.data[0].T, d2.data) and np.array_equal(s.data[0].T, s2.data)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        regress(Tensor(np.zeros((1, 7, 5))), _t(_params()))
    with pytest.raises(ShapeError):
        regress(Tensor(np.zeros((8, 5))), _t(_params()))


def test_gradients_wrt_input_and_parameters():
    params = _params(3, uniform=True)
    X = np.random.default_rng(4).uniform(-1, 1, (1, 8, 5))

    def loss(Xv, P):
        d, s = regress(Xv, P)
        return ad.add(ad.sum_(d), ad.sum_(ad.square(s)))

    assert finite_diff_check(lambda v: loss(v, _t(params)), X) < 1e-4
    for name, w in params.items():
        consts = _t(params)
        assert finite_diff_check(lambda v, name=name: loss(Tensor(X), {**consts, name: v}), w) < 1e-4, name


def _changes(name):
    params = _params(5)
    X = Tensor(np.random.default_rng(6).standard_normal((4, 8)))
    d0, s0 = regress_points(X, _t(params))
    bumped = dict(params)
    bumped[name] = params[name] + 0.1
    d1, s1 = regress_points(X, _t(bumped))
    return not np.array_equal(d0.data, d1.data), not np.array_equal(s0.data, s1.data)


def test_trunk_is_shared():
    assert _changes("regressor.mlp1.weight") == (True, True)


def test_heads_are_separate():
    assert _changes("regressor.dist_head.weight") == (True, False)
    assert _changes("regressor.shift_head.weight") == (False, True)


def test_initialization_bounds_and_determinism():
    p = _params(7)
    for name, w in p.items():
        fan_in = p[name.replace(".bias", ".weight")].shape[0]
        assert np.abs(w).max() <= 1 / np.sqrt(fan_in)
    q = _params(7)
    assert all(np.array_equal(p[k], q[k]) for k in p)
