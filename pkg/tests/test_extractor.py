import numpy as np
import pytest

from mbpu import autodiff as ad
from mbpu.autodiff import Tensor, finite_diff_check
from mbpu.extractor import (
    ExtractorConfig,
    extract,
    feature_width,
    global_pool,
    init_extractor,
    init_p3dconv,
    interpolate_features,
    interpolation_weights,
    mixer,
    p3dconv,
)
from mbpu.geometry import knn

SMALL = ExtractorConfig(init_dim=4, mixer_dim=4, transition_dim=6, n_blocks=2, n_mixers=3, k_conv=3, d_state=2, conv_width=2, expand=1)


def _tensors(p):
    return {k: Tensor(v) for k, v in p.items()}


def _conv_params(rng, c_in=4, c_out=5):
    p: dict = {}
    init_p3dconv(p, rng, "", c_in, c_out)
    return {k: rng.uniform(-1, 1, v.shape) for k, v in p.items()}


def test_p3dconv_coincident_points_give_constant_output():
    rng = np.random.default_rng(0)
    feat = np.tile(rng.standard_normal(4), (6, 1))
    pts = np.zeros((6, 3))
    nbr = knn(pts, pts, 3, exclude_self=True)
    out = p3dconv(Tensor(feat), pts, nbr, _tensors(_conv_params(rng))).data
    assert np.all(out == out[0])


def test_p3dconv_neighbor_order_does_not_matter():
    rng = np.random.default_rng(1)
    feat = rng.standard_normal((6, 4))
    pts = rng.standard_normal((6, 3))
    nbr = knn(pts, pts, 3, exclude_self=True)
    p = _tensors(_conv_params(rng))
    a = p3dconv(Tensor(feat), pts, nbr, p).data
    nbr2 = nbr.copy()
    nbr2[2] = nbr2[2][::-1]
    b = p3dconv(Tensor(feat), pts, nbr2, p).data
    assert np.array_equal(a[2], b[2])


def test_p3dconv_index_out_of_range():
    rng = np.random.default_rng(2)
    with pytest.raises(IndexError):
        p3dconv(Tensor(np.zeros((3, 4))), np.zeros((3, 3)), np.array([[1], [2], [3]]), _tensors(_conv_params(rng)))


def test_p3dconv_gradients():
    rng = np.random.default_rng(3)
    feat = rng.uniform(-1, 1, (6, 4))
    pts = rng.uniform(-1, 1, (6, 3))
    nbr = knn(pts, pts, 3, exclude_self=True)
    params = _conv_params(rng)
    R = Tensor(rng.standard_normal((6, 5)))
    assert finite_diff_check(lambda v: ad.sum_(ad.mul(p3dconv(v, pts, nbr, _tensors(params)), R)), feat) < 1e-4
    for name, w in params.items():
        consts = _tensors(params)
        assert finite_diff_check(lambda v, name=name: ad.sum_(ad.mul(p3dconv(Tensor(feat), pts, nbr, {**consts, name: v}), R)), w) < 1e-4


def test_feature_shapes_default_config():
    cfg = ExtractorConfig()
    p = _tensors(init_extractor(cfg, np.random.default_rng(4)))
    fs = extract(np.random.default_rng(5).uniform(-1, 1, (16, 3)), p, cfg)
    assert [l.shape for l in fs.local] == [(16, 32), (16, 64), (16, 64), (16, 64)]
    assert fs.glob.shape == (64,)
    assert np.array_equal(fs.glob.data, fs.local[-1].data.max(axis=0))
    assert feature_width(cfg) == 32 + 3 * 64 + 3 + 64 + 1


def test_pooling_invariant_to_duplication_and_permutation():
    p = _tensors(init_extractor(SMALL, np.random.default_rng(6)))
    pts = np.random.default_rng(7).uniform(-1, 1, (10, 3))
    l3 = extract(pts, p, SMALL).local[-1].data
    g = global_pool(Tensor(l3)).data
    assert np.array_equal(g, global_pool(Tensor(np.concatenate([l3, l3]))).data)
    assert np.array_equal(g, global_pool(Tensor(l3[np.random.default_rng(8).permutation(10)])).data)


def test_dense_connectivity():
    rng = np.random.default_rng(8)
    p = _tensors(init_extractor(SMALL, rng))
    pts = rng.uniform(-1, 1, (9, 3))
    nbr = knn(pts, pts, SMALL.k_conv, exclude_self=True)
    block_in = Tensor(rng.standard_normal((9, SMALL.transition_dim)))
    prefix = "extractor.block1."
    feats = [block_in]
    for j in range(2):
        feats.append(mixer(feats, pts, nbr, p, SMALL, f"{prefix}mixer{j}."))
    third_input = ad.concat(feats, axis=1).data
    zeroed = feats[:2] + [Tensor(np.zeros_like(feats[2].data))]
    changed = np.any(third_input != ad.concat(zeroed, axis=1).data, axis=0)
    width = SMALL.transition_dim + SMALL.mixer_dim
    assert not changed[:width].any()
    assert changed[width:].all()


def test_extractor_gradients_of_global_energy():
    rng = np.random.default_rng(9)
    params = {k: rng.uniform(-0.8, 0.8, v.shape) for k, v in init_extractor(SMALL, rng).items()}
    pts = rng.uniform(-1, 1, (8, 3))
    names = list(params)[::7]
    for name in names:
        consts = _tensors(params)
        f = lambda v, name=name: ad.sum_(ad.square(extract(pts, {**consts, name: v}, SMALL).glob))  # noqa: E731
        assert finite_diff_check(f, params[name], coords=range(min(4, params[name].size))) < 1e-4, name


def test_exact_hit_takes_seed_feature():
    rng = np.random.default_rng(10)
    seeds = rng.uniform(-1, 1, (8, 3))
    p = _tensors(init_extractor(SMALL, rng))
    fs = extract(seeds, p, SMALL)
    X = interpolate_features(seeds[3:4], seeds, fs, np.zeros((1, 1))).data
    local = np.concatenate([l.data for l in fs.local], axis=1)
    assert np.array_equal(X[0, : local.shape[1]], local[3])


def test_equidistant_query_blends_evenly():
    seeds = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 50.0, 0]])
    _, w = interpolation_weights(np.zeros((1, 3)), seeds)
    assert abs(w.data[0, 0] - w.data[0, 1]) < 1e-9
    assert w.data[0, 2] < 1e-3


def test_weights_sum_to_one():
    rng = np.random.default_rng(11)
    _, w = interpolation_weights(rng.uniform(size=(30, 3)), rng.uniform(size=(10, 3)))
    np.testing.assert_allclose(w.data.sum(axis=1), 1.0, atol=1e-14)


def test_layout_and_zero_feedback_column():
    rng = np.random.default_rng(12)
    seeds = rng.uniform(-1, 1, (8, 3))
    q = rng.uniform(-1, 1, (5, 3))
    fs = extract(seeds, _tensors(init_extractor(SMALL, rng)), SMALL)
    X = interpolate_features(q, seeds, fs, np.zeros((5, 1))).data
    assert X.shape == (5, feature_width(SMALL))
    c = sum(SMALL.local_dims)
    assert np.array_equal(X[:, c : c + 3], q)
    assert np.array_equal(X[:, c + 3 : c + 3 + SMALL.global_dim], np.tile(fs.glob.data, (5, 1)))
    assert not X[:, -1].any()


def test_interpolation_errors():
    fs = extract(np.random.default_rng(0).uniform(size=(8, 3)), _tensors(init_extractor(SMALL, np.random.default_rng(0))), SMALL)
    with pytest.raises(ValueError):
        interpolate_features(np.zeros((2, 3)), np.zeros((0, 3)), fs, np.zeros((2, 1)))
    with pytest.raises(ValueError):
        interpolate_features(np.zeros((2, 3)), np.zeros((4, 3)), fs, np.zeros((3, 1)))


def test_gradient_through_interpolation_wrt_query():
    rng = np.random.default_rng(13)
    seeds = rng.uniform(-1, 1, (8, 3))
    fs = extract(seeds, _tensors(init_extractor(SMALL, rng)), SMALL)
    R = Tensor(rng.standard_normal((4, feature_width(SMALL))))
    q = rng.uniform(-1, 1, (4, 3))
    f = lambda v: ad.sum_(ad.mul(interpolate_features(v, seeds, fs, np.zeros((4, 1))), R))  # noqa: E731
    assert finite_diff_check(f, q) < 1e-5
