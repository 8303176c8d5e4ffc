import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbpu import oracles
from mbpu.checkpoint import dumps, loads
from mbpu.config import RunConfig, format_config, parse_config
from mbpu.geometry import farthest_point_sample, knn, normalize_unit_sphere
from mbpu.losses import chamfer_distance
from mbpu.network import NetworkParams
from mbpu.renderer import RenderConfig, camera_triad, read_pfm, termination_probabilities, write_pfm
from mbpu.training import TrainConfig
from mbpu.upsampler import midpoint_interpolate, target_count

SETTINGS = settings(max_examples=40, deadline=None)
coord = st.floats(-10, 10, allow_nan=False, allow_subnormal=False)
lattice = st.integers(-3, 3).map(float)


def clouds(lo=2, hi=30, elements=coord):
    return st.integers(lo, hi).flatmap(lambda n: arrays(np.float64, (n, 3), elements=elements))


@SETTINGS
@given(clouds(elements=st.one_of(coord, lattice)), st.integers(1, 5), st.booleans())
def test_knn_matches_oracle(P, k, exclude):
    k = min(k, len(P) - 1 if exclude else len(P))
    if k < 1:
        return
    got = knn(P, P, k, exclude_self=exclude)
    assert got.tolist() == oracles.knn(P, P, k, exclude_self=exclude)


@SETTINGS
@given(clouds(elements=st.one_of(coord, lattice)), st.data())
def test_fps_matches_oracle(P, data):
    m = data.draw(st.integers(1, len(P)))
    start = data.draw(st.integers(0, len(P) - 1))
    assert farthest_point_sample(P, m, start=start).tolist() == oracles.fps(P, m, start=start)


@SETTINGS
@given(clouds(1), clouds(1))
def test_chamfer_symmetric_and_matches_oracle(P, Q):
    a, b = chamfer_distance(P, Q), chamfer_distance(Q, P)
    assert a == b >= 0
    assert abs(a - oracles.chamfer(P, Q)) <= 1e-12 * max(1.0, a)


@SETTINGS
@given(clouds(6, 24), st.integers(2, 8))
def test_midpoint_interpolation_contract(P, rate):
    P = np.unique(P, axis=0)
    if len(P) < 5:
        return
    m = target_count(rate, len(P))
    allowed = {p.tobytes() for p in P} | {(0.5 * (a + b)).tobytes() for a in P for b in P}
    if len(allowed) < m:
        # degenerate layouts (e.g. evenly spaced collinear points) run out of distinct midpoints
        with pytest.raises(ValueError, match="candidates"):
            midpoint_interpolate(P, rate)
        return
    out = midpoint_interpolate(P, rate).points
    assert len(out) == m
    assert all(p.tobytes() in allowed for p in out)
    assert len({p.tobytes() for p in out}) == len(out)


@SETTINGS
@given(clouds(1, 40))
def test_normalization_round_trip(P):
    normed, tf = normalize_unit_sphere(P)
    assert np.linalg.norm(normed.points, axis=1).max() <= 1 + 1e-12
    np.testing.assert_allclose(tf.invert(normed).points, P, atol=1e-9 * max(1.0, np.abs(P).max()))


@SETTINGS
@given(clouds(0, 20, st.floats(-0.55, 0.55)), arrays(np.float64, 3, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_termination_probabilities_sum_to_at_most_one(P, view):
    r = termination_probabilities(P, camera_triad(view / np.linalg.norm(view)), RenderConfig(5, 4, 8, sigma=0.7))
    assert np.all(r >= 0) and np.all(r.sum(axis=-1) <= 1 + 1e-12)


@SETTINGS
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(0, 1, width=32)))
def test_pfm_round_trip(img):
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.pfm")
        write_pfm(path, img)
        assert np.array_equal(read_pfm(path), img)


names = st.text(st.characters(min_codepoint=33, max_codepoint=0x2FF), min_size=1, max_size=12)
tensors = st.lists(st.integers(0, 3), max_size=3).flatmap(
    lambda shape: arrays(np.float64, tuple(shape), elements=st.floats(allow_nan=False, allow_infinity=False))
)


@SETTINGS
@given(st.dictionaries(names, tensors, max_size=5))
def test_checkpoint_round_trip(d):
    params = NetworkParams(d)
    back = loads(dumps(params))
    assert list(back) == list(params)
    for k in d:
        assert back[k].shape == d[k].shape and np.array_equal(back[k], d[k])


@SETTINGS
@given(st.integers(0, 500), st.floats(1e-6, 1.0), st.integers(0, 2**31), st.floats(1.5, 8), st.sampled_from(["sphere", "torus,cone", "cube,cylinder,sphere"]))
def test_config_round_trip(epochs, lr, seed, rate, shapes):
    train = TrainConfig(epochs=epochs, lr=lr, seed=seed, rate=rate, shapes=tuple(shapes.split(",")))
    cfg = RunConfig(train=train)
    assert parse_config(format_config(cfg)) == cfg
