import numpy as np
import pytest

from mbpu import autodiff as ad
from mbpu import oracles
from mbpu.autodiff import Tensor
from mbpu.network import NetworkConfig, init_network
from mbpu.extractor import ExtractorConfig
from mbpu.upsampler import (
    RefinementConfig,
    interpolate_only,
    midpoint_candidates,
    midpoint_interpolate,
    refine,
    target_count,
    upsample,
)

TINY = NetworkConfig(
    extractor=ExtractorConfig(init_dim=4, mixer_dim=4, transition_dim=6, n_blocks=1, n_mixers=2, k_conv=3, d_state=2, conv_width=2, expand=1),
    hidden=(6, 6, 6),
)


def _square_field(q, fed_back, need_shift):
    d = ad.sum_(ad.square(q), axis=1)
    shift = Tensor(np.zeros(q.shape)) if need_shift else None
    return ad.reshape(d, (q.shape[0], 1)), shift


def test_midpoint_of_a_pair():
    cand = midpoint_candidates(np.array([[0.0, 0, 0], [2.0, 0, 0]]), 1)
    assert cand.tolist() == [[0, 0, 0], [2, 0, 0], [1, 0, 0]]


def test_unit_square_gives_edge_midpoints():
    sq = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
    out = midpoint_interpolate(sq, 2, k=2).points
    assert len(out) == 8
    cand = midpoint_candidates(sq, 2)
    expected = cand[oracles.fps(cand.tolist(), 8, start=0)]
    assert np.array_equal(out, expected)
    for m in ([0.5, 0, 0], [1, 0.5, 0], [0.5, 1, 0], [0, 0.5, 0]):
        assert any(np.array_equal(p, m) for p in out)


@pytest.mark.parametrize("rate", [2, 3, 4, 5, 6, 7, 8, 2.5])
def test_counts_and_midpoint_property(rate):
    pts = np.random.default_rng(0).standard_normal((64, 3))
    out = midpoint_interpolate(pts, rate).points
    assert len(out) == target_count(rate, 64)
    inputs = {p.tobytes() for p in pts}
    pair_mids = {(0.5 * (a + b)).tobytes() for a in pts for b in pts}
    for p in out:
        assert p.tobytes() in inputs or p.tobytes() in pair_mids


def test_1024_points_rate_4():
    pts = np.random.default_rng(1).uniform(-1, 1, (1024, 3))
    assert len(midpoint_interpolate(pts, 4).points) == 4096


def test_target_count_rounds_halves_up():
    assert target_count(2.5, 3) == 8
    assert target_count(1.5, 1) == 2


def test_duplicate_pairs_are_removed():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    cand = midpoint_candidates(pts, 2)
    assert len({c.tobytes() for c in cand}) == len(cand) == 6


def test_k_grows_when_candidates_run_short():
    pts = np.random.default_rng(2).standard_normal((6, 3))
    # k=1 gives at most 6 + 6 candidates; rate 3 needs 18
    assert len(midpoint_interpolate(pts, 3, k=1).points) == 18


def test_interpolation_errors():
    with pytest.raises(ValueError, match="rate"):
        midpoint_interpolate(np.zeros((8, 3)), 1.0)
    with pytest.raises(ValueError, match="k\\+1"):
        midpoint_interpolate(np.zeros((4, 3)), 2, k=4)


def test_analytic_field_step():
    out = refine(np.array([[1.0, 0, 0]]), _square_field, RefinementConfig(iterations=1, step=0.1, apply_shift=False))
    np.testing.assert_allclose(out.points, [[0.8, 0, 0]], atol=1e-15)


def test_zero_step_and_zero_iterations_are_identity():
    pts = np.random.default_rng(3).uniform(-1, 1, (20, 3))
    params = init_network(TINY, seed=0)
    for cfg in (RefinementConfig(step=0.0, apply_shift=False, iterations=2), RefinementConfig(iterations=0, apply_shift=False)):
        assert np.array_equal(refine(pts, params, cfg, TINY).points, pts)


def test_untrained_model_with_zero_step_matches_interpolation():
    pts = np.random.default_rng(4).standard_normal((32, 3))
    params = init_network(TINY, seed=1)
    out = upsample(pts, 4, params, RefinementConfig(step=0.0, apply_shift=False, iterations=1), TINY)
    np.testing.assert_allclose(out.points, interpolate_only(pts, 4).points, atol=1e-12)


@pytest.mark.parametrize("rate,count", [(2, 512), (3, 768), (5, 1280), (8, 2048)])
def test_one_model_serves_all_rates(rate, count):
    pts = np.random.default_rng(5).standard_normal((256, 3))
    out = upsample(pts, rate, init_network(TINY, seed=2), RefinementConfig(iterations=1), TINY)
    assert len(out.points) == count and np.all(np.isfinite(out.points))


def test_nan_aborts_with_iteration():
    def bad(q, fed_back, need_shift):
        d, s = _square_field(q, fed_back, need_shift)
        return ad.mul(d, Tensor(np.full(d.shape, np.nan))), s

    with pytest.raises(FloatingPointError, match="iteration 0"):
        refine(np.ones((2, 3)), bad, RefinementConfig(apply_shift=False))


def test_fed_back_distance_is_previous_prediction():
    seen = []

    def field(q, fed_back, need_shift):
        seen.append(fed_back.data.copy())
        return _square_field(q, fed_back, need_shift)

    refine(np.array([[1.0, 0, 0]]), field, RefinementConfig(iterations=3, step=0.1, apply_shift=True))
    assert [s[0, 0] for s in seen] == pytest.approx([0.0, 0.0, 1.0, 0.64])


def test_config_validation():
    with pytest.raises(ValueError):
        RefinementConfig(iterations=-1)
    with pytest.raises(ValueError):
        RefinementConfig(step=-0.1)
