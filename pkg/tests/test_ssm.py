import numpy as np
import pytest

from mbpu import autodiff as ad
from mbpu import oracles
from mbpu.autodiff import ShapeError, Tensor, finite_diff_check
from mbpu.ssm import MambaConfig, init_mamba, mamba_block, mamba_branch, scan_benchmark, scan_forward, selective_scan


def _scan_args(rng, n, d=3, s=4):
    return (
        rng.standard_normal((n, d)),
        rng.uniform(1e-3, 0.5, (n, d)),
        rng.standard_normal((n, s)),
        rng.standard_normal((n, s)),
        -np.exp(rng.uniform(-1, 1, (d, s))),
        rng.standard_normal(d),
    )


def test_zero_input_gives_zero_output():
    x, delta, B, C, A, D = _scan_args(np.random.default_rng(0), 10)
    assert not np.any(scan_forward(np.zeros_like(x), delta, B, C, A, D)[0])


def test_single_step_closed_form():
    x, delta, B, C, A, D = _scan_args(np.random.default_rng(1), 1)
    y = scan_forward(x, delta, B, C, A, D)[0]
    expected = np.array([(C[0] @ (delta[0, c] * B[0])) * x[0, c] + D[c] * x[0, c] for c in range(3)])
    np.testing.assert_allclose(y[0], expected, rtol=1e-15, atol=1e-15)


def test_matches_naive_recurrence():
    args = _scan_args(np.random.default_rng(2), 64)
    y = scan_forward(*args)[0]
    ref = np.array(oracles.selective_scan(*(a.tolist() for a in args)))
    assert np.max(np.abs(y - ref)) < 1e-12


def test_vanishing_delta_and_zero_skip():
    x, delta, B, C, A, D = _scan_args(np.random.default_rng(3), 20)
    y = scan_forward(x, np.full_like(delta, 1e-12), B, C, A, np.zeros_like(D))[0]
    assert np.abs(y).max() < 1e-10


def test_state_stays_bounded_for_constant_input():
    n, d, s = 100_000, 2, 3
    x = np.ones((n, d))
    delta = np.full((n, d), 0.1)
    B = np.ones((n, s))
    C = np.ones((n, s))
    A = -np.ones((d, s))
    y, H = scan_forward(x, delta, B, C, A, np.zeros(d))
    assert np.all(np.isfinite(y))
    # fixed point of h = e^{-0.1} h + 0.1 is 0.1 / (1 - e^{-0.1})
    assert np.abs(H[-1]).max() <= 0.1 / (1 - np.exp(-0.1)) + 1e-9


@pytest.mark.parametrize("chunk", [1, 7, 300])
def test_chunk_size_does_not_change_the_scan(chunk):
    args = _scan_args(np.random.default_rng(11), 300)
    y_ref, H_ref = scan_forward(*args, chunk=10_000)
    y, H = scan_forward(*args, chunk=chunk)
    assert np.array_equal(H, H_ref)
    np.testing.assert_allclose(y, y_ref, rtol=0, atol=1e-13)


def test_shape_and_delta_errors():
    x, delta, B, C, A, D = _scan_args(np.random.default_rng(4), 5)
    with pytest.raises(ShapeError):
        scan_forward(x, delta[:4], B, C, A, D)
    with pytest.raises(ValueError):
        scan_forward(x, -delta, B, C, A, D)


@pytest.mark.parametrize("which", range(6))
def test_scan_gradients(which):
    args = _scan_args(np.random.default_rng(5), 6, d=2, s=3)
    R = np.random.default_rng(6).standard_normal((6, 2))

    def f(v):
        full = [Tensor(a) for a in args]
        full[which] = v
        return ad.sum_(ad.mul(selective_scan(*full), Tensor(R)))

    assert finite_diff_check(f, args[which]) < 1e-5


def _uniform(p, rng):
    return {k: rng.uniform(-1, 1, v.shape) for k, v in p.items()}


def test_zero_input_and_zero_biases_give_zero():
    cfg = MambaConfig(d_model=4, d_state=4)
    p = init_mamba(cfg, np.random.default_rng(7))
    for k in p:
        if k.endswith(".bias") and "dt_proj" not in k:
            p[k] = np.zeros_like(p[k])
    S = mamba_block(Tensor(np.zeros((5, 4))), {k: Tensor(v) for k, v in p.items()}, cfg)
    assert not np.any(S.data)


def test_residual_structure():
    cfg = MambaConfig(d_model=4, d_state=4)
    p = {k: Tensor(v) for k, v in init_mamba(cfg, np.random.default_rng(8)).items()}
    F = np.random.default_rng(9).standard_normal((8, 4))
    S = mamba_block(Tensor(F), p, cfg).data
    assert np.max(np.abs((S - F) - mamba_branch(Tensor(F), p, cfg).data)) < 1e-12


def test_a_is_stored_as_log_of_minus_a():
    cfg = MambaConfig(d_model=4, d_state=5)
    p = init_mamba(cfg, np.random.default_rng(10))
    np.testing.assert_allclose(np.exp(p["A_log"][0]), np.arange(1, 6))
    assert np.all(p["D"] == 1.0)


def test_block_rejects_wrong_width():
    cfg = MambaConfig(d_model=4)
    p = {k: Tensor(v) for k, v in init_mamba(cfg, np.random.default_rng(0)).items()}
    with pytest.raises(ShapeError):
        mamba_block(Tensor(np.zeros((3, 5))), p, cfg)


def test_mamba_parameter_gradients():
    cfg = MambaConfig(d_model=4, d_state=4, conv_width=4, expand=2)
    rng = np.random.default_rng(11)
    params = _uniform(init_mamba(cfg, rng), rng)
    F = rng.standard_normal((8, 4))
    for name, value in params.items():
        consts = {k: Tensor(v) for k, v in params.items()}

        def f(w, name=name):
            return ad.sum_(ad.square(mamba_block(Tensor(F), {**consts, name: w}, cfg)))

        assert finite_diff_check(f, value) < 1e-4, name


def test_benchmark_table():
    rows = scan_benchmark([64], d=4, s=2, repeats=1)
    assert len(rows) == 1 and rows[0][0] == 64 and rows[0][1] > 0
    with pytest.raises(ValueError):
        scan_benchmark([128, 64])
