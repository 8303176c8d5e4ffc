"""Selective state-space scan and the Mamba block built on it.

Block wiring, with ``sigma`` the SiLU activation::

    T = SSM(sigma(DW(MLP(LN(F)))))
    S = MLP(LN(T) * sigma(MLP_gate(LN(F)))) + F

The SSM follows the usual selective design: ``delta = softplus(linear(u))``,
``B`` and ``C`` are linear maps of ``u``, the state decays by ``exp(delta*A)``
and receives ``delta * B * x``.  ``A`` is stored as ``log(-A)``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Op, ShapeError, Tensor


@dataclass(frozen=True)
class MambaConfig:
    d_model: int = 32
    d_state: int = 16
    conv_width: int = 4
    expand: int = 2

    @property
    def d_inner(self) -> int:
        return self.expand * self.d_model


def _check_scan_shapes(x, delta, B, C, A, D):
    n, d = x.shape
    s = A.shape[1] if A.ndim == 2 else -1
    ok = (
        delta.shape == (n, d)
        and B.shape == (n, s)
        and C.shape == (n, s)
        and A.shape == (d, s)
        and D.shape == (d,)
    )
    if not ok:
        raise ShapeError(
            "selective_scan: inconsistent shapes "
            f"x={x.shape} delta={delta.shape} B={B.shape} C={C.shape} A={A.shape} D={D.shape}"
        )
    if np.any(delta <= 0):
        raise ValueError("selective_scan: delta must be strictly positive")


def scan_forward(x, delta, B, C, A, D, chunk: int = 256):
    """Raw numpy scan.  Returns ``(y, H)`` with every hidden state kept for backward.

    Time is processed in chunks so the decay and injection temporaries stay
    cache-sized; only ``H`` is materialized in full.
    """
    _check_scan_shapes(x, delta, B, C, A, D)
    n, d = x.shape
    s = A.shape[1]
    H = np.empty((n, d, s))
    y = np.empty((n, d))
    decay = np.empty((min(chunk, n), d, s))
    h = np.zeros((d, s))
    dx = delta * x
    for a in range(0, n, chunk):
        b = min(a + chunk, n)
        dec = decay[: b - a]
        np.multiply(delta[a:b, :, None], A[None], out=dec)
        np.exp(dec, out=dec)
        inject = dx[a:b, :, None] * B[a:b, None, :]
        for t in range(b - a):
            np.multiply(dec[t], h, out=h)
            h += inject[t]
            H[a + t] = h
        y[a:b] = np.einsum("tds,ts->td", H[a:b], C[a:b])
    y += x * D
    return y, H


class SelectiveScan(Op):
    name = "selective_scan"

    @staticmethod
    def forward(x, delta, B, C, A, D):
        y, H = scan_forward(x, delta, B, C, A, D)
        return y, H

    @staticmethod
    def backward(gy, ctx, x, delta, B, C, A, D):
        H = ctx
        n = x.shape[0]
        decay = np.exp(delta[:, :, None] * A[None, :, :])  # cheaper to redo than to keep
        # adjoint of the hidden state, run backwards in time
        GH = np.empty_like(H)
        direct = gy[:, :, None] * C[:, None, :]
        gh = np.zeros_like(H[0])
        for t in range(n - 1, -1, -1):
            gh *= decay[t + 1] if t + 1 < n else 0.0
            gh += direct[t]
            GH[t] = gh
        H_prev = np.concatenate([np.zeros_like(H[:1]), H[:-1]])
        g_decay = GH * H_prev * decay  # d/d(delta*A)
        gC = np.einsum("td,tds->ts", gy, H)
        gdelta = np.einsum("tds,ds->td", g_decay, A) + np.einsum("tds,ts->td", GH, B) * x
        gA = np.einsum("tds,td->ds", g_decay, delta)
        dx = delta * x
        gB = np.einsum("tds,td->ts", GH, dx)
        gx = np.einsum("tds,ts->td", GH, B) * delta + gy * D
        gD = (gy * x).sum(axis=0)
        return gx, gdelta, gB, gC, gA, gD


def selective_scan(x, delta, B, C, A, D) -> Tensor:
    """``h_t = exp(delta_t A) h_{t-1} + delta_t B_t x_t``, ``y_t = <C_t, h_t> + D x_t``."""
    return SelectiveScan.apply(x, delta, B, C, A, D)


# ---------------------------------------------------------------------------
# Mamba block


def init_mamba(cfg: MambaConfig, rng: np.random.Generator, prefix: str = "") -> dict:
    d, di, s, k = cfg.d_model, cfg.d_inner, cfg.d_state, cfg.conv_width
    p = {}

    def lin(name, fan_in, fan_out, bias=True):
        bound = 1.0 / np.sqrt(fan_in)
        p[f"{prefix}{name}.weight"] = rng.uniform(-bound, bound, (fan_in, fan_out))
        if bias:
            p[f"{prefix}{name}.bias"] = rng.uniform(-bound, bound, fan_out)

    p[f"{prefix}ln_in.gain"] = np.ones(d)
    p[f"{prefix}ln_in.bias"] = np.zeros(d)
    lin("in_proj", d, di)
    lin("gate_proj", d, di)
    bound = 1.0 / np.sqrt(k)
    p[f"{prefix}conv.weight"] = rng.uniform(-bound, bound, (di, k))
    p[f"{prefix}conv.bias"] = rng.uniform(-bound, bound, di)
    lin("dt_proj", di, di)
    # softplus(bias) spans [1e-3, 1e-1], log-uniformly
    dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), di))
    p[f"{prefix}dt_proj.bias"] = dt + np.log(-np.expm1(-dt))
    lin("B_proj", di, s, bias=False)
    lin("C_proj", di, s, bias=False)
    p[f"{prefix}A_log"] = np.log(np.tile(np.arange(1, s + 1, dtype=np.float64), (di, 1)))
    p[f"{prefix}D"] = np.ones(di)
    p[f"{prefix}ln_out.gain"] = np.ones(di)
    p[f"{prefix}ln_out.bias"] = np.zeros(di)
    lin("out_proj", di, d)
    return p


def mamba_branch(F: Tensor, p, cfg: MambaConfig, prefix: str = "") -> Tensor:
    """The gated branch of the block, i.e. ``S - F``."""
    if F.ndim != 2 or F.shape[1] != cfg.d_model:
        raise ShapeError(f"mamba_block: expected (n, {cfg.d_model}) input, got {F.shape}")

    def w(name):
        return p[prefix + name]

    u = ad.layer_norm(F, w("ln_in.gain"), w("ln_in.bias"))
    x = ad.linear(u, w("in_proj.weight"), w("in_proj.bias"))
    x = ad.silu(ad.bias_add(ad.dwconv1d(x, w("conv.weight")), w("conv.bias")))
    delta = ad.softplus(ad.linear(x, w("dt_proj.weight"), w("dt_proj.bias")))
    B = ad.matmul(x, w("B_proj.weight"))
    C = ad.matmul(x, w("C_proj.weight"))
    A = ad.scale(ad.exp(w("A_log")), -1.0)
    T = selective_scan(x, delta, B, C, A, w("D"))
    gate = ad.silu(ad.linear(u, w("gate_proj.weight"), w("gate_proj.bias")))
    y = ad.mul(ad.layer_norm(T, w("ln_out.gain"), w("ln_out.bias")), gate)
    return ad.linear(y, w("out_proj.weight"), w("out_proj.bias"))


def mamba_block(F: Tensor, p, cfg: MambaConfig, prefix: str = "") -> Tensor:
    F = ad.as_tensor(F)
    return ad.add(mamba_branch(F, p, cfg, prefix), F)


# ---------------------------------------------------------------------------
# benchmark


def scan_benchmark(lengths, d: int = 64, s: int = 16, repeats: int = 5, seed: int = 0):
    """Best-of-``repeats`` forward scan time for each sequence length."""
    lengths = list(lengths)
    if lengths != sorted(lengths):
        raise ValueError("lengths must be ascending")
    rng = np.random.default_rng(seed)
    A = -np.exp(rng.uniform(0, 2, (d, s)))
    D = rng.standard_normal(d)
    rows = []
    for n in lengths:
        x = rng.standard_normal((n, d))
        delta = rng.uniform(1e-3, 0.1, (n, d))
        B = rng.standard_normal((n, s))
        C = rng.standard_normal((n, s))
        scan_forward(x, delta, B, C, A, D)  # warm-up
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            scan_forward(x, delta, B, C, A, D)
            best = min(best, time.perf_counter() - t0)
        rows.append((n, best))
    return rows
