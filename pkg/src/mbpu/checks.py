"""Self-check suites: finite-difference gradients, scan fidelity and speed, oracle equivalence.

Every suite returns a list of ``CheckResult``; ``run_suite`` is what the
``check`` subcommand calls.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import oracles
from .autodiff import Tensor, finite_diff_check
from .extractor import ExtractorConfig, extract, init_extractor, init_p3dconv, p3dconv
from .geometry import farthest_point_sample, knn
from .losses import (
    LossConfig,
    chamfer_distance,
    chamfer_loss,
    distance_regression_loss,
    l1_loss,
    l1_refinement_loss,
    to_unit_ball,
    total_loss,
)
from .metrics import fscore, hausdorff, p2f
from .network import NetworkConfig, NetworkField, init_network
from .regressor import RegressorConfig, init_regressor, regress
from .renderer import RenderConfig, make_camera_rig, render_views, view_loss
from .ssm import MambaConfig, init_mamba, mamba_block, scan_benchmark, scan_forward, selective_scan

SUITES = ("grad", "scan", "oracle")

OP_TOL = 1e-5  # single operations
LAYER_TOL = 1e-4  # composite layers
E2E_TOL = 1e-3  # the full training loss


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float
    ok: bool
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag}  {self.name:<40s} {self.value:.3e} (limit {self.tol:.0e}){extra}"


def _result(name, value, tol, detail=""):
    return CheckResult(name, float(value), tol, bool(value < tol), detail)


# ---------------------------------------------------------------------------
# gradient suite


def _weighted(out: Tensor, rng) -> Tensor:
    """Scalar probe ``sum(R * out)`` with a fixed random ``R`` so no gradient is trivially tiny."""
    R = Tensor(rng.uniform(0.5, 1.5, out.shape) * rng.choice([-1.0, 1.0], out.shape))
    return ad.sum_(ad.mul(out, R))


def _op_cases(rng):
    u = lambda *s: rng.uniform(-1, 1, s)  # noqa: E731
    pos = lambda *s: rng.uniform(0.5, 2.0, s)  # noqa: E731
    a, b, pa = u(3, 4), u(3, 4), pos(3, 4)
    w42, w234, w4, w4b, w43 = u(4, 2), u(2, 3, 4), u(4), u(4), u(4, 3)
    s74, w2 = u(7, 4), u(2)
    idx = np.array([[0, 2], [1, 1], [2, 0]])
    T = Tensor
    return {
        "add": (lambda x: ad.add(x, T(b)), a),
        "sub": (lambda x: ad.sub(T(b), x), a),
        "mul": (lambda x: ad.mul(x, T(b)), a),
        "div/numerator": (lambda x: ad.div(x, T(pa)), a),
        "div/denominator": (lambda x: ad.div(T(b), x), pa),
        "scale": (lambda x: ad.scale(x, -2.5), a),
        "add_scalar": (lambda x: ad.add_scalar(x, 0.7), a),
        "relu": (ad.relu, a),
        "silu": (ad.silu, a),
        "softplus": (ad.softplus, a),
        "exp": (ad.exp, a),
        "square": (ad.square, a),
        "abs": (ad.absolute, a),
        "reciprocal": (ad.reciprocal, pa),
        "sqrt": (ad.sqrt, pa),
        "clamp_min": (lambda x: ad.clamp_min(x, 0.1), a),
        "matmul/left": (lambda x: ad.matmul(x, T(w42)), a),
        "matmul/right": (lambda x: ad.matmul(T(w234), x), u(4, 5)),
        "transpose": (lambda x: ad.transpose(x, (1, 0, 2)), u(2, 3, 4)),
        "reshape": (lambda x: ad.reshape(x, (4, 3)), a),
        "concat": (lambda x: ad.concat([x, T(b), x], axis=1), a),
        "slice": (lambda x: ad.slice_(x, (slice(1, 3), slice(None, None, 2))), a),
        "gather": (lambda x: ad.gather(x, idx), a),
        "broadcast": (lambda x: ad.broadcast(x, 1, 3), a),
        "sum": (lambda x: ad.sum_(x, axis=0), a),
        "mean": (lambda x: ad.mean(x, axis=1), a),
        "max": (lambda x: ad.max_(x, axis=1), a),
        "norm": (lambda x: ad.norm(x, axis=1), a),
        "layer_norm": (lambda x: ad.layer_norm(x, T(w4), T(w4b)), a),
        "layer_norm/gain": (lambda x: ad.layer_norm(T(a), x, T(w4b)), w4),
        "dwconv1d/input": (lambda x: ad.dwconv1d(x, T(w43)), s74),
        "dwconv1d/kernel": (lambda x: ad.dwconv1d(T(s74), x), u(4, 4)),
        "bias_add": (lambda x: ad.bias_add(T(a), x), w4),
        "linear": (lambda x: ad.linear(x, T(w42), T(w2)), a),
    }


def _scan_cases(rng, n=6, d=3, s=2):
    args = [
        rng.uniform(-1, 1, (n, d)),
        rng.uniform(0.1, 1.0, (n, d)),
        rng.uniform(-1, 1, (n, s)),
        rng.uniform(-1, 1, (n, s)),
        -rng.uniform(0.2, 1.5, (d, s)),
        rng.uniform(-1, 1, d),
    ]
    names = ["x", "delta", "B", "C", "A", "D"]
    cases = {}
    for i, nm in enumerate(names):
        def f(v, i=i):
            full = [Tensor(a) for a in args]
            full[i] = v
            return selective_scan(*full)
        cases[f"selective_scan/{nm}"] = (f, args[i])
    return cases


def _param_checks(name, loss_fn, params, tol, per_tensor=2):
    """Worst FD error over the largest-gradient coordinates of every named tensor.

    Probing where the analytic gradient is largest keeps the check sensitive
    to wrong backward rules while avoiding coordinates whose true derivative
    is below finite-difference resolution.
    """
    tape = ad.Tape()
    leaves = {k: tape.variable(v) for k, v in params.items()}
    grads = dict(zip(params, tape.gradient(loss_fn(leaves), list(leaves.values()))))
    worst, skipped, where = 0.0, 0, ""
    for key, arr in params.items():
        coords = np.argsort(-np.abs(grads[key]).reshape(-1), kind="stable")[:per_tensor]
        consts = {k: Tensor(v) for k, v in params.items()}

        def f(w, key=key, consts=consts):
            return loss_fn({**consts, key: w})

        err, sk = finite_diff_check(f, arr, coords=coords, return_skipped=True)
        skipped += len(sk)
        if err > worst:
            worst, where = err, key
    detail = f"worst at {where}" if where else ""
    if skipped:
        detail += f" ({skipped} kink coords skipped)"
    return _result(name, worst, tol, detail.strip())


def _uniform_params(p, rng, lo=-1.0, hi=1.0):
    """O(1) parameters so finite differences are not swamped by rounding."""
    return {k: rng.uniform(lo, hi, v.shape) for k, v in p.items()}


def grad_suite(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for name, (f, x) in {**_op_cases(rng), **_scan_cases(rng)}.items():
        out.append(_result(f"op/{name}", finite_diff_check(lambda v, f=f: _weighted(f(v), np.random.default_rng(1)), x), OP_TOL))

    # P3DConv
    n, k, c = 6, 3, 4
    feat = rng.uniform(-1, 1, (n, c))
    pts = rng.uniform(-1, 1, (n, 3))
    nbr = knn(pts, pts, k, exclude_self=True)
    pp: dict = {}
    init_p3dconv(pp, rng, "conv.", c, 5)
    pp = _uniform_params(pp, rng)
    probe = lambda out: _weighted(out, np.random.default_rng(2))  # noqa: E731
    out.append(_result(
        "layer/p3dconv/features",
        finite_diff_check(lambda v: probe(p3dconv(v, pts, nbr, {q: Tensor(w) for q, w in pp.items()}, "conv.")), feat),
        LAYER_TOL,
    ))
    out.append(_param_checks("layer/p3dconv/params", lambda P: probe(p3dconv(Tensor(feat), pts, nbr, P, "conv.")), pp, LAYER_TOL, per_tensor=6))

    # Mamba block
    mc = MambaConfig(d_model=4, d_state=3, conv_width=3, expand=2)
    mp = _uniform_params(init_mamba(mc, rng), rng)
    F = rng.uniform(-1, 1, (7, 4))
    out.append(_result(
        "layer/mamba_block/input",
        finite_diff_check(lambda v: probe(mamba_block(v, {q: Tensor(w) for q, w in mp.items()}, mc)), F),
        LAYER_TOL,
    ))
    out.append(_param_checks("layer/mamba_block/params", lambda P: probe(mamba_block(Tensor(F), P, mc)), mp, LAYER_TOL, per_tensor=4))

    # extractor: sum(g^2)
    ec = ExtractorConfig(init_dim=4, mixer_dim=4, transition_dim=4, n_blocks=2, n_mixers=2, k_conv=3, d_state=2, conv_width=2, expand=1)
    ep = _uniform_params(init_extractor(ec, rng), rng, -0.8, 0.8)
    cloud = rng.uniform(-1, 1, (8, 3))
    g2 = lambda P: ad.sum_(ad.square(extract(cloud, P, ec).glob))  # noqa: E731
    out.append(_param_checks("layer/extractor/params", g2, ep, LAYER_TOL, per_tensor=1))

    # regressor heads, channel-major
    rc = RegressorConfig(in_dim=8, hidden=(6, 6, 6))
    rp = _uniform_params(init_regressor(rc, rng), rng)
    X = rng.uniform(-1, 1, (1, 8, 5))

    def head_loss(Xv, P):
        d, s = regress(Xv, P)
        return ad.add(ad.sum_(d), ad.sum_(ad.square(s)))

    out.append(_result(
        "layer/regressor/input",
        finite_diff_check(lambda v: head_loss(v, {q: Tensor(w) for q, w in rp.items()}), X),
        LAYER_TOL,
    ))
    out.append(_param_checks("layer/regressor/params", lambda P: head_loss(Tensor(X), P), rp, LAYER_TOL, per_tensor=4))

    # renderer through the view loss: 4 points, 2 views, 8x8x16
    rcfg = RenderConfig(width=8, height=8, depth_bins=16, sigma=1.0)
    rig = make_camera_rig(2)
    four = rng.uniform(-0.5, 0.5, (4, 3))
    ref = render_views(rng.uniform(-0.5, 0.5, (4, 3)), rig, rcfg).data
    out.append(_result(
        "layer/renderer/view_loss",
        finite_diff_check(lambda v: view_loss(render_views(v, rig, rcfg), Tensor(ref)), four),
        OP_TOL,
    ))

    # losses
    P = rng.uniform(-1, 1, (8, 3))
    Q = rng.uniform(-1, 1, (12, 3))
    out.append(_result("loss/chamfer", finite_diff_check(lambda v: chamfer_loss(v, Q), P), OP_TOL))
    out.append(_result("loss/l1_refinement", finite_diff_check(lambda v: l1_loss(v, Q), P), OP_TOL))
    out.append(_result(
        "loss/distance_regression",
        finite_diff_check(lambda v: distance_regression_loss(v, P, Q), rng.uniform(0, 1, (8, 1))),
        OP_TOL,
    ))
    out.append(_result("loss/unit_ball_clamp", finite_diff_check(lambda v: _weighted(to_unit_ball(v), np.random.default_rng(3)), P * 1.5), OP_TOL))

    out.extend(_end_to_end(rng))
    return out


def _end_to_end(rng):
    """Total training loss on an 8-point, 2-view instance w.r.t. points and parameters."""
    ec = ExtractorConfig(init_dim=4, mixer_dim=4, transition_dim=4, n_blocks=2, n_mixers=2, k_conv=3, d_state=2, conv_width=2, expand=1)
    nc = NetworkConfig(extractor=ec, hidden=(6, 6, 6), shift_scale=0.1)
    params = _uniform_params(init_network(nc, 7), rng, -0.8, 0.8)
    rcfg = RenderConfig(width=8, height=8, depth_bins=16)
    rig = make_camera_rig(2)
    P_I = rng.uniform(-0.6, 0.6, (8, 3))
    Q = rng.uniform(-0.6, 0.6, (8, 3))
    lc = LossConfig(alpha=0.01, beta=1.0)
    ref = render_views(Q, rig, rcfg).data

    def loss(P):
        field = NetworkField(P_I, P, nc)
        d, shift = field(Tensor(P_I), Tensor(np.zeros((8, 1))))
        S = ad.add(Tensor(P_I), shift)
        total, _ = total_loss(S, S, Q, rig, lc, rcfg, distance=d, query=P_I, reference_images=ref)
        return total

    res = [_param_checks("e2e/total_loss/params", loss, params, E2E_TOL, per_tensor=1)]

    # w.r.t. the refined cloud, with the network fixed
    field = NetworkField(P_I, params, nc)
    d0, _ = field(Tensor(P_I), Tensor(np.zeros((8, 1))), need_shift=False)

    def loss_pts(S):
        total, _ = total_loss(S, S, Q, rig, lc, rcfg, distance=Tensor(d0.data), query=P_I, reference_images=ref)
        return total

    res.append(_result("e2e/total_loss/points", finite_diff_check(loss_pts, P_I), E2E_TOL))
    return res


# ---------------------------------------------------------------------------
# scan suite


def scan_equivalence(lengths=(1, 7, 64, 1024, 8192), seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for n in lengths:
        d, s = (3, 2) if n > 1024 else (5, 4)
        x = rng.standard_normal((n, d))
        delta = rng.uniform(1e-3, 0.5, (n, d))
        B = rng.standard_normal((n, s))
        C = rng.standard_normal((n, s))
        A = -np.exp(rng.uniform(-1, 1, (d, s)))
        D = rng.standard_normal(d)
        y = scan_forward(x, delta, B, C, A, D)[0]
        ref = np.array(oracles.selective_scan(x.tolist(), delta.tolist(), B.tolist(), C.tolist(), A.tolist(), D.tolist()))
        err = float(np.max(np.abs(y - ref) / np.maximum(1.0, np.abs(ref))))
        out.append(_result(f"scan/equivalence n={n}", err, 1e-12))
    return out


def scan_linearity(lengths=(1024, 2048, 4096, 8192), limit: float = 2.5, repeats: int = 5):
    rows = scan_benchmark(lengths, repeats=repeats)
    results = []
    for (n0, t0), (n1, t1) in zip(rows, rows[1:]):
        results.append(_result(f"scan/growth t({n1})/t({n0})", t1 / t0, limit))
    return rows, results


def scan_suite(seed: int = 0, report=print) -> list:
    out = scan_equivalence(seed=seed)
    rows, growth = scan_linearity()
    report("n,seconds")
    for n, t in rows:
        report(f"{n},{t:.6f}")
    return out + growth


# ---------------------------------------------------------------------------
# oracle suite


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def oracle_suite(instances: int = 200, max_points: int = 200, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("chamfer", "hausdorff", "p2f", "fscore", "l1_refinement")}
    bad_idx = {"knn": 0, "fps": 0}
    for _ in range(instances):
        n = int(rng.integers(2, max_points + 1))
        m = int(rng.integers(1, max_points + 1))
        P = rng.uniform(-1, 1, (n, 3))
        if rng.random() < 0.25:
            P = np.round(P * 4) / 4  # lattice points force distance ties
        Q = rng.uniform(-1, 1, (m, 3))
        k = int(rng.integers(1, min(n - 1, 8) + 1))
        if knn(P, P, k, exclude_self=True).tolist() != oracles.knn(P, P, k, exclude_self=True):
            bad_idx["knn"] += 1
        kq = int(rng.integers(1, n + 1))
        if knn(P, Q, kq).tolist() != oracles.knn(P, Q, kq):
            bad_idx["knn"] += 1
        mm = int(rng.integers(1, min(n, 40) + 1))
        start = int(rng.integers(0, n))
        if farthest_point_sample(P, mm, start).tolist() != oracles.fps(P, mm, start):
            bad_idx["fps"] += 1
        worst["chamfer"] = max(worst["chamfer"], _rel(chamfer_distance(P, Q), oracles.chamfer(P, Q)))
        worst["hausdorff"] = max(worst["hausdorff"], _rel(hausdorff(P, Q), oracles.hausdorff(P, Q)))
        worst["p2f"] = max(worst["p2f"], _rel(p2f(P, Q), oracles.p2f(P, Q)))
        worst["l1_refinement"] = max(worst["l1_refinement"], _rel(l1_refinement_loss(P, Q), oracles.l1_refinement(P, Q)))
        thr = float(rng.uniform(0.01, 0.3))
        worst["fscore"] = max(worst["fscore"], _rel(fscore(P, Q, thr), oracles.fscore(P, Q, thr)))
    out = [CheckResult(f"oracle/{k}", float(v), 1, v == 0, f"{v} mismatching instances") for k, v in bad_idx.items()]
    out += [_result(f"oracle/{k}", v, 1e-12) for k, v in worst.items()]
    return out


def run_suite(name: str, report=print) -> list:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    t0 = time.perf_counter()
    if name == "grad":
        results = grad_suite()
    elif name == "scan":
        results = scan_suite(report=report)
    else:
        results = oracle_suite()
    for r in results:
        report(r.line())
    if name == "scan":
        for r in results:
            if r.name.startswith("scan/growth"):
                report(f"growth {r.name.split()[-1]} = {r.value:.3f}")
    report(f"{name}: {sum(r.ok for r in results)}/{len(results)} passed in {time.perf_counter() - t0:.1f}s")
    return results
