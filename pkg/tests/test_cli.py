import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mbpu import autodiff as ad
from mbpu.checkpoint import load_checkpoint
from mbpu.cli import main
from mbpu.geometry import load_cloud
from mbpu.renderer import read_pfm

FIX = Path(__file__).parent / "fixtures"

TINY_CONFIG = """\
train.epochs = 2
train.points = 24
train.views = 2
train.shapes = sphere,cube
train.lr = 0.01
render.width = 8
render.height = 8
render.depth_bins = 16
extractor.init_dim = 4
extractor.mixer_dim = 4
extractor.transition_dim = 6
extractor.n_blocks = 1
extractor.n_mixers = 2
extractor.k_conv = 3
extractor.d_state = 2
extractor.conv_width = 2
extractor.expand = 1
net.hidden = 6,6,6
refine.iterations = 2
"""


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("train")
    cfg = d / "tiny.cfg"
    cfg.write_text(TINY_CONFIG)
    assert main(["train", "--config", str(cfg), "--out", str(d / "m.ckpt")]) == 0
    return d


def _cloud(path, n=40, seed=0):
    np.savetxt(path, np.random.default_rng(seed).standard_normal((n, 3)), fmt="%.8f")
    return str(path)


def test_module_entry_point_and_usage_error():
    r = subprocess.run([sys.executable, "-m", "mbpu", "render"], capture_output=True, text=True)
    assert r.returncode == 2 and "--input" in r.stderr
    r = subprocess.run([sys.executable, "-m", "mbpu", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "upsample" in r.stdout


def test_train_missing_config_exits_2(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path / "m.ckpt")]) == 2
    assert "not found" in capsys.readouterr().err


def test_train_bad_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("train.bogus = 1\n")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "m.ckpt")]) == 2


def test_train_writes_checkpoint_and_curve(trained):
    params = load_checkpoint(trained / "m.ckpt")
    assert params.count() > 0
    lines = (trained / "m.loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == 3
    assert all(np.isfinite(float(l.split(",")[1])) for l in lines[1:])


def test_train_prints_resolved_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(TINY_CONFIG.replace("train.epochs = 2", "train.epochs = 0"))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "z.ckpt")]) == 0
    err = capsys.readouterr().err
    assert "train.epochs = 0" in err and "loss.alpha = " in err and "refine.step = " in err


def test_upsample_counts_and_determinism(trained, tmp_path, capsys):
    src = _cloud(tmp_path / "in.xyz")
    outs = []
    for i in range(2):
        out = tmp_path / f"out{i}.xyz"
        assert main(["upsample", "--input", src, "--rate", "4", "--ckpt", str(trained / "m.ckpt"), "--config", str(trained / "tiny.cfg"), "--out", str(out), "--iters", "2"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert load_cloud(tmp_path / "out0.xyz").count == 160
    err = capsys.readouterr().err
    assert "refine.iterations = 2" in err and "extractor.k_conv = 3" in err and "warning" not in err


def test_upsample_identity_flags_reproduce_interpolation(trained, tmp_path):
    from mbpu.upsampler import interpolate_only

    src = _cloud(tmp_path / "in.xyz", seed=1)
    out = tmp_path / "o.xyz"
    assert main(["upsample", "--input", src, "--rate", "2", "--ckpt", str(trained / "m.ckpt"), "--config", str(trained / "tiny.cfg"), "--out", str(out), "--no-shift", "--lambda", "0"]) == 0
    expected = interpolate_only(load_cloud(src), 2).points
    np.testing.assert_allclose(load_cloud(out).points, expected, atol=1e-9)


def test_upsample_out_of_range_rate_warns(trained, tmp_path, capsys):
    src = _cloud(tmp_path / "in.xyz", n=40)
    out = tmp_path / "o.xyz"
    assert main(["upsample", "--input", src, "--rate", "9", "--ckpt", str(trained / "m.ckpt"), "--config", str(trained / "tiny.cfg"), "--out", str(out), "--iters", "0"]) == 0
    assert "outside" in capsys.readouterr().err
    assert load_cloud(out).count == 360


def test_upsample_missing_files_exit_1(trained, tmp_path):
    assert main(["upsample", "--input", str(tmp_path / "none.xyz"), "--rate", "4", "--ckpt", str(trained / "m.ckpt"), "--config", str(trained / "tiny.cfg"), "--out", str(tmp_path / "o.xyz")]) == 1
    src = _cloud(tmp_path / "in.xyz")
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"nope")
    assert main(["upsample", "--input", src, "--rate", "4", "--ckpt", str(bad), "--out", str(tmp_path / "o.xyz")]) == 1


def test_eval_matches_committed_oracle_values(capsys):
    exp = json.loads((FIX / "eval" / "expected.json").read_text())
    args = ["eval", "--pred", str(FIX / "eval" / "pred.xyz"), "--gt", str(FIX / "eval" / "gt.xyz"), "--threshold", str(exp["threshold"])]
    assert main(args + ["--dense-gt", str(FIX / "eval" / "dense.xyz"), "--json-lines"]) == 0
    got = json.loads(capsys.readouterr().out)
    for k in ("cd", "hd", "p2f", "fscore"):
        assert abs(got[k] - exp[k]) < 1e-12, k


def test_eval_text_output_and_missing_dense(tmp_path, capsys):
    base = ["eval", "--pred", str(FIX / "eval" / "pred.xyz"), "--gt", str(FIX / "eval" / "gt.xyz")]
    assert main(base) == 0
    out = dict(l.split() for l in capsys.readouterr().out.splitlines())
    assert out["p2f"] == "n/a" and set(out) == {"cd", "hd", "p2f", "fscore"}
    assert main(base + ["--dense-gt", str(FIX / "eval" / "missing.xyz")]) == 0
    assert "p2f n/a" in capsys.readouterr().out
    # a "dense" cloud sparser than gt is rejected as a surface proxy
    sparse = _cloud(tmp_path / "sparse.xyz", n=5)
    assert main(base + ["--dense-gt", sparse]) == 0
    assert "p2f n/a" in capsys.readouterr().out


def test_eval_missing_prediction_exits_1(tmp_path):
    assert main(["eval", "--pred", str(tmp_path / "x.xyz"), "--gt", str(FIX / "eval" / "gt.xyz")]) == 1


def test_render_golden_fixture_and_determinism(tmp_path):
    for run in ("a", "b"):
        assert main(["render", "--input", str(FIX / "render4" / "points.xyz"), "--out-dir", str(tmp_path / run), "--views", "2", "--size", "8", "8"]) == 0
    for i in range(2):
        name = f"view_{i:03d}.pfm"
        golden = (FIX / "render4" / name).read_bytes()
        assert (tmp_path / "a" / name).read_bytes() == golden == (tmp_path / "b" / name).read_bytes()


def test_render_empty_input_gives_background(tmp_path):
    empty = tmp_path / "empty.xyz"
    empty.write_text("")
    assert main(["render", "--input", str(empty), "--out-dir", str(tmp_path / "r"), "--views", "3", "--size", "4", "5"]) == 0
    files = sorted(p.name for p in (tmp_path / "r").iterdir())
    assert files == ["view_000.pfm", "view_001.pfm", "view_002.pfm"]
    img = read_pfm(tmp_path / "r" / "view_001.pfm")
    assert img.shape == (5, 4) and np.all(img == 1.0)


def test_render_bad_sizes_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["render", "--input", "x", "--out-dir", str(tmp_path), "--size", "0", "4"])
    assert e.value.code == 2
    assert main(["render", "--input", str(FIX / "render4" / "points.xyz"), "--out-dir", str(tmp_path), "--depth-bins", "1"]) == 2


def test_check_oracle_and_scan_suites(capsys):
    assert main(["check", "--suite", "oracle"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out
    assert main(["check", "--suite", "scan"]) == 0
    out = capsys.readouterr().out
    assert "n,seconds" in out and "growth" in out


def test_check_grad_suite_catches_sign_error(monkeypatch, capsys):
    assert main(["check", "--suite", "grad"]) == 0
    capsys.readouterr()
    original = ad.Exp.backward

    def flipped(g, ctx, x):
        return tuple(-v for v in original(g, ctx, x))

    monkeypatch.setattr(ad.Exp, "backward", staticmethod(flipped))
    assert main(["check", "--suite", "grad"]) == 1
    assert "FAIL" in capsys.readouterr().out
