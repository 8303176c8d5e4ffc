"""Train the toy model and compare it with plain midpoint interpolation.

Uses the default run configuration (five shapes, 256 -> 1024 points) and
reports held-out Chamfer distance per shape for the trained model and for
the interpolation it starts from.  A full run takes about eight minutes on one
core; ``--epochs`` shortens it.

    python demos/train_toy.py --epochs 50 --out toy.ckpt
"""

import argparse
from dataclasses import replace

from mbpu.checkpoint import save_checkpoint
from mbpu.config import RunConfig
from mbpu.training import evaluate_heldout, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=RunConfig().train.epochs)
    ap.add_argument("--out", help="optional checkpoint path")
    args = ap.parse_args()

    cfg = RunConfig()
    cfg = replace(cfg, train=replace(cfg.train, epochs=args.epochs))

    def progress(epoch, loss, parts):
        if epoch % 5 == 0 or epoch == args.epochs - 1:
            print(f"epoch {epoch:3d}  loss {loss:.4f}  CD {parts['L_cd']:.5f}", flush=True)

    result = train(cfg.train, cfg.loss, cfg.network, cfg.render, cfg.refine.k_midpoint, progress=progress, refine_cfg=cfg.refine)
    print(f"trained in {result.seconds:.0f}s")
    if args.out:
        save_checkpoint(args.out, result.params)

    held = evaluate_heldout(result.params, cfg.train, cfg.refine, cfg.network)
    print(f"{'shape':<10}{'model CD':>12}{'interp CD':>12}{'ratio':>8}")
    for name, m, b in zip(held.shapes, held.model_cd, held.baseline_cd):
        print(f"{name:<10}{m:12.3e}{b:12.3e}{m / b:8.3f}")
    print(f"mean ratio {held.ratio:.3f}")


if __name__ == "__main__":
    main()
