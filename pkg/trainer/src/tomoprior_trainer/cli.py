"""Command-line trainer: train on paired reconstructions, export TPW1 weights."""

from __future__ import annotations

import argparse
import sys

from .train import TrainConfig, train_and_export
from .verify import verify_against_primary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tomoprior-train",
                                     description=__doc__.strip())
    parser.add_argument("--data", required=True,
                        help="directory written by `tomoprior simulate`")
    parser.add_argument("--recon", required=True,
                        help="directory written by `tomoprior reconstruct`")
    parser.add_argument("--out", required=True, help="output weight file (.tpw)")
    parser.add_argument("--trace", help="optional CSV training trace")
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--smooth-weight", type=float, default=1.0)
    parser.add_argument("--lr-start", type=float, default=1e-4)
    parser.add_argument("--lr-end", type=float, default=2e-6)
    parser.add_argument("--val-fraction", type=float, default=0.2)
    parser.add_argument("--checkpoint-every", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-attention", action="store_true",
                        help="train the attention-free ablation")
    args = parser.parse_args(argv)

    config = TrainConfig(
        data_dir=args.data, recon_dir=args.recon, batch_size=args.batch_size,
        total_steps=args.steps, lr_start=args.lr_start, lr_end=args.lr_end,
        smooth_weight=args.smooth_weight, val_fraction=args.val_fraction,
        checkpoint_every=args.checkpoint_every,
        attention=not args.no_attention, seed=args.seed,
    )
    _, trace = train_and_export(config, args.out, args.trace)
    print(f"trained {config.total_steps} steps; "
          f"best validation PSNR {max(trace.val_psnr):.2f} dB")
    passed, max_diff, detail = verify_against_primary(args.out)
    print(f"cross-component verification: {'PASS' if passed else 'FAIL'} "
          f"(max diff {max_diff:.3e}; {detail})")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
