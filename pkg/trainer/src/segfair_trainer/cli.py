"""CLI for the reference trainer: train on a sampler plan, emit predictions."""

from __future__ import annotations

import argparse
import sys

from .io import ContractError, load_ids, load_plan
from .trainer import PlanMismatch, TrainerConfig, predict, train


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="segfair-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a sampler plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--data", required=True, help="cohort dir with gt/ (and optional images/)")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.0004)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("predict", help="emit prediction masks for cohort ids")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--meta", help="cohort CSV; predicts every id in it")
    p.add_argument("--plan", help="alternatively, predict the ids in a plan file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            config = TrainerConfig(
                plan_path=args.plan,
                data_dir=args.data,
                out_dir=args.out,
                epochs=args.epochs,
                batch_size=args.batch_size,
                learning_rate=args.lr,
                seed=args.seed,
            )
            checkpoint = train(config)
            print(f"checkpoint: {checkpoint}")
        else:
            if args.meta:
                ids = load_ids(args.meta)
            elif args.plan:
                plan = load_plan(args.plan)
                ids = sorted({i for b in plan["batches"] for i in b})
            else:
                print("error: predict needs --meta or --plan", file=sys.stderr)
                return 2
            predict(args.checkpoint, ids, args.data, args.out)
            print(f"wrote {len(ids)} masks to {args.out}")
    except (ContractError, PlanMismatch, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
