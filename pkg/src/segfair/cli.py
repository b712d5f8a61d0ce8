"""Command-line entry point: audit, plan, split, agree, synth, report.

Every subcommand taking --seed is bit-reproducible: identical inputs and seed
produce identical stdout and output files. Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import fairness, ingest, metrics, sampling, synth
from .model import (
    Attribute,
    AuditConfig,
    GroupKey,
    SegfairError,
    Split,
    attribute_levels,
)

ATTR_FLAGS = {"sex": Attribute.Sex, "race": Attribute.Race, "sexrace": Attribute.SexByRace}


def _worker_count() -> int:
    env = os.environ.get("SEGFAIR_THREADS", "")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _score_pairs(pairs, cfg):
    workers = _worker_count()
    if workers == 1 or len(pairs) < 4:
        return [metrics.mask_scores(p.gt, p.pred, cfg) for p in pairs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: metrics.mask_scores(p.gt, p.pred, cfg), pairs))


def cmd_audit(args) -> int:
    table = ingest.load_metadata(args.meta)
    pairs = ingest.resolve_pairs(table, args.gt, args.pred)
    grouping = ATTR_FLAGS[args.group]
    cfg = AuditConfig(iou_pass_threshold=args.tau, grouping=grouping)
    scores = _score_pairs(pairs, cfg)
    scored = list(zip(table.records, scores))
    report = fairness.build_report(args.model_name, scored, grouping, cfg)
    sys.stdout.write(fairness.render_report(report, args.format))
    if args.format == "json":
        sys.stdout.write("\n")
    return 0


def _training_records(args):
    table = ingest.load_metadata(args.meta)
    records = list(table.records)
    if args.split:
        split_map = sampling.read_split(args.split)
        records = [r for r in records if split_map.get(r.id) is Split.Train]
    else:
        if all(r.split is None for r in records):
            raise SegfairError(
                "metadata has no split column; pass --split FILE or add one"
            )
        records = [r for r in records if r.split is Split.Train]
    if not records:
        raise SegfairError("no training records after applying the split")
    return records


def _verify_plan(plan: sampling.SamplerPlan) -> None:
    sizes = [len(b) for b in plan.batches]
    assert all(s == plan.batch_size for s in sizes[:-1]), "non-final batch underfull"
    print(f"verified: {len(plan.batches)} batches, batch sizes ok")


def cmd_plan(args) -> int:
    if args.strategy != "baseline" and not args.attr:
        print("error: --attr is required for this strategy", file=sys.stderr)
        return 2
    records = _training_records(args)
    attribute = ATTR_FLAGS[args.attr] if args.attr else None
    out = Path(args.out)

    if args.strategy == "baseline":
        plan = sampling.baseline_plan([r.id for r in records], args.seed, args.batch_size)
        plans = [(None, plan)]
    elif args.strategy == "balanced":
        plans = [(None, sampling.oversample_plan(records, attribute, args.seed, args.batch_size))]
    elif args.strategy == "stratified":
        plans = [(None, sampling.stratified_batch_plan(records, attribute, args.seed, args.batch_size))]
    else:  # group
        plans = sampling.group_partition(records, attribute, args.seed, args.batch_size)

    for label, plan in plans:
        if label is None:
            path = out
        else:
            safe = label.replace("|", "-")
            path = out.with_name(f"{out.stem}__{safe}{out.suffix}")
        sampling.write_plan(plan, path)
        ids = [i for b in plan.batches for i in b]
        summary = f"{path}: {len(plan.batches)} batches, {len(ids)} samples"
        if attribute is not None:
            by_group = {r.id: r.group_value(attribute) for r in records}
            counts: dict[str, int] = {}
            for i in ids:
                counts[by_group[i]] = counts.get(by_group[i], 0) + 1
            summary += ", " + ", ".join(
                f"{level}={counts[level]}"
                for level in attribute_levels(attribute)
                if level in counts
            )
        print(summary)
        if args.verify:
            _verify_plan(plan)
    return 0


def cmd_split(args) -> int:
    table = ingest.load_metadata(args.meta)
    split = sampling.stratified_split(table, args.seed)
    sampling.write_split(split, args.out)
    by_record = {r.id: r for r in table.records}
    strata: dict[str, dict[Split, int]] = {}
    for rid, part in split.assignments.items():
        key = by_record[rid].group_value(Attribute.SexByRace)
        strata.setdefault(key, {p: 0 for p in Split})[part] += 1
    for key in sorted(strata):
        c = strata[key]
        print(f"{key}: train={c[Split.Train]} val={c[Split.Val]} test={c[Split.Test]}")
    totals = {p: sum(c[p] for c in strata.values()) for p in Split}
    print(f"total: train={totals[Split.Train]} val={totals[Split.Val]} test={totals[Split.Test]}")
    return 0


def cmd_agree(args) -> int:
    masks_dir = Path(args.masks)
    annotations = []
    for path in sorted(masks_dir.iterdir()):
        if path.suffix.lower() not in (".png", ".pgm") or "__" not in path.stem:
            continue
        annotator, image = path.stem.split("__", 1)
        annotations.append((annotator, image, ingest.load_mask(path)))
    mean_iou, mean_dice = metrics.pairwise_agreement(annotations)
    print(f"IoU {mean_iou:.3f}, Dice {mean_dice:.4f}")
    return 0


def cmd_synth(args) -> int:
    attribute = ATTR_FLAGS[args.attr]
    targets = {}
    for part in args.targets.split(","):
        level, value = part.split("=")
        targets[GroupKey(attribute, level.strip())] = float(value)
    spec = synth.SynthSpec(
        n_per_group={k: args.n_per_group for k in targets},
        target_iou=targets,
        image_size=(args.size, args.size),
        seed=args.seed,
    )
    table = synth.generate_cohort(spec, args.out, mask_format=args.mask_format)
    print(f"{args.out}: {len(table.records)} images in {len(targets)} groups")
    return 0


def cmd_report(args) -> int:
    d = json.loads(Path(args.infile).read_text(encoding="utf-8"))
    report = fairness.report_from_dict(d)
    sys.stdout.write(fairness.render_report(report, args.format))
    if args.format == "json":
        sys.stdout.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segfair", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="score a cohort and print the fairness report")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--group", required=True, choices=sorted(ATTR_FLAGS))
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--format", choices=["json", "csv", "md"], default="md")
    p.add_argument("--model-name", default="model")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("plan", help="emit a sampler plan file")
    p.add_argument("--meta", required=True)
    p.add_argument("--strategy", required=True, choices=["baseline", "balanced", "stratified", "group"])
    p.add_argument("--attr", choices=["sex", "race"])
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", help="id,split CSV overriding the metadata split column")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("split", help="write a stratified 70/15/15 split")
    p.add_argument("--meta", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("agree", help="inter-annotator agreement over <annotator>__<image> masks")
    p.add_argument("--masks", required=True)
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("synth", help="generate a synthetic cohort with target per-group IoU")
    p.add_argument("--out", required=True)
    p.add_argument("--attr", required=True, choices=sorted(ATTR_FLAGS))
    p.add_argument("--targets", required=True, help="e.g. Male=0.85,Female=0.70")
    p.add_argument("--n-per-group", type=int, default=20)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mask-format", choices=["png", "pgm"], default="png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render a saved JSON report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["json", "csv", "md"], default="md")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SegfairError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
