"""Per-group aggregation and the fairness statistics SD and SER.

SD is the standard deviation of the per-group mean IoU values (sample divisor
by default). SER is the ratio of the highest to the lowest group error rate,
with error = 1 - group mean IoU.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .metrics import ClassScores, pass_rate_at_iou
from .model import (
    Attribute,
    AuditConfig,
    CohortRecord,
    EmptyInput,
    GroupKey,
    SdMode,
    TooFewGroups,
    attribute_levels,
)

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class GroupMetrics:
    group: GroupKey
    n: int
    mean_iou: float
    pass_rate: float

    @property
    def error(self) -> float:
        return 1.0 - self.mean_iou


@dataclass(frozen=True)
class FairnessReport:
    model_name: str
    grouping: Attribute
    groups: tuple[GroupMetrics, ...]
    sd: float | None  # None: not applicable (fewer than 2 groups)
    ser: float | None  # None: not applicable or undefined (a group error is 0)
    config: AuditConfig


def group_means(
    pairs: list[tuple[CohortRecord, ClassScores]],
    grouping: Attribute,
    iou_pass_threshold: float = 0.5,
) -> list[GroupMetrics]:
    """One GroupMetrics per observed group level, in canonical level order."""
    if not pairs:
        raise EmptyInput("group_means needs at least one scored image")
    buckets: dict[str, list[ClassScores]] = {}
    for record, scores in pairs:
        buckets.setdefault(record.group_value(grouping), []).append(scores)

    out = []
    for level in attribute_levels(grouping):
        scores = buckets.get(level)
        if not scores:
            continue
        mean_iou = sum(s.mean_iou for s in scores) / len(scores)
        out.append(
            GroupMetrics(
                group=GroupKey(grouping, level),
                n=len(scores),
                mean_iou=mean_iou,
                pass_rate=pass_rate_at_iou(scores, iou_pass_threshold),
            )
        )
    return out


def group_sd(groups: list[GroupMetrics], mode: SdMode = SdMode.Sample) -> float:
    """Standard deviation of the group mean IoU values."""
    if len(groups) < 2:
        raise TooFewGroups("SD needs at least two groups")
    means = [g.mean_iou for g in groups]
    center = sum(means) / len(means)
    ss = sum((m - center) ** 2 for m in means)
    divisor = len(means) - 1 if mode is SdMode.Sample else len(means)
    return math.sqrt(ss / divisor)


def skewed_error_ratio(groups: list[GroupMetrics]) -> float | None:
    """Highest over lowest group error rate; None (undefined) if any error is 0."""
    if len(groups) < 2:
        raise TooFewGroups("SER needs at least two groups")
    errors = [g.error for g in groups]
    lo = min(errors)
    if lo == 0.0:
        return None
    return max(errors) / lo


def build_report(
    model_name: str,
    pairs: list[tuple[CohortRecord, ClassScores]],
    grouping: Attribute,
    cfg: AuditConfig | None = None,
) -> FairnessReport:
    cfg = cfg or AuditConfig(grouping=grouping)
    groups = group_means(pairs, grouping, cfg.iou_pass_threshold)
    if len(groups) >= 2:
        sd = group_sd(groups, cfg.sd_mode)
        ser = skewed_error_ratio(groups)
    else:
        sd = None
        ser = None
    return FairnessReport(
        model_name=model_name,
        grouping=grouping,
        groups=tuple(groups),
        sd=sd,
        ser=ser,
        config=cfg,
    )


def _fmt3(x: float | None) -> str:
    return "NA" if x is None else f"{x:.3f}"


def report_to_dict(report: FairnessReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "model_name": report.model_name,
        "grouping": report.grouping.value,
        "groups": [
            {
                "value": g.group.value,
                "n": g.n,
                "mean_iou": g.mean_iou,
                "error": g.error,
                "pass_rate": g.pass_rate,
            }
            for g in report.groups
        ],
        "sd": report.sd,
        "ser": report.ser,
        "config": {
            "iou_pass_threshold": report.config.iou_pass_threshold,
            "grouping": report.config.grouping.value,
            "sd_mode": report.config.sd_mode.value,
            "class_exclusion": report.config.class_exclusion.value,
        },
        "notes": "group mean is the unweighted mean of per-image mean IoU",
    }


def report_from_dict(d: dict) -> FairnessReport:
    grouping = Attribute(d["grouping"])
    cfg_d = d["config"]
    from .model import ClassExclusion  # local import avoids an unused top-level name

    cfg = AuditConfig(
        iou_pass_threshold=cfg_d["iou_pass_threshold"],
        grouping=Attribute(cfg_d["grouping"]),
        sd_mode=SdMode(cfg_d["sd_mode"]),
        class_exclusion=ClassExclusion(cfg_d["class_exclusion"]),
    )
    groups = tuple(
        GroupMetrics(
            group=GroupKey(grouping, g["value"]),
            n=g["n"],
            mean_iou=g["mean_iou"],
            pass_rate=g["pass_rate"],
        )
        for g in d["groups"]
    )
    return FairnessReport(
        model_name=d["model_name"],
        grouping=grouping,
        groups=groups,
        sd=d["sd"],
        ser=d["ser"],
        config=cfg,
    )


def render_report(report: FairnessReport, fmt: str = "md") -> str:
    """Render as 'json' (full precision, one line), 'csv', or 'md' (3 decimals)."""
    if fmt == "json":
        return json.dumps(report_to_dict(report), sort_keys=True, separators=(",", ":"))
    group_names = [g.group.value for g in report.groups]
    means = [_fmt3(g.mean_iou) for g in report.groups]
    if fmt == "csv":
        header = ",".join(["model"] + group_names + ["sd", "ser"])
        row = ",".join([report.model_name] + means + [_fmt3(report.sd), _fmt3(report.ser)])
        return f"{header}\n{row}\n"
    if fmt == "md":
        cols = ["Model"] + group_names + ["SD", "SER"]
        row = [report.model_name] + means + [_fmt3(report.sd), _fmt3(report.ser)]
        lines = [
            "| " + " | ".join(cols) + " |",
            "|" + "|".join(["---"] * len(cols)) + "|",
            "| " + " | ".join(row) + " |",
        ]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
