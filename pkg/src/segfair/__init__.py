"""segfair: fairness auditing and bias-mitigation sampler plans for
multi-class label-mask segmentation."""

from .fairness import (
    FairnessReport,
    GroupMetrics,
    build_report,
    group_means,
    group_sd,
    render_report,
    skewed_error_ratio,
)
from .metrics import ClassScores, class_dice, class_iou, mask_scores, pairwise_agreement, pass_rate_at_iou
from .model import (
    Attribute,
    AuditConfig,
    CohortRecord,
    GroupKey,
    Race,
    SegfairError,
    Sex,
    Split,
    classes_present,
    validate_mask,
)
from .sampling import (
    SamplerPlan,
    Strategy,
    baseline_plan,
    group_partition,
    oversample_plan,
    read_plan,
    stratified_batch_plan,
    stratified_split,
    write_plan,
)

__version__ = "0.1.0"
