"""ACL-based detection evaluation: matching, per-category AP, mAP.

The protocol follows the COCO convention adapted to segments: detections
with confidence below 0.5 are discarded, matching is greedy in descending
confidence against same-category ground truth using ACL as the overlap,
and AP is the 101-point interpolated area under the precision-recall
curve, averaged over ten ACL thresholds 0.50, 0.55, ..., 0.95.

mAP@0.5 averages AP over every category present (in ground truth or
detections) and all ten thresholds; mAP3@0.5 restricts the mean to the
pole / building / curb categories.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .acl import acl
from .core import CategoryRegistry, SemLS
from .errors import ValidationError

# Per image id, the labeled/detected segments of that image.
DetectionSet = Mapping[str, Sequence[SemLS]]

ACL_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))
MAP3_CATEGORIES = ("pole", "building", "curb")
CONFIDENCE_FLOOR = 0.5
RECALL_LEVELS = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class Match:
    det_index: int
    gt_index: int
    overlap: float


@dataclass
class EvalReport:
    """Per-category APs, the two summary means and raw PR samples.

    `ap` is keyed by (category name, acl threshold); `pr_curves` holds the
    cumulative (recall, precision) points the interpolation ran on.
    """

    ap: dict = field(default_factory=dict)
    ap_per_category: dict = field(default_factory=dict)
    mean_ap: float | None = None
    mean_ap3: float | None = None
    pr_curves: dict = field(default_factory=dict)
    empty_ground_truth: bool = False


def match_detections(
    gt: Sequence[SemLS],
    det: Sequence[SemLS],
    acl_threshold: float,
    overlap: Callable[[SemLS, SemLS], float] | None = None,
) -> list[Match]:
    """Greedy one-to-one matching of detections against ground truth.

    Detections are processed in descending confidence (ties keep input
    order); each is assigned the unmatched ground-truth segment with the
    highest overlap, provided that overlap is positive and reaches the
    threshold. Ground-truth ties go to the lower input index. `overlap`
    defaults to category-gated ACL with the ground truth as reference.
    """
    if overlap is None:
        overlap = acl
    for d in det:
        if d.confidence is None:
            raise ValidationError("detections must carry a confidence score")
    order = sorted(range(len(det)), key=lambda i: (-det[i].confidence, i))
    taken: set[int] = set()
    matches: list[Match] = []
    for di in order:
        best_gi = -1
        best_ov = 0.0
        for gi, g in enumerate(gt):
            if gi in taken:
                continue
            ov = overlap(g, det[di])
            if ov <= 0.0 or ov < acl_threshold:
                continue
            if ov > best_ov:
                best_gi, best_ov = gi, ov
        if best_gi >= 0:
            taken.add(best_gi)
            matches.append(Match(di, best_gi, best_ov))
    return matches


def average_precision(tp: Sequence[bool], n_gt: int) -> float | None:
    """101-point interpolated AP from confidence-sorted true/false flags.

    Returns None (category skipped) when there is nothing to score at all,
    0.0 when detections exist but no ground truth does.
    """
    if n_gt < 0:
        raise ValidationError("n_gt must be non-negative")
    if n_gt == 0:
        return None if len(tp) == 0 else 0.0
    if len(tp) == 0:
        return 0.0
    flags = np.asarray(tp, dtype=bool)
    cum_tp = np.cumsum(flags)
    precision = cum_tp / np.arange(1, len(flags) + 1)
    recall = cum_tp / n_gt
    # precision envelope: running max from the right
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # for each recall level, the first PR point with recall >= level
    idx = np.searchsorted(recall, RECALL_LEVELS, side="left")
    interpolated = np.where(idx < len(flags), envelope[np.minimum(idx, len(flags) - 1)], 0.0)
    return float(np.mean(interpolated))


def _pooled_tp_flags(
    gt: DetectionSet,
    det: DetectionSet,
    category: int,
    threshold: float,
    overlap: Callable[[SemLS, SemLS], float] | None,
) -> tuple[list[bool], int]:
    """Match per image, then pool detections globally by confidence."""
    pooled: list[tuple[float, str, int, bool]] = []
    n_gt = 0
    image_ids = sorted(set(gt) | set(det))
    for image_id in image_ids:
        gt_c = [s for s in gt.get(image_id, ()) if s.category == category]
        det_c = [s for s in det.get(image_id, ()) if s.category == category]
        n_gt += len(gt_c)
        matched = {m.det_index for m in match_detections(gt_c, det_c, threshold, overlap)}
        for di, d in enumerate(det_c):
            pooled.append((d.confidence, image_id, di, di in matched))
    pooled.sort(key=lambda row: (-row[0], row[1], row[2]))
    return [row[3] for row in pooled], n_gt


def evaluate(
    gt: DetectionSet,
    det: DetectionSet,
    registry: CategoryRegistry,
    overlap: Callable[[SemLS, SemLS], float] | None = None,
) -> EvalReport:
    """Evaluate a detection set against ground truth.

    Detections below the 0.5 confidence floor are dropped first. Categories
    absent from both sides are excluded from the means rather than counted
    as zero. Passing `overlap` (e.g. box_overlap) switches the matching
    criterion; the default is ACL.
    """
    det = {
        image_id: [s for s in segs if s.confidence is not None and s.confidence >= CONFIDENCE_FLOOR]
        for image_id, segs in det.items()
    }
    categories = sorted(
        {s.category for segs in gt.values() for s in segs}
        | {s.category for segs in det.values() for s in segs}
    )
    report = EvalReport()
    report.empty_ground_truth = not any(len(segs) for segs in gt.values())

    ap_values: list[float] = []
    ap3_values: list[float] = []
    for category in categories:
        name = registry.name(category)
        per_threshold: list[float] = []
        for threshold in ACL_THRESHOLDS:
            flags, n_gt = _pooled_tp_flags(gt, det, category, threshold, overlap)
            value = average_precision(flags, n_gt)
            if value is None:
                continue
            report.ap[(name, threshold)] = value
            per_threshold.append(value)
            if n_gt > 0 and flags:
                cum_tp = np.cumsum(np.asarray(flags, dtype=bool))
                ranks = np.arange(1, len(flags) + 1)
                report.pr_curves[(name, threshold)] = (cum_tp / n_gt, cum_tp / ranks)
        if per_threshold:
            mean_cat = float(np.mean(per_threshold))
            report.ap_per_category[name] = mean_cat
            ap_values.extend(per_threshold)
            if name in MAP3_CATEGORIES:
                ap3_values.extend(per_threshold)

    if ap_values:
        report.mean_ap = float(np.mean(ap_values))
    if ap3_values:
        report.mean_ap3 = float(np.mean(ap3_values))
    return report
