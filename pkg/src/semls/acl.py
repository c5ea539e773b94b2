"""Angle-Center-Length (ACL) overlap for line segments.

ACL replaces box IoU when comparing segments: it is the product of an
angle, a center and a length similarity, gated on category equality.
The first argument is always the reference segment (ground truth or
pre-transform segment); the center and length terms normalize by the
reference length, so the score is deliberately asymmetric.

Each factor is clamped at 0 before multiplication so the product stays
in [0, 1] even for widely separated segments.
"""

from __future__ import annotations

import math

from .core import SemLS


def sim_center(ref: SemLS, other: SemLS) -> float:
    """Center-point similarity: 1 - |c_ref - c_other| / (0.5 * len_ref), clamped at 0."""
    (ax, ay), (bx, by) = ref.midpoint, other.midpoint
    dist = math.hypot(ax - bx, ay - by)
    return max(0.0, 1.0 - dist / (0.5 * ref.length))


def sim_length(ref: SemLS, other: SemLS) -> float:
    """Length similarity: 1 - |len_ref - len_other| / len_ref, clamped at 0."""
    return max(0.0, 1.0 - abs(ref.length - other.length) / ref.length)


def sim_angle(ref: SemLS, other: SemLS) -> float:
    """Angle similarity: 1 - delta/90 with delta the circular distance in [0, 90].

    Segments are undirected, so angles live on a 180-degree circle and the
    distance is min(d, 180 - d).
    """
    d = abs(ref.angle_deg - other.angle_deg)
    d = min(d, 180.0 - d)
    return 1.0 - d / 90.0


def acl(ref: SemLS, other: SemLS, category_agnostic: bool = False) -> float:
    """ACL overlap in [0, 1]; 0 when categories differ (unless agnostic).

    acl(s, s) == 1 for every valid segment.
    """
    if not category_agnostic and ref.category != other.category:
        return 0.0
    return sim_angle(ref, other) * sim_center(ref, other) * sim_length(ref, other)


def box_iou(a: SemLS, b: SemLS) -> float:
    """IoU of the two segments' axis-aligned minimum bounding boxes.

    Degenerate (zero-area) boxes yield 0. Useful to contrast IoU with ACL
    and to evaluate object-box records whose corners are stored as the
    segment endpoints.
    """
    ax1, ax2 = sorted((a.p1[0], a.p2[0]))
    ay1, ay2 = sorted((a.p1[1], a.p2[1]))
    bx1, bx2 = sorted((b.p1[0], b.p2[0]))
    by1, by2 = sorted((b.p1[1], b.p2[1]))
    inter_w = min(ax2, bx2) - max(ax1, bx1)
    inter_h = min(ay2, by2) - max(ay1, by1)
    inter = max(0.0, inter_w) * max(0.0, inter_h)
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def box_overlap(ref: SemLS, other: SemLS, category_agnostic: bool = False) -> float:
    """Category-gated bounding-box IoU, signature-compatible with acl()."""
    if not category_agnostic and ref.category != other.category:
        return 0.0
    return box_iou(ref, other)
