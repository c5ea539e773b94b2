"""Reference numerics for the anchor-free segment detector head.

Everything here is plain double-precision numpy so the target generation,
the loss terms and the decoding are executable and checkable:

* make_targets builds the dense ground-truth maps at output stride r
  (Gaussian center heatmap, sub-cell offset, box size, angle/length,
  diagonal direction, center mask) from general-encoding annotations.
* focal_loss / masked_l1 / direction_ce are the loss terms; each has a
  *_with_grad twin returning the analytic gradient w.r.t. the prediction,
  verified against central differences by finite_diff_check.
* total_loss assembles the weighted sum for either encoding.
* decode_detections inverts ideal (or predicted) head tensors back into
  scored segments via 3x3 local-maximum selection.

Array layout is (channels, rows, cols) indexed [c, y, x]. Angle targets
are normalized by 180 degrees, size/length targets live in feature-map
units (lengths additionally normalized by the feature-map diagonal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import DIR_BOX, DIR_DOWN, DIR_UP, GeneralEncoding, SemLS, decode_general
from .errors import ValidationError

EPS_PROB = 1e-12  # heatmap clamp before logs


@dataclass
class TargetMaps:
    """Dense ground-truth tensors for one image at output stride r."""

    heatmap: np.ndarray    # (K, H/r, W/r) in [0, 1]; exactly 1 at center cells
    offset: np.ndarray     # (2, H/r, W/r), (x, y) sub-cell remainder at centers
    wh: np.ndarray         # (2, H/r, W/r), box (w, h) in feature-map units
    angle: np.ndarray      # (1, H/r, W/r), segment angle / 180
    length: np.ndarray     # (1, H/r, W/r), diagonal length / feature-map diagonal
    direction: np.ndarray  # (1, H/r, W/r), diagonal direction flag 0/1
    mask: np.ndarray       # (H/r, W/r) bool, 1 at ground-truth center cells
    stride: int
    count: int             # number of annotations (N)
    width: int
    height: int


@dataclass(frozen=True)
class LossWeights:
    """Weights of the loss terms; the focusing exponents are fixed."""

    off: float = 1.0
    wh: float = 0.1
    d: float = 1.0
    ang: float = 1.0
    length: float = 0.1
    delta: float = 4.0
    gamma: float = 2.0

    def __post_init__(self):
        for name in ("off", "wh", "d", "ang", "length"):
            if getattr(self, name) < 0:
                raise ValidationError(f"loss weight {name} must be non-negative")


def gaussian_radius(w: float, h: float, min_iou: float = 0.7) -> int:
    """Largest integer corner shift keeping box IoU >= min_iou.

    The worst case over independent corner shifts is one of three
    configurations (box translated, shrunk, or grown); each yields a
    quadratic in the shift, and the binding constraint is the smallest
    root.
    """
    if w <= 0 or h <= 0:
        return 0
    o = min_iou
    # translated: (w-r)(h-r) >= o * (2wh - (w-r)(h-r))
    b1 = w + h
    c1 = w * h * (1 - o) / (1 + o)
    r1 = (b1 - math.sqrt(b1 * b1 - 4 * c1)) / 2
    # shrunk: (w-2r)(h-2r) >= o * wh
    b2 = w + h
    c2 = (1 - o) * w * h
    r2 = (b2 - math.sqrt(b2 * b2 - 4 * c2)) / 4
    # grown: wh >= o * (w+2r)(h+2r)
    b3 = o * (w + h)
    c3 = (o - 1) * w * h
    r3 = (-b3 + math.sqrt(b3 * b3 - 4 * o * c3)) / (4 * o)
    return max(0, math.floor(min(r1, r2, r3)))


def adaptive_sigma(w: float, h: float, min_iou: float = 0.7) -> float:
    """Gaussian std from the integer radius rule; never collapses to 0."""
    radius = gaussian_radius(w, h, min_iou)
    return max(1e-6, (2.0 * radius + 1.0) / 6.0)


def make_targets(
    annotations: Sequence[GeneralEncoding],
    num_categories: int,
    width: int,
    height: int,
    stride: int = 4,
) -> TargetMaps:
    """Build the dense target maps for one image.

    Overlapping Gaussians of the same category combine by per-cell max.
    Two annotations landing in the same cell both count toward N, but the
    later one overwrites the per-cell regression targets.
    """
    if width % stride or height % stride:
        raise ValidationError(f"stride {stride} must divide the image size {width}x{height}")
    wf, hf = width // stride, height // stride
    heatmap = np.zeros((num_categories, hf, wf))
    offset = np.zeros((2, hf, wf))
    wh = np.zeros((2, hf, wf))
    angle = np.zeros((1, hf, wf))
    length = np.zeros((1, hf, wf))
    direction = np.zeros((1, hf, wf))
    mask = np.zeros((hf, wf), dtype=bool)
    diag_f = math.hypot(wf, hf)
    ys, xs = np.mgrid[0:hf, 0:wf]

    for g in annotations:
        if g.direction == DIR_BOX:
            raise ValidationError("object-box records have no direction target")
        if not 0 <= g.category < num_categories:
            raise ValidationError(f"category {g.category} outside the {num_categories} channels")
        if not (0 <= g.cx < width and 0 <= g.cy < height):
            raise ValidationError(f"center ({g.cx}, {g.cy}) outside the {width}x{height} image")
        fx, fy = g.cx / stride, g.cy / stride
        cx_i, cy_i = int(math.floor(fx)), int(math.floor(fy))
        w_f, h_f = g.w / stride, g.h / stride

        sigma = adaptive_sigma(w_f, h_f)
        blob = np.exp(-((xs - cx_i) ** 2 + (ys - cy_i) ** 2) / (2.0 * sigma * sigma))
        np.maximum(heatmap[g.category], blob, out=heatmap[g.category])
        heatmap[g.category, cy_i, cx_i] = 1.0

        offset[:, cy_i, cx_i] = (fx - cx_i, fy - cy_i)
        wh[:, cy_i, cx_i] = (w_f, h_f)
        alpha = math.degrees(math.atan2(h_f if g.direction == 0 else -h_f, w_f)) % 180.0
        angle[0, cy_i, cx_i] = alpha / 180.0
        length[0, cy_i, cx_i] = math.hypot(w_f, h_f) / diag_f
        direction[0, cy_i, cx_i] = float(g.direction)
        mask[cy_i, cx_i] = True

    return TargetMaps(heatmap, offset, wh, angle, length, direction, mask,
                      stride, len(annotations), width, height)


def _clamped(m_hat: np.ndarray) -> np.ndarray:
    return np.clip(m_hat, EPS_PROB, 1.0 - EPS_PROB)


def focal_loss_with_grad(m_hat: np.ndarray, targets: TargetMaps,
                         delta: float = 4.0, gamma: float = 2.0) -> tuple[float, np.ndarray]:
    """Focal heatmap loss and its gradient w.r.t. the predicted heatmap.

    With t the target map and p the prediction: at center cells (t == 1)
    the per-cell weight is 1 and the scored probability is p; elsewhere the
    weight is (1-t)^delta and the scored probability is 1-p. The loss is
    -(1/N) * sum weight * (1-q)^gamma * log(q) over the scored q.
    """
    m = targets.heatmap
    if m_hat.shape != m.shape:
        raise ValidationError(f"heatmap shape {m_hat.shape} != target shape {m.shape}")
    p = _clamped(m_hat)
    center = m == 1.0
    m_t = np.where(center, 1.0, 1.0 - m)
    q = np.where(center, p, 1.0 - p)
    n = max(targets.count, 1)

    weight = m_t ** delta
    loss = -np.sum(weight * (1.0 - q) ** gamma * np.log(q)) / n
    # d/dq of (1-q)^gamma * log q, then dq/dp = +1 at centers, -1 elsewhere
    dq = -gamma * (1.0 - q) ** (gamma - 1.0) * np.log(q) + (1.0 - q) ** gamma / q
    grad = -(weight * dq) * np.where(center, 1.0, -1.0) / n
    return float(loss), grad


def focal_loss(m_hat: np.ndarray, targets: TargetMaps,
               delta: float = 4.0, gamma: float = 2.0) -> float:
    return focal_loss_with_grad(m_hat, targets, delta, gamma)[0]


def masked_l1_with_grad(pred: np.ndarray, target: np.ndarray, mask: np.ndarray,
                        count: int) -> tuple[float, np.ndarray]:
    """L1 over masked cells, summed across channels, averaged by max(N, 1)."""
    pred = np.atleast_3d(np.asarray(pred, dtype=float))
    target = np.atleast_3d(np.asarray(target, dtype=float))
    if pred.shape != target.shape or pred.shape[1:] != mask.shape:
        raise ValidationError(
            f"shape mismatch: pred {pred.shape}, target {target.shape}, mask {mask.shape}")
    n = max(count, 1)
    diff = pred - target
    loss = np.sum(np.abs(diff) * mask) / n
    grad = np.sign(diff) * mask / n
    return float(loss), grad


def masked_l1(pred: np.ndarray, target: np.ndarray, mask: np.ndarray, count: int) -> float:
    return masked_l1_with_grad(pred, target, mask, count)[0]


def direction_ce_with_grad(logits: np.ndarray, target_d: np.ndarray, mask: np.ndarray,
                           count: int) -> tuple[float, np.ndarray]:
    """Masked 2-way cross-entropy; softmax runs over the predicted logits."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 3 or logits.shape[0] != 2:
        raise ValidationError(f"direction logits must be (2, H, W), got {logits.shape}")
    if logits.shape[1:] != mask.shape:
        raise ValidationError("logits and mask disagree on the spatial shape")
    d = np.asarray(target_d)
    if d.ndim == 3:
        d = d[0]
    d = d.astype(int)
    if not np.isin(d[np.asarray(mask, dtype=bool)], (0, 1)).all():
        raise ValidationError("direction targets must be 0 or 1 on masked cells")
    d = np.clip(d, 0, 1)  # unmasked cells may carry junk; they score 0 anyway
    n = max(count, 1)

    shifted = logits - logits.max(axis=0, keepdims=True)
    expd = np.exp(shifted)
    softmax = expd / expd.sum(axis=0, keepdims=True)
    log_softmax = shifted - np.log(expd.sum(axis=0, keepdims=True))
    picked = np.take_along_axis(log_softmax, d[None], axis=0)[0]
    loss = -np.sum(picked * mask) / n

    one_hot = np.zeros_like(logits)
    np.put_along_axis(one_hot, d[None], 1.0, axis=0)
    grad = (softmax - one_hot) * mask[None] / n
    return float(loss), grad


def direction_ce(logits: np.ndarray, target_d: np.ndarray, mask: np.ndarray, count: int) -> float:
    return direction_ce_with_grad(logits, target_d, mask, count)[0]


def total_loss(
    heads: Mapping[str, np.ndarray],
    targets: TargetMaps,
    weights: LossWeights = LossWeights(),
    encoding: str = "lineasobj",
    d_mode: str = "cls",
) -> tuple[float, dict[str, float]]:
    """Weighted sum of the loss terms for the chosen encoding.

    heads must provide "heatmap" and "offset" plus, for lineasobj,
    "wh" and "direction" ((1,H,W) in reg mode, (2,H,W) logits in cls
    mode), or, for angmidlen, "angle" and "length".
    """
    if encoding not in ("lineasobj", "angmidlen"):
        raise ValidationError(f"unknown encoding {encoding!r}")
    if d_mode not in ("reg", "cls"):
        raise ValidationError(f"unknown direction mode {d_mode!r}")
    required = {"heatmap", "offset"} | (
        {"wh", "direction"} if encoding == "lineasobj" else {"angle", "length"})
    missing = required - set(heads)
    if missing:
        raise ValidationError(f"missing heads for {encoding}: {sorted(missing)}")

    n = targets.count
    mask = targets.mask.astype(float)
    terms = {
        "heatmap": focal_loss(heads["heatmap"], targets, weights.delta, weights.gamma),
        "offset": masked_l1(heads["offset"], targets.offset, mask, n),
    }
    if encoding == "lineasobj":
        terms["wh"] = masked_l1(heads["wh"], targets.wh, mask, n)
        if d_mode == "reg":
            terms["direction"] = masked_l1(heads["direction"], targets.direction, mask, n)
        else:
            terms["direction"] = direction_ce(heads["direction"], targets.direction, mask, n)
        total = (terms["heatmap"] + weights.off * terms["offset"]
                 + weights.wh * terms["wh"] + weights.d * terms["direction"])
    else:
        terms["angle"] = masked_l1(heads["angle"], targets.angle, mask, n)
        terms["length"] = masked_l1(heads["length"], targets.length, mask, n)
        total = (terms["heatmap"] + weights.off * terms["offset"]
                 + weights.ang * terms["angle"] + weights.length * terms["length"])
    return float(total), terms


def ideal_heads(targets: TargetMaps, d_mode: str = "cls", logit_scale: float = 20.0) -> dict[str, np.ndarray]:
    """Heads that reproduce the targets exactly (zero loss, perfect decode)."""
    heads = {
        "heatmap": targets.heatmap.copy(),
        "offset": targets.offset.copy(),
        "wh": targets.wh.copy(),
        "angle": targets.angle.copy(),
        "length": targets.length.copy(),
    }
    if d_mode == "reg":
        heads["direction"] = targets.direction.copy()
    else:
        d = targets.direction[0].astype(int)
        logits = np.zeros((2,) + d.shape)
        np.put_along_axis(logits, d[None], logit_scale, axis=0)
        heads["direction"] = logits
    return heads


def _local_maxima(channel: np.ndarray) -> np.ndarray:
    """Cells strictly greater than all 8 neighbours (borders padded with -inf)."""
    padded = np.pad(channel, 1, constant_values=-np.inf)
    out = np.ones_like(channel, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            shifted = padded[1 + dy:1 + dy + channel.shape[0], 1 + dx:1 + dx + channel.shape[1]]
            out &= channel > shifted
    return out


def decode_detections(
    heads: Mapping[str, np.ndarray],
    conf_th: float = 0.5,
    top_k: int = 100,
    stride: int = 4,
    encoding: str = "lineasobj",
    d_mode: str = "cls",
) -> list[SemLS]:
    """Turn head tensors into scored segments.

    Candidates are strict 3x3 local maxima per heatmap channel, ranked by
    score; the top_k with score >= conf_th are reconstructed from the
    regression heads at their cell. The channel index is the category.
    """
    heatmap = heads["heatmap"]
    if heatmap.ndim != 3:
        raise ValidationError(f"heatmap must be (K, H, W), got {heatmap.shape}")
    k, hf, wf = heatmap.shape
    diag_f = math.hypot(wf, hf)

    candidates = []
    for channel in range(k):
        peaks = _local_maxima(heatmap[channel])
        for y, x in zip(*np.nonzero(peaks)):
            score = heatmap[channel, y, x]
            if score >= conf_th:
                candidates.append((-score, channel, int(y), int(x)))
    candidates.sort()
    out: list[SemLS] = []
    for neg_score, channel, y, x in candidates[:top_k]:
        ox, oy = heads["offset"][0, y, x], heads["offset"][1, y, x]
        cx, cy = (x + ox) * stride, (y + oy) * stride
        if encoding == "lineasobj":
            w = max(0.0, heads["wh"][0, y, x]) * stride
            h = max(0.0, heads["wh"][1, y, x]) * stride
            if w + h <= 0:
                continue
            d_head = heads["direction"]
            if d_mode == "reg":
                d = DIR_UP if d_head[0, y, x] >= 0.5 else DIR_DOWN
            else:
                d = int(np.argmax(d_head[:, y, x]))
            p1, p2 = decode_general(GeneralEncoding(cx, cy, w, h, d, channel))
        else:
            alpha = heads["angle"][0, y, x] * 180.0
            seg_len = heads["length"][0, y, x] * diag_f * stride
            if seg_len <= 0:
                continue
            rad = math.radians(alpha)
            dx, dy = math.cos(rad) * seg_len / 2, math.sin(rad) * seg_len / 2
            p1, p2 = (cx - dx, cy - dy), (cx + dx, cy + dy)
        out.append(SemLS(p1, p2, category=channel, confidence=float(-neg_score)))
    return out


def finite_diff_check(
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    step: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The denominator is floored at 1e-3 so near-zero entries are compared
    absolutely; keep the point away from clamp boundaries and L1 kinks.
    """
    point = np.asarray(point, dtype=float)
    _, grad = loss_and_grad(point)
    worst = 0.0
    flat = point.ravel()
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        hi, _ = loss_and_grad(point)
        flat[i] = saved - step
        lo, _ = loss_and_grad(point)
        flat[i] = saved
        fd = (hi - lo) / (2.0 * step)
        an = grad.ravel()[i]
        err = abs(an - fd) / max(abs(an), abs(fd), 1e-3)
        worst = max(worst, err)
    return worst
