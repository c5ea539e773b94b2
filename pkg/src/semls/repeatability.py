"""Affine repeatability protocol: transform sampling, warping, Re and mARe.

A detection "repeats" across a known affine warp when its warped image has
an ACL overlap above a threshold with some detection in the other image.
Re counts repeats in both directions over the total detection count; mARe
averages Re over the five thresholds 0.5 ... 0.9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .acl import acl
from .core import SemLS
from .errors import ValidationError

RE_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class AffineTransform:
    """2x3 row-major affine map of image points (pixels)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 3):
            raise ValidationError(f"affine matrix must be 2x3, got {m.shape}")
        if abs(np.linalg.det(m[:, :2])) < 1e-12:
            raise ValidationError("affine transform is not invertible")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> AffineTransform:
        return cls(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

    def apply(self, p: tuple[float, float]) -> tuple[float, float]:
        m = self.matrix
        return (
            m[0, 0] * p[0] + m[0, 1] * p[1] + m[0, 2],
            m[1, 0] * p[0] + m[1, 1] * p[1] + m[1, 2],
        )

    def apply_segment(self, s: SemLS) -> SemLS:
        return s.with_geometry(self.apply(s.p1), self.apply(s.p2))

    def inverse(self) -> AffineTransform:
        a = self.matrix[:, :2]
        t = self.matrix[:, 2]
        inv = np.linalg.inv(a)
        return AffineTransform(np.column_stack([inv, -inv @ t]))


@dataclass(frozen=True)
class AffineConfig:
    """Sampling ranges for random affine transforms about the image center.

    Translation is drawn as a fraction of the image width/height. Collapsed
    ranges are allowed (e.g. (0, 0) rotation); inverted ranges are not.
    """

    width: int
    height: int
    rotation_deg: tuple[float, float] = (-15.0, 15.0)
    scale: tuple[float, float] = (0.9, 1.1)
    shear_deg: tuple[float, float] = (-5.0, 5.0)
    translate_frac: tuple[float, float] = (-0.1, 0.1)

    def __post_init__(self):
        for name in ("rotation_deg", "scale", "shear_deg", "translate_frac"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValidationError(f"inverted range for {name}: ({lo}, {hi})")
        if self.scale[0] <= 0:
            raise ValidationError("scale range must be positive")


@dataclass
class RepeatabilityReport:
    re_per_threshold: dict = field(default_factory=dict)
    mare: float = 0.0


def sample_affine(seed: int, cfg: AffineConfig) -> AffineTransform:
    """Deterministic random affine: rotation o shear o isotropic scale about
    the image center, plus a translation in fractions of the image size."""
    rng = np.random.default_rng(seed)
    theta = math.radians(rng.uniform(*cfg.rotation_deg))
    s = rng.uniform(*cfg.scale)
    phi = math.radians(rng.uniform(*cfg.shear_deg))
    tx = rng.uniform(*cfg.translate_frac) * cfg.width
    ty = rng.uniform(*cfg.translate_frac) * cfg.height

    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    shear = np.array([[1.0, math.tan(phi)], [0.0, 1.0]])
    a = rot @ shear * s
    center = np.array([cfg.width / 2.0, cfg.height / 2.0])
    t = center - a @ center + np.array([tx, ty])
    return AffineTransform(np.column_stack([a, t]))


def _clip_to_rect(p1, p2, width, height):
    """Liang-Barsky clip of a segment to [0, width] x [0, height]; None if outside."""
    x1, y1 = p1
    dx, dy = p2[0] - x1, p2[1] - y1
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, x1 - 0.0),
        (dx, width - x1),
        (-dy, y1 - 0.0),
        (dy, height - y1),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    if t0 >= t1:
        return None
    return (x1 + t0 * dx, y1 + t0 * dy), (x1 + t1 * dx, y1 + t1 * dy)


def transform_segments(
    segs: Sequence[SemLS],
    transform: AffineTransform,
    bounds: tuple[int, int],
    min_len: float = 10.0,
) -> list[SemLS]:
    """Warp segments and clip them to the image rectangle.

    Clipped remnants shorter than `min_len` are dropped. Survivors keep
    their category/confidence; track_id is set to the source index so the
    correspondence with the input list stays known.
    """
    width, height = bounds
    out: list[SemLS] = []
    for i, s in enumerate(segs):
        clipped = _clip_to_rect(transform.apply(s.p1), transform.apply(s.p2), width, height)
        if clipped is None:
            continue
        q1, q2 = clipped
        if math.hypot(q2[0] - q1[0], q2[1] - q1[1]) < min_len:
            continue
        out.append(SemLS(q1, q2, s.category, s.confidence, track_id=i))
    return out


def _directed_repeats(
    source: Sequence[SemLS],
    target: Sequence[SemLS],
    transform: AffineTransform,
    th_re: float,
    category_agnostic: bool,
) -> int:
    """Count source segments whose warp matches an unused target (ACL > th)."""
    warped = [transform.apply_segment(s) for s in source]
    scored = []
    for i, w in enumerate(warped):
        for j, t in enumerate(target):
            v = acl(w, t, category_agnostic)
            if v > th_re:
                scored.append((v, i, j))
    scored.sort(key=lambda row: (-row[0], row[1], row[2]))
    used_src: set[int] = set()
    used_tgt: set[int] = set()
    count = 0
    for _, i, j in scored:
        if i in used_src or j in used_tgt:
            continue
        used_src.add(i)
        used_tgt.add(j)
        count += 1
    return count


def repeatability(
    dets_i: Sequence[SemLS],
    dets_it: Sequence[SemLS],
    transform: AffineTransform,
    th_re: float,
    category_agnostic: bool = False,
) -> float:
    """Two-way repeated-detection ratio for one image pair under a known warp."""
    if not 0.0 < th_re <= 1.0:
        raise ValidationError(f"th_re must lie in (0, 1], got {th_re!r}")
    n_i, n_it = len(dets_i), len(dets_it)
    if n_i + n_it == 0:
        return 0.0
    fwd = _directed_repeats(dets_i, dets_it, transform, th_re, category_agnostic)
    bwd = _directed_repeats(dets_it, dets_i, transform.inverse(), th_re, category_agnostic)
    return (fwd + bwd) / (n_i + n_it)


def mare(
    pairs: Sequence[tuple[Sequence[SemLS], Sequence[SemLS], AffineTransform]],
    thresholds: Sequence[float] = RE_THRESHOLDS,
    category_agnostic: bool = False,
) -> RepeatabilityReport:
    """Average Re over image pairs for each threshold, then over thresholds."""
    if not pairs:
        raise ValidationError("mare needs at least one image pair")
    report = RepeatabilityReport()
    for th in thresholds:
        values = [repeatability(a, b, t, th, category_agnostic) for a, b, t in pairs]
        report.re_per_threshold[th] = float(np.mean(values))
    report.mare = float(np.mean(list(report.re_per_threshold.values())))
    return report
