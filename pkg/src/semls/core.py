"""Core semantic line segment types and the two geometry encodings.

Coordinates are image pixels with y growing downward. A segment is
undirected; its canonical endpoint order is lexicographic by (x, y).
Two interchangeable encodings are provided:

* angle/midpoint/length (`AngMidLen`), and
* the general line-as-object record (`GeneralEncoding`): the minimum
  bounding box plus a diagonal-direction flag, which also covers plain
  object boxes (direction == DIR_BOX).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

Point = tuple[float, float]

# Direction flag of the general encoding.
DIR_DOWN = 0  # diagonal from left-top to right-bottom (y-down coordinates)
DIR_UP = 1    # diagonal from left-bottom to right-top
DIR_BOX = 2   # plain object box, no diagonal

DEFAULT_CATEGORIES = ("building", "pole", "curb", "grass")


def canonicalize(p1: Point, p2: Point) -> tuple[Point, Point]:
    """Order two endpoints lexicographically by (x, then y).

    Idempotent. Raises ValidationError on a degenerate (zero-length) pair.
    """
    a = (float(p1[0]), float(p1[1]))
    b = (float(p2[0]), float(p2[1]))
    if a == b:
        raise ValidationError(f"degenerate segment: both endpoints are {a}")
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SemLS:
    """A labeled line segment: two endpoints, category, optional score/track.

    Endpoints are canonicalized on construction; categories are indices
    into a CategoryRegistry.
    """

    p1: Point
    p2: Point
    category: int
    confidence: float | None = None
    track_id: int | None = None

    def __post_init__(self):
        a, b = canonicalize(self.p1, self.p2)
        object.__setattr__(self, "p1", a)
        object.__setattr__(self, "p2", b)
        if int(self.category) != self.category or self.category < 0:
            raise ValidationError(f"category must be a non-negative integer, got {self.category!r}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence must lie in [0, 1], got {self.confidence!r}")

    @property
    def midpoint(self) -> Point:
        return ((self.p1[0] + self.p2[0]) / 2.0, (self.p1[1] + self.p2[1]) / 2.0)

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    @property
    def angle_deg(self) -> float:
        """Angle against the positive x-axis, folded to [0, 180)."""
        return math.degrees(math.atan2(self.p2[1] - self.p1[1], self.p2[0] - self.p1[0])) % 180.0

    def with_geometry(self, p1: Point, p2: Point) -> SemLS:
        """Same label/score/track with replaced endpoints."""
        return SemLS(p1, p2, self.category, self.confidence, self.track_id)


@dataclass(frozen=True)
class AngMidLen:
    """Angle / midpoint / length encoding of an undirected segment."""

    alpha_deg: float
    mid: Point
    length: float

    def __post_init__(self):
        if not 0.0 <= self.alpha_deg < 180.0:
            raise ValidationError(f"alpha_deg must lie in [0, 180), got {self.alpha_deg!r}")
        if not self.length > 0.0:
            raise ValidationError(f"length must be positive, got {self.length!r}")


@dataclass(frozen=True)
class GeneralEncoding:
    """Minimum bounding box + diagonal direction; boxes use DIR_BOX.

    A segment is one of the diagonals of its minimum bounding box, so
    (cx, cy, w, h) plus the direction flag reconstructs it exactly.
    """

    cx: float
    cy: float
    w: float
    h: float
    direction: int
    category: int

    def __post_init__(self):
        if self.direction not in (DIR_DOWN, DIR_UP, DIR_BOX):
            raise ValidationError(f"direction must be 0, 1 or 2, got {self.direction!r}")
        if self.w < 0 or self.h < 0:
            raise ValidationError(f"box sides must be non-negative, got w={self.w!r} h={self.h!r}")
        if self.direction != DIR_BOX and not self.w + self.h > 0:
            raise ValidationError("segment encoding requires w + h > 0")
        if int(self.category) != self.category or self.category < 0:
            raise ValidationError(f"category must be a non-negative integer, got {self.category!r}")


class CategoryRegistry:
    """Bidirectional name <-> index mapping for segment categories.

    The default registry ships the four stock urban categories and can be
    extended by callers (files carry names, in-memory records carry indices).
    """

    def __init__(self, names: tuple[str, ...] | list[str] = DEFAULT_CATEGORIES):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for n in names:
            self.add(n)

    def add(self, name: str) -> int:
        """Register a new name; returns its index. Re-adding is an error."""
        if name in self._index:
            raise ValidationError(f"duplicate category name {name!r}")
        self._names.append(name)
        self._index[name] = len(self._names) - 1
        return self._index[name]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ValidationError(f"unknown category {name!r}") from None

    def name(self, index: int) -> str:
        if not 0 <= index < len(self._names):
            raise ValidationError(f"category index {index} out of range")
        return self._names[index]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._index


def encode_angmidlen(s: SemLS) -> AngMidLen:
    """Encode a canonical segment as angle/midpoint/length."""
    return AngMidLen(s.angle_deg, s.midpoint, s.length)


def decode_angmidlen(a: AngMidLen) -> tuple[Point, Point]:
    """Recover the endpoint pair (canonical order) from an AngMidLen record."""
    rad = math.radians(a.alpha_deg)
    dx = math.cos(rad) * a.length / 2.0
    dy = math.sin(rad) * a.length / 2.0
    return canonicalize((a.mid[0] - dx, a.mid[1] - dy), (a.mid[0] + dx, a.mid[1] + dy))


def encode_general(s: SemLS) -> GeneralEncoding:
    """Encode a canonical segment as its bounding box + diagonal direction.

    Exactly horizontal or vertical segments have a degenerate box whose two
    diagonals coincide; they get DIR_DOWN by convention.
    """
    (x1, y1), (x2, y2) = s.p1, s.p2
    direction = DIR_DOWN if y2 - y1 >= 0 else DIR_UP
    return GeneralEncoding(
        cx=(x1 + x2) / 2.0,
        cy=(y1 + y2) / 2.0,
        w=abs(x2 - x1),
        h=abs(y2 - y1),
        direction=direction,
        category=s.category,
    )


def decode_general(g: GeneralEncoding) -> tuple[Point, Point]:
    """Recover the two defining points of a general record.

    For DIR_DOWN/DIR_UP this is the diagonal's endpoint pair (canonical
    order); for DIR_BOX it is the (left-top, right-bottom) corner pair.
    """
    hw, hh = g.w / 2.0, g.h / 2.0
    if g.direction == DIR_BOX:
        return ((g.cx - hw, g.cy - hh), (g.cx + hw, g.cy + hh))
    if g.direction == DIR_DOWN:
        return canonicalize((g.cx - hw, g.cy - hh), (g.cx + hw, g.cy + hh))
    return canonicalize((g.cx - hw, g.cy + hh), (g.cx + hw, g.cy - hh))


def segment_from_general(g: GeneralEncoding, confidence: float | None = None,
                         track_id: int | None = None) -> SemLS:
    """Build a SemLS from a segment-flavored general record."""
    if g.direction == DIR_BOX:
        raise ValidationError("record is an object box, not a segment")
    p1, p2 = decode_general(g)
    return SemLS(p1, p2, g.category, confidence, track_id)
