import math

import numpy as np
import pytest
from pytest import approx

from semls.core import (
    DIR_BOX,
    DIR_DOWN,
    DIR_UP,
    AngMidLen,
    CategoryRegistry,
    GeneralEncoding,
    SemLS,
    canonicalize,
    decode_angmidlen,
    decode_general,
    encode_angmidlen,
    encode_general,
    segment_from_general,
)
from semls.errors import ValidationError


def test_canonicalize_orders_by_x_then_y():
    assert canonicalize((5, 1), (2, 3)) == ((2.0, 3.0), (5.0, 1.0))
    assert canonicalize((2, 3), (5, 1)) == ((2.0, 3.0), (5.0, 1.0))
    assert canonicalize((4, 7), (4, 2)) == ((4.0, 2.0), (4.0, 7.0))


def test_canonicalize_is_idempotent():
    a, b = canonicalize((9, -1), (3, 4))
    assert canonicalize(a, b) == (a, b)


def test_canonicalize_rejects_degenerate_pair():
    with pytest.raises(ValidationError):
        canonicalize((1, 1), (1, 1))


def test_semls_canonicalizes_and_validates():
    s = SemLS((5, 1), (2, 3), category=0)
    assert s.p1 == (2.0, 3.0) and s.p2 == (5.0, 1.0)
    with pytest.raises(ValidationError):
        SemLS((0, 0), (0, 0), category=0)
    with pytest.raises(ValidationError):
        SemLS((0, 0), (1, 1), category=-1)
    with pytest.raises(ValidationError):
        SemLS((0, 0), (1, 1), category=0, confidence=1.5)


def test_encode_angmidlen_horizontal():
    a = encode_angmidlen(SemLS((0, 0), (10, 0), category=0))
    assert a.alpha_deg == approx(0.0)
    assert a.mid == approx((5.0, 0.0))
    assert a.length == approx(10.0)


def test_encode_angmidlen_3_4_5():
    a = encode_angmidlen(SemLS((0, 0), (3, 4), category=0))
    assert a.alpha_deg == approx(math.degrees(math.atan2(4, 3)))
    assert a.alpha_deg == approx(53.1301, abs=1e-4)
    assert a.mid == approx((1.5, 2.0))
    assert a.length == approx(5.0)


def test_decode_angmidlen_examples():
    p1, p2 = decode_angmidlen(AngMidLen(0.0, (5, 0), 10.0))
    assert p1 == approx((0.0, 0.0), abs=1e-12)
    assert p2 == approx((10.0, 0.0), abs=1e-12)
    p1, p2 = decode_angmidlen(AngMidLen(90.0, (2, 2), 4.0))
    assert p1 == approx((2.0, 0.0), abs=1e-12)
    assert p2 == approx((2.0, 4.0), abs=1e-12)


def test_angmidlen_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(500):
        p = rng.uniform(-50, 50, size=4)
        if math.hypot(p[2] - p[0], p[3] - p[1]) < 1e-6:
            continue
        s = SemLS((p[0], p[1]), (p[2], p[3]), category=0)
        q1, q2 = decode_angmidlen(encode_angmidlen(s))
        assert q1 == approx(s.p1, abs=1e-9)
        assert q2 == approx(s.p2, abs=1e-9)


def test_angmidlen_validation():
    with pytest.raises(ValidationError):
        AngMidLen(180.0, (0, 0), 1.0)
    with pytest.raises(ValidationError):
        AngMidLen(10.0, (0, 0), 0.0)


def test_encode_general_directions():
    g = encode_general(SemLS((1, 2), (5, 8), category=3))
    assert (g.cx, g.cy, g.w, g.h) == (3.0, 5.0, 4.0, 6.0)
    assert g.direction == DIR_DOWN
    assert g.category == 3

    g = encode_general(SemLS((1, 8), (5, 2), category=0))
    assert (g.cx, g.cy, g.w, g.h) == (3.0, 5.0, 4.0, 6.0)
    assert g.direction == DIR_UP


def test_encode_general_degenerate_gets_dir_down():
    assert encode_general(SemLS((0, 0), (10, 0), category=0)).direction == DIR_DOWN
    assert encode_general(SemLS((3, 0), (3, 9), category=0)).direction == DIR_DOWN


def test_decode_general_examples():
    assert decode_general(GeneralEncoding(3, 5, 4, 6, DIR_DOWN, 0)) == ((1, 2), (5, 8))
    assert decode_general(GeneralEncoding(3, 5, 4, 6, DIR_UP, 0)) == ((1, 8), (5, 2))
    assert decode_general(GeneralEncoding(3, 5, 4, 6, DIR_BOX, 0)) == ((1, 2), (5, 8))


def test_general_round_trip_random():
    rng = np.random.default_rng(11)
    for _ in range(500):
        p = rng.uniform(0, 100, size=4)
        if p[0] == p[2] and p[1] == p[3]:
            continue
        s = SemLS((p[0], p[1]), (p[2], p[3]), category=int(rng.integers(0, 4)))
        g = encode_general(s)
        q1, q2 = decode_general(g)
        assert q1 == approx(s.p1, abs=1e-9)
        assert q2 == approx(s.p2, abs=1e-9)
        g2 = encode_general(segment_from_general(g))
        assert (g2.cx, g2.cy, g2.w, g2.h) == approx((g.cx, g.cy, g.w, g.h), abs=1e-9)
        assert (g2.direction, g2.category) == (g.direction, g.category)


def test_axis_aligned_segments_survive_round_trips():
    for s in (SemLS((0, 5), (12, 5), category=0), SemLS((4, 1), (4, 9), category=1)):
        assert decode_general(encode_general(s)) == (s.p1, s.p2)
        q1, q2 = decode_angmidlen(encode_angmidlen(s))
        assert q1 == approx(s.p1, abs=1e-9) and q2 == approx(s.p2, abs=1e-9)


def test_alpha_consistent_between_encodings():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = rng.uniform(0, 100, size=4)
        s = SemLS((p[0], p[1]), (p[2], p[3]), category=0)
        g = encode_general(s)
        h_signed = g.h if g.direction == DIR_DOWN else -g.h
        alpha = math.degrees(math.atan2(h_signed, g.w)) % 180.0
        assert alpha == approx(encode_angmidlen(s).alpha_deg, abs=1e-9)


def test_general_encoding_validation():
    with pytest.raises(ValidationError):
        GeneralEncoding(0, 0, 1, 1, direction=5, category=0)
    with pytest.raises(ValidationError):
        GeneralEncoding(0, 0, -1, 1, direction=0, category=0)
    with pytest.raises(ValidationError):
        GeneralEncoding(0, 0, 0, 0, direction=0, category=0)
    # a zero-size box record is allowed
    GeneralEncoding(0, 0, 0, 0, direction=DIR_BOX, category=0)


def test_segment_from_general_rejects_boxes():
    with pytest.raises(ValidationError):
        segment_from_general(GeneralEncoding(0, 0, 2, 2, DIR_BOX, 0))


def test_category_registry():
    reg = CategoryRegistry()
    assert reg.names == ("building", "pole", "curb", "grass")
    assert reg.index("pole") == 1
    assert reg.name(2) == "curb"
    assert "grass" in reg and "car" not in reg
    idx = reg.add("fence")
    assert reg.index("fence") == idx == 4
    with pytest.raises(ValidationError):
        reg.add("pole")
    with pytest.raises(ValidationError):
        reg.index("unknown-cat")
    with pytest.raises(ValidationError):
        reg.name(99)
