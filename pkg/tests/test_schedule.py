from fractions import Fraction

import pytest

from heatbath.dynamics import (
    BlockShuffle,
    Recolor,
    Repeat,
    Schedule,
    SiteUpdate,
    Transpose,
    format_schedule,
    parse_schedule,
)
from heatbath.errors import ScheduleSyntaxError


def test_parse_repeat_group():
    s = parse_schedule("[t(2,4) t(3,4)]^5 t(1,4) t(2,4)")
    assert s.items == (
        Repeat(Schedule((Transpose(2, 4), Transpose(3, 4))), 5),
        Transpose(1, 4),
        Transpose(2, 4),
    )
    assert len(s.flatten()) == 12


def test_parse_ops():
    s = parse_schedule("k(1) k(2)")
    assert s.items == (Recolor(1), Recolor(2))
    s = parse_schedule("b{2,3,4} p(2;J=3.0;af) p(1;w=1/10;f)")
    assert s.items == (
        BlockShuffle((2, 3, 4)),
        SiteUpdate(2, "antiferro", J=3.0),
        SiteUpdate(1, "ferro", w=Fraction(1, 10)),
    )


def test_parse_empty_schedule():
    assert parse_schedule("").items == ()
    assert parse_schedule("   ").items == ()


def test_nested_groups():
    s = parse_schedule("[[t(1,2)]^2 t(3,4)]^3")
    flat = s.flatten()
    assert len(flat) == 9
    assert flat[:3] == (Transpose(1, 2), Transpose(1, 2), Transpose(3, 4))


@pytest.mark.parametrize(
    "bad",
    [
        "[t(2,4)]^0",
        "[t(2,4)]",
        "[]^3",
        "t(2,4",
        "x(1)",
        "t(2,4) ]",
        "[t(2,4)",
        "p(1;J=x;af)",
        "p(1;w=-1/2;af)",
        "b{}",
    ],
)
def test_parse_errors(bad):
    with pytest.raises(ScheduleSyntaxError):
        parse_schedule(bad)


def test_parse_error_reports_position():
    with pytest.raises(ScheduleSyntaxError) as err:
        parse_schedule("t(1,2) q(3)")
    assert err.value.position == 7


def test_printer_roundtrip():
    texts = [
        "[t(2,4) t(3,4)]^5 t(1,4) t(2,4)",
        "k(1) k(2) k(3)",
        "b{1,3,4} [k(2)]^7",
        "p(2;J=3.0;af) p(3;J=0.5;f)",
        "p(1;w=1/10;af) p(2;w=0;af)",
        "[[t(1,2)]^2 t(3,4)]^3",
    ]
    for text in texts:
        s = parse_schedule(text)
        printed = format_schedule(s)
        assert parse_schedule(printed) == s
        # the printed form is canonical: printing again is a fixed point
        assert format_schedule(parse_schedule(printed)) == printed


def test_printer_canonicalizes_whitespace():
    s = parse_schedule("  t( 1 , 2 )   [ k(1) ]^2 ")
    assert format_schedule(s) == "t(1,2) [k(1)]^2"
