import pytest

from nsb.util import canonical_json, digest_of, format_number, parse_duration


def test_parse_duration_units():
    assert parse_duration("5s") == 5.0
    assert parse_duration("500ms") == 0.5
    assert parse_duration("1.5m") == 90.0
    assert parse_duration("2h") == 7200.0
    assert parse_duration("10") == 10.0


def test_parse_duration_bare_numbers_are_seconds():
    assert parse_duration(3) == 3.0
    assert parse_duration(0.25) == 0.25


@pytest.mark.parametrize("bad", ["", "abc", "5 hours", "-3s", None, True])
def test_parse_duration_rejects_garbage(bad):
    with pytest.raises(ValueError):
        parse_duration(bad)


def test_format_number_decimal_rendering():
    assert format_number(100) == "100"
    assert format_number(0) == "0"
    assert format_number(0.5) == "0.5"
    assert format_number(2.0) == "2"
    assert format_number(1234567.25) == "1234567.25"
    # tiny values never go exponential, they collapse to 0
    assert format_number(1e-9) == "0"


def test_format_number_rejects_bool():
    with pytest.raises(TypeError):
        format_number(True)


def test_digest_is_key_order_independent():
    a = {"x": 1, "y": [1, 2], "z": {"b": 2, "a": 1}}
    b = {"z": {"a": 1, "b": 2}, "y": [1, 2], "x": 1}
    assert digest_of(a) == digest_of(b)
    assert canonical_json(a) == canonical_json(b)


def test_digest_sensitive_to_values():
    assert digest_of({"x": 1}) != digest_of({"x": 2})
