import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from packages.core.reports import digest, read_report, whole, write_report

scalars = (
    st.none()
    | st.booleans()
    | st.integers()
    | st.floats(min_value=-1e9, max_value=1e9, allow_nan=False, allow_infinity=False)
    | st.text(max_size=8)
)
values = st.recursive(
    scalars,
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(max_size=6), children, max_size=4),
    max_leaves=20,
)
reports = st.dictionaries(st.text(max_size=6), values, max_size=6)


def test_floats_are_written_with_six_decimals():
    assert write_report({"a": 1.0, "b": 0.5, "c": 2}) == '{"a":1.000000,"b":0.500000,"c":2}'
    assert write_report({"x": Fraction(5, 6)}) == '{"x":0.833333}'
    assert write_report({"x": -2.0}) == '{"x":-2.000000}'


def test_infinite_values_become_null():
    assert write_report({"impact": math.inf, "gap": [1, math.nan]}) == '{"gap":[1,null],"impact":null}'


def test_keys_are_sorted_without_whitespace():
    text = write_report({"b": {"z": True, "a": None}, "a": ["é", 3]})
    assert text == '{"a":["\\u00e9",3],"b":{"a":null,"z":true}}'
    assert json.loads(text) == {"a": ["é", 3], "b": {"a": None, "z": True}}


def test_whole_keeps_integral_costs_as_ints():
    assert whole(3.0) == 3 and isinstance(whole(3.0), int)
    assert whole(2.5) == 2.5
    assert math.isinf(whole(math.inf))


def test_read_report_needs_an_object():
    with pytest.raises(ValueError):
        read_report("[1, 2]")


@settings(max_examples=100, deadline=None)
@given(reports)
def test_write_read_write_is_byte_identical(report):
    text = write_report(report)
    assert write_report(read_report(text)) == text
    assert digest(read_report(text)) == digest(report)
