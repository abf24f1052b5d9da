import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slu.builtin_entities import (
    SUPPORTED_KINDS, Duration, InstantTime, Number, Ordinal, Temperature, builtin_candidates,
    extract_builtin, resolve_datetime, supported_grammar)
from slu.errors import NoParse
from slu.normalize import normalize, verbalize_number

from conftest import REF


def resolved(text, scope=SUPPORTED_KINDS, ref=REF):
    return [(m.kind, m.resolved) for m in extract_builtin(normalize(text), scope, ref)]


def test_temperature_example():
    text = "set the temperature to 23°C"
    ms = extract_builtin(normalize(text), ["snips/temperature"], REF)
    assert len(ms) == 1
    assert ms[0].resolved == Temperature(23.0, "celsius")
    assert text[ms[0].span[0]:ms[0].span[1]] == "23°C"


def test_number_words():
    assert resolved("rate it five stars", ["snips/number"]) == [("snips/number", Number(5.0))]
    assert resolved("minus twelve", ["snips/number"]) == [("snips/number", Number(-12.0))]
    assert resolved("three point five", ["snips/number"]) == [("snips/number", Number(3.5))]


def test_overlap_prefers_datetime():
    ms = extract_builtin(normalize("in two days"), ["snips/datetime", "snips/number"], REF)
    assert [m.kind for m in ms] == ["snips/datetime"]
    assert ms[0].token_range == (0, 2)


def test_other_kinds():
    assert resolved("the third one", ["snips/ordinal"]) == [("snips/ordinal", Ordinal(3))]
    assert resolved("for two hours and ten minutes", ["snips/duration"]) == [
        ("snips/duration", Duration(hours=2, minutes=10))]
    assert resolved("set it to 70 degrees", ["snips/temperature"]) == [
        ("snips/temperature", Temperature(70.0, "degree"))]


@pytest.mark.parametrize("phrase,value,grain", [
    ("tomorrow evening", "2018-04-19T19:00:00+00:00", "Hour"),
    ("today", "2018-04-18T00:00:00+00:00", "Day"),
    ("in two days", "2018-04-20T10:00:00+00:00", "Day"),
    ("next monday", "2018-04-23T00:00:00+00:00", "Day"),
    ("next wednesday", "2018-04-25T00:00:00+00:00", "Day"),
    ("yesterday", "2018-04-17T00:00:00+00:00", "Day"),
    ("april 20", "2018-04-20T00:00:00+00:00", "Day"),
    ("at 7 pm", "2018-04-18T19:00:00+00:00", "Hour"),
    ("in 3 hours", "2018-04-18T13:00:00+00:00", "Hour"),
    ("this morning", "2018-04-18T08:00:00+00:00", "Hour"),
])
def test_resolve_datetime(phrase, value, grain):
    inst = resolve_datetime(normalize(phrase), REF)
    assert inst.value == value
    assert inst.grain == grain


def test_resolve_datetime_rejects_partial():
    with pytest.raises(NoParse):
        resolve_datetime(normalize("tomorrow please"), REF)


def test_grammar_listing():
    g = supported_grammar()
    assert "in <number> <minutes|hours|days|weeks|months>" in g
    assert "monday" in g and "sunday" in g
    assert "this morning|afternoon|evening|night" in g


def test_determinism():
    text = normalize("tomorrow at 7 pm set 21 degrees for two hours, the 2nd time")
    a = [m.to_json() for m in extract_builtin(text, SUPPORTED_KINDS, REF)]
    b = [m.to_json() for m in extract_builtin(text, SUPPORTED_KINDS, REF)]
    assert a == b and a


words = st.sampled_from("in two three days hours tomorrow evening at 7 pm the 21 degrees "
                        "celsius next monday week for minutes and fifth april 3".split())


@settings(max_examples=300, deadline=None)
@given(st.lists(words, max_size=12))
def test_matches_never_overlap(tokens):
    ms = extract_builtin(tokens, SUPPORTED_KINDS, REF)
    ranges = sorted(m.token_range for m in ms)
    for (a0, a1), (b0, b1) in zip(ranges, ranges[1:]):
        assert a1 < b0
    for m in ms:
        assert m.token_range[0] <= m.token_range[1]


@settings(max_examples=300, deadline=None)
@given(st.lists(words, max_size=12))
def test_candidates_superset_of_selection(tokens):
    cands = {(m.kind, m.token_range) for m in builtin_candidates(tokens, SUPPORTED_KINDS, REF)}
    assert {(m.kind, m.token_range) for m in extract_builtin(tokens, SUPPORTED_KINDS, REF)} <= cands


refs = st.datetimes(min_value=dt.datetime(2000, 1, 1), max_value=dt.datetime(2030, 1, 1)).map(
    lambda d: d.replace(second=0, microsecond=0, tzinfo=dt.timezone.utc))


@settings(max_examples=200, deadline=None)
@given(refs, st.integers(-10 ** 6, 10 ** 6), st.sampled_from(
    ["in 5 minutes", "in two hours", "in three days", "in 2 weeks"]))
def test_anchor_shift_any_delta(ref, minutes, phrase):
    delta = dt.timedelta(minutes=minutes)
    a = resolve_datetime(normalize(phrase), ref).instant
    b = resolve_datetime(normalize(phrase), ref + delta).instant
    assert b - a == delta


@settings(max_examples=200, deadline=None)
@given(refs, st.integers(-500, 500), st.sampled_from(
    ["tomorrow", "today", "yesterday", "tonight", "tomorrow evening", "this afternoon",
     "at 7 pm", "tomorrow at 9:30 am"]))
def test_anchor_shift_whole_days(ref, days, phrase):
    delta = dt.timedelta(days=days)
    a = resolve_datetime(normalize(phrase), ref).instant
    b = resolve_datetime(normalize(phrase), ref + delta).instant
    assert b - a == delta


@settings(max_examples=100, deadline=None)
@given(refs, st.integers(-100, 100), st.sampled_from(["next monday", "next friday", "next week"]))
def test_anchor_shift_whole_weeks(ref, weeks, phrase):
    delta = dt.timedelta(weeks=weeks)
    a = resolve_datetime(normalize(phrase), ref).instant
    b = resolve_datetime(normalize(phrase), ref + delta).instant
    assert b - a == delta


def test_number_round_trip_large_sample():
    rng = np.random.default_rng(2024)
    for n in rng.integers(0, 10 ** 9, 300):
        ms = extract_builtin(verbalize_number(int(n)), ["snips/number"], REF)
        assert [m.resolved for m in ms] == [Number(float(n))]


def test_instant_json():
    inst = InstantTime("2018-04-19T19:00:00+00:00", "Hour")
    assert inst.to_json()["kind"] == "InstantTime"
    assert inst.instant.hour == 19
