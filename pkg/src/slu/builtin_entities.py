"""Rule-based extraction and resolution of built-in entities.

Covers numbers, ordinals, temperatures, durations and a closed datetime
grammar. The grammar works on token sequences, so it accepts both raw text
("23°C", "7:30pm") and its verbalized form ("twenty three degrees celsius",
"seven thirty p m"). Punctuation tokens are skipped while matching but are
kept inside the reported span when they fall between matched tokens.
"""
from __future__ import annotations

import calendar
import datetime as dt
from dataclasses import dataclass, asdict
from enum import Enum

from .errors import NoParse
from .normalize import NormalizedText, Token, TokenKind, tokenize, verbalize_ordinal

__all__ = [
    "BuiltinKind",
    "SUPPORTED_KINDS",
    "Number",
    "Ordinal",
    "Temperature",
    "Duration",
    "InstantTime",
    "BuiltinMatch",
    "parse_reference_time",
    "extract_builtin",
    "builtin_candidates",
    "select_matches",
    "resolve_datetime",
    "supported_grammar",
    "resolved_from_json",
]


class BuiltinKind(str, Enum):
    NUMBER = "snips/number"
    ORDINAL = "snips/ordinal"
    TEMPERATURE = "snips/temperature"
    DURATION = "snips/duration"
    DATETIME = "snips/datetime"

    @property
    def short(self):
        return self.value.split("/", 1)[1]


SUPPORTED_KINDS = tuple(k.value for k in BuiltinKind)

# tie-break order for equally long candidates
_PRECEDENCE = {
    BuiltinKind.DATETIME: 0,
    BuiltinKind.DURATION: 1,
    BuiltinKind.TEMPERATURE: 2,
    BuiltinKind.ORDINAL: 3,
    BuiltinKind.NUMBER: 4,
}


@dataclass(frozen=True)
class Number:
    value: float

    def to_json(self):
        return {"kind": "Number", "value": float(self.value)}


@dataclass(frozen=True)
class Ordinal:
    rank: int

    def to_json(self):
        return {"kind": "Ordinal", "value": int(self.rank)}


@dataclass(frozen=True)
class Temperature:
    value: float
    unit: str  # celsius | fahrenheit | degree

    def to_json(self):
        return {"kind": "Temperature", "unit": self.unit, "value": float(self.value)}


@dataclass(frozen=True)
class Duration:
    years: int = 0
    months: int = 0
    days: int = 0
    hours: int = 0
    minutes: int = 0
    seconds: int = 0

    def to_json(self):
        return {"kind": "Duration", **asdict(self)}


@dataclass(frozen=True)
class InstantTime:
    value: str
    grain: str
    precision: str = "Exact"

    def to_json(self):
        return {"kind": "InstantTime", "value": self.value, "grain": self.grain,
                "precision": self.precision}

    @property
    def instant(self):
        return dt.datetime.fromisoformat(self.value)


def resolved_from_json(obj):
    kind = obj["kind"]
    if kind == "Number":
        return Number(float(obj["value"]))
    if kind == "Ordinal":
        return Ordinal(int(obj["value"]))
    if kind == "Temperature":
        return Temperature(float(obj["value"]), obj["unit"])
    if kind == "Duration":
        return Duration(**{k: int(obj[k]) for k in
                           ("years", "months", "days", "hours", "minutes", "seconds")})
    if kind == "InstantTime":
        return InstantTime(obj["value"], obj["grain"], obj.get("precision", "Exact"))
    raise ValueError(f"unknown resolved value kind {kind!r}")


@dataclass(frozen=True)
class BuiltinMatch:
    kind: str
    span: tuple
    token_range: tuple  # (first, last), inclusive
    resolved: object
    value: str = ""

    def to_json(self):
        return {
            "kind": self.kind,
            "value": self.value,
            "range": {"start": self.span[0], "end": self.span[1]},
            "token_range": list(self.token_range),
            "resolved": self.resolved.to_json(),
        }


def parse_reference_time(text):
    if isinstance(text, dt.datetime):
        ref = text
    else:
        text = text.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        ref = dt.datetime.fromisoformat(text)
    if ref.tzinfo is None:
        raise ValueError("reference time must carry a UTC offset")
    return ref


# --------------------------------------------------------------------------
# lexicon

_ONES = {w: i for i, w in enumerate(
    ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"])}
_TEENS = {w: i + 10 for i, w in enumerate(
    ["ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
     "seventeen", "eighteen", "nineteen"])}
_TENS = {w: (i + 2) * 10 for i, w in enumerate(
    ["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"])}
_SCALES = {"thousand": 10 ** 3, "million": 10 ** 6, "billion": 10 ** 9}

_ORDINAL_TO_CARDINAL = {}
for _n in list(range(1, 20)) + list(range(20, 100, 10)) + [100, 1000, 10 ** 6, 10 ** 9]:
    _ORDINAL_TO_CARDINAL[verbalize_ordinal(_n)[-1]] = (
        {100: "hundred", 1000: "thousand", 10 ** 6: "million", 10 ** 9: "billion"}.get(_n)
        or next(w for w, v in {**_ONES, **_TEENS, **_TENS}.items() if v == _n))
_ORDINAL_TO_CARDINAL["zeroth"] = "zero"

_WEEKDAYS = {name: i for i, name in enumerate(
    ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"])}
_MONTHS = {name: i + 1 for i, name in enumerate(
    ["january", "february", "march", "april", "may", "june", "july", "august",
     "september", "october", "november", "december"])}
_MONTHS.update({"jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
                "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12})
_DAYPARTS = {"morning": 8, "afternoon": 14, "evening": 19, "night": 22}

_DURATION_UNITS = {}
for _unit in ("second", "minute", "hour", "day", "week", "month", "year"):
    _DURATION_UNITS[_unit] = _unit
    _DURATION_UNITS[_unit + "s"] = _unit
_IN_UNITS = {"minute": "Minute", "hour": "Hour", "day": "Day", "week": "Week",
             "month": "Month"}


def _add_months(when, months):
    month0 = when.month - 1 + months
    year = when.year + month0 // 12
    month = month0 % 12 + 1
    day = min(when.day, calendar.monthrange(year, month)[1])
    return when.replace(year=year, month=month, day=day)


def _midnight(ref, date):
    return dt.datetime(date.year, date.month, date.day, tzinfo=ref.tzinfo)


def _at(ref, date, hour, minute=0):
    return dt.datetime(date.year, date.month, date.day, hour, minute, tzinfo=ref.tzinfo)


def _instant(when, grain, precision="Exact"):
    return InstantTime(when.isoformat(), grain, precision)


# --------------------------------------------------------------------------
# scanner

def _parse_cardinal(words, i):
    """All cardinal parses of ``words`` starting at ``i``: {end: int value}."""
    n = len(words)

    def below_100(p):
        out = {}
        if p >= n:
            return out
        w = words[p]
        if w in _ONES and w != "zero":
            out[p + 1] = _ONES[w]
        elif w in _TEENS:
            out[p + 1] = _TEENS[w]
        elif w in _TENS:
            out[p + 1] = _TENS[w]
            if p + 1 < n and words[p + 1] in _ONES and words[p + 1] != "zero":
                out[p + 2] = _TENS[w] + _ONES[words[p + 1]]
        return out

    def below_1000(p):
        out = below_100(p)
        if p + 1 < n and words[p] in _ONES and words[p] != "zero" and words[p + 1] == "hundred":
            base = _ONES[words[p]] * 100
            out[p + 2] = base
            for e, v in below_100(p + 2).items():
                out[e] = base + v
        return out

    results = {}
    if i < n and words[i] == "zero":
        results[i + 1] = 0
        return results

    def rec(p, total, last_scale):
        for e, v in below_1000(p).items():
            results.setdefault(e, total + v)
            if e < n and words[e] in _SCALES and _SCALES[words[e]] < last_scale:
                scale = _SCALES[words[e]]
                results.setdefault(e + 1, total + v * scale)
                rec(e + 1, total + v * scale, scale)

    rec(i, 0, 10 ** 12)
    return results


class _Scanner:
    """Grammar matcher over the non-punctuation tokens of one text."""

    def __init__(self, nt, ref):
        self.nt = nt
        self.ref = ref
        self.index = [k for k, t in enumerate(nt.tokens) if t.kind is not TokenKind.PUNCT]
        self.toks = [nt.tokens[k] for k in self.index]
        self.words = [t.text for t in self.toks]
        self.n = len(self.words)
        self._numbers = {}

    def word(self, p):
        return self.words[p] if p < self.n else None

    # numbers -------------------------------------------------------------
    def numbers(self, i):
        """Number parses at ``i`` as [(end, value)], longest first."""
        if i in self._numbers:
            return self._numbers[i]
        out = {}
        if i < self.n:
            tok = self.toks[i]
            w = tok.text
            if tok.kind is TokenKind.NUMBER:
                if w[-2:] not in ("st", "nd", "rd", "th"):
                    out[i + 1] = float(w.replace(",", ""))
            elif w == "minus":
                for e, v in self.numbers(i + 1):
                    out[e] = -v
            else:
                for e, v in _parse_cardinal(self.words, i).items():
                    out[e] = float(v)
                    # decimals spelled digit by digit after "point"
                    if e < self.n and self.words[e] == "point":
                        digits = []
                        p = e + 1
                        while p < self.n and self.words[p] in _ONES:
                            digits.append(str(_ONES[self.words[p]]))
                            p += 1
                            out[p] = float(f"{v}.{''.join(digits)}")
        res = sorted(out.items(), key=lambda kv: -kv[0])
        self._numbers[i] = res
        return res

    def integers(self, i):
        return [(e, int(v)) for e, v in self.numbers(i) if float(v).is_integer()]

    def ordinal(self, i):
        if i >= self.n:
            return None
        tok = self.toks[i]
        if tok.kind is TokenKind.NUMBER and tok.text[-2:] in ("st", "nd", "rd", "th"):
            return (i + 1, int(tok.text[:-2]))
        best = None
        for j in range(i + 1, min(self.n, i + 9) + 1):
            last = self.words[j - 1]
            if last not in _ORDINAL_TO_CARDINAL:
                continue
            words = self.words[i:j - 1] + [_ORDINAL_TO_CARDINAL[last]]
            parses = _parse_cardinal(words, 0)
            if len(words) in parses:
                best = (j, parses[len(words)])
        return best

    # temperature ---------------------------------------------------------
    def temperature(self, i):
        for e, v in self.numbers(i):
            unit = self._temperature_unit(e)
            if unit is not None:
                end, name = unit
                return end, Temperature(v, name)
        return None

    def _temperature_unit(self, p):
        w = self.word(p)
        if w is None:
            return None
        tok = self.toks[p]
        if tok.kind is TokenKind.UNIT:
            return {"°c": (p + 1, "celsius"), "°f": (p + 1, "fahrenheit"),
                    "°": (p + 1, "degree")}.get(w)
        if w in ("degree", "degrees"):
            nxt = self.word(p + 1)
            if nxt in ("celsius", "centigrade", "c"):
                return p + 2, "celsius"
            if nxt in ("fahrenheit", "f"):
                return p + 2, "fahrenheit"
            return p + 1, "degree"
        if w in ("celsius", "centigrade"):
            return p + 1, "celsius"
        if w == "fahrenheit":
            return p + 1, "fahrenheit"
        return None

    # duration ------------------------------------------------------------
    def _amount_unit(self, p, units):
        """(end, amount, unit) for '<integer|a|an> <unit>' at p."""
        amounts = self.integers(p)
        if self.word(p) in ("a", "an"):
            amounts = amounts + [(p + 1, 1)]
        for e, v in amounts:
            u = _DURATION_UNITS.get(self.word(e))
            if u is not None and u in units and v >= 0:
                return e + 1, v, u
        return None

    def duration(self, i):
        parts = {}
        p = i
        end = None
        while True:
            q = p
            if end is not None and self.word(q) == "and":
                q += 1
            hit = self._amount_unit(q, set(_DURATION_UNITS.values()))
            if hit is None or hit[2] in parts:
                break
            p, amount, unit = hit
            parts[unit] = amount
            end = p
        if end is None:
            return None
        fields = {"years": parts.get("year", 0), "months": parts.get("month", 0),
                  "days": parts.get("day", 0) + 7 * parts.get("week", 0),
                  "hours": parts.get("hour", 0), "minutes": parts.get("minute", 0),
                  "seconds": parts.get("second", 0)}
        return end, Duration(**fields)

    # datetime ------------------------------------------------------------
    def day_exprs(self, i):
        ref = self.ref
        today = ref.date()
        w = self.word(i)
        out = []
        if w == "today":
            out.append((i + 1, today))
        elif w == "tomorrow":
            out.append((i + 1, today + dt.timedelta(days=1)))
        elif w == "yesterday":
            out.append((i + 1, today - dt.timedelta(days=1)))
        elif w in ("this", "next") and self.word(i + 1) in _WEEKDAYS:
            delta = (_WEEKDAYS[self.word(i + 1)] - today.weekday()) % 7
            if w == "next" and delta == 0:
                delta = 7
            out.append((i + 2, today + dt.timedelta(days=delta)))
        elif w in _MONTHS:
            month = _MONTHS[w]
            days = list(self.integers(i + 1))
            o = self.ordinal(i + 1)
            if o is not None:
                days.append(o)
            for e, day in sorted(days, key=lambda x: -x[0]):
                try:
                    date = dt.date(today.year, month, day)
                except ValueError:
                    continue
                if date < today:
                    try:
                        date = dt.date(today.year + 1, month, day)
                    except ValueError:
                        continue
                out.append((e, date))
                break
        return out

    def clock(self, i):
        """'at <hour>[:<minutes>] [o'clock] [am|pm]' -> (end, hour, minute, has_minutes)."""
        if self.word(i) != "at":
            return None
        for e, hour in self.integers(i + 1):
            minute = None
            p = e
            tok = self.toks[p] if p < self.n else None
            if tok is not None and tok.kind is TokenKind.NUMBER and len(tok.text) == 2 \
                    and tok.text.isdigit() and int(tok.text) < 60:
                minute, p = int(tok.text), p + 1
            elif self.word(p) in ("oh", "zero") and self.word(p + 1) in _ONES:
                minute, p = _ONES[self.word(p + 1)], p + 2
            else:
                for e2, m in self.integers(p):
                    if 10 <= m < 60 and self.toks[p].kind is TokenKind.WORD:
                        minute, p = m, e2
                        break
            if self.word(p) == "o'clock" and minute is None:
                p += 1
            meridiem = None
            if self.word(p) in ("am", "pm"):
                meridiem, p = self.word(p), p + 1
            elif self.word(p) in ("a", "p") and self.word(p + 1) == "m":
                meridiem, p = self.word(p) + "m", p + 2
            if meridiem is not None:
                if not 1 <= hour <= 12:
                    continue
                hour = hour % 12 + (12 if meridiem == "pm" else 0)
            elif not 0 <= hour <= 23:
                continue
            return p, hour, minute or 0, minute is not None
        return None

    def datetime(self, i):
        ref = self.ref
        cands = []
        w = self.word(i)
        for e, date in self.day_exprs(i):
            cands.append((e, _instant(_midnight(ref, date), "Day")))
            part = self.word(e)
            if part in _DAYPARTS:
                cands.append((e + 1, _instant(_at(ref, date, _DAYPARTS[part]), "Hour",
                                              "Approximate")))
            c = self.clock(e)
            if c is not None:
                end, hour, minute, has_min = c
                cands.append((end, _instant(_at(ref, date, hour, minute),
                                            "Minute" if has_min else "Hour")))
        if w == "tonight":
            cands.append((i + 1, _instant(_at(ref, ref.date(), _DAYPARTS["night"]), "Hour",
                                          "Approximate")))
        if w == "this" and self.word(i + 1) in _DAYPARTS:
            cands.append((i + 2, _instant(_at(ref, ref.date(), _DAYPARTS[self.word(i + 1)]),
                                          "Hour", "Approximate")))
        if w == "in":
            hit = self._amount_unit(i + 1, set(_IN_UNITS))
            if hit is not None:
                e, amount, unit = hit
                if unit == "month":
                    when = _add_months(ref, amount)
                else:
                    when = ref + dt.timedelta(**{unit + "s": amount})
                cands.append((e, _instant(when, _IN_UNITS[unit])))
        if w == "next":
            nxt = self.word(i + 1)
            today = ref.date()
            if nxt == "week":
                monday = today - dt.timedelta(days=today.weekday()) + dt.timedelta(days=7)
                cands.append((i + 2, _instant(_midnight(ref, monday), "Week")))
            elif nxt == "month":
                first = _add_months(_midnight(ref, today).replace(day=1), 1)
                cands.append((i + 2, _instant(first, "Month")))
            elif nxt == "year":
                cands.append((i + 2, _instant(_midnight(ref, dt.date(today.year + 1, 1, 1)),
                                              "Year")))
        c = self.clock(i)
        if c is not None:
            end, hour, minute, has_min = c
            cands.append((end, _instant(_at(ref, ref.date(), hour, minute),
                                        "Minute" if has_min else "Hour")))
        if not cands:
            return None
        return max(cands, key=lambda c: c[0])

    # ---------------------------------------------------------------------
    def candidates(self, kinds):
        out = []
        for i in range(self.n):
            for kind in kinds:
                hit = self.match(kind, i)
                if hit is not None:
                    end, resolved = hit
                    out.append((kind, i, end, resolved))
        return out

    def match(self, kind, i):
        if kind is BuiltinKind.NUMBER:
            nums = self.numbers(i)
            return (nums[0][0], Number(nums[0][1])) if nums else None
        if kind is BuiltinKind.ORDINAL:
            o = self.ordinal(i)
            return (o[0], Ordinal(o[1])) if o else None
        if kind is BuiltinKind.TEMPERATURE:
            return self.temperature(i)
        if kind is BuiltinKind.DURATION:
            return self.duration(i)
        return self.datetime(i)

    def to_match(self, kind, i, end, resolved):
        first, last = self.index[i], self.index[end - 1]
        span = self.nt.span_of(first, last)
        return BuiltinMatch(kind.value, span, (first, last), resolved,
                            self.nt.original[span[0]:span[1]])


def _as_kinds(scope):
    kinds = []
    for k in scope:
        kind = BuiltinKind(k)
        if kind not in kinds:
            kinds.append(kind)
    return kinds


def _as_normalized(text):
    if isinstance(text, NormalizedText):
        return text
    if isinstance(text, str):
        return tokenize(text)
    # a bare list of words
    toks, pos = [], 0
    for w in text:
        toks.append(Token(w, pos, pos + len(w),
                          TokenKind.NUMBER if w[:1].isdigit() else TokenKind.WORD))
        pos += len(w) + 1
    return NormalizedText(tuple(toks), " ".join(text))


def builtin_candidates(nt, scope, ref):
    """Every (possibly overlapping) longest-at-start match for each kind."""
    nt = _as_normalized(nt)
    ref = parse_reference_time(ref)
    scanner = _Scanner(nt, ref)
    return [scanner.to_match(kind, i, end, resolved)
            for kind, i, end, resolved in scanner.candidates(_as_kinds(scope))]


def select_matches(candidates, scope=None):
    """Resolve overlaps: longer span wins, then kind precedence, then leftmost."""
    if scope is not None:
        allowed = {BuiltinKind(k).value for k in scope}
        candidates = [c for c in candidates if c.kind in allowed]

    def key(m):
        first, last = m.token_range
        return (-(last - first + 1), _PRECEDENCE[BuiltinKind(m.kind)], first)

    taken = []
    for m in sorted(candidates, key=key):
        first, last = m.token_range
        if all(last < o.token_range[0] or first > o.token_range[1] for o in taken):
            taken.append(m)
    return sorted(taken, key=lambda m: m.token_range[0])


def extract_builtin(nt, scope, ref):
    """Non-overlapping built-in entity matches of the kinds in ``scope``.

    >>> [m.resolved for m in extract_builtin("rate it five stars", ["snips/number"],
    ...                                      "2018-04-18T10:00:00+00:00")]
    [Number(value=5.0)]
    """
    if not scope:
        raise ValueError("scope must name at least one built-in kind")
    return select_matches(builtin_candidates(nt, scope, ref))


def resolve_datetime(tokens, ref):
    nt = _as_normalized(tokens)
    scanner = _Scanner(nt, parse_reference_time(ref))
    hit = scanner.datetime(0) if scanner.n else None
    if hit is None or hit[0] != scanner.n:
        raise NoParse(f"not a datetime expression: {nt.original!r}")
    return hit[1]


def supported_grammar():
    return "\n".join([
        "snips/number:",
        "  <digits>[.<digits>] | [minus] <cardinal words> [point <digit words>]",
        "  cardinal words: zero | <below-1000> [billion|million|thousand ...] (descending scales)",
        "snips/ordinal:",
        "  <digits>(st|nd|rd|th) | <cardinal words ending in an ordinal word> (first, second, ..., twentieth, hundredth)",
        "snips/temperature:",
        "  <number> (°c | °f | ° | degrees [celsius|fahrenheit] | celsius | fahrenheit)",
        "snips/duration:",
        "  (<integer>|a|an) <seconds|minutes|hours|days|weeks|months|years> ([and] (<integer>|a|an) <unit>)*",
        "snips/datetime:",
        "  today | tomorrow | yesterday | tonight",
        "  this|next <weekday>   weekdays: " + " ".join(_WEEKDAYS),
        "  this morning|afternoon|evening|night",
        "  in <number> <minutes|hours|days|weeks|months>",
        "  <month-name> <day-number>",
        "  at <hour>(:<minutes>)? (am|pm)?",
        "  next week|month|year",
        "  <day-expr> <daypart>",
        "  <day-expr> at <hour>(:<minutes>)? (am|pm)?",
        "  dayparts: morning=08:00 afternoon=14:00 evening=19:00 night=22:00",
    ])
