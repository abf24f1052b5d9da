"""Class-based tokenizer and verbalizer.

The same normalization is applied to training data (for both the language
model and the NLU) and to queries at inference time, so that words produced
by the recognizer line up with words seen in training.

Every output token remembers the half-open character range of the input it
came from, which lets slot spans be reported against the raw query.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from enum import Enum

from .errors import RangeError

__all__ = [
    "TokenKind",
    "Token",
    "NormalizedText",
    "tokenize",
    "verbalize",
    "normalize",
    "verbalize_number",
    "verbalize_ordinal",
]


class TokenKind(str, Enum):
    WORD = "Word"
    NUMBER = "NumberLiteral"
    CURRENCY = "Currency"
    UNIT = "Unit"
    PUNCT = "Punct"
    SYMBOL = "Symbol"


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    kind: TokenKind = TokenKind.WORD

    @property
    def span(self):
        return (self.start, self.end)


@dataclass(frozen=True)
class NormalizedText:
    tokens: tuple
    original: str

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def words(self):
        return [t.text for t in self.tokens]

    def joined(self):
        return " ".join(t.text for t in self.tokens)

    def span_of(self, first, last):
        """Character span covering tokens ``first..last`` inclusive."""
        toks = self.tokens[first:last + 1]
        return (min(t.start for t in toks), max(t.end for t in toks))


_TOKEN_RE = re.compile(
    r"""
    (?P<ordinal>[0-9]+(?i:st|nd|rd|th)(?![^\W\d_]))
   |(?P<number>[0-9]{1,3}(?:,[0-9]{3})+(?:\.[0-9]+)?|[0-9]+(?:\.[0-9]+)?)
   |(?P<unit>°\s?[cCfF](?![^\W\d_])|°|%)
   |(?P<currency>[$€£])
   |(?P<word>[^\W\d_]+(?:['’][^\W\d_]+)*)
   |(?P<space>\s+)
   |(?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)

_CURRENCY_WORDS = {"$": ("dollar", "dollars"), "€": ("euro", "euros"), "£": ("pound", "pounds")}
_SYMBOL_WORDS = {"&": ["and"], "+": ["plus"], "@": ["at"]}


def tokenize(text):
    """Split ``text`` into classified tokens.

    The input is NFC-normalized first; spans index into that normalized
    string, which is stored as ``original`` on the result.
    """
    text = unicodedata.normalize("NFC", text)
    tokens = []
    for m in _TOKEN_RE.finditer(text):
        group = m.lastgroup
        if group == "space":
            continue
        s, e = m.span()
        raw = m.group()
        if group == "ordinal" or group == "number":
            tokens.append(Token(raw.lower(), s, e, TokenKind.NUMBER))
        elif group == "unit":
            unit = "".join(raw.split()).lower()
            tokens.append(Token(unit, s, e, TokenKind.UNIT))
        elif group == "currency":
            tokens.append(Token(raw, s, e, TokenKind.CURRENCY))
        elif group == "word":
            tokens.append(Token(raw.lower().replace("’", "'"), s, e, TokenKind.WORD))
        elif unicodedata.category(raw).startswith("P"):
            tokens.append(Token(raw, s, e, TokenKind.PUNCT))
        else:
            tokens.append(Token(raw, s, e, TokenKind.SYMBOL))
    return NormalizedText(tuple(tokens), text)


_ONES = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
         "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
         "sixteen", "seventeen", "eighteen", "nineteen"]
_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
         "eighty", "ninety"]
_SCALES = [(10 ** 9, "billion"), (10 ** 6, "million"), (10 ** 3, "thousand")]
_IRREGULAR_ORDINALS = {"one": "first", "two": "second", "three": "third",
                       "five": "fifth", "eight": "eighth", "nine": "ninth",
                       "twelve": "twelfth"}


def _below_thousand(n):
    words = []
    if n >= 100:
        words += [_ONES[n // 100], "hundred"]
        n %= 100
    if n >= 20:
        words.append(_TENS[n // 10])
        n %= 10
        if n:
            words.append(_ONES[n])
    elif n:
        words.append(_ONES[n])
    return words


def verbalize_number(n):
    """English cardinal words for ``0 <= n < 10**12``.

    >>> verbalize_number(1700)
    ['one', 'thousand', 'seven', 'hundred']
    """
    if isinstance(n, bool) or not isinstance(n, int):
        raise TypeError(f"expected an int, got {type(n).__name__}")
    if n < 0 or n >= 10 ** 12:
        raise RangeError(f"{n} is outside [0, 10^12)")
    if n == 0:
        return ["zero"]
    words = []
    for scale, name in _SCALES:
        if n >= scale:
            words += _below_thousand(n // scale) + [name]
            n %= scale
    return words + _below_thousand(n)


def verbalize_ordinal(n):
    words = verbalize_number(n)
    last = words[-1]
    if last in _IRREGULAR_ORDINALS:
        words[-1] = _IRREGULAR_ORDINALS[last]
    elif last.endswith("y"):
        words[-1] = last[:-1] + "ieth"
    else:
        words[-1] = last + "th"
    return words


def _literal_words(text):
    """Words for a NumberLiteral token text (digits, commas, decimals, ordinals)."""
    if text[-2:] in ("st", "nd", "rd", "th"):
        value = int(text[:-2])
        if value < 10 ** 12:
            return verbalize_ordinal(value)
        return [_ONES[int(d)] for d in text[:-2]]
    digits = text.replace(",", "")
    whole, _, frac = digits.partition(".")
    value = int(whole)
    if len(whole) > 1 and whole.startswith("0") and not frac:
        # "05" as in 7:05 reads digit by digit
        return [_ONES[int(d)] for d in whole]
    if value < 10 ** 12:
        words = verbalize_number(value)
    else:
        words = [_ONES[int(d)] for d in whole]
    if frac:
        words = words + ["point"] + [_ONES[int(d)] for d in frac]
    return words


def _literal_value(text):
    if text[-2:] in ("st", "nd", "rd", "th"):
        return float(text[:-2])
    return float(text.replace(",", ""))


def _unit_words(unit, singular):
    if unit == "%":
        return ["percent"]
    degree = "degree" if singular else "degrees"
    if unit == "°c":
        return [degree, "celsius"]
    if unit == "°f":
        return [degree, "fahrenheit"]
    return [degree]


def _currency_words(symbol, singular):
    one, many = _CURRENCY_WORDS[symbol]
    return [one if singular else many]


def verbalize(nt):
    """Spell out number, currency and unit tokens; drop punctuation.

    Every emitted word carries the span of the token it was produced from,
    so a multi-word expansion shares a single span. Currency amounts are
    emitted amount-first ("$25" -> "twenty five dollars").
    """
    out = []
    toks = nt.tokens
    i = 0

    def emit(words, tok):
        out.extend(Token(w, tok.start, tok.end, TokenKind.WORD) for w in words)

    while i < len(toks):
        tok = toks[i]
        nxt = toks[i + 1] if i + 1 < len(toks) else None
        if tok.kind is TokenKind.WORD:
            out.append(tok)
        elif tok.kind is TokenKind.NUMBER:
            emit(_literal_words(tok.text), tok)
            singular = _literal_value(tok.text) == 1
            if nxt is not None and nxt.kind is TokenKind.UNIT:
                emit(_unit_words(nxt.text, singular), nxt)
                i += 1
            elif nxt is not None and nxt.kind is TokenKind.CURRENCY and nxt.start == tok.end:
                emit(_currency_words(nxt.text, singular), nxt)
                i += 1
        elif tok.kind is TokenKind.CURRENCY:
            if nxt is not None and nxt.kind is TokenKind.NUMBER:
                emit(_literal_words(nxt.text), nxt)
                emit(_currency_words(tok.text, _literal_value(nxt.text) == 1), tok)
                i += 1
            else:
                emit(_currency_words(tok.text, False), tok)
        elif tok.kind is TokenKind.UNIT:
            emit(_unit_words(tok.text, False), tok)
        elif tok.kind is TokenKind.SYMBOL:
            emit(_SYMBOL_WORDS.get(tok.text, []), tok)
        i += 1
    return NormalizedText(tuple(out), nt.original)


def normalize(text):
    """Tokenize then verbalize; the form every model consumes."""
    return verbalize(tokenize(text))


def normalize_value(text):
    """Normalized token tuple for an entity value (lookup key)."""
    return tuple(normalize(text).words)
