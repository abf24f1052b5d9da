"""Confusion networks: greedy decoding, OOV substitution and confidence."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import EmptyReference, InvalidNetwork

__all__ = ["ConfusionNetwork", "DecodedWord", "DecodedUtterance", "greedy_decode",
           "apply_oov_threshold", "word_error_rate", "geometric_mean", "NULL", "OOV"]

NULL = "<eps>"
OOV = "<oov>"
TOLERANCE = 1e-6


@dataclass(frozen=True)
class ConfusionNetwork:
    segments: tuple  # each a tuple of (word, posterior)

    def validate(self):
        for k, seg in enumerate(self.segments):
            if not seg:
                raise InvalidNetwork(f"segment {k} is empty")
            if sum(1 for w, _ in seg if w == NULL) > 1:
                raise InvalidNetwork(f"segment {k} has more than one {NULL} arc")
            for w, p in seg:
                if not 0.0 <= p <= 1.0 or math.isnan(p):
                    raise InvalidNetwork(f"segment {k}: posterior {p} of {w!r} is outside [0, 1]")
            total = math.fsum(p for _, p in seg)
            if abs(total - 1.0) > TOLERANCE:
                raise InvalidNetwork(f"segment {k}: posteriors sum to {total}, not 1")
        return self

    @classmethod
    def from_json(cls, obj):
        try:
            segments = tuple(tuple((str(a["word"]), float(a["posterior"])) for a in seg)
                             for seg in obj["segments"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidNetwork(f"malformed confusion network: {e}") from None
        return cls(segments)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))

    def to_json(self):
        return {"segments": [[{"word": w, "posterior": p} for w, p in seg] for seg in self.segments]}


@dataclass(frozen=True)
class DecodedWord:
    token: str
    confidence: float


@dataclass(frozen=True)
class DecodedUtterance:
    words: tuple
    sentence_confidence: float

    @property
    def tokens(self):
        return [w.token for w in self.words]

    def to_json(self):
        return {"words": [{"token": w.token, "confidence": w.confidence} for w in self.words],
                "text": " ".join(self.tokens),
                "sentence_confidence": self.sentence_confidence}


def geometric_mean(values):
    """exp of the mean log; 1.0 for an empty sequence."""
    values = list(values)
    if not values:
        return 1.0
    if any(v == 0.0 for v in values):
        return 0.0
    return math.exp(math.fsum(math.log(v) for v in values) / len(values))


def greedy_decode(cn, include_null=False):
    """Best arc per segment; ties go to the lexicographically smallest word.

    A winning NULL arc emits nothing. With ``include_null`` its posterior
    still enters the sentence confidence.
    """
    cn.validate()
    words, confs = [], []
    for seg in cn.segments:
        word, p = min(seg, key=lambda a: (-a[1], a[0]))
        if word == NULL:
            if include_null:
                confs.append(p)
            continue
        words.append(DecodedWord(word, p))
        confs.append(p)
    return DecodedUtterance(tuple(words), geometric_mean(confs))


def apply_oov_threshold(du, threshold=0.5):
    """Replace words with confidence below ``threshold`` by ``<oov>``.

    The sentence confidence is left as computed from the original words.
    """
    words = tuple(replace(w, token=OOV) if w.confidence < threshold else w for w in du.words)
    return DecodedUtterance(words, du.sentence_confidence)


def edit_distance(a, b):
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def word_error_rate(hyp, ref):
    hyp, ref = list(hyp), list(ref)
    if not ref:
        if hyp:
            raise EmptyReference("reference is empty but the hypothesis is not")
        return 0.0
    return edit_distance(hyp, ref) / len(ref)
