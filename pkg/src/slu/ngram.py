"""Katz back-off n-gram model with Good-Turing discounting.

Counts of 1..K (K = 5) are discounted with the Katz form of Good-Turing;
larger counts keep their maximum-likelihood estimate. The mass freed at the
unigram level goes to ``<unk>``; at higher orders it is redistributed over
unseen continuations in proportion to the lower-order model. When the
count-of-counts of an order make Good-Turing undefined, that order falls
back to add-one estimates (same back-off structure) and the model records it.
"""
from __future__ import annotations

import math
from collections import Counter

from .errors import EmptyCorpus

__all__ = ["NGramModel", "train_ngram", "BOS", "EOS", "UNK", "good_turing_discounts"]

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
KATZ_K = 5


def good_turing_discounts(counts, k=KATZ_K):
    """Katz discount ratios d_r for r = 1..k, or None when undefined."""
    n = Counter(counts.values())
    if any(n[r] == 0 for r in range(1, k + 2)):
        return None
    common = (k + 1) * n[k + 1] / n[1]
    if common >= 1.0:
        return None
    d = {}
    for r in range(1, k + 1):
        ratio = ((r + 1) * n[r + 1] / (r * n[r]) - common) / (1.0 - common)
        if not 0.0 < ratio <= 1.0:
            return None
        d[r] = ratio
    return d


def _grams(sentence, order):
    s = (BOS,) + tuple(sentence) + (EOS,)
    for i in range(1, len(s)):
        for k in range(1, order + 1):
            if i - k + 1 >= 0:
                yield s[i - k + 1:i + 1]


class NGramModel:
    def __init__(self, order, counts, smoothing, vocabulary):
        self.order = order
        self.counts = counts  # list indexed by k-1: {gram tuple: count}
        self.smoothing = smoothing  # list per order: {"method": ..., "discounts": {...}}
        self.vocabulary = sorted(vocabulary)  # predicted symbols, incl. </s>, excl. <unk>
        self._vocab_set = set(self.vocabulary)
        self._build()

    # -- estimation -------------------------------------------------------
    def _discounted(self, k, c, context_total):
        sm = self.smoothing[k - 1]
        if sm["method"] == "add-one":
            return (c + 1.0) / (context_total + len(self.vocabulary) + 1.0)
        d = sm["discounts"].get(c, 1.0) if c <= KATZ_K else 1.0
        return d * c / context_total

    def _build(self):
        uni = self.counts[0]
        # exact sums keep the model independent of count-table order
        total = math.fsum(uni.values())
        self.unigram = {}
        for (w,), c in uni.items():
            self.unigram[w] = self._discounted(1, c, total)
        self.unigram[UNK] = max(0.0, 1.0 - math.fsum(self.unigram.values()))
        if self.smoothing[0]["method"] == "add-one":
            self.unigram[UNK] = 1.0 / (total + len(self.vocabulary) + 1.0)
        self.prob_table = {}
        self.alpha = {}
        for k in range(2, self.order + 1):
            by_history = {}
            for gram, c in self.counts[k - 1].items():
                by_history.setdefault(gram[:-1], {})[gram[-1]] = c
            for h, cont in sorted(by_history.items()):
                total_h = math.fsum(cont.values())
                seen = {w: self._discounted(k, c, total_h) for w, c in cont.items()}
                lower = math.fsum(self.prob(w, h[1:]) for w in cont)
                left = 1.0 - math.fsum(seen.values())
                if 1.0 - lower <= 1e-15:
                    # nothing left to back off to; fall back to the ML estimate
                    seen = {w: c / total_h for w, c in cont.items()}
                    self.alpha[h] = 0.0
                else:
                    self.alpha[h] = left / (1.0 - lower)
                for w, p in seen.items():
                    self.prob_table[h + (w,)] = p

    # -- queries ----------------------------------------------------------
    def prob(self, word, history=()):
        """P(word | history); out-of-vocabulary words are looked up as <unk>."""
        if word != UNK and word not in self._vocab_set:
            word = UNK
        history = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        while history:
            p = self.prob_table.get(history + (word,))
            if p is not None:
                return p
            a = self.alpha.get(history)
            if a is not None:
                return a * self.prob(word, history[1:])
            history = history[1:]
        return self.unigram.get(word, 0.0)

    def logprob(self, word, history=()):
        p = self.prob(word, history)
        return math.log(p) if p > 0 else -math.inf

    def sentence_logprob(self, words):
        h, total = (BOS,), 0.0
        for w in list(words) + [EOS]:
            total += self.logprob(w, h)
            h = (h + (w,))[-max(1, self.order - 1):]
        return total

    def history_after(self, history, word):
        if self.order == 1:
            return ()
        return (tuple(history) + (word,))[-(self.order - 1):]

    def start_history(self):
        return (BOS,) if self.order > 1 else ()

    @property
    def flags(self):
        return [sm["method"] for sm in self.smoothing]

    def to_json(self):
        return {
            "order": self.order,
            "vocabulary": self.vocabulary,
            "smoothing": [{"method": sm["method"],
                           "discounts": {str(r): d for r, d in sorted(sm["discounts"].items())}}
                          for sm in self.smoothing],
            "counts": [[[list(g), c] for g, c in sorted(table.items())] for table in self.counts],
            "alpha": [[list(h), a] for h, a in sorted(self.alpha.items())],
        }

    @classmethod
    def from_json(cls, obj):
        counts = [{tuple(g): c for g, c in table} for table in obj["counts"]]
        smoothing = [{"method": sm["method"], "discounts": {int(r): d for r, d in sm["discounts"].items()}}
                     for sm in obj["smoothing"]]
        return cls(obj["order"], counts, smoothing, obj["vocabulary"])


def train_ngram(corpus, order=2):
    """Train on a list of symbol sequences (each a list of strings)."""
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    corpus = [list(s) for s in corpus]
    if not corpus:
        raise EmptyCorpus("cannot train an n-gram model on an empty corpus")
    counts = [Counter() for _ in range(order)]
    for s in corpus:
        for g in _grams(s, order):
            counts[len(g) - 1][g] += 1
    smoothing = []
    for k in range(1, order + 1):
        d = good_turing_discounts(counts[k - 1])
        smoothing.append({"method": "add-one", "discounts": {}} if d is None
                         else {"method": "good-turing", "discounts": d})
    vocabulary = {g[0] for g in counts[0]}
    return NGramModel(order, [dict(c) for c in counts], smoothing, vocabulary)
