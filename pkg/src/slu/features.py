"""Feature extraction for the intent classifier and the CRF slot fillers."""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .builtin_entities import BuiltinKind, select_matches

__all__ = [
    "FeatureConfig",
    "ClusterLexicon",
    "Gazetteer",
    "bilou",
    "spans_to_tags",
    "tags_to_spans",
    "featurize_intent",
    "featurize_tokens",
    "class_token",
]

FAMILIES = ("lexical", "shape", "affix", "cluster", "builtin", "gazetteer", "gazetteer_closed", "bias")
RESOURCE_DIR = Path(__file__).parent / "resources"
DEFAULT_DROPOUT = {"gazetteer": 0.5, "cluster": 0.2, "lexical": 0.0}


def class_token(kind):
    return f"%SNIPS_{BuiltinKind(kind).short.upper()}%"


@dataclass
class FeatureConfig:
    window: tuple = (-2, -1, 0, 1, 2)
    dropout: dict = field(default_factory=lambda: dict(DEFAULT_DROPOUT))
    clusters: tuple = ("toy_brown",)  # bundled lexicon names or TSV paths

    def __post_init__(self):
        for fam, p in self.dropout.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"dropout probability for {fam!r} must be in [0, 1], got {p}")
        self.window = tuple(self.window)
        self.clusters = tuple(self.clusters)

    def to_json(self):
        return {"window": list(self.window), "dropout": dict(sorted(self.dropout.items())),
                "clusters": list(self.clusters)}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["window"]), dict(obj["dropout"]), tuple(obj["clusters"]))


class ClusterLexicon:
    """word -> cluster id, read from a ``word<TAB>cluster`` file."""

    def __init__(self, name, table):
        self.name = name
        self.table = {w.lower(): c for w, c in table.items()}

    @classmethod
    def from_tsv(cls, path, name=None):
        path = Path(path)
        table = {}
        with open(path, encoding="utf-8", newline="") as f:
            for row in csv.reader(f, delimiter="\t"):
                if len(row) >= 2 and not row[0].startswith("#"):
                    table[row[0]] = row[1]
        return cls(name or path.stem, table)

    def get(self, word):
        return self.table.get(word)

    def to_tsv(self):
        return "".join(f"{w}\t{c}\n" for w, c in sorted(self.table.items()))


class Gazetteer:
    """Known values of one entity, matched greedily (longest first, left to right)."""

    def __init__(self, entity, forms, extensible=True):
        self.entity = entity
        self.forms = {tuple(f) for f in forms if f}
        self.extensible = extensible
        self.max_len = max((len(f) for f in self.forms), default=0)

    def add(self, forms):
        self.forms.update(tuple(f) for f in forms if f)
        self.max_len = max((len(f) for f in self.forms), default=0)

    def tags(self, words):
        tags = [None] * len(words)
        i = 0
        while i < len(words):
            for n in range(min(self.max_len, len(words) - i), 0, -1):
                if tuple(words[i:i + n]) in self.forms:
                    for k, t in enumerate(bilou(n)):
                        tags[i + k] = t
                    i += n
                    break
            else:
                i += 1
        return tags

    def to_json(self):
        return {"entity": self.entity, "extensible": self.extensible,
                "forms": sorted(" ".join(f) for f in self.forms)}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["entity"], [tuple(f.split(" ")) for f in obj["forms"]], obj["extensible"])


def bilou(n):
    if n == 1:
        return ["U"]
    return ["B"] + ["I"] * (n - 2) + ["L"]


def spans_to_tags(n, spans):
    """spans: [(first, last, label)] -> per-token tags like 'B-room' or 'O'."""
    tags = ["O"] * n
    for first, last, label in spans:
        for k, t in enumerate(bilou(last - first + 1)):
            tags[first + k] = f"{t}-{label}"
    return tags


def tags_to_spans(tags):
    """Decode BILOU tags into [(first, last, label)], repairing invalid runs.

    Repairs: an I without an open span of its label starts one (as B); an L
    without an open span is a single-token span (as U); an O or a tag of
    another label closes the open span at the previous token.
    """
    spans, open_ = [], None  # open_ = (label, start)

    def close(end):
        nonlocal open_
        if open_ is not None:
            spans.append((open_[1], end, open_[0]))
            open_ = None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i - 1)
            continue
        t, label = tag.split("-", 1)
        same = open_ is not None and open_[0] == label
        if t == "U":
            close(i - 1)
            spans.append((i, i, label))
        elif t == "B":
            close(i - 1)
            open_ = (label, i)
        elif t == "I":
            if not same:
                close(i - 1)
                open_ = (label, i)
        else:  # L
            if same:
                close(i)
            else:
                close(i - 1)
                spans.append((i, i, label))
    close(len(tags) - 1)
    return spans


def _substituted_words(nt, matches):
    words = nt.words
    out, i = [], 0
    starts = {m.token_range[0]: m for m in select_matches(matches)}
    while i < len(words):
        m = starts.get(i)
        if m is not None:
            out.append(class_token(m.kind))
            i = m.token_range[1] + 1
        else:
            out.append(words[i])
            i += 1
    return out


def featurize_intent(nt, matches):
    """Unigram and bigram counts, built-in matches collapsed to class tokens."""
    words = _substituted_words(nt, matches)
    feats = Counter(f"u:{w}" for w in words)
    feats.update(f"b:{a} {b}" for a, b in zip(words, words[1:]))
    return feats


def _shape(surface):
    if not surface:
        return "empty"
    if surface.isdigit():
        return "digit"
    if any(ch.isdigit() for ch in surface):
        return "alnum"
    if surface.islower():
        return "lower"
    if surface.isupper():
        return "upper" if len(surface) > 1 else "title"
    if surface[0].isupper() and surface[1:].islower():
        return "title"
    if surface.isalpha():
        return "mixed"
    return "other"


def _builtin_tags(n, matches):
    """Per kind, BILOU tags of that kind's non-overlapping matches."""
    by_kind = {}
    for m in matches:
        by_kind.setdefault(m.kind, []).append(m)
    out = {}
    for kind, ms in sorted(by_kind.items()):
        tags = [None] * n
        for m in select_matches(ms):
            first, last = m.token_range
            for k, t in enumerate(bilou(last - first + 1)):
                tags[first + k] = t
        out[BuiltinKind(kind).short] = tags
    return out


def featurize_tokens(nt, matches, cfg, gazetteers=(), clusters=(), rng=None):
    """Per-token lists of (family, feature-name) pairs.

    When ``rng`` is given, each family of each token is erased with its
    dropout probability. Gazetteer dropout only hits extensible entities;
    a closed entity keeps its gazetteer features, including an explicit
    out-of-gazetteer marker, so the model learns to rely on them.
    """
    words = nt.words
    n = len(words)
    per_token = [[] for _ in range(n)]
    surfaces = [nt.original[t.start:t.end] for t in nt.tokens]
    builtin = _builtin_tags(n, matches)
    gaz = [(g, g.tags(words)) for g in gazetteers]
    for i, w in enumerate(words):
        feats = per_token[i]
        for o in cfg.window:
            j = i + o
            if 0 <= j < n:
                feats.append(("lexical", f"w[{o}]={words[j]}"))
            elif o != 0:
                feats.append(("lexical", f"w[{o}]={'<s>' if j < 0 else '</s>'}"))
        feats.append(("shape", f"shape={_shape(surfaces[i])}"))
        for k in (1, 2, 3):
            if len(w) >= k:
                feats.append(("affix", f"pre{k}={w[:k]}"))
                feats.append(("affix", f"suf{k}={w[-k:]}"))
        for lex in clusters:
            c = lex.get(w)
            if c is not None:
                feats.append(("cluster", f"cluster:{lex.name}={c}"))
        for short, tags in builtin.items():
            for o in cfg.window:
                j = i + o
                if 0 <= j < n and tags[j] is not None:
                    feats.append(("builtin", f"{short}_builtin[{o}]={tags[j]}"))
        for g, tags in gaz:
            if tags[i] is not None:
                fam = "gazetteer" if g.extensible else "gazetteer_closed"
                feats.append((fam, f"{g.entity}_entity={tags[i]}"))
            elif not g.extensible:
                # closed entities only take listed values
                feats.append(("gazetteer_closed", f"{g.entity}_entity=O"))
        feats.append(("bias", "bias"))
    if rng is None:
        return per_token
    out = []
    for feats in per_token:
        families = sorted({fam for fam, _ in feats})
        draws = dict(zip(families, rng.random(len(families))))
        out.append([(fam, f) for fam, f in feats if draws[fam] >= cfg.dropout.get(fam, 0.0)])
    return out


def cluster_path(name):
    """A bundled lexicon name (``toy_brown``) or a path to a TSV file."""
    bundled = RESOURCE_DIR / "clusters" / f"{name}.tsv"
    return bundled if bundled.exists() else Path(name)


def load_clusters(names):
    return [ClusterLexicon.from_tsv(cluster_path(name), Path(str(name)).stem) for name in names]


def seeded_rng(seed, *salt):
    return np.random.default_rng([seed, *salt])
