"""Class-based language model: a pattern n-gram whose class symbols expand
into per-entity value models.

A sentence's probability sums (or maximizes) over every way of reading it
as pattern words and whole entity values; a class symbol costs its pattern
probability times the probability of the value it covers.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .dataset import SlotChunk, entity_forms, normalize_utterance
from .errors import UnknownEntity
from .ngram import EOS, UNK, NGramModel, train_ngram
from .normalize import normalize_value

__all__ = ["ClassLM", "UnionModel", "NGramEntityModel", "abstract_patterns", "train_class_lm",
           "score_sentence", "perplexity", "sample", "inject_entity_values", "class_symbol"]

SUM, MAX = "sum", "max"


def class_symbol(entity):
    return "{" + entity + "}"


def entity_of(symbol):
    if len(symbol) > 2 and symbol[0] == "{" and symbol[-1] == "}":
        return symbol[1:-1]
    return None


class UnionModel:
    """Uniform distribution over distinct value token sequences."""
    kind = "union"

    def __init__(self, values):
        seen, out = set(), []
        for v in values:
            v = tuple(v)
            if v and v not in seen:
                seen.add(v)
                out.append(v)
        self.values = out
        self._set = seen

    def logprob(self, value):
        if tuple(value) in self._set:
            return -math.log(len(self.values))
        return -math.inf

    def weight(self, value):
        return 1.0 / len(self.values) if tuple(value) in self._set else 0.0

    def spans(self, tokens, i):
        """(end, logprob) for each value that matches ``tokens`` at ``i``."""
        out = []
        for v in self.values:
            if tuple(tokens[i:i + len(v)]) == v:
                out.append((i + len(v), -math.log(len(self.values))))
        return out

    @property
    def vocabulary(self):
        return {w for v in self.values for w in v}

    def sample(self, rng):
        return list(self.values[int(rng.integers(len(self.values)))]) if self.values else None

    def with_values(self, values):
        return UnionModel(list(self.values) + [tuple(v) for v in values])

    def to_json(self):
        return {"kind": self.kind, "values": [" ".join(v) for v in self.values]}


class NGramEntityModel:
    """An n-gram over value tokens; a value's weight is its sentence probability."""
    kind = "ngram"

    def __init__(self, sentences, order=2):
        self.sentences = [tuple(s) for s in sentences if s]
        self.order = order
        self.model = train_ngram(self.sentences, order) if self.sentences else None

    @property
    def vocabulary(self):
        return {w for s in self.sentences for w in s}

    def logprob(self, value):
        if self.model is None or not value or any(w not in self.model._vocab_set for w in value):
            return -math.inf
        return self.model.sentence_logprob(value)

    def spans(self, tokens, i):
        out = []
        if self.model is None:
            return out
        for j in range(i + 1, len(tokens) + 1):
            if tokens[j - 1] not in self.model._vocab_set:
                break
            out.append((j, self.model.sentence_logprob(tokens[i:j])))
        return out

    def sample(self, rng):
        if self.model is None:
            return None
        return _sample_ngram(self.model, rng, lambda sym: [sym])

    def with_values(self, values):
        return NGramEntityModel(self.sentences + [tuple(v) for v in values], self.order)

    def to_json(self):
        return {"kind": self.kind, "order": self.order,
                "sentences": [" ".join(s) for s in self.sentences],
                "model": self.model.to_json() if self.model else None}


def _entity_model_from_json(obj):
    if obj["kind"] == "union":
        return UnionModel([tuple(v.split(" ")) for v in obj["values"]])
    return NGramEntityModel([tuple(s.split(" ")) for s in obj["sentences"]], obj["order"])


class ClassLM:
    def __init__(self, pattern_lm, entity_models):
        self.pattern_lm = pattern_lm
        self.entity_models = dict(entity_models)
        self.vocabulary = {w for w in pattern_lm.vocabulary if entity_of(w) is None and w != EOS}
        for m in self.entity_models.values():
            self.vocabulary |= m.vocabulary

    def classes(self):
        return [e for e in (entity_of(w) for w in self.pattern_lm.vocabulary) if e is not None]

    def to_json(self):
        return {"pattern_lm": self.pattern_lm.to_json(),
                "entities": {e: m.to_json() for e, m in sorted(self.entity_models.items())}}

    @classmethod
    def from_json(cls, obj):
        return cls(NGramModel.from_json(obj["pattern_lm"]),
                   {e: _entity_model_from_json(m) for e, m in obj["entities"].items()})


def abstract_patterns(d):
    """Pattern corpus: one symbol list per utterance, slots as class symbols."""
    corpus = []
    for _, utt in d.utterances():
        nt, chunk_ids = normalize_utterance(utt)
        out, prev = [], None
        for w, cid in zip(nt.words, chunk_ids):
            chunk = utt.chunks[cid]
            if isinstance(chunk, SlotChunk):
                if cid != prev:
                    out.append(class_symbol(chunk.entity))
            else:
                out.append(w)
            prev = cid
        corpus.append(out)
    return corpus


def train_class_lm(d, order=2):
    corpus = abstract_patterns(d)
    pattern_lm = train_ngram(corpus, order)
    models = {}
    for name, ent in d.entities.items():
        forms = entity_forms(d, name)
        models[name] = NGramEntityModel(forms, order) if ent.is_builtin else UnionModel(forms)
    return ClassLM(pattern_lm, models)


def _tokens(sentence):
    if isinstance(sentence, str):
        return list(normalize_value(sentence))
    return list(sentence)


def score_sentence(lm, sentence, mode=SUM, allow_unk=True):
    """Natural-log probability of ``sentence`` summed (or maxed) over derivations."""
    tokens = _tokens(sentence)
    plm = lm.pattern_lm
    n = len(tokens)
    classes = [(e, class_symbol(e)) for e in lm.classes() if e in lm.entity_models]
    states = [dict() for _ in range(n + 1)]  # position -> {history: [log scores]}
    states[0][plm.start_history()] = [0.0]
    finals = []

    def push(pos, h, score):
        states[pos].setdefault(h, []).append(score)

    for i in range(n + 1):
        for h, scores in states[i].items():
            here = logsumexp(scores) if mode == SUM else max(scores)
            if here == -math.inf:
                continue
            if i == n:
                finals.append(here + plm.logprob(EOS, h))
                continue
            w = tokens[i]
            if w in plm._vocab_set and entity_of(w) is None:
                push(i + 1, plm.history_after(h, w), here + plm.logprob(w, h))
            elif allow_unk and w not in lm.vocabulary:
                push(i + 1, plm.history_after(h, UNK), here + plm.logprob(UNK, h))
            for entity, sym in classes:
                lp_class = plm.logprob(sym, h)
                if lp_class == -math.inf:
                    continue
                for end, lp_value in lm.entity_models[entity].spans(tokens, i):
                    push(end, plm.history_after(h, sym), here + lp_class + lp_value)
    if not finals:
        return -math.inf
    return float(logsumexp(finals)) if mode == SUM else float(max(finals))


def perplexity(lm, sentences, allow_unk=True):
    total, count = 0.0, 0
    for s in sentences:
        tokens = _tokens(s)
        total += score_sentence(lm, tokens, SUM, allow_unk)
        count += len(tokens) + 1
    if count == 0:
        raise ValueError("perplexity needs a non-empty corpus")
    if total == -math.inf:
        return math.inf
    return math.exp(-total / count)


def _sample_ngram(model, rng, expand, max_symbols=200):
    h, out = model.start_history(), []
    symbols = [w for w in model.vocabulary]  # sorted, deterministic
    for _ in range(max_symbols):
        p = np.array([model.prob(w, h) for w in symbols])
        p = p / p.sum()
        w = symbols[int(rng.choice(len(symbols), p=p))]
        if w == EOS:
            return out
        part = expand(w)
        if part is None:
            return None
        out.extend(part)
        h = model.history_after(h, w)
    return None


def sample(lm, seed, max_len=20, max_tries=1000):
    """Ancestral sample (never emitting <unk>); retried until within ``max_len``."""
    rng = np.random.default_rng(seed)

    def expand(sym):
        entity = entity_of(sym)
        if entity is None:
            return [sym]
        model = lm.entity_models.get(entity)
        return model.sample(rng) if model is not None else None

    for _ in range(max_tries):
        out = _sample_ngram(lm.pattern_lm, rng, expand)
        if out is not None and len(out) <= max_len:
            return out
    raise RuntimeError(f"no sample of at most {max_len} tokens after {max_tries} tries")


def inject_entity_values(lm, entity, values):
    """New ClassLM with extra values for ``entity``; the pattern model is shared."""
    if entity not in lm.entity_models:
        raise UnknownEntity(entity)
    new = [normalize_value(v) if isinstance(v, str) else tuple(v) for v in values]
    models = dict(lm.entity_models)
    models[entity] = models[entity].with_values([v for v in new if v])
    return ClassLM(lm.pattern_lm, models)
