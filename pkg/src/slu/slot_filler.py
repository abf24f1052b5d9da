"""Per-intent CRF slot filler: BILOU tagging over normalized tokens."""
from __future__ import annotations

from .crf import CRF, SequenceBatch, train_crf
from .features import featurize_tokens, spans_to_tags, tags_to_spans
from .results import Slot

__all__ = ["SlotFiller", "train_slot_filler", "fill_slots", "tagset"]


def tagset(slot_names):
    return ["O"] + [f"{p}-{s}" for s in slot_names for p in "BILU"]


class SlotFiller:
    def __init__(self, intent, slot_entities, crf, n_iter=0):
        self.intent = intent
        self.slot_entities = dict(slot_entities)  # slot name -> entity
        self.crf = crf
        self.n_iter = n_iter

    def to_json(self):
        return {"intent": self.intent, "slots": self.slot_entities, "iterations": self.n_iter,
                "crf": self.crf.to_json()}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["intent"], obj["slots"], CRF.from_json(obj["crf"]), obj.get("iterations", 0))


def train_slot_filler(intent, examples, cfg, gazetteers=(), clusters=(), rng=None, lam=0.1,
                      max_iter=300, tol=1e-4):
    """Train on ``examples``: a list of (nt, matches, [(first, last, slot_name, entity)]).

    Dropout is drawn once per example from ``rng`` when featurizing; the
    resulting feature sets are then fixed for the whole optimization.
    """
    slot_entities = {}
    for _, _, spans in examples:
        for _, _, name, entity in spans:
            slot_entities.setdefault(name, entity)
    tags = tagset(slot_entities)
    tag_index = {t: k for k, t in enumerate(tags)}
    features, token_feats, labels = {}, [], []
    for nt, matches, spans in examples:
        per_token = featurize_tokens(nt, matches, cfg, gazetteers, clusters, rng)
        names = [[f for _, f in feats] for feats in per_token]
        for feats in names:
            for f in feats:
                features.setdefault(f, len(features))
        token_feats.append(names)
        y = spans_to_tags(len(nt), [(a, b, name) for a, b, name, _ in spans])
        labels.append([tag_index[t] for t in y])
    crf = CRF.zeros(tags, features, lam)
    batch = SequenceBatch([crf.indices(s) for s in token_feats], labels, len(features))
    crf, n_iter = train_crf(crf, batch, max_iter=max_iter, tol=tol)
    return SlotFiller(intent, slot_entities, crf, n_iter)


def fill_slots(filler, nt, matches, cfg, gazetteers=(), clusters=()):
    """Viterbi-decode slots; spans refer to ``nt.original``."""
    if len(nt) == 0:
        return []
    per_token = featurize_tokens(nt, matches, cfg, gazetteers, clusters)
    idx = filler.crf.indices([[f for _, f in feats] for feats in per_token])
    tags = filler.crf.decode(idx)
    slots = []
    for first, last, name in tags_to_spans(tags):
        span = nt.span_of(first, last)
        slots.append(Slot(name, filler.slot_entities[name], span,
                          nt.original[span[0]:span[1]], (first, last)))
    return slots
