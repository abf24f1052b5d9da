"""Cross-validated precision / recall / F1 for intents and slots, and learning curves."""
from __future__ import annotations

import logging

import numpy as np

from .dataset import Dataset, IntentDef
from .engine import TRAINING_REFERENCE_TIME, EngineConfig, train_engine
from .errors import NotEnoughData

__all__ = ["Counts", "score_predictions", "fold_assignments", "evaluate_cv", "learning_curve",
           "gold_of", "prediction_of", "curve_tsv"]

log = logging.getLogger(__name__)


class Counts:
    def __init__(self):
        self.table = {}  # key -> [tp, fp, fn]

    def add(self, key, tp=0, fp=0, fn=0):
        row = self.table.setdefault(key, [0, 0, 0])
        row[0] += tp
        row[1] += fp
        row[2] += fn

    def report(self):
        per_key = {k: _prf(*v) for k, v in sorted(self.table.items())}
        tp, fp, fn = (sum(v[i] for v in self.table.values()) for i in range(3))
        micro = _prf(tp, fp, fn)
        if per_key:
            macro = {m: float(np.mean([r[m] for r in per_key.values()]))
                     for m in ("precision", "recall", "f1")}
        else:
            macro = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
        return {"per_key": per_key, "micro": micro, "macro": macro}


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return {"tp": tp, "fp": fp, "fn": fn, "precision": p, "recall": r, "f1": f}


def gold_of(intent, utt):
    """(intent, [(slot_name, entity, (start, end))]) from an annotated utterance."""
    return intent, [(c.slot_name, c.entity, (s, e)) for s, e, c in utt.slot_spans()]


def prediction_of(result):
    return result.intent, [(s.slot_name, s.entity, tuple(s.span)) for s in result.slots]


def _slot_match(gold, pred, overlap):
    if gold[1] != pred[1]:
        return False
    (gs, ge), (ps, pe) = gold[2], pred[2]
    if overlap:
        return gs < pe and ps < ge
    return (gs, ge) == (ps, pe)


def score_predictions(pairs, overlap=False):
    """Metrics from [(gold, predicted)] pairs as produced by gold_of/prediction_of.

    Intents: a correct prediction is a TP for the gold intent, otherwise an
    FN for the gold intent and an FP for the predicted one (if any). Slots
    match on entity and exact span (or any character overlap with
    ``overlap``), one-to-one, independent of the intent; counts are keyed
    by slot name.
    """
    intents, slots = Counts(), Counts()
    for (g_intent, g_slots), (p_intent, p_slots) in pairs:
        if p_intent == g_intent:
            intents.add(g_intent, tp=1)
        else:
            intents.add(g_intent, fn=1)
            if p_intent is not None:
                intents.add(p_intent, fp=1)
        used = set()
        for g in g_slots:
            hit = next((k for k, p in enumerate(p_slots)
                        if k not in used and _slot_match(g, p, overlap)), None)
            if hit is None:
                slots.add(g[0], fn=1)
            else:
                used.add(hit)
                slots.add(g[0], tp=1)
        for k, p in enumerate(p_slots):
            if k not in used:
                slots.add(p[0], fp=1)
    ir, sr = intents.report(), slots.report()
    return {
        "intents": ir["per_key"],
        "slots": sr["per_key"],
        "micro": {"intent": ir["micro"], "slot": sr["micro"]},
        "macro": {"intent": ir["macro"], "slot": sr["macro"]},
    }


def fold_assignments(d, k, seed):
    """{(intent, index): fold}, stratified by intent and seeded."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    out = {}
    for intent, idef in d.intents.items():
        n = len(idef.utterances)
        if n < k:
            raise NotEnoughData(intent, k)
        for pos, idx in enumerate(rng.permutation(n)):
            out[(intent, int(idx))] = pos % k
    return out


def _subset(d, keep):
    """Dataset restricted to the (intent, index) pairs in ``keep`` (intents kept in order)."""
    intents = {}
    for intent, idef in d.intents.items():
        utts = tuple(u for i, u in enumerate(idef.utterances) if (intent, i) in keep)
        if utts:
            intents[intent] = IntentDef(utts)
    return Dataset(d.language, intents, d.entities)


def default_trainer(config=None):
    def trainer(d, seed):
        return train_engine(d, config or EngineConfig(), seed)
    return trainer


def cross_validate(d, k, seed, trainer=None, ref=TRAINING_REFERENCE_TIME):
    """Held-out predictions: {(intent, index): ParseResult} plus the fold table."""
    trainer = trainer or default_trainer()
    folds = fold_assignments(d, k, seed)
    predictions = {}
    for f in range(k):
        train = _subset(d, {key for key, v in folds.items() if v != f})
        engine = trainer(train, seed + f)
        for (intent, idx), v in sorted(folds.items()):
            if v == f:
                predictions[(intent, idx)] = engine.parse(d.intents[intent].utterances[idx].text, ref)
        log.info("fold %d/%d done", f + 1, k)
    return predictions, folds


def evaluate_cv(d, k=5, seed=42, trainer=None, overlap=False, ref=TRAINING_REFERENCE_TIME):
    predictions, folds = cross_validate(d, k, seed, trainer, ref)
    pairs = [(gold_of(intent, d.intents[intent].utterances[idx]), prediction_of(predictions[(intent, idx)]))
             for intent, idx in sorted(predictions, key=lambda key: (list(d.intents).index(key[0]), key[1]))]
    report = score_predictions(pairs, overlap)
    report["seed"] = seed
    report["folds"] = k
    report["match"] = "overlap" if overlap else "exact"
    report["fold_assignments"] = [{"intent": i, "index": j, "fold": folds[(i, j)]}
                                  for i, j in sorted(folds, key=lambda key: (list(d.intents).index(key[0]), key[1]))]
    return report


def learning_curve(d, sizes, seed=42, heldout_fraction=0.2, trainer=None, ref=TRAINING_REFERENCE_TIME):
    """Train on ``s`` utterances per intent for each size; score a fixed held-out set.

    Returns rows of {"size", "seed", "intent_f1", "slot_f1"} (macro F1).
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    trainer = trainer or default_trainer()
    rng = np.random.default_rng(seed)
    pool, heldout = {}, []
    for intent, idef in d.intents.items():
        order = [int(i) for i in rng.permutation(len(idef.utterances))]
        n_out = max(1, int(round(heldout_fraction * len(order))))
        heldout += [(intent, i) for i in sorted(order[:n_out])]
        pool[intent] = order[n_out:]
        if sizes and sizes[-1] > len(pool[intent]):
            raise ValueError(f"intent {intent!r} has only {len(pool[intent])} training "
                             f"utterances, cannot take {sizes[-1]}")
    rows = []
    for size in sizes:
        keep = set()
        for intent, order in pool.items():
            pick = rng.permutation(len(order))[:size]
            keep |= {(intent, order[int(j)]) for j in pick}
        engine = trainer(_subset(d, keep), seed)
        pairs = []
        for intent, idx in heldout:
            utt = d.intents[intent].utterances[idx]
            pairs.append((gold_of(intent, utt), prediction_of(engine.parse(utt.text, ref))))
        rep = score_predictions(pairs)
        rows.append({"size": size, "seed": seed, "intent_f1": rep["macro"]["intent"]["f1"],
                     "slot_f1": rep["macro"]["slot"]["f1"]})
        log.info("size %d: slot F1 %.4f", size, rows[-1]["slot_f1"])
    return rows


def curve_tsv(rows):
    lines = ["size\tseed\tintent_f1\tslot_f1"]
    lines += [f"{r['size']}\t{r['seed']}\t{r['intent_f1']:.6f}\t{r['slot_f1']:.6f}" for r in rows]
    return "\n".join(lines) + "\n"
