"""Repair generated training data by majority vote over repeated cross-validation.

Each utterance is predicted R times, each time by an engine that never saw
it. A prediction shared by more than half of the passes may override the
annotation: a different intent (FixIntent), no intent at all (Drop), a
longer span around an annotated slot (ExtendSlot), or a slot where none was
annotated (AddSlot, only when the span is a known value of a custom entity
or a built-in match of the right kind). Anything else is kept.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .builtin_entities import extract_builtin
from .dataset import (Dataset, IntentDef, entity_forms, utterance_from_spans, validate_dataset)
from .engine import TRAINING_REFERENCE_TIME
from .evaluation import cross_validate
from .normalize import normalize, normalize_value

__all__ = ["Verdict", "DisambiguationReport", "disambiguate"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Verdict:
    intent: str
    index: int
    text: str
    action: str  # Keep | FixIntent | Drop | ExtendSlot | AddSlot
    detail: dict = field(default_factory=dict)

    def to_json(self):
        return {"intent": self.intent, "index": self.index, "text": self.text,
                "action": self.action, **self.detail}


@dataclass
class DisambiguationReport:
    verdicts: list
    corrected: Dataset
    seed: int
    repetitions: int
    folds: int
    warnings: list = field(default_factory=list)

    def actions(self, action):
        return [v for v in self.verdicts if v.action == action]

    def to_json(self):
        return {"seed": self.seed, "repetitions": self.repetitions, "folds": self.folds,
                "verdicts": [v.to_json() for v in self.verdicts if v.action != "Keep"],
                "kept": sum(1 for v in self.verdicts if v.action == "Keep"),
                "warnings": self.warnings}


def _value_anchored(d, text, slot_name, entity, span, ref):
    ent = d.entities.get(entity)
    if ent is None:
        return False
    surface = text[span[0]:span[1]]
    if ent.is_builtin:
        nt = normalize(surface)
        matches = extract_builtin(nt, [ent.kind], ref)
        return len(matches) == 1 and matches[0].token_range == (0, len(nt) - 1)
    return normalize_value(surface) in set(entity_forms(d, entity))


_NO_MAJORITY = object()


def _majority(counter, repetitions):
    """The value voted by more than half of the passes, else _NO_MAJORITY."""
    for value, n in counter.items():
        if n * 2 > repetitions:
            return value
    return _NO_MAJORITY


def disambiguate(d, repetitions=5, folds=3, seed=42, trainer=None, ref=TRAINING_REFERENCE_TIME):
    if repetitions < 3 or repetitions % 2 == 0:
        raise ValueError(f"repetitions must be odd and at least 3, got {repetitions}")
    pass_seeds = [int(s) for s in np.random.default_rng(seed).integers(0, 2 ** 31 - 1, repetitions)]
    votes = {}
    for r, s in enumerate(pass_seeds):
        predictions, _ = cross_validate(d, folds, s, trainer, ref)
        for key, res in predictions.items():
            votes.setdefault(key, []).append(res)
        log.info("disambiguation pass %d/%d done", r + 1, repetitions)

    verdicts, warnings = [], []
    new_intents = {name: [] for name in d.intents}
    for intent, idef in d.intents.items():
        for idx, utt in enumerate(idef.utterances):
            text = utt.text
            results = votes[(intent, idx)]
            intent_votes = Counter(res.intent for res in results)
            winner = _majority(intent_votes, repetitions)
            gold = [(s, e, c.entity, c.slot_name) for s, e, c in utt.slot_spans()]
            if winner is _NO_MAJORITY:
                warnings.append(f"{intent}[{idx}] {text!r}: no majority intent "
                                f"{dict(sorted(intent_votes.items(), key=str))}")
                verdicts.append(Verdict(intent, idx, text, "Keep"))
                new_intents[intent].append(utt)
                continue
            if winner is None:
                verdicts.append(Verdict(intent, idx, text, "Drop"))
                continue
            if winner != intent:
                verdicts.append(Verdict(intent, idx, text, "FixIntent", {"new_intent": winner}))
                slots = [(s, e, ent, name) for s, e, ent, name in gold
                         if _slot_allowed(d, winner, name, ent)]
                new_intents[winner].append(utterance_from_spans(text, slots))
                continue
            slot_votes = Counter()
            for res in results:
                if res.intent == intent:
                    slot_votes.update({(s.span[0], s.span[1], s.entity, s.slot_name) for s in res.slots})
            majority = [k for k, n in sorted(slot_votes.items()) if n * 2 > repetitions]
            slots = list(gold)
            changed = []
            for s, e, ent, name in majority:
                if (s, e, ent, name) in slots:
                    continue
                inside = [g for g in slots if s <= g[0] and g[1] <= e and (s, e) != (g[0], g[1])
                          and g[2] == ent]
                overlapping = [g for g in slots if g[0] < e and s < g[1]]
                if inside and len(overlapping) == len(inside):
                    for g in inside:
                        slots.remove(g)
                    slots.append((s, e, ent, name))
                    changed.append(("ExtendSlot", {"slot_name": name, "entity": ent,
                                                   "old_range": [inside[0][0], inside[-1][1]],
                                                   "range": [s, e]}))
                elif not overlapping and _value_anchored(d, text, name, ent, (s, e), ref):
                    slots.append((s, e, ent, name))
                    changed.append(("AddSlot", {"slot_name": name, "entity": ent, "range": [s, e],
                                                "value": text[s:e]}))
            if changed:
                for action, detail in changed:
                    verdicts.append(Verdict(intent, idx, text, action, detail))
                new_intents[intent].append(utterance_from_spans(text, slots))
            else:
                verdicts.append(Verdict(intent, idx, text, "Keep"))
                new_intents[intent].append(utt)

    corrected = Dataset(d.language, {k: IntentDef(tuple(v)) for k, v in new_intents.items()},
                        d.entities)
    if validate_dataset(corrected):
        # never hand back an invalid dataset: undo removals that emptied an intent
        for k, v in new_intents.items():
            if not v:
                new_intents[k] = list(d.intents[k].utterances)
                warnings.append(f"intent {k} would be empty after corrections; kept as is")
        corrected = Dataset(d.language, {k: IntentDef(tuple(v)) for k, v in new_intents.items()},
                            d.entities)
    return DisambiguationReport(verdicts, corrected, seed, repetitions, folds, warnings)


def _slot_allowed(d, intent, slot_name, entity):
    for utt in d.intents[intent].utterances:
        for c in utt.slot_chunks:
            if c.slot_name == slot_name:
                return c.entity == entity
    return True
