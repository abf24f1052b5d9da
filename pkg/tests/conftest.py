import json
from fractions import Fraction
from pathlib import Path

import pytest

from slu.dataset import SlotChunk, Utterance, dataset_from_json, load_dataset
from slu.engine import train_engine
from slu.results import ParseResult, Slot

REF = "2018-04-18T10:00:00+00:00"
DATASETS = Path(__file__).resolve().parents[1] / "src" / "slu" / "resources" / "datasets"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def dataset_path(name):
    return DATASETS / f"{name}.json"


def toy_dataset(intents, entities):
    """Build a Dataset from {intent: [annotated strings]} and entity descriptions.

    ``entities`` maps a name to a list of values (closed custom entity),
    a dict with "values"/"extensible", or a built-in kind string.
    """
    ents = {}
    for name, desc in entities.items():
        if isinstance(desc, str):
            ents[name] = {"builtin": desc}
            continue
        if isinstance(desc, dict):
            values, ext = desc["values"], desc.get("extensible", False)
        else:
            values, ext = desc, False
        ents[name] = {"values": [v if isinstance(v, dict) else {"value": v, "synonyms": []}
                                 for v in values],
                      "automatically_extensible": ext}
    obj = {"language": "en", "intents": {}, "entities": ents}
    for intent, texts in intents.items():
        utts = []
        for t in texts:
            u = Utterance.from_annotated(t)
            data = []
            for c in u.chunks:
                if isinstance(c, SlotChunk):
                    data.append({"text": c.text, "entity": c.entity, "slot_name": c.slot_name})
                else:
                    data.append({"text": c.text})
            utts.append({"data": data})
        obj["intents"][intent] = {"utterances": utts}
    return dataset_from_json(obj)


@pytest.fixture(scope="session")
def smart_lights():
    return load_dataset(dataset_path("smart_lights"))


@pytest.fixture(scope="session")
def thermostat():
    return load_dataset(dataset_path("thermostat"))


@pytest.fixture(scope="session")
def planted():
    return load_dataset(dataset_path("planted_errors"))


@pytest.fixture(scope="session")
def smart_lights_engine(smart_lights):
    return train_engine(smart_lights, seed=42)


@pytest.fixture(scope="session")
def thermostat_engine(thermostat):
    return train_engine(thermostat, seed=42)


@pytest.fixture(scope="session")
def cv_oracle():
    return json.loads((FIXTURES / "cv_oracle.json").read_text())


class Replay:
    """Stands in for a trained engine: answers from recorded predictions."""

    def __init__(self, table):
        self.table = table

    def parse(self, query, ref=REF):
        rec = self.table[query]
        slots = []
        for s in rec["slots"]:
            assert query[s["start"]:s["end"]] == s["value"]
            slots.append(Slot(s["slot_name"], s["entity"], (s["start"], s["end"]), s["value"]))
        return ParseResult(query, rec["intent"], 1.0 if rec["intent"] else 0.0, tuple(slots))


def replay_trainer(table):
    return lambda dataset, seed: Replay(table)


def fraction(text):
    return float(Fraction(text))
