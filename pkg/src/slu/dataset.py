"""Assistant dataset: intents with slot-annotated utterances plus entities.

One dataset trains both the language model and the NLU engine. The on-disk
form is a single JSON document::

    {"language": "en",
     "intents": {"SetLightColor": {"utterances": [{"data": [
         {"text": "set the "},
         {"text": "kitchen", "entity": "room", "slot_name": "room"}]}]}},
     "entities": {"room": {"values": [{"value": "kitchen", "synonyms": []}],
                           "automatically_extensible": false},
                  "brightness": {"builtin": "snips/number"}}}
"""
from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .builtin_entities import SUPPORTED_KINDS
from .errors import FormatError, ValidationError
from .normalize import NormalizedText, Token, normalize_value, tokenize, verbalize

__all__ = [
    "TextChunk",
    "SlotChunk",
    "Utterance",
    "IntentDef",
    "EntityValue",
    "CustomEntity",
    "BuiltinEntity",
    "Dataset",
    "Violation",
    "load_dataset",
    "write_dataset",
    "dataset_from_json",
    "dataset_to_json",
    "validate_dataset",
    "dataset_vocabulary",
    "dataset_fingerprint",
    "normalize_utterance",
    "entity_forms",
    "canonical_map",
    "gold_slots",
    "utterance_from_spans",
]

MAX_INTENTS = 256
MAX_UTTERANCES = 100_000
_INTENT_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class TextChunk:
    text: str


@dataclass(frozen=True)
class SlotChunk:
    text: str
    entity: str
    slot_name: str


_ANNOTATION_RE = re.compile(r"\(([^()]+)\)\[([^\[\]]+)\]")


@dataclass(frozen=True)
class Utterance:
    chunks: tuple

    @property
    def text(self):
        return "".join(c.text for c in self.chunks)

    @property
    def slot_chunks(self):
        return [c for c in self.chunks if isinstance(c, SlotChunk)]

    def slot_spans(self):
        """[(start, end, SlotChunk)] in character offsets of ``text``."""
        out, pos = [], 0
        for c in self.chunks:
            if isinstance(c, SlotChunk):
                out.append((pos, pos + len(c.text), c))
            pos += len(c.text)
        return out

    @classmethod
    def from_annotated(cls, text):
        """Parse ``"set the (kitchen)[room] lights"``.

        The bracket holds the entity name, optionally prefixed by a slot name
        (``[target_room:room]``); the slot name defaults to the entity name.
        """
        chunks, pos = [], 0
        for m in _ANNOTATION_RE.finditer(text):
            if m.start() > pos:
                chunks.append(TextChunk(text[pos:m.start()]))
            slot, _, entity = m.group(2).rpartition(":")
            chunks.append(SlotChunk(m.group(1), entity, slot or entity))
            pos = m.end()
        if pos < len(text):
            chunks.append(TextChunk(text[pos:]))
        return cls(tuple(chunks))

    def annotated(self):
        parts = []
        for c in self.chunks:
            if isinstance(c, SlotChunk):
                tag = c.entity if c.slot_name == c.entity else f"{c.slot_name}:{c.entity}"
                parts.append(f"({c.text})[{tag}]")
            else:
                parts.append(c.text)
        return "".join(parts)


@dataclass(frozen=True)
class IntentDef:
    utterances: tuple


@dataclass(frozen=True)
class EntityValue:
    value: str
    synonyms: tuple = ()


@dataclass(frozen=True)
class CustomEntity:
    values: tuple
    automatically_extensible: bool = False

    is_builtin = False


@dataclass(frozen=True)
class BuiltinEntity:
    kind: str

    is_builtin = True


@dataclass(frozen=True)
class Dataset:
    language: str
    intents: dict = field(default_factory=dict)
    entities: dict = field(default_factory=dict)

    def utterances(self):
        """Yield (intent_name, utterance) in file order."""
        for name, intent in self.intents.items():
            for utt in intent.utterances:
                yield name, utt

    def with_intents(self, intents):
        return Dataset(self.language, dict(intents), self.entities)

    @property
    def builtin_kinds(self):
        kinds = []
        for ent in self.entities.values():
            if ent.is_builtin and ent.kind not in kinds:
                kinds.append(ent.kind)
        return kinds


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def to_json(self):
        return {"code": self.code, "message": self.message}


# --------------------------------------------------------------------------
# JSON

def _line_of(raw, needle):
    if raw is None:
        return None
    idx = raw.find(needle)
    return raw.count("\n", 0, idx) + 1 if idx >= 0 else None


def _check_keys(obj, allowed, where, strict, raw):
    if not isinstance(obj, dict):
        raise FormatError(_line_of(raw, where), f"{where}: expected an object")
    if strict:
        for key in obj:
            if key not in allowed:
                raise FormatError(_line_of(raw, json.dumps(key)),
                                  f"{where}: unknown key {key!r}")


def dataset_from_json(obj, strict=True, raw=None):
    """Build a Dataset from decoded JSON without validating invariants."""
    _check_keys(obj, {"language", "intents", "entities"}, "dataset", strict, raw)
    for key in ("language", "intents", "entities"):
        if key not in obj:
            raise FormatError(None, f"dataset: missing key {key!r}")
    if not isinstance(obj["intents"], dict) or not isinstance(obj["entities"], dict):
        raise FormatError(None, "dataset: 'intents' and 'entities' must be objects")

    intents = {}
    for name, intent in obj["intents"].items():
        _check_keys(intent, {"utterances"}, f"intent {name}", strict, raw)
        utts = []
        for u in intent.get("utterances", []):
            _check_keys(u, {"data"}, f"utterance of {name}", strict, raw)
            chunks = []
            for c in u.get("data", []):
                _check_keys(c, {"text", "entity", "slot_name"}, f"chunk of {name}", strict, raw)
                if not isinstance(c.get("text"), str):
                    raise FormatError(_line_of(raw, json.dumps(name)),
                                      f"chunk of {name}: 'text' must be a string")
                if "entity" in c:
                    chunks.append(SlotChunk(c["text"], c["entity"], c.get("slot_name", c["entity"])))
                else:
                    chunks.append(TextChunk(c["text"]))
            utts.append(Utterance(tuple(chunks)))
        intents[name] = IntentDef(tuple(utts))

    entities = {}
    for name, ent in obj["entities"].items():
        if isinstance(ent, dict) and "builtin" in ent:
            _check_keys(ent, {"builtin"}, f"entity {name}", strict, raw)
            entities[name] = BuiltinEntity(ent["builtin"])
            continue
        _check_keys(ent, {"values", "automatically_extensible"}, f"entity {name}", strict, raw)
        values = []
        for v in ent.get("values", []):
            _check_keys(v, {"value", "synonyms"}, f"value of {name}", strict, raw)
            if not isinstance(v.get("value"), str):
                raise FormatError(_line_of(raw, json.dumps(name)),
                                  f"value of {name}: 'value' must be a string")
            values.append(EntityValue(v["value"], tuple(v.get("synonyms", []))))
        entities[name] = CustomEntity(tuple(values), bool(ent.get("automatically_extensible", False)))
    return Dataset(obj["language"], intents, entities)


def dataset_to_json(d):
    intents = {}
    for name, intent in d.intents.items():
        utts = []
        for u in intent.utterances:
            data = []
            for c in u.chunks:
                if isinstance(c, SlotChunk):
                    data.append({"text": c.text, "entity": c.entity, "slot_name": c.slot_name})
                else:
                    data.append({"text": c.text})
            utts.append({"data": data})
        intents[name] = {"utterances": utts}
    entities = {}
    for name, ent in d.entities.items():
        if ent.is_builtin:
            entities[name] = {"builtin": ent.kind}
        else:
            entities[name] = {
                "values": [{"value": v.value, "synonyms": list(v.synonyms)} for v in ent.values],
                "automatically_extensible": ent.automatically_extensible,
            }
    return {"language": d.language, "intents": intents, "entities": entities}


def load_dataset(path, strict=True):
    """Read, parse and validate a dataset file.

    Raises
    ------
    OSError
        The file cannot be read.
    FormatError
        Not JSON, or (in strict mode) carries unknown keys.
    ValidationError
        Lists every invariant violation found.
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(None, f"not UTF-8: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.lineno, exc.msg) from None
    d = dataset_from_json(obj, strict=strict, raw=text)
    violations = validate_dataset(d)
    if violations:
        raise ValidationError(violations)
    return d


def write_dataset(d, path):
    Path(path).write_text(json.dumps(dataset_to_json(d), indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def dataset_fingerprint(d):
    blob = json.dumps(dataset_to_json(d), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# validation

def validate_dataset(d):
    out = []
    if d.language != "en":
        out.append(Violation("UnsupportedLanguage", f"language {d.language!r} is not supported"))
    if not d.intents:
        out.append(Violation("NoIntents", "no intents"))
    if len(d.intents) > MAX_INTENTS:
        out.append(Violation("TooManyIntents", f"{len(d.intents)} intents > {MAX_INTENTS}"))
    total = sum(len(i.utterances) for i in d.intents.values())
    if total > MAX_UTTERANCES:
        out.append(Violation("TooManyUtterances", f"{total} utterances > {MAX_UTTERANCES}"))

    for name, intent in d.intents.items():
        if not isinstance(name, str) or not _INTENT_NAME_RE.match(name):
            out.append(Violation("InvalidIntentName", f"invalid intent name {name!r}"))
        if not intent.utterances:
            out.append(Violation("EmptyIntent", f"intent {name!r} has no utterances"))
        bindings = {}
        for k, utt in enumerate(intent.utterances):
            if not utt.text.strip():
                out.append(Violation("EmptyUtterance", f"intent {name!r}: utterance {k} is empty"))
            for c in utt.slot_chunks:
                if not c.text.strip():
                    out.append(Violation("EmptySlotText",
                                         f"intent {name!r}: utterance {k} has an empty "
                                         f"{c.slot_name!r} slot"))
                if not c.slot_name:
                    out.append(Violation("EmptySlotName",
                                         f"intent {name!r}: utterance {k} has a slot without name"))
                if c.entity not in d.entities:
                    out.append(Violation("UnknownEntity",
                                         f"intent {name!r} references undeclared entity "
                                         f"{c.entity!r}"))
                prev = bindings.setdefault(c.slot_name, c.entity)
                if prev != c.entity:
                    out.append(Violation("SlotEntityConflict",
                                         f"intent {name!r}: slot {c.slot_name!r} bound to both "
                                         f"{prev!r} and {c.entity!r}"))
                    bindings[c.slot_name] = c.entity

    for name, ent in d.entities.items():
        if ent.is_builtin:
            if ent.kind not in SUPPORTED_KINDS:
                out.append(Violation("UnsupportedBuiltin",
                                     f"entity {name!r}: unsupported built-in {ent.kind!r}"))
            continue
        seen = {}
        for k, v in enumerate(ent.values):
            for form in (v.value,) + tuple(v.synonyms):
                key = normalize_value(form)
                if not key:
                    out.append(Violation("EmptyValue",
                                         f"entity {name!r}: value {form!r} is empty once normalized"))
                    continue
                if key in seen and seen[key] != k:
                    out.append(Violation("DuplicateValue",
                                         f"entity {name!r}: {form!r} duplicates "
                                         f"{ent.values[seen[key]].value!r} after normalization"))
                seen.setdefault(key, k)
    return out


# --------------------------------------------------------------------------
# derived views

def _tokenize_at(text, offset):
    nt = tokenize(text)
    return [Token(t.text, t.start + offset, t.end + offset, t.kind) for t in nt.tokens]


def normalize_utterance(utt):
    """Normalize an annotated utterance, never merging tokens across chunks.

    Returns ``(nt, chunk_ids)`` where ``chunk_ids[i]`` is the index of the
    chunk that produced word ``i``.
    """
    chunks = [unicodedata.normalize("NFC", c.text) for c in utt.chunks]
    tokens, bounds, pos = [], [], 0
    for text in chunks:
        tokens += _tokenize_at(text, pos)
        bounds.append((pos, pos + len(text)))
        pos += len(text)
    nt = verbalize(NormalizedText(tuple(tokens), "".join(chunks)))
    chunk_ids = []
    for t in nt.tokens:
        chunk_ids.append(next(k for k, (s, e) in enumerate(bounds) if s <= t.start < e))
    return nt, chunk_ids


def gold_slots(utt):
    """Annotated slots as [(SlotChunk, (start, end), (first, last))] over normalized words.

    Spans come from the words a slot normalizes to, which is exactly what
    the parsers can report; slots that normalize to nothing are skipped.
    """
    nt, chunk_ids = normalize_utterance(utt)
    out = []
    for k, c in enumerate(utt.chunks):
        if not isinstance(c, SlotChunk):
            continue
        idx = [i for i, cid in enumerate(chunk_ids) if cid == k]
        if idx:
            out.append((c, nt.span_of(idx[0], idx[-1]), (idx[0], idx[-1])))
    return out


def entity_forms(d, entity):
    """Surface forms of a custom entity: values, synonyms, then annotated texts."""
    ent = d.entities[entity]
    forms = []
    if not ent.is_builtin:
        for v in ent.values:
            forms.append(v.value)
            forms.extend(v.synonyms)
    for _, utt in d.utterances():
        for c in utt.slot_chunks:
            if c.entity == entity:
                forms.append(c.text)
    seen, out = set(), []
    for f in forms:
        key = normalize_value(f)
        if key and key not in seen:
            seen.add(key)
            out.append(key)
    return out


def canonical_map(d, entity):
    """Normalized form -> canonical value for a custom entity."""
    ent = d.entities[entity]
    table = {}
    for v in ent.values:
        for form in (v.value,) + tuple(v.synonyms):
            table.setdefault(normalize_value(form), v.value)
    return table


def dataset_vocabulary(d):
    vocab = set()
    for _, utt in d.utterances():
        vocab.update(normalize_utterance(utt)[0].words)
    for ent in d.entities.values():
        if ent.is_builtin:
            continue
        for v in ent.values:
            for form in (v.value,) + tuple(v.synonyms):
                vocab.update(normalize_value(form))
    return vocab


def utterance_from_spans(text, slots):
    """Rebuild chunks from a query and [(start, end, entity, slot_name)] spans."""
    chunks, pos = [], 0
    for start, end, entity, slot_name in sorted(slots):
        if start < pos:
            raise ValueError(f"overlapping slot spans at {start}")
        if start > pos:
            chunks.append(TextChunk(text[pos:start]))
        chunks.append(SlotChunk(text[start:end], entity, slot_name))
        pos = end
    if pos < len(text):
        chunks.append(TextChunk(text[pos:]))
    return Utterance(tuple(chunks))
