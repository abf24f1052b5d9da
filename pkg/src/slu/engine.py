"""The NLU engine: deterministic parser, then intent classifier and per-intent
slot fillers, then entity resolution.

Engines are saved as a directory (or a zip file with the same members)::

    manifest.json                format version, dataset fingerprint, timings, checksums
    deterministic.json           patterns and alternations
    intent_classifier.json
    slot_filler_<intent>.json
    class_lm.json
    resources/entities.json      entity kinds and synonym tables
    resources/gazetteers.json
    resources/clusters/<name>.tsv
"""
from __future__ import annotations

import hashlib
import io
import json
import logging
import time
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

from .builtin_entities import SUPPORTED_KINDS, builtin_candidates, extract_builtin
from .class_lm import ClassLM, inject_entity_values, train_class_lm
from .dataset import (canonical_map, dataset_fingerprint, entity_forms, gold_slots,
                      normalize_utterance, validate_dataset)
from .deterministic import PatternSet, build_patterns, parse_deterministic
from .errors import CorruptArchive, SingleIntentError, UnknownEntity, ValidationError, VersionMismatch
from .features import ClusterLexicon, FeatureConfig, Gazetteer, featurize_intent, load_clusters, seeded_rng
from .intent_classifier import IntentClassifier, classify_intent, train_intent_classifier
from .normalize import NormalizedText, normalize, normalize_value
from .results import ParseResult
from .slot_filler import SlotFiller, fill_slots, train_slot_filler

__all__ = ["EngineConfig", "NluEngine", "train_engine", "parse", "save_engine", "load_engine",
           "inject_engine", "TRAINING_REFERENCE_TIME"]

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
# Spans of built-in matches do not depend on the reference time; training
# uses a fixed one so that models are reproducible.
TRAINING_REFERENCE_TIME = "2018-04-18T10:00:00+00:00"


@dataclass
class EngineConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    classifier_lambda: float = 1.0
    crf_lambda: float = 0.1
    crf_max_iter: int = 300
    threshold: float = 0.3
    lm_order: int = 2

    def to_json(self):
        return {"features": self.features.to_json(), "classifier_lambda": self.classifier_lambda,
                "crf_lambda": self.crf_lambda, "crf_max_iter": self.crf_max_iter,
                "threshold": self.threshold, "lm_order": self.lm_order}

    @classmethod
    def from_json(cls, obj):
        obj = dict(obj)
        obj["features"] = FeatureConfig.from_json(obj["features"])
        return cls(**obj)


class NluEngine:
    def __init__(self, fingerprint, seed, config, intents, patterns, classifier, slot_fillers,
                 entities, gazetteers, clusters, class_lm, timings=None):
        self.fingerprint = fingerprint
        self.seed = seed
        self.config = config
        self.intents = list(intents)
        self.patterns = patterns
        self.classifier = classifier  # None when the dataset has a single intent
        self.slot_fillers = slot_fillers
        # entity name -> {"builtin": kind} or {"extensible": bool, "canonical": {form: value}}
        self.entities = entities
        self.gazetteers = gazetteers
        self.clusters = clusters
        self.class_lm = class_lm
        self.timings = timings or {}

    def parse(self, query, ref=TRAINING_REFERENCE_TIME):
        return parse(self, query, ref)


def _entity_table(d):
    out = {}
    for name, ent in d.entities.items():
        if ent.is_builtin:
            out[name] = {"builtin": ent.kind}
        else:
            table = canonical_map(d, name)
            out[name] = {"extensible": ent.automatically_extensible,
                         "canonical": {" ".join(k): v for k, v in table.items()}}
    return out


def training_examples(d, intent):
    """(nt, builtin candidates, [(first, last, slot_name, entity)]) per utterance."""
    out = []
    for utt in d.intents[intent].utterances:
        nt, _ = normalize_utterance(utt)
        cands = builtin_candidates(nt, SUPPORTED_KINDS, TRAINING_REFERENCE_TIME)
        spans = [(first, last, c.slot_name, c.entity) for c, _, (first, last) in gold_slots(utt)]
        out.append((nt, cands, spans))
    return out


def train_engine(d, config=None, seed=42):
    config = config or EngineConfig()
    violations = validate_dataset(d)
    if violations:
        raise ValidationError(violations)
    timings = {}
    t0 = time.perf_counter()
    patterns = build_patterns(d)
    timings["deterministic"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    examples = {intent: training_examples(d, intent) for intent in d.intents}
    timings["featurize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        classifier = train_intent_classifier(
            [(intent, featurize_intent(nt, cands)) for intent, exs in examples.items()
             for nt, cands, _ in exs],
            lam=config.classifier_lambda)
    except SingleIntentError:
        classifier = None
    timings["intent_classifier"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    gazetteers = [Gazetteer(name, entity_forms(d, name), ent.automatically_extensible)
                  for name, ent in d.entities.items() if not ent.is_builtin]
    clusters = load_clusters(config.features.clusters)
    fillers = {}
    for k, intent in enumerate(d.intents):
        fillers[intent] = train_slot_filler(
            intent, examples[intent], config.features, gazetteers, clusters,
            rng=seeded_rng(seed, k), lam=config.crf_lambda, max_iter=config.crf_max_iter)
    timings["slot_fillers"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    class_lm = train_class_lm(d, config.lm_order)
    timings["class_lm"] = time.perf_counter() - t0
    return NluEngine(dataset_fingerprint(d), seed, config, d.intents, patterns, classifier,
                     fillers, _entity_table(d), gazetteers, clusters, class_lm, timings)


def _resolve(e, nt, slot, ref):
    info = e.entities[slot.entity]
    first, last = slot.token_range
    if "builtin" in info:
        sub = NormalizedText(nt.tokens[first:last + 1], nt.original)
        matches = extract_builtin(sub, [info["builtin"]], ref)
        if len(matches) == 1 and matches[0].token_range == (0, last - first):
            return slot.resolved(matches[0].resolved)
        return None
    key = " ".join(nt.words[first:last + 1])
    return slot.resolved(info["canonical"].get(key, slot.raw_value))


def parse(e, query, ref=TRAINING_REFERENCE_TIME):
    """Run the cascade on ``query``; slot spans index into the NFC query."""
    nt = normalize(query)
    cands = builtin_candidates(nt, SUPPORTED_KINDS, ref)
    result = parse_deterministic(e.patterns, query, ref, nt, cands)
    if result is not None:
        log.debug("deterministic parser matched %r -> %s", query, result.intent)
    else:
        log.debug("deterministic parser: no unique match for %r; probabilistic parser invoked", query)
        if e.classifier is None:
            intent, prob = e.intents[0], 1.0
        else:
            intent, prob = classify_intent(e.classifier, nt, cands)[0]
        if prob < e.config.threshold or not nt.tokens:
            log.debug("intent probability %.3f below threshold %.3f", prob, e.config.threshold)
            return ParseResult(nt.original, None, prob, ())
        slots = fill_slots(e.slot_fillers[intent], nt, cands, e.config.features,
                           e.gazetteers, e.clusters)
        result = ParseResult(nt.original, intent, prob, tuple(slots))
    resolved = []
    for slot in result.slots:
        r = _resolve(e, nt, slot, ref)
        if r is not None:
            resolved.append(r)
        else:
            log.debug("dropping unresolvable slot %s=%r", slot.slot_name, slot.raw_value)
    return ParseResult(result.text, result.intent, result.probability, tuple(resolved))


def inject_engine(e, entity, values):
    """Add values to a custom entity everywhere they are used, without retraining."""
    info = e.entities.get(entity)
    if info is None:
        raise UnknownEntity(entity)
    if "builtin" in info:
        raise UnknownEntity(f"{entity} is a built-in entity; only custom entities take values")
    forms = [f for f in (normalize_value(v) for v in values) if f]
    entities = dict(e.entities)
    canonical = dict(info["canonical"])
    for v, f in zip(values, (normalize_value(v) for v in values)):
        if f:
            canonical.setdefault(" ".join(f), v)
    entities[entity] = {"extensible": info["extensible"], "canonical": canonical}
    gazetteers = []
    for g in e.gazetteers:
        g = Gazetteer(g.entity, g.forms, g.extensible)
        if g.entity == entity:
            g.add(forms)
        gazetteers.append(g)
    return NluEngine(e.fingerprint, e.seed, e.config, e.intents, e.patterns.with_forms(entity, forms),
                     e.classifier, e.slot_fillers, entities, gazetteers, e.clusters,
                     inject_entity_values(e.class_lm, entity, values), e.timings)


# --------------------------------------------------------------------------
# archive

def _dumps(obj):
    return (json.dumps(obj, indent=1, ensure_ascii=False) + "\n").encode("utf-8")


def engine_members(e):
    """Archive members (except the manifest) as name -> bytes."""
    members = {
        "deterministic.json": _dumps({"fingerprint": e.fingerprint, **e.patterns.to_json()}),
        "intent_classifier.json": _dumps({
            "intents": e.intents,
            "model": e.classifier.to_json() if e.classifier is not None else None}),
        "class_lm.json": _dumps(e.class_lm.to_json()),
        "resources/entities.json": _dumps(e.entities),
        "resources/gazetteers.json": _dumps([g.to_json() for g in e.gazetteers]),
    }
    for intent in e.intents:
        members[f"slot_filler_{intent}.json"] = _dumps(e.slot_fillers[intent].to_json())
    for lex in e.clusters:
        members[f"resources/clusters/{lex.name}.tsv"] = lex.to_tsv().encode("utf-8")
    return members


def _manifest(e, members):
    return {
        "format_version": FORMAT_VERSION,
        "fingerprint": e.fingerprint,
        "seed": e.seed,
        "config": e.config.to_json(),
        "intents": e.intents,
        "clusters": [lex.name for lex in e.clusters],
        "timings": {k: round(v, 6) for k, v in e.timings.items()},
        "members": {name: hashlib.sha256(data).hexdigest() for name, data in sorted(members.items())},
    }


def save_engine(e, path):
    """Write to ``path``: a zip file if it ends in ``.zip``, otherwise a directory."""
    path = Path(path)
    members = engine_members(e)
    members["manifest.json"] = _dumps(_manifest(e, members))
    if path.suffix == ".zip":
        path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            for name in sorted(members):
                info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
                info.compress_type = zipfile.ZIP_DEFLATED
                zf.writestr(info, members[name])
        return path
    for name, data in members.items():
        target = path / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    return path


def _read_members(path):
    path = Path(path)
    if path.is_dir():
        out = {}
        for p in sorted(path.rglob("*")):
            if p.is_file():
                out[p.relative_to(path).as_posix()] = p.read_bytes()
        return out
    try:
        with zipfile.ZipFile(path) as zf:
            return {name: zf.read(name) for name in zf.namelist() if not name.endswith("/")}
    except (zipfile.BadZipFile, EOFError, OSError) as exc:
        if not path.exists():
            raise
        raise CorruptArchive(f"{path}: not a readable engine archive ({exc})") from None


def _load_json(members, name):
    try:
        return json.loads(members[name].decode("utf-8"))
    except KeyError:
        raise CorruptArchive(f"archive member {name} is missing") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptArchive(f"archive member {name} is not valid JSON: {exc}") from None


def load_engine(path, expected_fingerprint=None):
    members = _read_members(path)
    manifest = _load_json(members, "manifest.json")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"engine format {manifest.get('format_version')!r}, "
                              f"this version reads {FORMAT_VERSION}")
    for name, digest in manifest.get("members", {}).items():
        data = members.get(name)
        if data is None:
            raise CorruptArchive(f"archive member {name} is missing")
        if hashlib.sha256(data).hexdigest() != digest:
            raise CorruptArchive(f"archive member {name} fails its checksum")
    try:
        det = _load_json(members, "deterministic.json")
        if det["fingerprint"] != manifest["fingerprint"]:
            raise CorruptArchive("deterministic parser was built from another dataset")
        if expected_fingerprint is not None and manifest["fingerprint"] != expected_fingerprint:
            raise VersionMismatch("engine was trained on a different dataset")
        clf = _load_json(members, "intent_classifier.json")
        intents = clf["intents"]
        classifier = IntentClassifier.from_json(clf["model"]) if clf["model"] is not None else None
        fillers = {i: SlotFiller.from_json(_load_json(members, f"slot_filler_{i}.json"))
                   for i in intents}
        clusters = []
        for name in manifest["clusters"]:
            member = f"resources/clusters/{name}.tsv"
            if member not in members:
                raise CorruptArchive(f"archive member {member} is missing")
            table = dict(line.split("\t", 1) for line in
                         members[member].decode("utf-8").splitlines() if "\t" in line)
            clusters.append(ClusterLexicon(name, table))
        return NluEngine(
            manifest["fingerprint"], manifest["seed"], EngineConfig.from_json(manifest["config"]),
            intents, PatternSet.from_json(det), classifier, fillers,
            _load_json(members, "resources/entities.json"),
            [Gazetteer.from_json(g) for g in _load_json(members, "resources/gazetteers.json")],
            clusters, ClassLM.from_json(_load_json(members, "class_lm.json")),
            manifest.get("timings", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptArchive(f"engine archive is inconsistent: {exc!r}") from None


def archive_bytes(e):
    """Archive content minus timings, for byte-level reproducibility checks."""
    members = engine_members(e)
    manifest = _manifest(e, members)
    manifest.pop("timings")
    members["manifest.json"] = _dumps(manifest)
    buf = io.BytesIO()
    for name in sorted(members):
        buf.write(name.encode("utf-8") + b"\0" + members[name])
    return buf.getvalue()
