"""End-to-end acceptance checks.

Each check returns ``(passed, report)`` where ``report`` is a JSON-able dict
with no timing data, so that a second run can be compared byte for byte.
Every test prints one PASS/FAIL line with its runtime and bound.
"""
import json
import math
import statistics
import time

import numpy as np
import pytest

from slu.builtin_entities import Number, extract_builtin, resolve_datetime
from slu.class_lm import SUM, inject_entity_values, score_sentence, train_class_lm
from slu.confnet import NULL, OOV, ConfusionNetwork, apply_oov_threshold, greedy_decode
from slu.crf import loglik_and_grad
from slu.dataset import dataset_from_json, gold_slots, load_dataset
from slu.disambiguation import disambiguate
from slu.engine import parse, train_engine
from slu.evaluation import evaluate_cv, learning_curve
from slu.normalize import normalize, verbalize_number

from conftest import FIXTURES, REF, dataset_path, replay_trainer, fraction, toy_dataset
from oracles import expansion_probability, expansions, random_assistant, random_batch, random_crf

BUNDLED = ["smart_lights", "thermostat", "planted_errors", "synthetic_template"]
REPORTS = {}


def run_check(name, check, bound):
    start = time.perf_counter()
    ok, report = check()
    elapsed = time.perf_counter() - start
    ok_time = elapsed < bound
    print(f"\n{'PASS' if ok and ok_time else 'FAIL'} {name}: {elapsed:.2f}s (bound {bound}s)"
          f" {json.dumps(summary(report))}")
    REPORTS[name] = report
    assert ok, report
    assert ok_time, f"{name} took {elapsed:.2f}s"


def summary(report):
    return report.get("summary", {})


# ------------------------------------------------------------------ checks

def check_deterministic_exactness():
    per = {}
    for name in BUNDLED:
        d = load_dataset(dataset_path(name))
        engine = train_engine(d, seed=42)
        wrong = []
        for intent, utt in d.utterances():
            res = parse(engine, utt.text, REF)
            got = (res.intent, sorted((s.slot_name, s.span) for s in res.slots))
            want = (intent, sorted((c.slot_name, span) for c, span, _ in gold_slots(utt)))
            if got != want:
                wrong.append(utt.text)
        n = sum(1 for _ in d.utterances())
        per[name] = {"utterances": n, "mismatches": wrong, "f1": 1.0 - len(wrong) / n}
    ok = all(not r["mismatches"] for r in per.values())
    return ok, {"datasets": per, "summary": {k: r["f1"] for k, r in per.items()}}


def check_thermostat_query():
    engine = train_engine(load_dataset(dataset_path("thermostat")), seed=42)
    query = "Set the temperature to 23°C in the living room"
    res = parse(engine, query, REF).to_json()
    slots = {s["slot_name"]: s["value"] for s in res["slots"]}
    ok = (res["intent"]["intentName"] == "SetTemperature"
          and 0 < res["intent"]["probability"] <= 1
          and slots == {"room": "living room",
                        "temperature": {"kind": "Temperature", "unit": "celsius", "value": 23.0}})
    return ok, {"result": res, "summary": {"intent": res["intent"]["intentName"]}}


def same_weight_case():
    d = toy_dataset({"Play": ["play (the beatles)[artist]", "play (the rolling stones)[artist]"]},
                    {"artist": ["the rolling stones", "the beatles"]})
    lm = train_class_lm(d)
    a = score_sentence(lm, "play the beatles", SUM, allow_unk=False)
    b = score_sentence(lm, "play the rolling stones", SUM, allow_unk=False)
    oracle = math.log(expansion_probability(lm, "play the beatles".split()))
    return a == b and abs(a - oracle) < 1e-9, [a, b, oracle]


def check_replacement_oracle():
    worst, checked, assistants = 0.0, 0, 0
    for seed in range(24):
        d, _ = random_assistant(seed)
        assistants += 1
        for order in (1, 2, 3):
            lm = train_class_lm(d, order)
            for tokens in expansions(d):
                expected = expansion_probability(lm, tokens)
                got = score_sentence(lm, tokens, SUM, allow_unk=False)
                worst = max(worst, abs(got - math.log(expected)) if expected > 0 else math.inf)
                checked += 1
    same_ok, same = same_weight_case()
    ok = assistants >= 20 and worst < 1e-9 and same_ok
    return ok, {"assistants": assistants, "sentences": checked, "max_abs_error": worst,
                "artists_same_weight": same_ok, "artist_scores": same,
                "summary": {"assistants": assistants, "max_abs_error": worst}}


def check_injection():
    cases = []
    d = toy_dataset({"Call": ["call (john smith)[contact]", "call (mary)[contact]"]},
                    {"contact": ["john smith", "mary", "bob"]})
    lights = load_dataset(dataset_path("smart_lights"))
    for lm, entity, values, sentences in [
        (train_class_lm(d), "contact", ["Jane Doe", "Ann"], ["call jane doe", "call ann"]),
        (train_class_lm(lights), "room", ["Conservatory", "Wine Cellar", "Loft"],
         ["turn on the lights in the conservatory", "turn off the lights in the wine cellar"]),
    ]:
        k = len(lm.entity_models[entity].values)
        new = inject_entity_values(lm, entity, values)
        m = len(new.entity_models[entity].values) - k
        before = [score_sentence(lm, s, allow_unk=False) for s in sentences]
        after = [score_sentence(new, s, allow_unk=False) for s in sentences]
        weights = [new.entity_models[entity].weight(v) for v in new.entity_models[entity].values]
        cases.append({"entity": entity, "k": k, "m": m, "before": [str(x) for x in before], "after": after,
                      "ok": (m == len(values) and all(x == -math.inf for x in before)
                             and all(math.isfinite(x) for x in after)
                             and all(w == 1 / (k + m) for w in weights))})
    ok = all(c["ok"] for c in cases)
    return ok, {"cases": cases, "summary": {c["entity"]: c["ok"] for c in cases}}


def check_crf_gradient():
    rng = np.random.default_rng(1)
    errors = []
    for _ in range(10):
        crf = random_crf(rng)
        _, _, batch = random_batch(rng, 1, 3, 6, 5)
        _, g = loglik_and_grad(crf, batch)
        x, h = crf.flat(), 1e-5
        fd = np.empty_like(x)
        for i in range(len(x)):
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (loglik_and_grad(crf.with_flat(x + e), batch)[0]
                     - loglik_and_grad(crf.with_flat(x - e), batch)[0]) / (2 * h)
        rel = np.abs(fd - g) / np.maximum(1e-8, np.abs(fd) + np.abs(g))
        errors.append(float(rel.max()))
    return max(errors) < 1e-4, {"max_relative_error": errors,
                                "summary": {"worst": max(errors), "tags": 5, "tokens": 3}}


def check_learning_curve():
    d = load_dataset(dataset_path("synthetic_template"))
    rows = []
    for seed in range(5):
        rows += learning_curve(d, [10, 50, 500], seed=seed, ref=REF)
    mean = {size: statistics.fmean(r["slot_f1"] for r in rows if r["size"] == size) for size in (10, 50, 500)}
    ok = mean[500] - mean[10] >= 0.2 and mean[500] >= 0.9
    return ok, {"rows": rows, "mean_slot_f1": {str(k): v for k, v in mean.items()},
                "summary": {str(k): round(v, 4) for k, v in mean.items()}}


def random_network(rng):
    segments = []
    for _ in range(int(rng.integers(1, 10))):
        n = int(rng.integers(1, 5))
        words = rng.choice(["a", "b", "c", "d", "e", "f", NULL], size=n, replace=False)
        post = rng.dirichlet(np.ones(n))
        segments.append([{"word": str(w), "posterior": float(p)} for w, p in zip(words, post)])
    return ConfusionNetwork.from_json({"segments": segments})


def check_confidence():
    rng = np.random.default_rng(7)
    worst, monotone_failures = 0.0, 0
    thresholds = [0.0, 0.25, 0.5, 0.75, 1.0]
    for _ in range(1000):
        du = greedy_decode(random_network(rng))
        confs = [w.confidence for w in du.words]
        expected = math.exp(statistics.fmean(math.log(c) for c in confs)) if confs else 1.0
        worst = max(worst, abs(du.sentence_confidence - expected))
        oov = [{i for i, t in enumerate(apply_oov_threshold(du, t).tokens) if t == OOV} for t in thresholds]
        monotone_failures += sum(not a <= b for a, b in zip(oov, oov[1:]))
    ok = worst < 1e-12 and monotone_failures == 0
    return ok, {"max_abs_error": worst, "monotonicity_failures": monotone_failures,
                "summary": {"max_abs_error": worst, "monotonicity_failures": monotone_failures}}


def check_number_round_trip():
    rng = np.random.default_rng(8)
    failures = []
    for n in rng.integers(0, 10 ** 6, 1000):
        matches = extract_builtin(verbalize_number(int(n)), ["snips/number"], REF)
        if [m.resolved for m in matches] != [Number(float(n))]:
            failures.append(int(n))
    return not failures, {"failures": failures, "summary": {"checked": 1000, "failures": len(failures)}}


def check_datetime_anchor():
    inst = resolve_datetime(normalize("tomorrow evening"), REF)
    value = inst.value if inst else None
    return value == "2018-04-19T19:00:00+00:00", {"value": value, "summary": {"value": value}}


def check_cv_oracle():
    fixture = json.loads((FIXTURES / "cv_oracle.json").read_text())
    header = fixture["header"]
    report = evaluate_cv(dataset_from_json(fixture["dataset"]), k=header["folds"], seed=42,
                         trainer=replay_trainer(fixture["predictions"]))
    worst = 0.0
    for section in ("intents", "slots"):
        for key, expected in header[section].items():
            for m in ("precision", "recall", "f1"):
                worst = max(worst, abs(report[section][key][m] - fraction(expected[m])))
    for avg in ("micro", "macro"):
        for kind in ("intent", "slot"):
            for m in ("precision", "recall", "f1"):
                worst = max(worst, abs(report[avg][kind][m] - fraction(header[avg][kind][m])))
    return worst < 1e-12, {"report": report, "max_abs_error": worst, "summary": {"max_abs_error": worst}}


def check_disambiguation():
    d = load_dataset(dataset_path("planted_errors"))
    runs = []
    for seed in range(5):
        rep = disambiguate(d, repetitions=5, folds=3, seed=seed, ref=REF)
        fixed = any(v.text == "switch off the lights" and v.detail["new_intent"] == "SwitchLightOff"
                    for v in rep.actions("FixIntent"))
        added = any(v.text == "set the brightness to 60" and v.detail["value"] == "60"
                    for v in rep.actions("AddSlot"))
        runs.append({"seed": seed, "fix_intent": fixed, "add_slot": added, "report": rep.to_json()})
    hits = sum(r["fix_intent"] and r["add_slot"] for r in runs)
    return hits >= 4, {"runs": runs, "summary": {"seeds_with_both": hits, "of": 5}}


CHECKS = {
    "deterministic-exactness": (check_deterministic_exactness, 10),
    "thermostat-query": (check_thermostat_query, 30),
    "class-lm-replacement-oracle": (check_replacement_oracle, 60),
    "entity-injection": (check_injection, 5),
    "crf-gradient-check": (check_crf_gradient, 30),
    "learning-curve": (check_learning_curve, 600),
    "confidence-identities": (check_confidence, 10),
    "number-round-trip": (check_number_round_trip, 10),
    "datetime-anchor": (check_datetime_anchor, 1),
    "cross-validation-oracle": (check_cv_oracle, 60),
    "disambiguation": (check_disambiguation, 300),
}


@pytest.mark.parametrize("name", list(CHECKS))
def test_acceptance(name):
    check, bound = CHECKS[name]
    run_check(name, check, bound)


def test_latency_budget():
    d = load_dataset(dataset_path("smart_lights"))
    assert sum(1 for _ in d.utterances()) == 300
    engine = train_engine(d, seed=42)
    seen = [u.text for _, u in d.utterances()]
    novel = ["please could you make the kitchen blue", "turn the lounge lights off",
             "I want yellow lights in the office now", "zzq qqz", "brightness 40 in the attic",
             "set the lights to seventy five percent in the kitchen"]
    queries = [seen[i % len(seen)] if i % 2 else novel[i % len(novel)] for i in range(1000)]
    for q in queries[:20]:
        parse(engine, q, REF)
    times = []
    for q in queries:
        start = time.perf_counter()
        parse(engine, q, REF)
        times.append(time.perf_counter() - start)
    median_ms = statistics.median(times) * 1000
    ok = median_ms < 20
    print(f"\n{'PASS' if ok else 'FAIL'} latency-budget: median {median_ms:.3f} ms over 1000 queries"
          f" (target 5 ms, {'met' if median_ms < 5 else 'missed'}; failure threshold 20 ms)")
    assert ok


def test_determinism():
    start = time.perf_counter()
    mismatched = []
    for name, (check, _) in CHECKS.items():
        first = REPORTS.get(name)
        if first is None:
            first = check()[1]
        second = check()[1]
        if json.dumps(first, sort_keys=True) != json.dumps(second, sort_keys=True):
            mismatched.append(name)
    elapsed = time.perf_counter() - start
    print(f"\n{'PASS' if not mismatched else 'FAIL'} determinism: {len(CHECKS) - len(mismatched)}/"
          f"{len(CHECKS)} reports byte-identical ({elapsed:.2f}s)")
    assert not mismatched, mismatched
