import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import logsumexp

from slu.builtin_entities import SUPPORTED_KINDS, builtin_candidates
from slu.crf import CRF, SequenceBatch, loglik_and_grad, path_score, train_crf, viterbi
from slu.features import (
    FeatureConfig, Gazetteer, featurize_intent, featurize_tokens, load_clusters, seeded_rng,
    spans_to_tags, tags_to_spans)
from slu.intent_classifier import (
    classify_intent, design_matrix, objective, train_intent_classifier)
from slu.normalize import normalize
from slu.slot_filler import fill_slots, tagset, train_slot_filler

from conftest import REF
from oracles import random_batch, random_crf


def cands(text):
    nt = normalize(text)
    return nt, builtin_candidates(nt, SUPPORTED_KINDS, REF)


# ---------------------------------------------------------------- features

def token_features(text, gazetteers=()):
    nt, c = cands(text)
    per_token = featurize_tokens(nt, c, FeatureConfig(), gazetteers, load_clusters(["toy_brown"]))
    return nt.words, [{f for _, f in feats} for feats in per_token]


def test_token_feature_families():
    words, feats = token_features("Will it rain in two days in Paris",
                                  [Gazetteer("location", [("paris",)], True)])
    two = feats[words.index("two")]
    assert {"w[0]=two", "number_builtin[0]=U", "datetime_builtin[0]=I", "shape=lower",
            "pre2=tw", "suf3=two"} <= two
    assert "number_builtin[-2]=U" in feats[6]
    paris = feats[7]
    assert {"location_entity=U", "shape=title", "w[1]=</s>", "w[2]=</s>"} <= paris
    assert any(f.startswith("cluster:toy_brown=") for f in two)


def test_closed_gazetteer_marks_outside_tokens():
    words, feats = token_features("make it blue please", [Gazetteer("color", [("blue",)], False)])
    assert "color_entity=U" in feats[2]
    assert "color_entity=O" in feats[3]


def test_dropout_extremes():
    nt, c = cands("set the kitchen lights to blue")
    gaz = [Gazetteer("room", [("kitchen",)], True), Gazetteer("color", [("blue",)], False)]
    all_on = FeatureConfig(dropout={f: 1.0 for f in ("lexical", "shape", "affix", "cluster",
                                                    "builtin", "gazetteer", "bias")})
    dropped = featurize_tokens(nt, c, all_on, gaz, (), seeded_rng(0))
    # only the closed gazetteer family survives
    assert {fam for feats in dropped for fam, _ in feats} == {"gazetteer_closed"}
    kept = featurize_tokens(nt, c, FeatureConfig(dropout={}), gaz, (), seeded_rng(0))
    assert kept == featurize_tokens(nt, c, FeatureConfig(dropout={}), gaz, ())


def test_featurize_intent_examples():
    nt, c = cands("rate it 5 stars")
    assert featurize_intent(nt, c)["u:%SNIPS_NUMBER%"] == 1
    nt, c = cands("")
    assert not featurize_intent(nt, c)
    nt, c = cands("play play")
    f = featurize_intent(nt, c)
    assert f["u:play"] == 2 and f["b:play play"] == 1


def test_bilou_round_trip_and_repair():
    spans = [(0, 0, "a"), (2, 4, "b"), (5, 6, "a")]
    tags = spans_to_tags(8, spans)
    assert tags == ["U-a", "O", "B-b", "I-b", "L-b", "B-a", "L-a", "O"]
    assert tags_to_spans(tags) == spans
    # dangling I opens a span, dangling L is a unit, O closes
    assert tags_to_spans(["I-a", "L-a"]) == [(0, 1, "a")]
    assert tags_to_spans(["O", "L-a", "O"]) == [(1, 1, "a")]
    assert tags_to_spans(["B-a", "O", "L-a"]) == [(0, 0, "a"), (2, 2, "a")]
    assert tags_to_spans(["B-a", "I-b", "L-b"]) == [(0, 0, "a"), (1, 2, "b")]


tag_lists = st.lists(st.sampled_from(["O"] + [f"{p}-{s}" for p in "BILU" for s in "ab"]), max_size=12)


@settings(max_examples=300, deadline=None)
@given(tag_lists)
def test_repaired_spans_are_disjoint_and_ordered(tags):
    spans = tags_to_spans(tags)
    for (s0, e0, _), (s1, e1, _) in zip(spans, spans[1:]):
        assert s0 <= e0 < s1 <= e1
    # every non-O token lands in a span of its label
    for i, t in enumerate(tags):
        if t != "O":
            assert any(s <= i <= e and lab == t[2:] for s, e, lab in spans)
    assert tags_to_spans(spans_to_tags(len(tags), spans)) == spans


# ---------------------------------------------------------- intent classifier

def examples(pairs):
    out = []
    for intent, text in pairs:
        nt, c = cands(text)
        out.append((intent, featurize_intent(nt, c)))
    return out


def test_separable_intents_fit_perfectly():
    rng = np.random.default_rng(0)
    a_words, b_words = ["red", "green", "blue", "paint"], ["song", "play", "music", "loud"]
    pairs = [("Paint", " ".join(rng.choice(a_words, 3))) for _ in range(20)]
    pairs += [("Music", " ".join(rng.choice(b_words, 3))) for _ in range(20)]
    model = train_intent_classifier(examples(pairs))
    for intent, text in pairs:
        nt, c = cands(text)
        assert classify_intent(model, nt, c)[0][0] == intent


def test_identical_queries_split_evenly():
    pairs = [("A", "hello there"), ("B", "hello there")] * 5
    model = train_intent_classifier(examples(pairs))
    nt, c = cands("hello there")
    probs = dict(classify_intent(model, nt, c))
    assert abs(probs["A"] - 0.5) < 1e-6 and abs(probs["B"] - 0.5) < 1e-6


def test_strong_regularization_is_uniform():
    pairs = [("A", "turn on"), ("B", "turn off"), ("C", "dim it")]
    model = train_intent_classifier(examples(pairs), lam=1e9)
    assert np.abs(model.weights).max() < 1e-6
    nt, c = cands("turn on")
    for _, p in classify_intent(model, nt, c):
        assert abs(p - 1 / 3) < 1e-6


def test_objective_gradient_matches_finite_differences():
    pairs = examples([("A", "turn on the light"), ("B", "turn off the light"),
                      ("C", "set it to 5"), ("A", "light on")])
    vocab = {"__bias__": 0}
    for _, f in pairs:
        for name in sorted(f):
            vocab.setdefault(name, len(vocab))
    X = design_matrix([f for _, f in pairs], vocab)
    Y = np.zeros((4, 3))
    for i, k in enumerate([0, 1, 2, 0]):
        Y[i, k] = 1
    rng = np.random.default_rng(3)
    w = rng.normal(size=3 * len(vocab))
    _, g = objective(w, X, Y, 0.7)
    h = 1e-6
    fd = np.array([(objective(w + h * e, X, Y, 0.7)[0] - objective(w - h * e, X, Y, 0.7)[0]) / (2 * h)
                   for e in np.eye(len(w))])
    assert np.max(np.abs(fd - g)) / max(1.0, np.max(np.abs(g))) < 1e-6


queries = st.lists(st.sampled_from("turn on off the lights in kitchen 5 blue zzq play".split()), max_size=8)


@pytest.fixture(scope="module")
def small_classifier():
    return train_intent_classifier(examples([
        ("On", "turn on the lights"), ("Off", "turn off the lights"), ("Color", "make it blue"),
        ("On", "lights on in the kitchen"), ("Off", "kitchen lights off")]))


@settings(max_examples=200, deadline=None)
@given(queries)
def test_probabilities_sum_to_one(small_classifier, words):
    nt, c = cands(" ".join(words))
    ranked = classify_intent(small_classifier, nt, c)
    assert len(ranked) == 3
    assert abs(sum(p for _, p in ranked) - 1.0) < 1e-9
    assert [p for _, p in ranked] == sorted((p for _, p in ranked), reverse=True)


def test_classifier_json_round_trip(small_classifier):
    from slu.intent_classifier import IntentClassifier
    again = IntentClassifier.from_json(json.loads(json.dumps(small_classifier.to_json())))
    nt, c = cands("lights off please")
    assert classify_intent(again, nt, c) == classify_intent(small_classifier, nt, c)


# ---------------------------------------------------------------- CRF

def brute_force(crf, idx_seq):
    E = crf.emissions(idx_seq)
    K, T = len(crf.tags), len(idx_seq)
    paths = list(itertools.product(range(K), repeat=T))
    scores = np.array([path_score(crf, E, p) for p in paths])
    return paths, scores


def test_uniform_model_loglik():
    crf = CRF.zeros(["O", "B-x", "I-x", "L-x", "U-x"], {"a": 0, "b": 1})
    batch = SequenceBatch([[[0], [1], [0, 1]]], [[0, 4, 0]], 2)
    value, _ = loglik_and_grad(crf, batch)
    assert abs(value - (-3 * np.log(5))) < 1e-12


def test_forward_matches_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(5):
        crf = random_crf(rng)
        crf.lam = 0.0
        idx, labels, batch = random_batch(rng, 3, 0, 6, 5)
        value, _ = loglik_and_grad(crf, batch)
        expected = 0.0
        for seq, y in zip(idx, labels):
            paths, scores = brute_force(crf, seq)
            expected += scores[paths.index(tuple(y))] - logsumexp(scores)
        assert abs(value - expected) < 1e-9


def test_marginals_match_enumeration():
    rng = np.random.default_rng(5)
    crf = random_crf(rng)
    seq = [[0, 1], [2], [3, 4], [5]]
    paths, scores = brute_force(crf, seq)
    p = np.exp(scores - logsumexp(scores))
    expected = np.zeros((4, 5))
    for path, w in zip(paths, p):
        for t, k in enumerate(path):
            expected[t, k] += w
    assert np.allclose(crf.marginals(seq), expected, atol=1e-12)


def test_viterbi_matches_enumeration_and_beats_random_paths():
    rng = np.random.default_rng(8)
    for _ in range(10):
        crf = random_crf(rng, scale=2.0)
        seq = [list(rng.choice(6, 2, replace=False)) for _ in range(4)]
        paths, scores = brute_force(crf, seq)
        E = crf.emissions(seq)
        best = viterbi(E, crf.transition, crf.start, crf.end)
        assert abs(path_score(crf, E, best) - scores.max()) < 1e-9
        for path in rng.integers(0, 5, size=(1000, 4)):
            assert path_score(crf, E, best) >= path_score(crf, E, list(path)) - 1e-12


def test_gradient_check():
    rng = np.random.default_rng(1)
    worst = 0.0
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
        worst = max(worst, float(np.max(np.abs(fd - g) / np.maximum(1e-8, np.abs(fd) + np.abs(g)))))
    assert worst < 1e-4


def test_duplicated_sequences_add_up():
    rng = np.random.default_rng(2)
    crf = random_crf(rng)
    crf.lam = 0.0
    idx, labels, batch = random_batch(rng, 1, 4, 6, 5)
    v1, g1 = loglik_and_grad(crf, batch)
    v2, g2 = loglik_and_grad(crf, SequenceBatch(idx * 2, labels * 2, 6))
    assert abs(v2 - 2 * v1) < 1e-9
    assert np.allclose(g2, 2 * g1, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_marginals_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    crf = random_crf(rng, scale=3.0)
    seq = [list(rng.choice(6, 2, replace=False)) for _ in range(int(rng.integers(1, 7)))]
    assert np.allclose(crf.marginals(seq).sum(axis=1), 1.0, atol=1e-8)


def test_training_increases_objective_and_is_deterministic():
    rng = np.random.default_rng(4)
    idx, labels, batch = random_batch(rng, 6, 0, 6, 5)
    crf0 = CRF.zeros(["O", "B-x", "I-x", "L-x", "U-x"], {f"f{i}": i for i in range(6)})
    a, _ = train_crf(crf0, batch)
    b, _ = train_crf(crf0, batch)
    assert loglik_and_grad(a, batch)[0] > loglik_and_grad(crf0, batch)[0]
    assert np.array_equal(a.flat(), b.flat())
    assert np.abs(loglik_and_grad(a, batch)[1]).max() < 1e-3


# ------------------------------------------------------------ slot filler

ROOMS = ["kitchen", "hall", "bedroom", "living room", "garage", "attic", "basement", "office",
         "study", "pantry", "nursery", "porch", "patio", "cellar", "den", "guest room",
         "dining room", "laundry room", "hallway", "closet", "library", "gym", "sauna",
         "workshop", "loft", "veranda", "playroom", "master bedroom", "bathroom", "lobby"]
TEMPLATES = ["set the {} lights", "set the lights in the {}", "turn up the {} lights please",
             "can you set the {} lights", "i want the {} lights set", "set {} lights now",
             "please set the lights of the {}", "set lights in {} to bright",
             "the {} lights need to be set", "set up the {} lights for me"]


def room_examples(pairs):
    out = []
    for template, room in pairs:
        text = template.format(room)
        nt, c = cands(text)
        start = text.index(room)
        words = [k for k, t in enumerate(nt) if start <= t.start < start + len(room)]
        out.append((nt, c, [(words[0], words[-1], "room", "room")]))
    return out


@pytest.mark.slow
def test_slot_filler_generalizes_to_heldout_combinations():
    combos = [(t, r) for t in TEMPLATES for r in ROOMS]
    order = np.random.default_rng(0).permutation(len(combos))
    heldout = [combos[i] for i in order[:100]]
    train = [combos[i] for i in order[100:]]
    train = [train[i % len(train)] for i in range(500)]
    gaz = [Gazetteer("room", [tuple(r.split()) for r in ROOMS], True)]
    cfg = FeatureConfig()
    clusters = load_clusters(cfg.clusters)
    filler = train_slot_filler("SetLights", room_examples(train), cfg, gaz, clusters, seeded_rng(42))
    tp = fp = fn = 0
    for (nt, c, gold) in room_examples(heldout):
        pred = {s.token_range for s in fill_slots(filler, nt, c, cfg, gaz, clusters)}
        gold = {(a, b) for a, b, _, _ in gold}
        tp += len(pred & gold)
        fp += len(pred - gold)
        fn += len(gold - pred)
    f1 = 2 * tp / (2 * tp + fp + fn)
    assert f1 >= 0.95


def test_slot_filler_seeded_and_degenerate():
    pairs = [(TEMPLATES[k % 3], ROOMS[k % 7]) for k in range(12)]
    gaz = [Gazetteer("room", [tuple(r.split()) for r in ROOMS], True)]
    cfg = FeatureConfig()
    a = train_slot_filler("S", room_examples(pairs), cfg, gaz, (), seeded_rng(9))
    b = train_slot_filler("S", room_examples(pairs), cfg, gaz, (), seeded_rng(9))
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    everything = FeatureConfig(dropout={f: 1.0 for f in ("lexical", "shape", "affix", "cluster",
                                                        "builtin", "gazetteer", "bias")})
    dead = train_slot_filler("S", room_examples(pairs), everything, gaz, (), seeded_rng(9))
    nt, c = cands("set the kitchen lights")
    slots = fill_slots(dead, nt, c, everything, gaz)
    assert isinstance(slots, list)
    assert fill_slots(a, normalize(""), [], cfg, gaz) == []


def test_tagset():
    assert tagset(["room", "color"]) == ["O", "B-room", "I-room", "L-room", "U-room",
                                         "B-color", "I-color", "L-color", "U-color"]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from("set the kitchen living room blue lights to please red".split()),
                max_size=10))
def test_label_consistency(smart_lights, smart_lights_engine, words):
    from slu.engine import parse
    res = parse(smart_lights_engine, " ".join(words), REF)
    spans = sorted(s.span for s in res.slots)
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        assert a1 <= b0
    if res.intent is None:
        assert res.slots == ()
        return
    declared = {c.slot_name for u in smart_lights.intents[res.intent].utterances
                for c in u.slot_chunks}
    assert {s.slot_name for s in res.slots} <= declared
