"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np

from slu.class_lm import class_symbol, entity_of
from slu.crf import CRF, SequenceBatch
from slu.ngram import BOS, EOS

from conftest import toy_dataset


def expansion_probability(lm, tokens):
    """Sum over every reading of ``tokens`` as pattern words and whole entity
    values, multiplying pattern-model probabilities along the symbol
    sequence with uniform value probabilities. Plain recursion, no sharing."""
    plm = lm.pattern_lm
    n_hist = plm.order - 1
    entities = {class_symbol(e): m for e, m in lm.entity_models.items()
                if class_symbol(e) in plm.vocabulary}

    def walk(i, symbols):
        history = ([BOS] + symbols)[-n_hist:] if n_hist else []
        if i == len(tokens):
            return plm.prob(EOS, history)
        total = 0.0
        w = tokens[i]
        if w in plm.vocabulary and entity_of(w) is None:
            total += plm.prob(w, history) * walk(i + 1, symbols + [w])
        for sym, model in entities.items():
            for value in model.values:
                if tuple(tokens[i:i + len(value)]) == value:
                    total += (plm.prob(sym, history) / len(model.values)
                              * walk(i + len(value), symbols + [sym]))
        return total

    return walk(0, [])


def random_assistant(seed):
    rng = np.random.default_rng(seed)
    lexicon = ["play", "the", "some", "by", "music", "song", "on", "a", "light"]
    entities = {}
    for e in range(int(rng.integers(1, 3))):
        values = set()
        for _ in range(int(rng.integers(1, 6))):
            values.add(" ".join(rng.choice(lexicon[:6], size=int(rng.integers(1, 4)))))
        entities[f"ent{e}"] = sorted(values)
    patterns = []
    for _ in range(int(rng.integers(1, 5))):
        parts = []
        for _ in range(int(rng.integers(1, 5))):
            if rng.random() < 0.4:
                e = f"ent{int(rng.integers(len(entities)))}"
                parts.append(f"({entities[e][0]})[{e}]")
            else:
                parts.append(str(rng.choice(lexicon)))
        patterns.append(" ".join(parts))
    return toy_dataset({"I": patterns}, entities), patterns


def expansions(d):
    out = []
    for _, utt in d.utterances():
        partial = [[]]
        for c in utt.chunks:
            if hasattr(c, "entity"):
                vals = [v.value.split() for v in d.entities[c.entity].values]
                partial = [p + v for p in partial for v in vals]
            else:
                partial = [p + c.text.split() for p in partial]
        out += partial
    return out


def random_crf(rng, n_features=6, tags=("O", "B-x", "I-x", "L-x", "U-x"), scale=1.0):
    K = len(tags)
    crf = CRF.zeros(list(tags), {f"f{i}": i for i in range(n_features)}, lam=0.1)
    return crf.with_flat(rng.normal(scale=scale, size=crf.n_params))


def random_batch(rng, n_seq, length, n_features, K):
    idx = [[list(rng.choice(n_features, size=rng.integers(1, 4), replace=False))
            for _ in range(length if length else rng.integers(1, 5))] for _ in range(n_seq)]
    labels = [list(rng.integers(0, K, size=len(s))) for s in idx]
    return idx, labels, SequenceBatch(idx, labels, n_features)
