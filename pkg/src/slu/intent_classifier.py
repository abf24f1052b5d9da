"""Multinomial logistic-regression intent classifier."""
from __future__ import annotations

import numpy as np
from scipy import optimize, sparse
from scipy.special import logsumexp

from .errors import SingleIntentError
from .features import featurize_intent

__all__ = ["IntentClassifier", "train_intent_classifier", "classify_intent"]

BIAS = "__bias__"


class IntentClassifier:
    def __init__(self, intents, vocabulary, weights, lam):
        self.intents = list(intents)
        self.vocabulary = dict(vocabulary)  # feature name -> column
        self.weights = np.asarray(weights, dtype=float)  # (n_intents, n_features)
        self.lam = lam

    def vectorize(self, feats):
        cols, vals = [self.vocabulary[BIAS]], [1.0]
        for name, count in feats.items():
            j = self.vocabulary.get(name)
            if j is not None:
                cols.append(j)
                vals.append(float(count))
        return np.array(cols), np.array(vals)

    def probabilities(self, feats):
        cols, vals = self.vectorize(feats)
        scores = self.weights[:, cols] @ vals
        return np.exp(scores - logsumexp(scores))

    def to_json(self):
        names = sorted(self.vocabulary, key=self.vocabulary.get)
        return {
            "intents": self.intents,
            "lambda": self.lam,
            "weights": {name: {intent: float(self.weights[k, self.vocabulary[name]])
                               for k, intent in enumerate(self.intents)} for name in names},
        }

    @classmethod
    def from_json(cls, obj):
        intents = obj["intents"]
        names = list(obj["weights"])
        w = np.array([[obj["weights"][n][i] for n in names] for i in intents]).reshape(len(intents), len(names))
        return cls(intents, {n: j for j, n in enumerate(names)}, w, obj["lambda"])


def design_matrix(feature_counts, vocabulary):
    rows, cols, vals = [], [], []
    for i, feats in enumerate(feature_counts):
        rows.append(i)
        cols.append(vocabulary[BIAS])
        vals.append(1.0)
        for name, count in feats.items():
            j = vocabulary.get(name)
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(float(count))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(feature_counts), len(vocabulary)))


def objective(flat, X, Y, lam):
    """Negative L2-penalized log-likelihood and its gradient.

    X is (n, F) sparse, Y is the (n, C) one-hot label matrix.
    """
    C = Y.shape[1]
    W = flat.reshape(C, -1)
    scores = np.asarray(X @ W.T)
    logz = logsumexp(scores, axis=1, keepdims=True)
    loglik = float(np.sum(Y * (scores - logz)))
    P = np.exp(scores - logz)
    grad = np.asarray((X.T @ (Y - P)).T) - lam * W
    value = loglik - 0.5 * lam * float(np.sum(W * W))
    return -value, -grad.ravel()


def train_intent_classifier(examples, lam=1.0, max_iter=200, tol=1e-5):
    """Fit on ``examples``: a list of (intent, feature Counter) pairs.

    Intent order follows first appearance. Raises SingleIntentError with
    fewer than two intents.
    """
    intents = []
    for intent, _ in examples:
        if intent not in intents:
            intents.append(intent)
    if len(intents) < 2:
        raise SingleIntentError(f"need at least 2 intents to train a classifier, got {intents}")
    vocabulary = {BIAS: 0}
    for _, feats in examples:
        for name in sorted(feats):
            vocabulary.setdefault(name, len(vocabulary))
    X = design_matrix([f for _, f in examples], vocabulary)
    Y = np.zeros((len(examples), len(intents)))
    for i, (intent, _) in enumerate(examples):
        Y[i, intents.index(intent)] = 1.0
    x0 = np.zeros(len(intents) * len(vocabulary))
    res = optimize.minimize(objective, x0, args=(X, Y, lam), jac=True, method="L-BFGS-B",
                            options={"maxiter": max_iter, "gtol": tol})
    return IntentClassifier(intents, vocabulary, res.x.reshape(len(intents), -1), lam)


def classify_intent(model, nt, matches):
    """[(intent, probability)] sorted by decreasing probability (ties by name)."""
    p = model.probabilities(featurize_intent(nt, matches))
    return sorted(zip(model.intents, p.tolist()), key=lambda x: (-x[1], x[0]))
