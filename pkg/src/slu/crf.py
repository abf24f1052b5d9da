"""Linear-chain conditional random field.

Parameters are a dense emission matrix (features x tags), a tag transition
matrix and start/end vectors. Training maximizes the L2-penalized
conditional log-likelihood with full-batch gradient ascent; the step size
starts from a Barzilai-Borwein estimate and is backtracked until the Armijo
condition holds. All sums over tag paths are done in log space.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse

__all__ = ["CRF", "SequenceBatch", "loglik_and_grad", "train_crf", "viterbi", "path_score"]


class CRF:
    def __init__(self, tags, features, emission, transition, start, end, lam=0.1):
        self.tags = list(tags)
        self.features = dict(features)  # name -> row of emission
        self.emission = np.asarray(emission, dtype=float)
        self.transition = np.asarray(transition, dtype=float)
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        self.lam = lam

    @classmethod
    def zeros(cls, tags, features, lam=0.1):
        F, K = len(features), len(tags)
        return cls(tags, features, np.zeros((F, K)), np.zeros((K, K)), np.zeros(K), np.zeros(K), lam)

    @property
    def n_params(self):
        F, K = self.emission.shape
        return F * K + K * K + 2 * K

    def flat(self):
        return np.concatenate([self.emission.ravel(), self.transition.ravel(), self.start, self.end])

    def with_flat(self, flat):
        F, K = self.emission.shape
        a = F * K
        return CRF(self.tags, self.features, flat[:a].reshape(F, K),
                   flat[a:a + K * K].reshape(K, K), flat[a + K * K:a + K * K + K],
                   flat[a + K * K + K:], self.lam)

    def indices(self, token_features):
        """Feature names per token -> column index lists (unknown names dropped)."""
        return [[self.features[f] for f in feats if f in self.features] for feats in token_features]

    def emissions(self, idx_seq):
        K = len(self.tags)
        out = np.zeros((len(idx_seq), K))
        for t, idx in enumerate(idx_seq):
            if idx:
                out[t] = self.emission[idx].sum(axis=0)
        return out

    def decode(self, idx_seq):
        if not idx_seq:
            return []
        path = viterbi(self.emissions(idx_seq), self.transition, self.start, self.end)
        return [self.tags[k] for k in path]

    def marginals(self, idx_seq):
        batch = SequenceBatch([idx_seq], [[0] * len(idx_seq)], len(self.features))
        _, gamma, _ = _forward_backward(self, batch)
        return gamma[0, :len(idx_seq)]

    def to_json(self):
        names = sorted(self.features, key=self.features.get)
        emission = {}
        for name in names:
            row = self.emission[self.features[name]]
            emission[name] = {t: float(w) for t, w in zip(self.tags, row) if w != 0.0}
        return {
            "tags": self.tags,
            "lambda": self.lam,
            "features": names,
            "emission": emission,
            "transition": {a: {b: float(self.transition[i, j]) for j, b in enumerate(self.tags)}
                           for i, a in enumerate(self.tags)},
            "start": {t: float(w) for t, w in zip(self.tags, self.start)},
            "end": {t: float(w) for t, w in zip(self.tags, self.end)},
        }

    @classmethod
    def from_json(cls, obj):
        tags = obj["tags"]
        names = obj["features"]
        features = {n: i for i, n in enumerate(names)}
        col = {t: k for k, t in enumerate(tags)}
        emission = np.zeros((len(names), len(tags)))
        for name, row in obj["emission"].items():
            for t, w in row.items():
                emission[features[name], col[t]] = w
        transition = np.array([[obj["transition"][a][b] for b in tags] for a in tags]).reshape(len(tags), len(tags))
        start = np.array([obj["start"][t] for t in tags])
        end = np.array([obj["end"][t] for t in tags])
        return cls(tags, features, emission, transition, start, end, obj["lambda"])


class SequenceBatch:
    """Padded view of several labeled sequences.

    ``X`` stacks one indicator row per token of every sequence (sequence
    major), so ``X @ emission`` gives all emission scores at once.
    """

    def __init__(self, idx_seqs, label_seqs, n_features):
        self.lengths = np.array([len(s) for s in idx_seqs], dtype=int)
        keep = self.lengths > 0
        self.lengths = self.lengths[keep]
        idx_seqs = [s for s, k in zip(idx_seqs, keep) if k]
        label_seqs = [s for s, k in zip(label_seqs, keep) if k]
        rows, cols = [], []
        r = 0
        for seq in idx_seqs:
            for idx in seq:
                rows.extend([r] * len(idx))
                cols.extend(idx)
                r += 1
        self.n_tokens = r
        self.X = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(r, n_features))
        self.labels = np.array([y for seq in label_seqs for y in seq], dtype=int)
        self.label_seqs = [np.asarray(s, dtype=int) for s in label_seqs]
        B = len(idx_seqs)
        L = int(self.lengths.max()) if B else 0
        self.mask = np.arange(L)[None, :] < self.lengths[:, None]
        self.shape = (B, L)
        self._counts = {}

    def empirical(self, K):
        """Observed tag counts: per-token one-hot, transitions, starts, ends."""
        if K not in self._counts:
            emit = np.zeros((self.n_tokens, K))
            emit[np.arange(self.n_tokens), self.labels] = 1.0
            trans, start, end = np.zeros((K, K)), np.zeros(K), np.zeros(K)
            for y in self.label_seqs:
                np.add.at(trans, (y[:-1], y[1:]), 1.0)
                start[y[0]] += 1.0
                end[y[-1]] += 1.0
            self._counts[K] = (emit, trans, start, end)
        return self._counts[K]


def _forward_backward(crf, batch, E=None):
    """Return (log Z per sequence, node marginals, summed pair marginals).

    Runs in probability space with per-step normalization; each score table
    is shifted by its maximum before exponentiating and the shifts are
    added back to log Z.
    """
    K = len(crf.tags)
    B, L = batch.shape
    mask = batch.mask
    if E is None:
        E = np.asarray(batch.X @ crf.emission)
    Ep = np.zeros((B, L, K))
    Ep[mask] = E
    shift = Ep.max(axis=2)
    P = np.exp(Ep - shift[:, :, None])
    t_max, s_max, e_max = crf.transition.max(), crf.start.max(), crf.end.max()
    T = np.exp(crf.transition - t_max)
    S = np.exp(crf.start - s_max)
    N = np.exp(crf.end - e_max)

    alpha = np.empty((B, L, K))
    z = np.ones((B, L))
    a = S * P[:, 0]
    z[:, 0] = a.sum(axis=1)
    alpha[:, 0] = a / z[:, 0, None]
    log_scale = np.log(z[:, 0]) + shift[:, 0] + s_max
    for t in range(1, L):
        live = mask[:, t]
        a = (alpha[:, t - 1] @ T) * P[:, t]
        zt = np.where(live, a.sum(axis=1), 1.0)
        z[:, t] = zt
        alpha[:, t] = np.where(live[:, None], a / zt[:, None], alpha[:, t - 1])
        log_scale += np.where(live, np.log(zt) + shift[:, t] + t_max, 0.0)
    last = batch.lengths - 1
    final = alpha[np.arange(B), last] @ N
    logz = log_scale + np.log(final) + e_max

    beta = np.empty((B, L, K))
    beta[:, L - 1] = N
    for t in range(L - 2, -1, -1):
        new = ((P[:, t + 1] * beta[:, t + 1]) @ T.T) / z[:, t + 1, None]
        beta[:, t] = np.where(mask[:, t + 1, None], new, N)

    gamma = alpha * beta / final[:, None, None] * mask[:, :, None]
    xi = np.zeros((K, K))
    for t in range(L - 1):
        live = mask[:, t + 1]
        if not live.any():
            break
        right = P[live, t + 1] * beta[live, t + 1] / (z[live, t + 1] * final[live])[:, None]
        xi += alpha[live, t].T @ right
    return logz, gamma, xi * T


def path_score(crf, E, path):
    s = crf.start[path[0]] + crf.end[path[-1]] + E[np.arange(len(path)), path].sum()
    return float(s + sum(crf.transition[a, b] for a, b in zip(path, path[1:])))


def loglik_and_grad(crf, batch):
    """Penalized log-likelihood and its gradient, flattened like ``crf.flat()``."""
    K = len(crf.tags)
    B, _ = batch.shape
    E = np.asarray(batch.X @ crf.emission)
    logz, gamma, xi = _forward_backward(crf, batch, E)

    emp_emit, emp_trans, emp_start, emp_end = batch.empirical(K)
    score = float(E[np.arange(batch.n_tokens), batch.labels].sum())
    score += float((emp_trans * crf.transition).sum() + emp_start @ crf.start + emp_end @ crf.end)
    loglik = score - float(logz.sum())

    flat_gamma = gamma[batch.mask]
    g_emit = np.asarray(batch.X.T @ (emp_emit - flat_gamma)) - crf.lam * crf.emission
    g_trans = emp_trans - xi - crf.lam * crf.transition
    g_start = emp_start - gamma[:, 0].sum(axis=0) - crf.lam * crf.start
    last = gamma[np.arange(B), batch.lengths - 1]
    g_end = emp_end - last.sum(axis=0) - crf.lam * crf.end

    w = crf.flat()
    value = loglik - 0.5 * crf.lam * float(w @ w)
    grad = np.concatenate([g_emit.ravel(), g_trans.ravel(), g_start, g_end])
    return value, grad


def train_crf(crf, batch, max_iter=300, tol=1e-4, armijo=1e-4):
    """Gradient ascent from ``crf``'s current weights; returns (crf, n_iter)."""
    if batch.n_tokens == 0:
        return crf, 0
    x = crf.flat()
    f, g = loglik_and_grad(crf, batch)
    step = 1.0 / max(1.0, float(np.abs(g).max()))
    prev = None
    it = 0
    for it in range(1, max_iter + 1):
        if float(np.abs(g).max()) < tol:
            it -= 1
            break
        if prev is not None:
            s, y = x - prev[0], g - prev[1]
            sy = abs(float(s @ y))
            if sy > 0:
                step = float(s @ s) / sy
        gg = float(g @ g)
        for _ in range(60):
            cand = crf.with_flat(x + step * g)
            f_new, g_new = loglik_and_grad(cand, batch)
            if f_new >= f + armijo * step * gg:
                break
            step *= 0.5
        else:
            break
        prev = (x, g)
        x, f, g, crf = x + step * g, f_new, g_new, cand
    return crf, it


def viterbi(E, trans, start, end):
    T, K = E.shape
    delta = start + E[0]
    back = np.zeros((T, K), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(K)] + E[t]
    k = int(np.argmax(delta + end))
    path = [k]
    for t in range(T - 1, 0, -1):
        k = int(back[t, k])
        path.append(k)
    return path[::-1]
