"""Strong (relative-frequency) typicality and unique typical-set decoding.

Super letters are handled as opaque symbols: callers flatten an n-letter
block to a single row-major index before calling anything here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .prob import JointPmf, Pmf


@dataclass(frozen=True)
class TypicalityParams:
    epsilon: float
    law: Pmf | JointPmf

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def count(a, seq, seq2=None) -> int:
    """Occurrences of symbol ``a`` in ``seq`` or of pair ``a`` in ``zip(seq, seq2)``."""
    s = np.asarray(seq)
    if seq2 is None:
        return int(np.count_nonzero(s == a)) if s.size else 0
    t = np.asarray(seq2)
    if s.shape != t.shape:
        raise ValueError("sequences differ in length")
    return int(np.count_nonzero((s == a[0]) & (t == a[1]))) if s.size else 0


def _frequency_ok(counts: np.ndarray, probs: np.ndarray, length: int, size: int, epsilon: float) -> bool:
    if length == 0:
        return False
    null = probs == 0
    if np.any(counts[null] > 0):
        return False
    dev = np.abs(counts / length - probs)
    return bool(np.all(dev[~null] < epsilon / size))


def is_typical(seq, params: TypicalityParams) -> bool:
    p = params.law.probs
    s = np.asarray(seq, dtype=np.int64)
    if s.size and (s.min() < 0 or s.max() >= p.size):
        return False
    counts = np.bincount(s, minlength=p.size)
    return _frequency_ok(counts, p, s.size, p.size, params.epsilon)


def pair_counts(x_seq, y_seq, shape) -> np.ndarray:
    x = np.asarray(x_seq, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("sequences differ in length")
    return np.bincount(x * shape[1] + y, minlength=shape[0] * shape[1]).reshape(shape)


def is_jointly_typical(x_seq, y_seq, params: TypicalityParams) -> bool:
    P = params.law.probs
    if P.ndim != 2:
        raise ValueError("joint typicality needs a two-axis law")
    x = np.asarray(x_seq, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("sequences differ in length")
    if x.size and (x.min() < 0 or x.max() >= P.shape[0] or y.min() < 0 or y.max() >= P.shape[1]):
        return False
    c = pair_counts(x, y, P.shape)
    return _frequency_ok(c.ravel(), P.ravel(), x.size, P.size, params.epsilon)


def function_image_typical_check(x_seq, f, params: TypicalityParams) -> bool:
    """Check that a letterwise image of a typical sequence is typical at ``eps(|X|-1)``.

    ``f`` is an integer array of length ``|X|``; the image alphabet is the set
    of values it takes, relabelled densely.
    """
    if not is_typical(x_seq, params):
        raise ValueError("input sequence is not typical")
    f = np.asarray(f, dtype=np.int64)
    values, relabel = np.unique(f, return_inverse=True)
    p = params.law.probs
    q = np.bincount(relabel, weights=p, minlength=values.size)
    delta = params.epsilon * (p.size - 1)
    if delta == 0:
        # one-letter input alphabet: the image is constant and trivially typical
        return True
    y = relabel[np.asarray(x_seq, dtype=np.int64)]
    return is_typical(y, TypicalityParams(delta, Pmf(q / q.sum())))


@dataclass(frozen=True)
class DecodeOutcome:
    index: int | None
    status: str              # "ok", "none" or "ambiguous"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def typical_rows(candidates, y_seq, params: TypicalityParams, chunk: int = 4096) -> np.ndarray:
    """Boolean mask of candidate rows jointly typical with ``y_seq``."""
    C = np.atleast_2d(np.asarray(candidates, dtype=np.int64))
    y = np.asarray(y_seq, dtype=np.int64)
    P = params.law.probs
    A, B = P.shape
    if C.shape[1] != y.size:
        raise ValueError("candidate length differs from the output sequence")
    flatP = P.ravel()
    null = flatP == 0
    width = params.epsilon / P.size
    out = np.zeros(len(C), dtype=bool)
    n = y.size
    if n == 0:
        return out
    for lo in range(0, len(C), chunk):
        rows = C[lo:lo + chunk]
        pair = rows * B + y[None, :]
        offs = (np.arange(len(rows)) * (A * B))[:, None]
        cnt = np.bincount((pair + offs).ravel(), minlength=len(rows) * A * B).reshape(len(rows), A * B)
        good = ~np.any(cnt[:, null] > 0, axis=1)
        dev = np.abs(cnt[:, ~null] / n - flatP[~null])
        good &= np.all(dev < width, axis=1)
        out[lo:lo + chunk] = good
    return out


def decode_unique(candidates, y_seq, params: TypicalityParams) -> DecodeOutcome:
    hits = np.flatnonzero(typical_rows(candidates, y_seq, params))
    if hits.size == 1:
        return DecodeOutcome(int(hits[0]), "ok")
    return DecodeOutcome(None, "none" if hits.size == 0 else "ambiguous")


# -- exact probability that an independent codeword is typical ---------------

def _log_multinomial_box(n: int, probs: np.ndarray, allowed: list) -> float:
    """log P(multinomial(n, probs) lands in the product of allowed count sets)."""
    if n == 0:
        return 0.0 if all(a[0] for a in allowed) else -math.inf
    f = np.full(n + 1, -np.inf)
    f[0] = 0.0
    for p, ok in zip(probs, allowed):
        cs = np.flatnonzero(ok)
        if p == 0:
            cs = cs[cs == 0]
        if cs.size == 0:
            return -math.inf
        lp = math.log(p) if p > 0 else 0.0
        g = np.full(n + 1, -np.inf)
        for c in cs:
            term = c * lp - gammaln(c + 1)
            g[c:] = np.logaddexp(g[c:], f[:n + 1 - c] + term)
        f = g
    return float(f[n] + gammaln(n + 1))


def log2_prob_typical_with(y_seq, params: TypicalityParams, codeword_law=None) -> float:
    """log2 Pr{(X, y) jointly typical} for ``X`` i.i.d. from ``codeword_law``.

    ``codeword_law`` defaults to the first-axis marginal of the reference law.
    The pair counts in the columns ``y = b`` are independent multinomials, so
    the probability is a product of per-column box probabilities.
    """
    P = params.law.probs
    A, B = P.shape
    px = P.sum(axis=1) if codeword_law is None else np.asarray(getattr(codeword_law, "probs", codeword_law))
    y = np.asarray(y_seq, dtype=np.int64)
    n = y.size
    width = params.epsilon / P.size
    nb = np.bincount(y, minlength=B)
    total = 0.0
    for b in range(B):
        allowed = []
        c = np.arange(nb[b] + 1)
        for a in range(A):
            if P[a, b] == 0:
                allowed.append(c == 0)
            else:
                allowed.append(np.abs(c / n - P[a, b]) < width)
        lp = _log_multinomial_box(int(nb[b]), px, allowed)
        if lp == -math.inf:
            return -math.inf
        total += lp
    return total / math.log(2)
