"""Independent reference computations used to check the library.

Everything here is written with plain loops or a different formula from the
library so that agreement is evidence, not tautology.
"""

import itertools
import math
from decimal import Decimal, getcontext

import numpy as np


def entropy_decimal(probs, digits=40):
    getcontext().prec = digits
    total = Decimal(0)
    for p in probs:
        d = Decimal(repr(float(p)))
        if d > 0:
            total -= d * d.ln()
    return float(total / Decimal(2).ln())


def h2(q):
    return 0.0 if q in (0, 1) else -q * math.log2(q) - (1 - q) * math.log2(1 - q)


def H(table, keep):
    """Entropy of the marginal on axes ``keep`` via an explicit dictionary."""
    t = np.asarray(table)
    acc = {}
    for idx in np.ndindex(t.shape):
        key = tuple(idx[a] for a in keep)
        acc[key] = acc.get(key, 0.0) + t[idx]
    return -sum(v * math.log2(v) for v in acc.values() if v > 0)


def cmi(table, a, b, c=()):
    a, b, c = list(a), list(b), list(c)
    return H(table, a + c) + H(table, b + c) - H(table, a + b + c) - (H(table, c) if c else 0.0)


def directed_info_loops(table, n):
    xs = list(range(n))
    ys = list(range(n, 2 * n))
    return sum(cmi(table, xs[:i + 1], [ys[i]], ys[:i]) for i in range(n))


def block_kernel_loops(g, m, x_size, z_size, pz, n):
    """p(y^n | x^n) as a dict keyed by (x tuple, y tuple); nulls written as None."""
    out = {}
    for x in itertools.product(range(x_size), repeat=n):
        for zi, z in enumerate(itertools.product(range(z_size), repeat=n)):
            y = []
            for i in range(n):
                if i < m:
                    y.append(None)
                else:
                    y.append(int(g[tuple(x[i - m:i + 1]) + tuple(z[i - m:i + 1])]))
            key = (x, tuple(y))
            out[key] = out.get(key, 0.0) + pz[zi]
    return out


def apply_loops(g, m, x, z):
    y = []
    for i in range(len(x)):
        if i < m or any(v < 0 for v in x[i - m:i + 1]):
            y.append(-1)
        else:
            y.append(int(g[tuple(x[i - m:i + 1]) + tuple(z[i - m:i + 1])]))
    return y


def gallager_positions(n, L):
    """1-based source positions copied into the interleaved sequence, per the segment rule."""
    out = []
    for j in range(1, n + 1):
        for i in range(1, L * n + 1):
            out.append((j - 1) * L * n + i + (j - 1))
    return out


def transmit_positions(n, L):
    """1-based transmitted position of letter c (1-based) of super letter i (1-based)."""
    pos = {}
    k = 0
    for j in range(1, n + 1):
        for s in range(1, L + 1):
            i = (j - 1) * L + s
            for c in range(1, n + 1):
                k += 1
                pos[(i, c)] = k
        k += 1                      # separator
    return pos


def extraction_window(n, L, m):
    """1-based output indices read for each super letter: Y_{(i-1)n+m+j} .. Y_{in+j-1}."""
    out = []
    for i in range(1, L * n + 1):
        j = (i - 1) // L + 1
        out.append([None] * m + list(range((i - 1) * n + m + j, i * n + j)))
    return out


def bsc_kernel(q, n):
    W = np.array([[1 - q, q], [q, 1 - q]])
    t = np.ones((2,) * (2 * n))
    for idx in np.ndindex(t.shape):
        t[idx] = np.prod([W[idx[i], idx[n + i]] for i in range(n)])
    return t


def brute_typical_prob(y, P, eps, px):
    """Pr{(X, y) jointly typical} by enumerating every x sequence (short y only)."""
    A, B = P.shape
    n = len(y)
    total = 0.0
    for x in itertools.product(range(A), repeat=n):
        cnt = np.zeros((A, B))
        for a, b in zip(x, y):
            cnt[a, b] += 1
        ok = True
        for a in range(A):
            for b in range(B):
                if P[a, b] == 0:
                    ok &= cnt[a, b] == 0
                else:
                    ok &= abs(cnt[a, b] / n - P[a, b]) < eps / (A * B)
        if ok:
            total += np.prod([px[a] for a in x])
    return total
