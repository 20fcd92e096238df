"""Exact probability tables over finite alphabets and information measures.

All information quantities are in bits. Joint tables over input/output
blocks use the axis order ``X_1..X_n, Y_1..Y_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import MAX_CELLS, NORM_TOL


class TableSizeError(ValueError):
    """Raised when a dense table would exceed ``MAX_CELLS`` entries."""


def check_size(shape: Sequence[int]) -> None:
    cells = 1
    for s in shape:
        cells *= int(s)
    if cells > MAX_CELLS:
        raise TableSizeError(f"table of shape {tuple(shape)} has {cells} cells > {MAX_CELLS}")


@dataclass(frozen=True)
class Alphabet:
    size: int
    null: int | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("alphabet size must be >= 1")
        if self.null is not None and not 0 <= self.null < self.size:
            raise ValueError("null index out of range")


NULL_ALPHABET = Alphabet(1, null=0)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_normalized(probs: np.ndarray) -> None:
    if np.any(probs < 0):
        raise ValueError("negative probability")
    total = math.fsum(probs.ravel())
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"probabilities sum to {total!r}, not 1")


@dataclass(frozen=True)
class Pmf:
    probs: np.ndarray
    alphabet: Alphabet = None

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1:
            raise ValueError("Pmf must be one-dimensional")
        check_size(probs.shape)
        _check_normalized(probs)
        object.__setattr__(self, "probs", probs)
        if self.alphabet is None:
            object.__setattr__(self, "alphabet", Alphabet(probs.size))
        elif self.alphabet.size != probs.size:
            raise ValueError("alphabet size does not match probability vector")

    @property
    def size(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, size: int) -> "Pmf":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point(cls, size: int, symbol: int) -> "Pmf":
        p = np.zeros(size)
        p[symbol] = 1.0
        return cls(p)


@dataclass(frozen=True)
class JointPmf:
    """Dense joint table; ``axes[k]`` is the alphabet of dimension ``k``."""

    probs: np.ndarray
    axes: tuple = None

    def __post_init__(self):
        probs = _frozen(self.probs)
        check_size(probs.shape)
        _check_normalized(probs)
        object.__setattr__(self, "probs", probs)
        if self.axes is None:
            object.__setattr__(self, "axes", tuple(Alphabet(s) for s in probs.shape))
        else:
            axes = tuple(self.axes)
            if tuple(a.size for a in axes) != probs.shape:
                raise ValueError("axes do not match table shape")
            object.__setattr__(self, "axes", axes)

    @property
    def ndim(self) -> int:
        return self.probs.ndim

    @property
    def shape(self) -> tuple:
        return self.probs.shape

    def marginal(self, axes: Sequence[int]) -> "JointPmf":
        return JointPmf(marginal_table(self.probs, axes), tuple(self.axes[a] for a in axes))

    def grouped(self, first: Sequence[int], second: Sequence[int]) -> "JointPmf":
        """Two-axis view with each axis group flattened row-major into a super alphabet."""
        t = marginal_table(self.probs, list(first) + list(second))
        a = int(np.prod([self.shape[i] for i in first], dtype=np.int64))
        b = int(np.prod([self.shape[i] for i in second], dtype=np.int64))
        return JointPmf(t.reshape(a, b))


def marginal_table(p: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Marginal of ``p`` on ``axes``, returned with dimensions in the order given."""
    axes = [int(a) for a in axes]
    if len(set(axes)) != len(axes):
        raise ValueError("repeated axis")
    others = tuple(a for a in range(p.ndim) if a not in axes)
    m = p.sum(axis=others) if others else p
    kept = sorted(axes)
    return np.transpose(m, [kept.index(a) for a in axes])


def _table(p) -> np.ndarray:
    if isinstance(p, (Pmf, JointPmf)):
        return p.probs
    return np.asarray(p, dtype=float)


def entropy(p) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``."""
    t = _table(p).ravel()
    t = t[t > 0]
    return -math.fsum(t * np.log2(t))


def _h(t: np.ndarray, axes: Sequence[int]) -> float:
    if not len(axes):
        return 0.0
    return entropy(marginal_table(t, axes))


def mutual_information(j) -> float:
    t = _table(j)
    if t.ndim != 2:
        raise ValueError("mutual_information expects a two-axis joint")
    return _h(t, [0]) + _h(t, [1]) - entropy(t)


def conditional_mi(j, a: Sequence[int], b: Sequence[int], c: Sequence[int] = ()) -> float:
    """I(A;B|C) for disjoint axis groups, via four entropies."""
    t = _table(j)
    a, b, c = list(a), list(b), list(c)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("axis groups must be disjoint")
    if not a or not b:
        return 0.0
    return _h(t, a + c) + _h(t, b + c) - _h(t, a + b + c) - _h(t, c)


@dataclass(frozen=True)
class InfoResult:
    value: float
    decomposition: tuple = field(default_factory=tuple)


def _block_axes(j, n: int | None) -> int:
    t = _table(j)
    if n is None:
        if t.ndim % 2:
            raise ValueError("joint must have 2n axes")
        n = t.ndim // 2
    if t.ndim != 2 * n:
        raise ValueError(f"expected {2 * n} axes, got {t.ndim}")
    return n


def directed_information(j, n: int | None = None) -> InfoResult:
    """Sum over i of I(X^i; Y_i | Y^{i-1})."""
    n = _block_axes(j, n)
    terms = tuple(
        conditional_mi(j, range(i + 1), [n + i], range(n, n + i)) for i in range(n)
    )
    return InfoResult(math.fsum(terms), terms)


def directed_information_alt(j, n: int | None = None) -> InfoResult:
    """Sum over i of I(X_i; Y_i^n | X^{i-1}, Y^{i-1})."""
    n = _block_axes(j, n)
    terms = tuple(
        conditional_mi(j, [i], range(n + i, 2 * n), list(range(i)) + list(range(n, n + i)))
        for i in range(n)
    )
    return InfoResult(math.fsum(terms), terms)


def block_mutual_information(j, n: int | None = None) -> float:
    """I(X^n; Y^n) of a ``2n``-axis joint."""
    n = _block_axes(j, n)
    return conditional_mi(j, range(n), range(n, 2 * n))


# -- causally conditioned kernels -------------------------------------------

INPUT = "input"
CHANNEL = "channel"


def _history_len(kind: str, i: int) -> tuple[int, int]:
    return (i + 1, i) if kind == CHANNEL else (i, i)


def factor_shape(kind: str, x_sizes, y_sizes, i: int) -> tuple:
    hx, hy = _history_len(kind, i)
    out = y_sizes[i] if kind == CHANNEL else x_sizes[i]
    return tuple(x_sizes[:hx]) + tuple(y_sizes[:hy]) + (out,)


@dataclass(frozen=True)
class CausalKernel:
    """A causally conditioned distribution stored factor by factor.

    ``kind == "input"`` holds p(x^n||y^{n-1}); factor ``i`` (0-based) has axes
    ``(X_1..X_i, Y_1..Y_i, X_{i+1})``, i.e. the history x^{i}, y^{i} then the
    new symbol. ``kind == "channel"`` holds p(y^n||x^n); factor ``i`` has axes
    ``(X_1..X_{i+1}, Y_1..Y_i, Y_{i+1})``.
    """

    kind: str
    x_sizes: tuple
    y_sizes: tuple
    factors: tuple

    def __post_init__(self):
        if self.kind not in (INPUT, CHANNEL):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        xs, ys = tuple(int(s) for s in self.x_sizes), tuple(int(s) for s in self.y_sizes)
        if len(xs) != len(ys):
            raise ValueError("x and y horizons differ")
        object.__setattr__(self, "x_sizes", xs)
        object.__setattr__(self, "y_sizes", ys)
        if len(self.factors) != len(xs):
            raise ValueError("one factor per time step required")
        fs = []
        for i, f in enumerate(self.factors):
            f = _frozen(f)
            if f.shape != self.factor_shape(i):
                raise ValueError(f"factor {i} has shape {f.shape}, expected {self.factor_shape(i)}")
            if np.any(f < 0) or np.max(np.abs(f.sum(axis=-1) - 1.0), initial=0.0) > NORM_TOL:
                raise ValueError(f"factor {i} is not a conditional distribution")
            fs.append(f)
        object.__setattr__(self, "factors", tuple(fs))

    @property
    def n(self) -> int:
        return len(self.x_sizes)

    def history_len(self, i: int) -> tuple[int, int]:
        return _history_len(self.kind, i)

    def factor_shape(self, i: int) -> tuple:
        return factor_shape(self.kind, self.x_sizes, self.y_sizes, i)

    def expanded(self, i: int) -> np.ndarray:
        """Factor ``i`` reshaped to broadcast against the full ``X^n,Y^n`` table."""
        n = self.n
        hx, hy = self.history_len(i)
        out_axis = n + i if self.kind == CHANNEL else i
        src = list(range(hx)) + [n + k for k in range(hy)] + [out_axis]
        f = self.factors[i]
        order = np.argsort(src)
        f = np.transpose(f, order)
        shape = [1] * (2 * n)
        for ax in src:
            shape[ax] = (self.x_sizes + self.y_sizes)[ax]
        return f.reshape(shape)

    def product(self) -> np.ndarray:
        """Product of all factors as a full ``X^n,Y^n`` table."""
        shape = self.x_sizes + self.y_sizes
        check_size(shape)
        t = np.ones(shape)
        for i in range(self.n):
            t = t * self.expanded(i)
        return t

    def conditional(self) -> np.ndarray:
        """p(y^n | x^n) as a ``(prod X, prod Y)`` matrix; channel kernels only."""
        if self.kind != CHANNEL:
            raise ValueError("conditional() needs a channel kernel")
        t = self.product()
        return t.reshape(int(np.prod(self.x_sizes)), int(np.prod(self.y_sizes)))


def compose(input_kernel: CausalKernel, channel_kernel: CausalKernel) -> JointPmf:
    """Joint p(x^n, y^n) = p(x^n||y^{n-1}) p(y^n||x^n)."""
    if input_kernel.kind != INPUT or channel_kernel.kind != CHANNEL:
        raise ValueError("compose(input, channel) argument kinds swapped")
    if input_kernel.n != channel_kernel.n:
        raise ValueError("horizon mismatch")
    if (input_kernel.x_sizes, input_kernel.y_sizes) != (channel_kernel.x_sizes, channel_kernel.y_sizes):
        raise ValueError("alphabet mismatch")
    t = input_kernel.product() * channel_kernel.product()
    return JointPmf(t / math.fsum(t.ravel()))


def _conditional_slices(t: np.ndarray, axes: list) -> np.ndarray:
    """Conditional of the last listed axis given the others; zero rows become uniform."""
    m = marginal_table(t, axes)
    den = m.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(den > 0, m / np.where(den > 0, den, 1.0), 1.0 / m.shape[-1])
    # renormalise away rounding so slices satisfy the 1e-12 invariant
    return c / c.sum(axis=-1, keepdims=True)


def causal_factorize(j, n: int | None = None) -> tuple[CausalKernel, CausalKernel]:
    """Split a joint on ``X^n,Y^n`` into (p(x^n||y^{n-1}), p(y^n||x^n))."""
    t = _table(j)
    n = _block_axes(t, n)
    xs, ys = t.shape[:n], t.shape[n:]
    fin, fch = [], []
    for i in range(n):
        fin.append(_conditional_slices(t, list(range(i)) + [n + k for k in range(i)] + [i]))
        fch.append(_conditional_slices(t, list(range(i + 1)) + [n + k for k in range(i)] + [n + i]))
    return CausalKernel(INPUT, xs, ys, tuple(fin)), CausalKernel(CHANNEL, xs, ys, tuple(fch))


def memoryless_input(pmfs: Sequence, y_sizes: Sequence[int]) -> CausalKernel:
    """Input kernel whose letters are independent with the given marginals."""
    xs = tuple(len(p) for p in pmfs)
    factors = []
    for i, p in enumerate(pmfs):
        shape = xs[:i] + tuple(y_sizes[:i]) + (xs[i],)
        factors.append(np.broadcast_to(np.asarray(p, dtype=float), shape).copy())
    return CausalKernel(INPUT, xs, tuple(y_sizes), tuple(factors))


def input_from_block(px: np.ndarray, y_sizes: Sequence[int]) -> CausalKernel:
    """Nonfeedback input kernel from a block law p(x^n) given as an n-dim table."""
    px = np.asarray(px, dtype=float)
    n = px.ndim
    factors = []
    for i in range(n):
        c = _conditional_slices(px, list(range(i + 1)))
        shape = px.shape[:i] + tuple(y_sizes[:i]) + (px.shape[i],)
        c = c.reshape(px.shape[:i] + (1,) * i + (px.shape[i],))
        factors.append(np.broadcast_to(c, shape).copy())
    return CausalKernel(INPUT, px.shape, tuple(y_sizes), tuple(factors))


def random_joint(rng: np.random.Generator, shape: Sequence[int], alpha: float = 1.0) -> JointPmf:
    p = rng.dirichlet(np.full(int(np.prod(shape)), alpha)).reshape(shape)
    return JointPmf(p / math.fsum(p.ravel()))


def random_kernel(rng: np.random.Generator, kind: str, x_sizes, y_sizes, alpha: float = 1.0) -> CausalKernel:
    factors = []
    for i in range(len(x_sizes)):
        shape = factor_shape(kind, x_sizes, y_sizes, i)
        f = rng.dirichlet(np.full(shape[-1], alpha), size=shape[:-1])
        factors.append(f / f.sum(axis=-1, keepdims=True))
    return CausalKernel(kind, x_sizes, y_sizes, tuple(factors))


def tv_distance(p, q) -> float:
    return 0.5 * float(np.abs(_table(p).ravel() - _table(q).ravel()).sum())


# -- JSON ------------------------------------------------------------------

def to_json(obj) -> dict:
    """Serialise a Pmf, JointPmf or CausalKernel (row-major flat arrays)."""
    if isinstance(obj, Pmf):
        return {"type": "pmf", "sizes": [obj.size], "null": obj.alphabet.null,
                "probs": obj.probs.tolist()}
    if isinstance(obj, JointPmf):
        return {"type": "joint", "sizes": list(obj.shape),
                "nulls": [a.null for a in obj.axes], "probs": obj.probs.ravel().tolist()}
    if isinstance(obj, CausalKernel):
        return {"type": "causal_kernel", "kind": obj.kind, "x_sizes": list(obj.x_sizes),
                "y_sizes": list(obj.y_sizes),
                "factors": [{"shape": list(f.shape), "probs": f.ravel().tolist()} for f in obj.factors]}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def from_json(d: dict):
    kind = d.get("type")
    if kind == "pmf":
        return Pmf(d["probs"], Alphabet(d["sizes"][0], d.get("null")))
    if kind == "joint":
        sizes = d["sizes"]
        nulls = d.get("nulls") or [None] * len(sizes)
        return JointPmf(np.asarray(d["probs"]).reshape(sizes),
                        tuple(Alphabet(s, u) for s, u in zip(sizes, nulls)))
    if kind == "causal_kernel":
        fs = tuple(np.asarray(f["probs"]).reshape(f["shape"]) for f in d["factors"])
        return CausalKernel(d["kind"], tuple(d["x_sizes"]), tuple(d["y_sizes"]), fs)
    raise ValueError(f"unknown serialised type {kind!r}")
