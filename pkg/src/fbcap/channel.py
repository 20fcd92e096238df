"""Sliding-block channel ``Y_i = g(X_{i-m}^i, Z_{i-m}^i)`` and Shannon strategies.

Sequences are integer arrays with ``NULL`` (-1) standing for the null symbol.
The first ``m`` outputs are null. An output is also null whenever its input
window contains a null separator, so separators never reach ``g``.

Inside an n-block law the null output at positions ``1..m`` is represented
by a one-letter axis, which keeps kernels free of dead columns.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import MAX_BLOCK, MAX_MEMORY, NULL
from .prob import CHANNEL, INPUT, CausalKernel, JointPmf, Pmf, causal_factorize, check_size


@dataclass(frozen=True)
class SlidingBlockChannel:
    """``g`` is indexed as ``g[x_{i-m}, .., x_i, z_{i-m}, .., z_i]``."""

    m: int
    x_size: int
    z_size: int
    y_size: int
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=np.int64)
        shape = (self.x_size,) * (self.m + 1) + (self.z_size,) * (self.m + 1)
        if not 0 <= self.m <= MAX_MEMORY:
            raise ValueError(f"memory must be in [0, {MAX_MEMORY}]")
        if g.shape != shape:
            raise ValueError(f"g has shape {g.shape}, expected {shape}")
        if g.min() < 0 or g.max() >= self.y_size:
            raise ValueError("g takes values outside the output alphabet")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    @classmethod
    def from_flat(cls, m: int, x_size: int, z_size: int, y_size: int, g: Sequence[int]) -> "SlidingBlockChannel":
        shape = (x_size,) * (m + 1) + (z_size,) * (m + 1)
        return cls(m, x_size, z_size, y_size, np.asarray(g, dtype=np.int64).reshape(shape))

    @classmethod
    def from_function(cls, m: int, x_size: int, z_size: int, y_size: int, fn) -> "SlidingBlockChannel":
        """Tabulate ``fn(xs, zs)`` where ``xs``/``zs`` are the length-(m+1) windows."""
        shape = (x_size,) * (m + 1) + (z_size,) * (m + 1)
        g = np.zeros(shape, dtype=np.int64)
        for idx in itertools.product(*(range(s) for s in shape)):
            g[idx] = fn(idx[:m + 1], idx[m + 1:])
        return cls(m, x_size, z_size, y_size, g)

    @classmethod
    def additive(cls, size: int = 2) -> "SlidingBlockChannel":
        """Memoryless ``Y = X + Z mod size``."""
        return cls.from_function(0, size, size, size, lambda xs, zs: (xs[0] + zs[0]) % size)

    def to_flat(self) -> dict:
        return {"m": self.m, "x_size": self.x_size, "z_size": self.z_size,
                "y_size": self.y_size, "g": self.g.ravel().tolist()}

    def block_y_sizes(self, n: int) -> tuple:
        return (1,) * min(self.m, n) + (self.y_size,) * max(n - self.m, 0)


def apply(ch: SlidingBlockChannel, x, z) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    if x.shape != z.shape or x.ndim != 1:
        raise ValueError("x and z must be 1-d sequences of equal length")
    m, k = ch.m, len(x)
    y = np.full(k, NULL, dtype=np.int64)
    if k <= m:
        return y
    xw = np.lib.stride_tricks.sliding_window_view(x, m + 1)
    zw = np.lib.stride_tricks.sliding_window_view(z, m + 1)
    live = np.all(xw != NULL, axis=1)
    cols = tuple(np.where(live, xw[:, c], 0) for c in range(m + 1)) + tuple(zw[:, c] for c in range(m + 1))
    y[m:] = np.where(live, ch.g[cols], NULL)
    return y


def _block_outputs(ch: SlidingBlockChannel, n: int) -> np.ndarray:
    """Outputs at positions ``m..n-1`` for every ``(x^n, z^n)``; shape ``(X^n, Z^n, n-m)``."""
    m = ch.m
    X = np.indices((ch.x_size,) * n).reshape(n, -1).T
    Z = np.indices((ch.z_size,) * n).reshape(n, -1).T
    out = np.zeros((len(X), len(Z), max(n - m, 0)), dtype=np.int64)
    for i in range(m, n):
        xi = tuple(X[:, i - m + c][:, None] for c in range(m + 1))
        zi = tuple(Z[:, i - m + c][None, :] for c in range(m + 1))
        out[:, :, i - m] = ch.g[xi + zi]
    return out


def block_conditional(ch: SlidingBlockChannel, noise_marginal: Pmf, n: int) -> np.ndarray:
    """p(y^n | x^n) as an array of shape ``(X,)*n + block_y_sizes(n)``."""
    if n > MAX_BLOCK:
        raise ValueError(f"block length above {MAX_BLOCK}")
    pz = np.asarray(getattr(noise_marginal, "probs", noise_marginal), dtype=float)
    if pz.size != ch.z_size**n:
        raise ValueError("noise marginal does not match the block length")
    ys = ch.block_y_sizes(n)
    nx, nz = ch.x_size**n, ch.z_size**n
    check_size((nx, nz))
    ny = int(np.prod(ys))
    check_size((nx, ny))
    outs = _block_outputs(ch, n)
    if outs.shape[2]:
        yidx = np.ravel_multi_index(tuple(outs[:, :, c] for c in range(outs.shape[2])), ys[ch.m:])
    else:
        yidx = np.zeros((nx, nz), dtype=np.int64)
    flat = (np.arange(nx)[:, None] * ny + yidx).ravel()
    cond = np.bincount(flat, weights=np.broadcast_to(pz, (nx, nz)).ravel(), minlength=nx * ny)
    cond = cond.reshape(nx, ny)
    cond /= cond.sum(axis=1, keepdims=True)
    return cond.reshape((ch.x_size,) * n + ys)


def n_block_law(ch: SlidingBlockChannel, noise_marginal: Pmf, n: int) -> CausalKernel:
    """Exact causal kernel p(y^n||x^n) of ``n`` channel uses started fresh."""
    cond = block_conditional(ch, noise_marginal, n)
    joint = cond / ch.x_size**n
    _, kernel = causal_factorize(joint / math.fsum(joint.ravel()), n)
    return kernel


# -- Shannon strategies -------------------------------------------------------

@dataclass(frozen=True)
class ShannonStrategy:
    """Deterministic maps ``x_i = f_i(u_i, x^{i-1}, y^{i-1})`` plus letter laws ``p_i(u_i)``.

    ``maps[i]`` has shape ``(|U_i|,) + x_sizes[:i] + y_sizes[:i]``.
    """

    x_sizes: tuple
    y_sizes: tuple
    maps: tuple
    pmfs: tuple

    def __post_init__(self):
        object.__setattr__(self, "x_sizes", tuple(int(s) for s in self.x_sizes))
        object.__setattr__(self, "y_sizes", tuple(int(s) for s in self.y_sizes))
        maps, pmfs = [], []
        for i, (f, p) in enumerate(zip(self.maps, self.pmfs)):
            f = np.array(f, dtype=np.int64)
            p = Pmf(p).probs
            if f.shape != (p.size,) + self.x_sizes[:i] + self.y_sizes[:i]:
                raise ValueError(f"map {i} has shape {f.shape}")
            if f.min() < 0 or f.max() >= self.x_sizes[i]:
                raise ValueError(f"map {i} leaves the input alphabet")
            f.setflags(write=False)
            maps.append(f)
            pmfs.append(p)
        if len(maps) != len(self.x_sizes):
            raise ValueError("one map per position required")
        object.__setattr__(self, "maps", tuple(maps))
        object.__setattr__(self, "pmfs", tuple(pmfs))

    @property
    def n(self) -> int:
        return len(self.x_sizes)

    @property
    def u_sizes(self) -> tuple:
        return tuple(p.size for p in self.pmfs)

    def cardinality_bounds(self) -> tuple:
        x, y = max(self.x_sizes), max(self.y_sizes)
        return tuple(x ** (i + 1) * y**i for i in range(self.n))

    def respects_bounds(self) -> bool:
        return all(u <= b for u, b in zip(self.u_sizes, self.cardinality_bounds()))

    def joint_u(self) -> np.ndarray:
        t = np.ones(())
        for p in self.pmfs:
            t = np.multiply.outer(t, p)
        return t


def pass_through_strategy(x_sizes, y_sizes, pmfs=None) -> ShannonStrategy:
    """``x_i = u_i``: the strategy that ignores all history."""
    maps = []
    for i, xs in enumerate(x_sizes):
        shape = (xs,) + tuple(x_sizes[:i]) + tuple(y_sizes[:i])
        maps.append(np.broadcast_to(np.arange(xs).reshape((xs,) + (1,) * (2 * i)), shape))
    if pmfs is None:
        pmfs = [np.full(xs, 1.0 / xs) for xs in x_sizes]
    return ShannonStrategy(tuple(x_sizes), tuple(y_sizes), tuple(maps), tuple(pmfs))


def full_function_alphabet(x_sizes, y_sizes, i: int) -> np.ndarray:
    """Every map from the position-``i`` history to ``X_i``, stacked on axis 0."""
    hist = tuple(x_sizes[:i]) + tuple(y_sizes[:i])
    h = int(np.prod(hist, dtype=np.int64))
    check_size((x_sizes[i] ** h, h))
    tables = np.array(list(itertools.product(range(x_sizes[i]), repeat=h)), dtype=np.int64)
    return tables.reshape((-1,) + hist)


def full_strategy(x_sizes, y_sizes, pmfs=None) -> ShannonStrategy:
    maps = tuple(full_function_alphabet(x_sizes, y_sizes, i) for i in range(len(x_sizes)))
    if pmfs is None:
        pmfs = tuple(np.full(len(f), 1.0 / len(f)) for f in maps)
    return ShannonStrategy(tuple(x_sizes), tuple(y_sizes), maps, tuple(pmfs))


def strategy_from_input_kernel(kernel: CausalKernel, floor: float = 1e-12) -> ShannonStrategy:
    """Realise p(x^n||y^{n-1}) with position-wise independent auxiliaries.

    Position ``i`` uses one uniform variable thresholded by every history's
    conditional CDF; each interval between consecutive breakpoints becomes a
    letter of ``U_i`` whose map sends each history to its quantile.
    """
    maps, pmfs = [], []
    for i, f in enumerate(kernel.factors):
        hist_shape = f.shape[:-1]
        rows = f.reshape(-1, f.shape[-1])
        cdf = np.cumsum(rows, axis=1)[:, :-1]
        cuts = np.unique(np.concatenate([[0.0, 1.0], cdf.ravel()]))
        cuts = cuts[(cuts >= 0) & (cuts <= 1)]
        lo, hi = cuts[:-1], cuts[1:]
        keep = (hi - lo) > floor
        lo, hi = lo[keep], hi[keep]
        mid = 0.5 * (lo + hi)
        x_of = (mid[:, None, None] >= cdf[None, :, :]).sum(axis=2)    # (U, hist)
        maps.append(x_of.reshape((len(mid),) + hist_shape))
        w = hi - lo
        pmfs.append(w / w.sum())
    return ShannonStrategy(kernel.x_sizes, kernel.y_sizes, tuple(maps), tuple(pmfs))


def strategy_input_kernel(strategy: ShannonStrategy) -> CausalKernel:
    """The causal input law p(x^n||y^{n-1}) a strategy with independent U_i induces."""
    factors = []
    for i, (f, p) in enumerate(zip(strategy.maps, strategy.pmfs)):
        onehot = np.eye(strategy.x_sizes[i])[f]                 # (U_i, hist..., x_i)
        factors.append(np.tensordot(np.asarray(p, dtype=float), onehot, axes=([0], [0])))
    return CausalKernel(INPUT, strategy.x_sizes, strategy.y_sizes, tuple(factors))


def closed_loop(kernel: CausalKernel, strategy: ShannonStrategy) -> np.ndarray:
    """p(y^n | u^n) of the strategy run against a channel kernel.

    Shape ``u_sizes + y_sizes``.
    """
    if kernel.kind != CHANNEL:
        raise ValueError("closed_loop needs a channel kernel")
    if (kernel.x_sizes, kernel.y_sizes) != (strategy.x_sizes, strategy.y_sizes):
        raise ValueError("strategy and kernel alphabets differ")
    n = kernel.n
    us, ys = strategy.u_sizes, kernel.y_sizes
    check_size(us + ys)
    grid = np.indices(us + ys)
    u, y = grid[:n], grid[n:]
    xs = []
    prob = np.ones(us + ys)
    for i in range(n):
        xi = strategy.maps[i][(u[i],) + tuple(xs) + tuple(y[:i])]
        xs.append(xi)
        prob = prob * kernel.factors[i][tuple(xs) + tuple(y[:i]) + (y[i],)]
    return prob


def derived_channel(ch: SlidingBlockChannel, strategy: ShannonStrategy, noise_marginal: Pmf, n: int) -> np.ndarray:
    """p(y^n | u^n) of a Shannon strategy over ``n`` uses of a sliding-block channel."""
    return closed_loop(n_block_law(ch, noise_marginal, n), strategy)


def strategy_joint(kernel: CausalKernel, strategy: ShannonStrategy) -> JointPmf:
    """Joint law of (U^n, Y^n) grouped into two super-alphabet axes."""
    w = closed_loop(kernel, strategy)
    pu = strategy.joint_u()
    t = pu.reshape(pu.shape + (1,) * kernel.n) * w
    a = int(np.prod(strategy.u_sizes))
    t = t.reshape(a, -1)
    return JointPmf(t / math.fsum(t.ravel()))
