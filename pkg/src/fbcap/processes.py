"""Stationary ergodic noise sources, block marginals and super-process tools.

Every model is reduced internally to a finite hidden-Markov description
``(P, E, pi)``: state transitions ``P``, emissions ``E[s, z]`` and a
stationary initial law ``pi``. i.i.d. sources use one state, Markov sources
emit their state, and a periodic cycle is a deterministic ring of states
started at a uniformly random phase.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .constants import NORM_TOL
from .prob import Alphabet, Pmf, check_size

IID = "iid"
MARKOV = "markov"
HIDDEN_MARKOV = "hidden_markov"
PERIODIC = "periodic"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """PCG64 generator keyed by ``(seed, *keys)``; portable across platforms."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


def derive_seed(seed: int, *keys: int) -> int:
    """Integer seed for a sub-stream, e.g. one trial of an experiment."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, np.uint64)[0] >> 1)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Left Perron vector of an irreducible stochastic matrix."""
    P = np.asarray(P, dtype=float)
    k = P.shape[0]
    # solve pi (P - I) = 0 with sum(pi) = 1 in the least-squares sense
    A = np.vstack([P.T - np.eye(k), np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _primitive_cycle(cycle: tuple) -> tuple:
    d = len(cycle)
    for p in range(1, d + 1):
        if d % p == 0 and cycle == cycle[:p] * (d // p):
            return cycle[:p]
    return cycle


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    alphabet: Alphabet
    transition: np.ndarray
    emission: np.ndarray
    stationary: np.ndarray
    cycle: tuple | None = None

    def __post_init__(self):
        P, E, pi = (np.asarray(a, dtype=float) for a in (self.transition, self.emission, self.stationary))
        if np.max(np.abs(P.sum(axis=1) - 1)) > 1e-10 or np.any(P < 0):
            raise ValueError("transition rows must be probability vectors")
        if np.max(np.abs(E.sum(axis=1) - 1)) > 1e-10 or np.any(E < 0):
            raise ValueError("emission rows must be probability vectors")
        if E.shape != (P.shape[0], self.alphabet.size):
            raise ValueError("emission table shape mismatch")
        if abs(pi.sum() - 1) > NORM_TOL or np.max(np.abs(pi @ P - pi)) > 1e-10:
            raise ValueError("supplied stationary law does not satisfy pi P = pi")
        for name, a in (("transition", P), ("emission", E), ("stationary", pi)):
            a = a.copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    # -- constructors --------------------------------------------------------
    @classmethod
    def iid(cls, probs) -> "NoiseModel":
        p = Pmf(probs).probs
        return cls(IID, Alphabet(p.size), np.ones((1, 1)), p[None, :], np.ones(1))

    @classmethod
    def markov(cls, transition, stationary=None) -> "NoiseModel":
        P = np.asarray(transition, dtype=float)
        pi = stationary_distribution(P) if stationary is None else np.asarray(stationary, dtype=float)
        return cls(MARKOV, Alphabet(P.shape[0]), P, np.eye(P.shape[0]), pi)

    @classmethod
    def symmetric_markov(cls, persistence: float, size: int = 2) -> "NoiseModel":
        """Markov noise that keeps its symbol with probability ``persistence``."""
        off = (1 - persistence) / (size - 1)
        P = np.full((size, size), off)
        np.fill_diagonal(P, persistence)
        return cls.markov(P, np.full(size, 1.0 / size))

    @classmethod
    def hidden_markov(cls, transition, emission, stationary=None) -> "NoiseModel":
        P = np.asarray(transition, dtype=float)
        E = np.asarray(emission, dtype=float)
        pi = stationary_distribution(P) if stationary is None else np.asarray(stationary, dtype=float)
        return cls(HIDDEN_MARKOV, Alphabet(E.shape[1]), P, E, pi)

    @classmethod
    def periodic(cls, cycle, size: int | None = None) -> "NoiseModel":
        cyc = tuple(int(c) for c in cycle)
        if not cyc:
            raise ValueError("periodic cycle must be nonempty")
        size = max(cyc) + 1 if size is None else size
        d = len(cyc)
        P = np.roll(np.eye(d), 1, axis=1)
        E = np.zeros((d, size))
        E[np.arange(d), cyc] = 1.0
        return cls(PERIODIC, Alphabet(size), P, E, np.full(d, 1.0 / d), cyc)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]


@dataclass(frozen=True)
class SamplePath:
    symbols: np.ndarray
    seed: int | None = None
    alphabet_size: int | None = None

    def __len__(self) -> int:
        return len(self.symbols)

    def to_text(self) -> str:
        return "".join(f"{int(s)}\n" for s in self.symbols)

    @classmethod
    def from_text(cls, text: str, alphabet_size: int | None = None) -> "SamplePath":
        return cls(np.array([int(t) for t in text.split()], dtype=np.int64), None, alphabet_size)


def _symbols(path) -> np.ndarray:
    return np.asarray(getattr(path, "symbols", path), dtype=np.int64)


def sample_path(model: NoiseModel, length: int, seed: int) -> SamplePath:
    if length < 1:
        raise ValueError("length must be positive")
    rng = make_rng(seed)
    size = model.alphabet.size
    if model.kind == IID:
        z = rng.choice(size, size=length, p=model.emission[0])
        return SamplePath(z.astype(np.int64), seed, size)
    if model.kind == PERIODIC:
        d = model.n_states
        states = (rng.integers(d) + np.arange(length)) % d
    else:
        states = _markov_states(model, length, rng)
    E = model.emission
    if np.all((E == 0) | (E == 1)):
        z = E[states].argmax(axis=1)
    else:
        cum = np.cumsum(E, axis=1)
        u = rng.random(length)
        z = (u[:, None] >= cum[states]).sum(axis=1)
        z = np.minimum(z, size - 1)
    return SamplePath(z.astype(np.int64), seed, size)


def _markov_states(model: NoiseModel, length: int, rng: np.random.Generator) -> np.ndarray:
    cum0 = np.cumsum(model.stationary).tolist()
    rows = [np.cumsum(r).tolist() for r in model.transition]
    last = model.n_states - 1
    u = rng.random(length).tolist()
    out = [0] * length
    s = min(bisect.bisect_right(cum0, u[0]), last)
    out[0] = s
    for t in range(1, length):
        s = min(bisect.bisect_right(rows[s], u[t]), last)
        out[t] = s
    return np.array(out, dtype=np.int64)


def _forward_blocks(model: NoiseModel, n: int, init: np.ndarray) -> np.ndarray:
    """Block law of ``n`` consecutive symbols when the first state ~ ``init``."""
    size, S = model.alphabet.size, model.n_states
    check_size((size,) * n + (S,))
    P, E = model.transition, model.emission
    t = init[None, :] * E.T                     # (z1, s1)
    for _ in range(1, n):
        nxt = t @ P                             # (z^i, s_{i+1})
        t = nxt[..., None, :] * E.T             # (z^i, z_{i+1}, s_{i+1})
        t = t.reshape(-1, S)
    return t.sum(axis=1)


def block_marginal(model: NoiseModel, n: int) -> Pmf:
    """Exact stationary law of ``n`` consecutive symbols, flattened row-major."""
    p = _forward_blocks(model, n, model.stationary)
    return Pmf(p / math.fsum(p))


# -- ergodic decomposition of the super process ----------------------------

@dataclass(frozen=True)
class ErgodicDecomposition:
    n: int
    n_prime: int
    weights: tuple
    modes: tuple           # Pmf over Z^n per mode
    initial: tuple         # state law at the start of a block, per mode
    phase_map: tuple       # mode k -> mode phase_map[k] under one shift


def chain_period(P: np.ndarray, support: np.ndarray | None = None) -> tuple[int, np.ndarray]:
    """Period ``d`` of an irreducible chain and each state's cyclic class."""
    P = np.asarray(P)
    k = P.shape[0]
    states = np.arange(k) if support is None else np.flatnonzero(support)
    level = {int(states[0]): 0}
    queue = [int(states[0])]
    g = 0
    while queue:
        u = queue.pop(0)
        for v in np.flatnonzero(P[u] > 0):
            v = int(v)
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    if set(level) != set(int(s) for s in states):
        raise ValueError("chain is not irreducible on its stationary support")
    d = abs(g) if g else 1
    classes = np.full(k, -1)
    for s, lv in level.items():
        classes[s] = lv % d
    return d, classes


def super_decompose(model: NoiseModel, n: int) -> ErgodicDecomposition:
    """Split the n-th order super process into its ergodic modes.

    For a chain of period ``d`` the super process sampled every ``n`` steps has
    ``gcd(d, n)`` modes, each a union of cyclic classes of equal mass.
    """
    if model.kind == HIDDEN_MARKOV:
        raise NotImplementedError("ergodic modes are only computed for iid, markov and periodic models")
    if model.kind == IID:
        return ErgodicDecomposition(n, 1, (1.0,), (block_marginal(model, n),), (model.stationary,), (0,))
    if model.kind == PERIODIC:
        reduced = NoiseModel.periodic(_primitive_cycle(model.cycle), model.alphabet.size)
        return super_decompose_chain(reduced, n)
    return super_decompose_chain(model, n)


def super_decompose_chain(model: NoiseModel, n: int) -> ErgodicDecomposition:
    pi = model.stationary
    d, classes = chain_period(model.transition, pi > 0)
    n_prime = math.gcd(d, n)
    modes, inits = [], []
    for k in range(n_prime):
        mask = (classes >= 0) & (classes % n_prime == k)
        init = np.where(mask, pi, 0.0)
        init = init / init.sum()
        p = _forward_blocks(model, n, init)
        modes.append(Pmf(p / math.fsum(p)))
        inits.append(init)
    phase = tuple((k + 1) % n_prime for k in range(n_prime))
    return ErgodicDecomposition(n, n_prime, (1.0 / n_prime,) * n_prime, tuple(modes), tuple(inits), phase)


def shift_initial(model: NoiseModel, init: np.ndarray) -> np.ndarray:
    """State law one time step later."""
    return np.asarray(init) @ model.transition


def mixture(decomp: ErgodicDecomposition) -> np.ndarray:
    return reduce(np.add, (w * m.probs for w, m in zip(decomp.weights, decomp.modes)))


# -- Gallager's shifted construction ------------------------------------------

def gallager_interleave(z, n: int, L: int) -> SamplePath:
    """Copy source positions into ``L n^2`` outputs, skipping every ``(Ln+1)``-st.

    Output position ``i`` of segment ``j`` (both 1-based, segments of length
    ``Ln``) is source position ``i + j - 1``.
    """
    s = _symbols(z)
    seg = L * n
    if len(s) != seg * n + n:
        raise ValueError(f"need a path of length {seg * n + n}, got {len(s)}")
    out = np.concatenate([s[j * seg + j:(j + 1) * seg + j] for j in range(n)])
    return SamplePath(out, getattr(z, "seed", None), getattr(z, "alphabet_size", None))


def empirical_super_freq(path, n: int, alphabet_size: int | None = None) -> Pmf:
    """Relative frequencies of consecutive non-overlapping n-blocks."""
    s = _symbols(path)
    if len(s) % n:
        raise ValueError("path length must be a multiple of n")
    size = alphabet_size or getattr(path, "alphabet_size", None) or int(s.max()) + 1
    check_size((size,) * n)
    idx = np.ravel_multi_index(tuple(s.reshape(-1, n).T), (size,) * n)
    counts = np.bincount(idx, minlength=size**n).astype(float)
    return Pmf(counts / counts.sum())
