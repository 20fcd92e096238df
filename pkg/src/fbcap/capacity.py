"""Capacity solvers: Blahut-Arimoto, feedback (directed information) maximisers,
Shannon-strategy equivalence checks and the superadditivity table.

Values in :class:`CapacityResult` are bits per channel use; the lemma checks
report un-normalised totals over the block.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import channel as chmod
from .constants import BA_TOL, GRID_RESOLUTION, MULTISTARTS
from .processes import NoiseModel, block_marginal, make_rng
from .prob import (
    CHANNEL, INPUT, CausalKernel, compose, directed_information, input_from_block,
    mutual_information,
)

LN2 = math.log(2)


@dataclass
class CapacityResult:
    value: float
    maximizer: object
    iterations: int
    gap: float
    converged: bool = True
    trace: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)


# -- Blahut-Arimoto -----------------------------------------------------------

def _divergences(W: np.ndarray, q: np.ndarray) -> np.ndarray:
    """D(W(.|x) || q) in nats for every row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(W > 0, W * np.log(W / np.where(q > 0, q, 1.0)[None, :]), 0.0)
    return r.sum(axis=1)


def blahut_arimoto(W, tol: float = BA_TOL, max_iter: int = 200_000, uses: int = 1,
                   p0=None) -> CapacityResult:
    """Capacity of the row-stochastic matrix ``W[x, y]``.

    Stops once the bracket ``max_x D(W_x||q) - I`` drops below ``tol`` bits;
    that bracket bounds the distance to capacity.
    """
    W = np.asarray(W, dtype=float)
    W = W.reshape(W.shape[0], -1) if W.ndim != 2 else W
    if np.any(W < 0) or np.max(np.abs(W.sum(axis=1) - 1)) > 1e-9:
        raise ValueError("W must be row-stochastic")
    W = W[:, W.sum(axis=0) > 0]
    with np.errstate(divide="ignore"):
        wlogw = np.where(W > 0, W * np.log(np.where(W > 0, W, 1.0)), 0.0).sum(axis=1)
    p = np.full(W.shape[0], 1.0 / W.shape[0]) if p0 is None else np.asarray(p0, dtype=float)
    trace = []
    lower = upper = 0.0
    for it in range(1, max_iter + 1):
        q = p @ W
        D = wlogw - W @ np.log(q)
        lower = float(p @ D) / LN2
        upper = float(D.max()) / LN2
        if trace and lower < trace[-1] - 1e-12:
            raise AssertionError("Blahut-Arimoto objective decreased")
        trace.append(lower)
        if upper - lower < tol:
            return CapacityResult(lower / uses, p, it, (upper - lower) / uses, True, trace)
        p = p * np.exp(D - D.max())
        p /= p.sum()
    return CapacityResult(lower / uses, p, max_iter, (upper - lower) / uses, False, trace)


def nonfeedback_capacity(kernel: CausalKernel, tol: float = BA_TOL, max_iter: int = 200_000) -> CapacityResult:
    """C_n = max over p(x^n) of I(X^n;Y^n)/n for a channel kernel."""
    res = blahut_arimoto(kernel.conditional(), tol=tol, max_iter=max_iter, uses=kernel.n)
    res.maximizer = res.maximizer.reshape(kernel.x_sizes)
    return res


def block_capacity(ch: chmod.SlidingBlockChannel, noise: NoiseModel, n: int, tol: float = BA_TOL) -> CapacityResult:
    return nonfeedback_capacity(chmod.n_block_law(ch, block_marginal(noise, n), n), tol)


# -- directed information objective over causal input kernels ----------------

class _DirectedObjective:
    """I(X^n -> Y^n) = H(Y^n) - H(Y^n||X^n) for a fixed channel kernel.

    The joint is affine in any single slice ``q_i(.|h)`` of the input kernel,
    so restricted to one slice the objective is concave.
    """

    def __init__(self, kernel: CausalKernel):
        if kernel.kind != CHANNEL:
            raise ValueError("need a channel kernel")
        self.kernel = kernel
        self.n = kernel.n
        self.shape = kernel.x_sizes + kernel.y_sizes
        w = kernel.product()
        with np.errstate(divide="ignore"):
            self.logw = np.where(w > 0, np.log2(np.where(w > 0, w, 1.0)), 0.0)
        self.w_exp = [kernel.expanded(i) for i in range(self.n)]
        self.x_axes = tuple(range(self.n))

    def expanded_input(self, q, i):
        n = self.n
        src = list(range(i)) + [n + k for k in range(i)] + [i]
        f = np.transpose(q[i], np.argsort(src))
        shape = [1] * (2 * n)
        for ax in src:
            shape[ax] = self.shape[ax]
        return f.reshape(shape)

    def joint(self, q) -> np.ndarray:
        t = np.ones(self.shape)
        for i in range(self.n):
            t = t * self.expanded_input(q, i) * self.w_exp[i]
        return t

    def value(self, joint: np.ndarray) -> float:
        py = joint.sum(axis=self.x_axes)
        py = py[py > 0]
        return float(-(py * np.log2(py)).sum() + (joint * self.logw).sum())

    def rest(self, q, i) -> np.ndarray:
        t = np.ones(self.shape)
        for j in range(self.n):
            if j != i:
                t = t * self.expanded_input(q, j)
            t = t * self.w_exp[j]
        return t


def _hist_index(n: int, i: int, h: tuple) -> tuple:
    """Full-table index selecting history ``h = (x^{i}, y^{i})`` with free remaining axes."""
    hx, hy = h[:i], h[i:]
    idx = [slice(None)] * (2 * n)
    for k, v in enumerate(hx):
        idx[k] = v
    for k, v in enumerate(hy):
        idx[n + k] = v
    return tuple(idx)


def _slice_terms(obj: _DirectedObjective, R: np.ndarray, i: int, h: tuple):
    """Per-letter y-marginal contributions ``c_a`` and linear terms ``l_a`` of one slice."""
    n = obj.n
    idx = _hist_index(n, i, h)
    block = R[idx]                      # axes: x_{i..n-1}, y_{i..n-1}; x_i first
    lw = obj.logw[idx]
    K = block.shape[0]
    x_rest = tuple(range(1, n - i))
    c = np.stack([block[a].sum(axis=tuple(ax - 1 for ax in x_rest)) if x_rest else block[a] for a in range(K)])
    l_terms = np.array([(block[a] * lw[a]).sum() for a in range(K)])
    return c, l_terms


def _embed_y(obj: _DirectedObjective, i: int, h: tuple) -> tuple:
    """Index into the full Y^n marginal for the slice's fixed y-history."""
    hy = h[i:]
    return tuple(hy) + (slice(None),) * (obj.n - i)


def _phi(r_full, yidx, c, q, l_terms):
    p = r_full.copy()
    p[yidx] += np.tensordot(q, c, axes=1)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum() + q @ l_terms)


def _grad(r_full, yidx, c, q, l_terms):
    p = r_full.copy()
    p[yidx] += np.tensordot(q, c, axes=1)
    sub = p[yidx]
    with np.errstate(divide="ignore"):
        lg = np.where(sub > 0, np.log2(np.where(sub > 0, sub, 1.0)), 0.0)
    return -np.array([(ca * lg).sum() for ca in c]) + l_terms


def _maximise_slice(r_full, yidx, c, q, l_terms):
    """Exact pairwise line maximisation of a concave function on the simplex."""
    q = q.copy()
    K = q.size
    best = _phi(r_full, yidx, c, q, l_terms)
    for _ in range(2 if K > 2 else 1):
        for a, b in itertools.combinations(range(K), 2):
            s = q[a] + q[b]
            if s <= 0:
                continue

            def neg(t, a=a, b=b, s=s):
                qq = q.copy()
                qq[a], qq[b] = t, s - t
                return -_phi(r_full, yidx, c, qq, l_terms)

            r = minimize_scalar(neg, bounds=(0.0, s), method="bounded", options={"xatol": 1e-13 * max(s, 1e-300)})
            cand = [r.x, 0.0, s]
            vals = [-neg(t) for t in cand]
            k = int(np.argmax(vals))
            if vals[k] > best:
                best = vals[k]
                q[a], q[b] = cand[k], s - cand[k]
    return q, best


def _kernel_from_q(kernel: CausalKernel, q) -> CausalKernel:
    fs = tuple(np.clip(f, 0, None) / np.clip(f, 0, None).sum(axis=-1, keepdims=True) for f in q)
    return CausalKernel(INPUT, kernel.x_sizes, kernel.y_sizes, fs)


def _fw_gap(obj, q) -> float:
    """Sum over slices of the Frank-Wolfe gap; bounds each slice's remaining gain."""
    gap = 0.0
    joint = obj.joint(q)
    py = joint.sum(axis=obj.x_axes)
    for i in range(obj.n):
        R = obj.rest(q, i)
        for h in np.ndindex(q[i].shape[:-1]):
            c, l_terms = _slice_terms(obj, R, i, h)
            yidx = _embed_y(obj, i, h)
            cur = np.tensordot(q[i][h], c, axes=1)
            r_full = py.copy()
            r_full[yidx] -= cur
            g = _grad(r_full, yidx, c, q[i][h], l_terms)
            gap += float(g.max() - q[i][h] @ g)
    return gap


def _ascent_run(obj: _DirectedObjective, q, tol: float, max_sweeps: int):
    q = [f.copy() for f in q]
    joint = obj.joint(q)
    val = obj.value(joint)
    start = val
    trace = [val]
    for sweep in range(1, max_sweeps + 1):
        for i in range(obj.n):
            R = obj.rest(q, i)
            py = (R * obj.expanded_input(q, i)).sum(axis=obj.x_axes)
            for h in np.ndindex(q[i].shape[:-1]):
                c, l_terms = _slice_terms(obj, R, i, h)
                yidx = _embed_y(obj, i, h)
                old = q[i][h].copy()
                r_full = py.copy()
                r_full[yidx] -= np.tensordot(old, c, axes=1)
                new, _ = _maximise_slice(r_full, yidx, c, old, l_terms)
                q[i][h] = new
                py = r_full
                py[yidx] += np.tensordot(new, c, axes=1)
        new_val = obj.value(obj.joint(q))
        if new_val < trace[-1] - 1e-12:
            raise AssertionError("coordinate ascent decreased the objective")
        trace.append(new_val)
        if new_val - trace[-2] < tol * 1e-3:
            gap = _fw_gap(obj, q)
            if gap < tol:
                return q, new_val, start, sweep, gap, True, trace
    return q, trace[-1], start, max_sweeps, _fw_gap(obj, q), False, trace


def cfb_ascent(kernel: CausalKernel, tol: float = 1e-7, multistarts: int = MULTISTARTS,
               seed: int = 0, max_sweeps: int = 2000) -> CapacityResult:
    """C_FB,n by cyclic coordinate ascent over the slices of p(x^n||y^{n-1}).

    Starts are seeded Dirichlet draws; ties go to the lowest start index.
    """
    obj = _DirectedObjective(kernel)
    best = None
    starts, finals = [], []
    for s in range(multistarts):
        rng = make_rng(seed, s)
        q0 = [rng.dirichlet(np.ones(kernel.x_sizes[i]), size=_in_hist(kernel, i)) for i in range(kernel.n)]
        q, val, start, sweeps, gap, ok, trace = _ascent_run(obj, q0, tol, max_sweeps)
        starts.append(start / kernel.n)
        finals.append(val / kernel.n)
        if best is None or val > best[1] + 1e-12:
            best = (q, val, sweeps, gap, ok, trace, s)
    q, val, sweeps, gap, ok, trace, s = best
    k = _kernel_from_q(kernel, q)
    value = directed_information(compose(k, kernel)).value / kernel.n
    return CapacityResult(value, k, sweeps, gap / kernel.n, ok, trace,
                          {"start_values": starts, "final_values": finals, "best_start": s, "seed": seed})


def _in_hist(kernel: CausalKernel, i: int) -> tuple:
    return kernel.x_sizes[:i] + kernel.y_sizes[:i]


# -- grid oracle ----------------------------------------------------------------

def cfb_exhaustive(kernel: CausalKernel, grid_resolution: float = GRID_RESOLUTION) -> CapacityResult:
    """Exact maximum of I(X^n->Y^n)/n over the grid of binary causal input kernels (n <= 2).

    For n = 2 the objective splits as I(X_1;Y_1) + sum_y1 p(y1) I(X^2;Y_2|Y_1=y1)
    and, for a fixed first factor, each ``y1`` term depends only on its own
    slices, so the full grid maximum is found column by column.
    """
    if kernel.kind != CHANNEL:
        raise ValueError("need a channel kernel")
    n = kernel.n
    if n > 2 or any(s != 2 for s in kernel.x_sizes):
        raise ValueError("grid oracle supports binary inputs and n <= 2")
    steps = int(round(1 / grid_resolution))
    grid = np.arange(steps + 1) / steps
    w1 = kernel.factors[0]                          # (x1, y1)
    best = (-np.inf, None)
    if n == 1:
        for a in grid:
            px = np.array([1 - a, a])
            v = mutual_information(px[:, None] * w1)
            if v > best[0] + 1e-15:
                best = (v, [px])
        q = [best[1][0]]
    else:
        w2 = kernel.factors[1]                      # (x1, x2, y1, y2)
        b0, b1 = np.meshgrid(grid, grid, indexing="ij")
        b0, b1 = b0.ravel(), b1.ravel()
        q2 = np.stack([np.stack([1 - b0, b0], -1), np.stack([1 - b1, b1], -1)], 1)   # (G, x1, x2)
        ny1 = w1.shape[1]
        for a in grid:
            px = np.array([1 - a, a])
            pxy = px[:, None] * w1
            total = mutual_information(pxy)
            choice = []
            py1 = pxy.sum(axis=0)
            for y1 in range(ny1):
                if py1[y1] <= 0:
                    choice.append(np.full((2, 2), 0.5))
                    continue
                pcx = pxy[:, y1] / py1[y1]
                j = pcx[None, :, None, None] * q2[:, :, :, None] * w2[None, :, :, y1, :]   # (G, x1, x2, y2)
                j = j.reshape(len(q2), 4, -1)
                pa = j.sum(axis=2, keepdims=True)
                pb = j.sum(axis=1, keepdims=True)
                with np.errstate(divide="ignore", invalid="ignore"):
                    terms = np.where(j > 0, j * np.log2(j / (pa * pb)), 0.0)
                mi = terms.sum(axis=(1, 2))
                g = int(np.argmax(mi))
                total += py1[y1] * mi[g]
                choice.append(q2[g])
            if total > best[0] + 1e-15:
                best = (total, [px, np.stack(choice, axis=1)])
        px, f2 = best[1]
        q = [px, f2]                                # f2 axes (x1, y1, x2)
    k = CausalKernel(INPUT, kernel.x_sizes, kernel.y_sizes, tuple(q))
    value = directed_information(compose(k, kernel)).value / n
    return CapacityResult(value, k, len(grid), grid_resolution, True,
                          info={"grid_points": len(grid) ** (1 if n == 1 else 3)})


# -- product-input maximisation (Shannon strategies, history-blind inputs) -------

def maximize_product_input(W: np.ndarray, tol: float = 1e-8, multistarts: int = MULTISTARTS,
                           seed: int = 0, max_iter: int = 20_000, uniform_start: bool = True, init=None):
    """max over p(u_1)...p(u_n) of I(U^n; Y) for a channel ``W`` of shape ``u_sizes + (|Y|,)``.

    Block-coordinate Blahut-Arimoto: each update maximises the double-max
    functional in one factor, so the objective never decreases. Start 0 is
    ``init`` when given, else uniform (unless ``uniform_start`` is off).
    Returns ``(value_bits, pmfs, info)``.
    """
    W = np.asarray(W, dtype=float)
    us = W.shape[:-1]
    n = len(us)
    Wf = W.reshape(-1, W.shape[-1])
    best = None
    for s in range(multistarts):
        rng = make_rng(seed, s)
        if s == 0 and init is not None:
            ps = [np.asarray(p, dtype=float) / np.sum(p) for p in init]
        elif s == 0 and uniform_start:
            ps = [np.full(u, 1.0 / u) for u in us]
        else:
            ps = [rng.dirichlet(np.ones(u)) for u in us]
        prev = -np.inf
        for it in range(max_iter):
            worst = 0.0
            for i in range(n):
                pu = _outer(ps)
                q = pu.ravel() @ Wf
                D = _divergences(Wf, q).reshape(us)
                g = _contract_except(D, ps, i)
                worst = max(worst, float(g.max() - ps[i] @ g) / LN2)
                new = ps[i] * np.exp(g - g.max())
                ps[i] = new / new.sum()
            pu = _outer(ps)
            val = float(pu.ravel() @ _divergences(Wf, pu.ravel() @ Wf)) / LN2
            if val < prev - 1e-12:
                raise AssertionError("product Blahut-Arimoto decreased")
            prev = val
            if worst < tol:
                break
        if best is None or val > best[0] + 1e-12:
            best = (val, [p.copy() for p in ps], {"iterations": it + 1, "gap": worst, "start": s})
    return best


def _outer(ps):
    t = np.ones(())
    for p in ps:
        t = np.multiply.outer(t, p)
    return t


def _contract_except(D: np.ndarray, ps, i: int) -> np.ndarray:
    t = D
    for j in reversed(range(len(ps))):
        if j != i:
            t = np.tensordot(t, ps[j], axes=([j], [0]))
    return t


def history_blind_rate(kernel: CausalKernel, multistarts: int = MULTISTARTS, seed: int = 0) -> CapacityResult:
    """Best rate with independent input letters, x_i = u_i (no use of any history)."""
    W = kernel.conditional().reshape(kernel.x_sizes + (-1,))
    val, ps, info = maximize_product_input(W, multistarts=multistarts, seed=seed)
    return CapacityResult(val / kernel.n, ps, info["iterations"], info["gap"] / kernel.n, True, info=info)


# -- Shannon-strategy equivalences ----------------------------------------------

@dataclass(frozen=True)
class StateChannel:
    ps: np.ndarray            # p(s)
    W: np.ndarray             # p(y | x, s), shape (X, S, Y)

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        ps = np.asarray(self.ps, dtype=float)
        if np.max(np.abs(W.sum(axis=-1) - 1)) > 1e-12 or abs(ps.sum() - 1) > 1e-12:
            raise ValueError("state channel tables must be normalised")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "ps", ps)


@dataclass(frozen=True)
class LemmaCheck:
    lhs: float
    rhs: float
    gap: float
    under_capped: bool = False
    info: dict = field(default_factory=dict)


def state1_min_cap(sc: StateChannel) -> int:
    X, S = sc.W.shape[:2]
    return (X - 1) * S + 1


def _binary_capacity_direct(W: np.ndarray) -> float:
    """Capacity of a two-input channel by bounded scalar search on p(x=1)."""
    def neg(a):
        px = np.array([1 - a, a])
        return -mutual_information(px[:, None] * W)
    r = minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return max(-r.fun, -neg(0.0), -neg(1.0), -neg(0.5))


def verify_state1(sc: StateChannel, cardinality_cap: int | None = None, tol: float = 1e-10) -> LemmaCheck:
    """Compare max I(U;Y,S) over Shannon strategies with max I(X;Y|S).

    The left side runs Blahut-Arimoto on the channel u -> (y, s) whose input
    alphabet is every map s -> x, then keeps the ``cardinality_cap`` heaviest
    maps and re-optimises on those alone.
    """
    X, S, Y = sc.W.shape
    cap = state1_min_cap(sc) if cardinality_cap is None else int(cardinality_cap)
    f = np.array(list(itertools.product(range(X), repeat=S)))     # (U, S), lexicographic
    # p(y, s | u) = p(s) p(y | f(u, s), s)
    Wu = (sc.ps[None, :, None] * sc.W[f, np.arange(S)[None, :], :]).reshape(len(f), -1)
    full = blahut_arimoto(Wu, tol=tol)
    keep = np.sort(np.argsort(-full.maximizer, kind="stable")[:cap])
    res = full if len(keep) == len(f) else blahut_arimoto(Wu[keep], tol=tol)
    if X == 2:
        rhs = sum(sc.ps[s] * _binary_capacity_direct(sc.W[:, s, :]) for s in range(S))
    else:
        rhs = sum(sc.ps[s] * blahut_arimoto(sc.W[:, s, :], tol=tol).value for s in range(S))
    return LemmaCheck(res.value, rhs, abs(res.value - rhs), cap < state1_min_cap(sc),
                      {"cap": cap, "uncapped": full.value, "map": f[keep].tolist(), "pu": res.maximizer.tolist()})


def verify_state2(kernel: CausalKernel, cardinality_caps=None, multistarts: int = MULTISTARTS,
                  seed: int = 0, grid_resolution: float = GRID_RESOLUTION) -> LemmaCheck:
    """Compare max I(U^n;Y^n) over Shannon strategies with max I(X^n->Y^n) (totals in bits).

    The left side optimises product laws over every distinct strategy map.
    I(U^n;Y^n) depends on p(u^n) only through the input law it induces, so
    that law is re-expressed with the quantile construction, which needs at
    most ``H_i(|X|-1)+1`` letters at position ``i`` (``H_i`` histories), and
    re-optimised on those letters. Caps below that keep the heaviest letters.
    """
    n = kernel.n
    full = chmod.full_strategy(kernel.x_sizes, kernel.y_sizes)
    bounds = full.cardinality_bounds()
    caps = bounds if cardinality_caps is None else tuple(cardinality_caps)
    W = chmod.closed_loop(kernel, full).reshape(full.u_sizes + (-1,))
    val_full, ps, _ = maximize_product_input(W, multistarts=multistarts, seed=seed)
    support = [int((p > 1e-9).sum()) for p in ps]
    induced = chmod.strategy_input_kernel(chmod.ShannonStrategy(kernel.x_sizes, kernel.y_sizes, full.maps, tuple(ps)))
    small = chmod.strategy_from_input_kernel(induced)
    keep = [np.sort(np.argsort(-p, kind="stable")[:c]) for p, c in zip(small.pmfs, caps)]
    maps = tuple(m[k] for m, k in zip(small.maps, keep))
    init = tuple(np.asarray(p)[k] for p, k in zip(small.pmfs, keep))
    Wk = chmod.closed_loop(kernel, chmod.ShannonStrategy(kernel.x_sizes, kernel.y_sizes, maps, init))
    val, ps_k, _ = maximize_product_input(Wk.reshape(tuple(len(k) for k in keep) + (-1,)),
                                          multistarts=1, init=init)
    strategy = chmod.ShannonStrategy(kernel.x_sizes, kernel.y_sizes, maps, tuple(ps_k))
    oracle = cfb_exhaustive(kernel, grid_resolution)
    rhs = oracle.value * n
    under = any(c < b for c, b in zip(caps, _state2_min_caps(kernel)))
    return LemmaCheck(val, rhs, abs(val - rhs), under,
                      {"caps": list(caps), "support": support, "uncapped": val_full,
                       "strategy": strategy, "oracle": oracle})


def _state2_min_caps(kernel: CausalKernel) -> tuple:
    x, y = max(kernel.x_sizes), max(kernel.y_sizes)
    return tuple((x - 1) * x**i * y**i + 1 for i in range(kernel.n))


# -- superadditivity ---------------------------------------------------------------

@dataclass(frozen=True)
class SuperadditivityTable:
    n_values: tuple
    n_c_n: dict
    violations: tuple
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violations


def superadditivity_check(ch: chmod.SlidingBlockChannel, noise: NoiseModel, n_list, tol: float = 1e-6,
                          ba_tol: float = 1e-9) -> SuperadditivityTable:
    """Tabulate n C_n and list every (a, b) with (a+b)C_{a+b} < aC_a + bC_b - tol."""
    values = {}
    for n in sorted(set(n_list)):
        if n <= ch.m:
            values[n] = 0.0          # every output in the block is null
        else:
            values[n] = n * block_capacity(ch, noise, n, ba_tol).value
    bad = []
    for a, b in itertools.combinations_with_replacement(sorted(values), 2):
        if a + b in values and values[a + b] < values[a] + values[b] - tol:
            bad.append((a, b, values[a + b], values[a] + values[b]))
    return SuperadditivityTable(tuple(sorted(values)), values, tuple(bad), tol)


def nonfeedback_input_kernel(kernel: CausalKernel, px: np.ndarray) -> CausalKernel:
    return input_from_block(px, kernel.y_sizes)
