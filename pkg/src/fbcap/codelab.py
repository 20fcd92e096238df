"""Random-coding experiments: the interleaved nonfeedback scheme and the
strategy-codebook feedback scheme, with Monte Carlo error estimates.

Layout of one block of ``k = L n^2 + n`` channel uses: a codeword is ``Ln``
super letters of ``n`` symbols, sent as ``n`` segments of ``Ln`` symbols, each
segment followed by a null separator. Super letter ``i`` (0-based) lies in
segment ``j = i // L`` at transmitted positions ``i n + j .. i n + j + n - 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import beta

from . import channel as chmod
from .constants import DEFAULT_EPSILON, EXHAUSTIVE_AUTO_ROWS, NULL, ROW_CAP
from .processes import NoiseModel, block_marginal, derive_seed, make_rng, sample_path
from .prob import JointPmf, Pmf
from .typicality import TypicalityParams, log2_prob_typical_with, typical_rows

CSV_COLUMNS = ("n", "L", "R", "actual_rate", "epsilon", "trials", "errors", "pe", "ci_lo", "ci_hi", "seed")
DECODERS = ("auto", "exhaustive", "ensemble")


class RowCapError(ValueError):
    pass


def block_length(n: int, L: int) -> int:
    return L * n * n + n


def codebook_bits(n: int, L: int, R: float) -> int:
    """``ceil(kR)``; the tiny offset keeps exact products like 401 * 0.25 from rounding up."""
    if R < 0:
        raise ValueError("rate must be nonnegative")
    return max(0, math.ceil(block_length(n, L) * R - 1e-12))


def actual_rate(n: int, L: int, R: float) -> float:
    return codebook_bits(n, L, R) / block_length(n, L)


def _check_rows(bits: int, row_cap: int) -> int:
    if bits > math.log2(row_cap):
        raise RowCapError(f"2^{bits} codewords exceed the row cap {row_cap}")
    return 2**bits


def _small_dtype(size: int):
    return np.uint8 if size <= 2**8 else np.uint16 if size <= 2**16 else np.int64


@dataclass(frozen=True)
class CodebookNF:
    n: int
    L: int
    R: float
    k: int
    rows: np.ndarray          # (2^bits, Ln) flat indices into X^n, row-major
    x_size: int
    seed: int

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class CodebookFB:
    n: int
    L: int
    R: float
    k: int
    rows: np.ndarray          # (2^bits, Ln) flat indices into U_1 x ... x U_n
    strategy: chmod.ShannonStrategy
    seed: int

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


def _draw_rows(probs: np.ndarray, n_rows: int, length: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    out = rng.choice(probs.size, size=(n_rows, length), p=probs)
    return out.astype(_small_dtype(probs.size))


def build_codebook_nf(pstar: Pmf, n: int, L: int, R: float, seed: int, x_size: int | None = None,
                      row_cap: int = ROW_CAP) -> CodebookNF:
    """Codebook of ``2^ceil(kR)`` rows with i.i.d. super letters drawn from ``pstar`` over X^n."""
    p = np.asarray(getattr(pstar, "probs", pstar), dtype=float)
    if x_size is None:
        x_size = round(p.size ** (1 / n))
    if x_size**n != p.size:
        raise ValueError("pstar is not a law on X^n")
    M = _check_rows(codebook_bits(n, L, R), row_cap)
    return CodebookNF(n, L, R, block_length(n, L), _draw_rows(p, M, L * n, seed), x_size, seed)


def build_codebook_fb(strategy: chmod.ShannonStrategy, pstar_u=None, n: int | None = None, L: int = 1,
                      R: float = 0.0, seed: int = 0, row_cap: int = ROW_CAP) -> CodebookFB:
    """Codebook of strategy letters; super letters are i.i.d. from the product of ``pstar_u``."""
    n = strategy.n if n is None else n
    if n != strategy.n:
        raise ValueError("strategy horizon differs from n")
    if pstar_u is not None:
        strategy = chmod.ShannonStrategy(strategy.x_sizes, strategy.y_sizes, strategy.maps, tuple(pstar_u))
    if not strategy.respects_bounds():
        raise ValueError(f"auxiliary alphabets {strategy.u_sizes} exceed {strategy.cardinality_bounds()}")
    M = _check_rows(codebook_bits(n, L, R), row_cap)
    rows = _draw_rows(strategy.joint_u().ravel(), M, L * n, seed)
    return CodebookFB(n, L, R, block_length(n, L), rows, strategy, seed)


# -- layout -------------------------------------------------------------------

def super_letter_positions(n: int, L: int) -> np.ndarray:
    """Transmitted positions (0-based) of every super letter; shape ``(Ln, n)``."""
    i = np.arange(L * n)
    return (i * n + i // L)[:, None] + np.arange(n)[None, :]


def separator_positions(n: int, L: int) -> np.ndarray:
    """0-based positions of the null separators, ``j(Ln+1) - 1`` for ``j = 1..n``."""
    return np.arange(1, n + 1) * (L * n + 1) - 1


def interleave_transmit_nf(row, n: int, L: int, x_size: int) -> np.ndarray:
    """Unpack a row of super letters into the length-k transmitted sequence."""
    row = np.asarray(row, dtype=np.int64)
    if row.shape != (L * n,):
        raise ValueError(f"row must hold {L * n} super letters")
    letters = np.stack(np.unravel_index(row, (x_size,) * n), axis=1)     # (Ln, n)
    x = np.full(block_length(n, L), NULL, dtype=np.int64)
    x[super_letter_positions(n, L)] = letters
    return x


def extract_output_superblocks(y, n: int, L: int, m: int, y_size: int | None = None) -> np.ndarray:
    """Channel outputs regrouped into ``Ln`` super letters with the first ``m`` coordinates null.

    Returns ``(Ln, n)`` symbols; coordinates ``< m`` hold ``NULL``. Given
    ``y_size`` the result is instead the flat index into ``block_y_sizes(n)``.
    Every phase uses the same window rule (segment ``j`` shifts by ``j``).
    """
    y = np.asarray(y, dtype=np.int64)
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < n")
    if y.shape != (block_length(n, L),):
        raise ValueError(f"output must have length {block_length(n, L)}")
    blocks = y[super_letter_positions(n, L)]
    blocks[:, :m] = NULL
    if y_size is None:
        return blocks
    live = blocks[:, m:]
    if np.any(live == NULL):
        raise ValueError("null symbol inside an extracted window")
    if n == m:
        return np.zeros(L * n, dtype=np.int64)
    return np.ravel_multi_index(tuple(live.T), (y_size,) * (n - m))


# -- reports --------------------------------------------------------------------

def clopper_pearson(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    a = 1 - level
    lo = 0.0 if errors == 0 else float(beta.ppf(a / 2, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(beta.ppf(1 - a / 2, errors + 1, trials - errors))
    return lo, hi


@dataclass(frozen=True)
class TrialReport:
    n: int
    L: int
    R: float
    actual_rate: float
    epsilon: float
    trials: int
    errors: int
    seed: int
    decoder: str = "exhaustive"
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in 0..trials")

    @property
    def pe(self) -> float:
        return self.errors / self.trials if self.trials else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return clopper_pearson(self.errors, self.trials)

    def row(self) -> dict:
        lo, hi = self.interval
        d = {c: getattr(self, c) for c in ("n", "L", "R", "actual_rate", "epsilon", "trials", "errors")}
        d.update(pe=self.pe, ci_lo=lo, ci_hi=hi, seed=self.seed)
        return d

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(self.row())
        return d


def merge_reports(reports) -> TrialReport:
    """Pool reports of the same experiment run with disjoint trial seeds."""
    reports = list(reports)
    r0 = reports[0]
    failures: dict = {}
    for r in reports:
        if (r.n, r.L, r.R, r.epsilon, r.decoder) != (r0.n, r0.L, r0.R, r0.epsilon, r0.decoder):
            raise ValueError("cannot merge reports of different experiments")
        for key, v in r.failures.items():
            failures[key] = failures.get(key, 0) + v
    return TrialReport(r0.n, r0.L, r0.R, r0.actual_rate, r0.epsilon, sum(r.trials for r in reports),
                       sum(r.errors for r in reports), r0.seed, r0.decoder, dict(sorted(failures.items())))


# -- decoding ------------------------------------------------------------------------

def _resolve_decoder(decoder: str, bits: int, row_cap: int) -> str:
    if decoder not in DECODERS:
        raise ValueError(f"decoder must be one of {DECODERS}")
    if decoder == "auto":
        return "exhaustive" if bits <= math.log2(EXHAUSTIVE_AUTO_ROWS) else "ensemble"
    if decoder == "exhaustive" and bits > math.log2(row_cap):
        raise RowCapError(f"2^{bits} codewords exceed the row cap {row_cap}")
    return decoder


def _ensemble_error(true_row, y_super, params: TypicalityParams, codeword_law, bits: int,
                    rng: np.random.Generator) -> str | None:
    """Error event of typical-set decoding averaged over the competing codewords.

    The ``2^bits - 1`` wrong rows are i.i.d. and independent of the received
    sequence, so the chance that none of them is jointly typical is exactly
    ``(1 - p)^(M-1)`` with ``p`` the typicality probability of a single row.
    """
    if not typical_rows(true_row[None, :], y_super, params)[0]:
        return "none"
    if bits == 0:
        return None
    lp = log2_prob_typical_with(y_super, params, codeword_law)
    return "ambiguous" if rng.random() >= math.exp(log_no_competitor(bits, lp)) else None


def log_no_competitor(bits: int, log2_p: float) -> float:
    """ln (1 - p)^(2^bits - 1) for ``p = 2^log2_p``, without forming 2^bits."""
    if bits == 0 or log2_p == -math.inf:
        return 0.0
    if log2_p >= 0:
        return -math.inf
    p = 2.0**log2_p
    # ln(-ln(1 - p)), falling back to ln p where p underflows
    a = math.log(-math.log1p(-p)) if p > 1e-300 else log2_p * math.log(2)
    b = bits * math.log(2) + (math.log1p(-(2.0**-bits)) if bits < 1000 else 0.0)
    e = a + b
    return -math.inf if e > 700 else -math.exp(e)


def _exhaustive_error(rows, w: int, y_super, params: TypicalityParams) -> str | None:
    hits = np.flatnonzero(typical_rows(rows, y_super, params))
    if hits.size == 1:
        return None if hits[0] == w else "wrong"
    return "none" if hits.size == 0 else "ambiguous"


def _tally(failures: dict, kind: str | None) -> int:
    if kind is None:
        return 0
    failures[kind] = failures.get(kind, 0) + 1
    return 1


# -- nonfeedback scheme ------------------------------------------------------------

def nf_decoding_law(ch: chmod.SlidingBlockChannel, noise: NoiseModel, pstar: Pmf, n: int) -> JointPmf:
    """Reference law of (X^n super letter, extracted output super letter)."""
    cond = chmod.block_conditional(ch, block_marginal(noise, n), n)
    cond = cond.reshape(ch.x_size**n, -1)
    p = np.asarray(getattr(pstar, "probs", pstar), dtype=float)
    return JointPmf(p[:, None] * cond)


def run_nf_experiment(ch: chmod.SlidingBlockChannel, noise: NoiseModel, pstar: Pmf, n: int, L: int, R: float,
                      trials: int, epsilon: float = DEFAULT_EPSILON, seed: int = 0, decoder: str = "auto",
                      shared_codebook: bool = False, row_cap: int = ROW_CAP, trial_offset: int = 0) -> TrialReport:
    """Monte Carlo estimate of the block error probability of the interleaved scheme.

    Trial ``t`` draws everything from streams keyed by ``(seed, t)``, so
    splitting the trial range across processes and merging gives the same
    counts.
    """
    if n <= ch.m:
        raise ValueError("block length must exceed the channel memory")
    k, bits = block_length(n, L), codebook_bits(n, L, R)
    mode = _resolve_decoder(decoder, bits, row_cap)
    law = nf_decoding_law(ch, noise, pstar, n)
    params = TypicalityParams(epsilon, law)
    p = law.probs.sum(axis=1)
    shared = None
    if shared_codebook:
        if mode != "exhaustive":
            raise ValueError("a shared codebook needs the exhaustive decoder")
        shared = build_codebook_nf(p, n, L, R, derive_seed(seed, 0), ch.x_size, row_cap)
    errors, failures = 0, {}
    for t in range(trial_offset, trial_offset + trials):
        rng = make_rng(seed, t, 1)
        if mode == "exhaustive":
            cb = shared or build_codebook_nf(p, n, L, R, derive_seed(seed, t, 0), ch.x_size, row_cap)
            w = int(rng.integers(cb.n_rows))
            row = cb.rows[w].astype(np.int64)
        else:
            row = rng.choice(p.size, size=L * n, p=p)
        z = sample_path(noise, k, derive_seed(seed, t, 2)).symbols
        y = chmod.apply(ch, interleave_transmit_nf(row, n, L, ch.x_size), z)
        ys = extract_output_superblocks(y, n, L, ch.m, ch.y_size)
        if mode == "exhaustive":
            kind = _exhaustive_error(cb.rows, w, ys, params)
        else:
            kind = _ensemble_error(row, ys, params, p, bits, rng)
        errors += _tally(failures, kind)
    return TrialReport(n, L, R, bits / k, epsilon, trials, errors, seed, mode, dict(sorted(failures.items())))


# -- feedback scheme ----------------------------------------------------------------

def _frame_encode(strategy: chmod.ShannonStrategy, ch: chmod.SlidingBlockChannel, u, z_frames):
    """Closed loop over many frames at once; histories start afresh in every frame.

    Returns ``(x, y_tilde)`` of shape ``(frames, n)``; ``y_tilde`` carries 0 at
    the first ``m`` coordinates (the one-letter null axis of the block law).
    """
    n, m = strategy.n, ch.m
    F = u.shape[0]
    x = np.zeros((F, n), dtype=np.int64)
    yt = np.zeros((F, n), dtype=np.int64)
    for c in range(n):
        idx = (u[:, c],) + tuple(x[:, :c].T) + tuple(yt[:, :c].T)
        x[:, c] = strategy.maps[c][idx]
        if c >= m:
            cols = tuple(x[:, c - m + d] for d in range(m + 1)) + tuple(z_frames[:, c - m + d] for d in range(m + 1))
            yt[:, c] = ch.g[cols]
    return x, yt


def feedback_transmit(cb: CodebookFB, w: int, ch: chmod.SlidingBlockChannel, noise_path):
    """Send codeword ``w``; returns the length-k input and output sequences.

    Inside a frame the encoder sees the frame-local history of inputs and of
    extracted outputs, the first ``m`` of which are null.
    """
    n, L, s = cb.n, cb.L, cb.strategy
    if n <= ch.m:
        raise ValueError("block length must exceed the channel memory")
    z = np.asarray(getattr(noise_path, "symbols", noise_path), dtype=np.int64)
    if z.shape != (cb.k,):
        raise ValueError(f"noise path must have length {cb.k}")
    u = np.stack(np.unravel_index(cb.rows[w].astype(np.int64), s.u_sizes), axis=1)
    pos = super_letter_positions(n, L)
    xf, _ = _frame_encode(s, ch, u, z[pos])
    x = np.full(cb.k, NULL, dtype=np.int64)
    x[pos] = xf
    return x, chmod.apply(ch, x, z)


def replay_inputs(strategy: chmod.ShannonStrategy, row, y, n: int, L: int, m: int) -> np.ndarray:
    """Recompute the transmitted inputs from a U-row and the observed outputs."""
    u = np.stack(np.unravel_index(np.asarray(row, dtype=np.int64), strategy.u_sizes), axis=1)
    blocks = extract_output_superblocks(y, n, L, m)
    yt = np.where(blocks == NULL, 0, blocks)
    x = np.zeros((u.shape[0], n), dtype=np.int64)
    for c in range(n):
        idx = (u[:, c],) + tuple(x[:, :c].T) + tuple(yt[:, :c].T)
        x[:, c] = strategy.maps[c][idx]
    out = np.full(block_length(n, L), NULL, dtype=np.int64)
    out[super_letter_positions(n, L)] = x
    return out


def fb_decoding_law(ch: chmod.SlidingBlockChannel, noise: NoiseModel, strategy: chmod.ShannonStrategy) -> JointPmf:
    """Reference law of (U super letter, extracted output super letter)."""
    kernel = chmod.n_block_law(ch, block_marginal(noise, strategy.n), strategy.n)
    return chmod.strategy_joint(kernel, strategy)


def run_fb_experiment(ch: chmod.SlidingBlockChannel, noise: NoiseModel, strategy: chmod.ShannonStrategy,
                      pstar_u=None, n: int | None = None, L: int = 1, R: float = 0.0, trials: int = 1,
                      epsilon: float = DEFAULT_EPSILON, seed: int = 0, decoder: str = "auto",
                      shared_codebook: bool = False, row_cap: int = ROW_CAP, trial_offset: int = 0) -> TrialReport:
    """Monte Carlo estimate of the block error probability of the strategy-codebook scheme."""
    n = strategy.n if n is None else n
    if pstar_u is not None:
        strategy = chmod.ShannonStrategy(strategy.x_sizes, strategy.y_sizes, strategy.maps, tuple(pstar_u))
    k, bits = block_length(n, L), codebook_bits(n, L, R)
    mode = _resolve_decoder(decoder, bits, row_cap)
    law = fb_decoding_law(ch, noise, strategy)
    params = TypicalityParams(epsilon, law)
    pu = strategy.joint_u().ravel()
    shared = None
    if shared_codebook:
        if mode != "exhaustive":
            raise ValueError("a shared codebook needs the exhaustive decoder")
        shared = build_codebook_fb(strategy, None, n, L, R, derive_seed(seed, 0), row_cap)
    errors, failures = 0, {}
    for t in range(trial_offset, trial_offset + trials):
        rng = make_rng(seed, t, 1)
        if mode == "exhaustive":
            cb = shared or build_codebook_fb(strategy, None, n, L, R, derive_seed(seed, t, 0), row_cap)
            w = int(rng.integers(cb.n_rows))
        else:
            rows = rng.choice(pu.size, size=(1, L * n), p=pu)
            cb = CodebookFB(n, L, R, k, rows, strategy, seed)
            w = 0
        z = sample_path(noise, k, derive_seed(seed, t, 2)).symbols
        _, y = feedback_transmit(cb, w, ch, z)
        ys = extract_output_superblocks(y, n, L, ch.m, ch.y_size)
        if mode == "exhaustive":
            kind = _exhaustive_error(cb.rows, w, ys, params)
        else:
            kind = _ensemble_error(cb.rows[0].astype(np.int64), ys, params, pu, bits, rng)
        errors += _tally(failures, kind)
    return TrialReport(n, L, R, bits / k, epsilon, trials, errors, seed, mode, dict(sorted(failures.items())))


# -- converse sanity ------------------------------------------------------------------

def fano_check(report: TrialReport, capacity: float, pe_threshold: float = 0.05, slack: float = 0.05) -> bool:
    """False only for a reliable run (P_e below threshold) operating well above capacity."""
    return not (report.pe < pe_threshold and report.actual_rate > capacity + slack)


def fano_lower_bound(rate: float, capacity: float, k: int) -> float:
    """P_e >= 1 - C/R - 1/(kR) for a block of ``k`` uses."""
    if rate <= 0:
        return 0.0
    return max(0.0, 1 - capacity / rate - 1 / (k * rate))
