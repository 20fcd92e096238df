"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints a PASS/FAIL line (see the ``criterion`` fixture) and writes
its numbers to a JSON file under ``$FBCAP_ACCEPTANCE_DIR`` (default: a pytest
temporary directory).
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from fbcap import capacity as C
from fbcap import channel as chmod
from fbcap import cli
from fbcap import codelab as CL
from fbcap import processes as pr
from fbcap import prob as P
from fbcap import typicality as T
from fbcap.processes import make_rng

from conftest import gated_xor
from oracles import h2

ROOT = Path(__file__).resolve().parents[1]

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def results_dir(tmp_path_factory):
    d = os.environ.get("FBCAP_ACCEPTANCE_DIR")
    path = Path(d) if d else tmp_path_factory.mktemp("acceptance")
    path.mkdir(parents=True, exist_ok=True)
    return path


def save(results_dir, name, payload):
    (results_dir / f"{name}.json").write_text(cli.dumps(payload))


def gated_channel():
    return chmod.SlidingBlockChannel.from_function(1, 2, 2, 2, gated_xor)


def test_closed_form_capacity(criterion, results_dir):
    rows, ok = [], True
    for q in (0.05, 0.11, 0.25):
        t = time.perf_counter()
        r = C.blahut_arimoto(np.array([[1 - q, q], [q, 1 - q]]))
        dt = time.perf_counter() - t
        err = abs(r.value - (1 - h2(q)))
        ok &= err < 1e-4 and dt < 1.0
        rows.append({"q": q, "value": r.value, "error": err, "seconds": round(dt, 3)})
    save(results_dir, "c01_bsc", rows)
    worst = max(r["error"] for r in rows)
    assert criterion(1, ok, f"BSC capacity, max error {worst:.1e} bits, max time {max(r['seconds'] for r in rows):.3f}s")


def test_directed_information_identities(criterion, results_dir):
    worst_two, worst_massey, worst_order = 0.0, 0.0, -math.inf
    for seed in range(200):
        rng = make_rng(2, seed)
        n = int(rng.integers(1, 4))
        xs = tuple(int(v) for v in rng.integers(1, 4, size=n))
        ys = tuple(int(v) for v in rng.integers(1, 4, size=n))
        j = P.random_joint(rng, xs + ys, 0.6)
        a = P.directed_information(j).value
        b = P.directed_information_alt(j).value
        worst_two = max(worst_two, abs(a - b))
        worst_order = max(worst_order, a - P.block_mutual_information(j))
        px = rng.dirichlet(np.ones(int(np.prod(xs)))).reshape(xs)
        nf = P.compose(P.input_from_block(px, ys), P.random_kernel(rng, P.CHANNEL, xs, ys))
        worst_massey = max(worst_massey, abs(P.directed_information(nf).value - P.block_mutual_information(nf)))
    ok = worst_two < 1e-10 and worst_massey < 1e-10 and worst_order <= 1e-12
    save(results_dir, "c02_directed", {"two_formula": worst_two, "massey": worst_massey, "di_minus_mi": worst_order})
    assert criterion(2, ok, f"200 joints, two-formula {worst_two:.1e}, no-feedback {worst_massey:.1e}, "
                            f"max(DI - MI) {worst_order:.1e}")


def test_state1_suite(criterion, results_dir):
    t = time.perf_counter()
    gaps = []
    for i in range(10):
        rng = make_rng(3, i)
        sc = C.StateChannel(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(2), size=(2, 2)))
        gaps.append(C.verify_state1(sc).gap)
    dt = time.perf_counter() - t
    ok = max(gaps) < 1e-4 and dt < 30
    save(results_dir, "c03_state1", {"gaps": gaps})
    assert criterion(3, ok, f"10 state channels, max gap {max(gaps):.1e}, {dt:.1f}s")


@pytest.mark.slow
def test_state2_suite(criterion, results_dir):
    t = time.perf_counter()
    gaps = []
    for i in range(10):
        k = P.random_kernel(make_rng(4, i), P.CHANNEL, (2, 2), (2, 2))
        r = C.verify_state2(k, multistarts=16, seed=i, grid_resolution=1 / 64)
        assert r.info["strategy"].respects_bounds()
        gaps.append(r.gap)
    dt = time.perf_counter() - t
    ok = max(gaps) < 5e-3 and dt < 600
    save(results_dir, "c04_state2", {"gaps": gaps})
    assert criterion(4, ok, f"10 two-block kernels, max gap {max(gaps):.1e} against the 1/64 grid, {dt:.0f}s")


def test_additive_feedback_equality(criterion, results_dir):
    ch = chmod.SlidingBlockChannel.additive(2)
    noise = pr.NoiseModel.symmetric_markov(0.8)
    rows = []
    for n in (1, 2, 3):
        k = chmod.n_block_law(ch, pr.block_marginal(noise, n), n)
        fb = C.cfb_ascent(k, multistarts=16)
        nf = C.nonfeedback_capacity(k)
        rows.append({"n": n, "fb": fb.value, "nf": nf.value, "diff": abs(fb.value - nf.value)})
    worst = max(r["diff"] for r in rows)
    save(results_dir, "c05_additive", rows)
    vals = ", ".join(f"n={r['n']}: {r['fb']:.6f}" for r in rows)
    assert criterion(5, worst < 2e-3, f"XOR with Markov(0.8) noise, max |C_FB,n - C_n| {worst:.1e} ({vals})")


def test_interleaving_construction(criterion, results_dir):
    noise = pr.NoiseModel.periodic([0, 1])
    n = 2
    target = pr.block_marginal(noise, n)
    naive = []
    for length in (100, 1000, 10_000, 100_000):
        z = pr.sample_path(noise, length, length)
        naive.append(P.tv_distance(pr.empirical_super_freq(z, n, 2), target))
    inter = {}
    for L in (50, 200, 800):
        z = pr.sample_path(noise, L * n * n + n, 6)
        inter[L] = P.tv_distance(pr.empirical_super_freq(pr.gallager_interleave(z, n, L), n, 2), target)
    ok = min(naive) >= 0.4 and inter[800] < 0.02
    save(results_dir, "c06_interleave", {"naive_tv": naive, "interleaved_tv": inter})
    assert criterion(6, ok, f"periodic noise, naive TV >= {min(naive):.3f}, interleaved TV {inter[800]:.4f} at L=800")


def test_independent_typicality_exponent(criterion, results_dir):
    q, n, trials, eps = 0.11, 500, 100_000, 0.05
    law = P.JointPmf(0.5 * np.array([[1 - q, q], [q, 1 - q]]))
    prm = T.TypicalityParams(eps, law)
    mi = P.mutual_information(law)
    rng = make_rng(7)
    hits = 0
    type_counts = np.zeros(n + 1, dtype=np.int64)
    for lo in range(0, trials, 10_000):
        y = rng.integers(2, size=(10_000, n))
        x = rng.integers(2, size=(10_000, n))
        type_counts += np.bincount(y.sum(axis=1), minlength=n + 1)
        for xi, yi in zip(x, y):
            hits += T.is_jointly_typical(xi, yi, prm)
    # exact Pr{(X, y) typical} for every sampled output; it depends on y only through its type
    logs = []
    for k in np.flatnonzero(type_counts):
        y = np.r_[np.zeros(n - k, dtype=np.int64), np.ones(k, dtype=np.int64)]
        lp = T.log2_prob_typical_with(y, prm)
        if lp > -math.inf:
            logs.append(lp + math.log2(type_counts[k]))
    mean_log2 = (np.logaddexp2.reduce(logs) if logs else -math.inf) - math.log2(trials)
    measured = mean_log2 / n
    hi = CL.clopper_pearson(hits, trials)[1]
    ok = measured <= -mi + 0.1 and hits == 0
    save(results_dir, "c07_exponent", {"measured": measured, "bound": -mi + 0.1, "hits": hits, "trials": trials,
                                       "mc_upper": hi})
    assert criterion(7, ok, f"n=500, 10^5 trials, log2 P/n = {measured:.4f} <= {-mi + 0.1:.4f}, "
                            f"{hits} Monte Carlo hits")


def _ladder(run, Ls):
    return [run(L) for L in Ls]


def test_nonfeedback_coding(criterion, results_dir):
    ch = chmod.SlidingBlockChannel.additive(2)
    noise = pr.NoiseModel.iid([0.89, 0.11])
    pstar = P.Pmf([0.5, 0.5])
    Ls = (100, 200, 400)
    t = time.perf_counter()
    low = _ladder(lambda L: CL.run_nf_experiment(ch, noise, pstar, 1, L, 0.25, 200, epsilon=0.2, seed=8), Ls)
    high = _ladder(lambda L: CL.run_nf_experiment(ch, noise, pstar, 1, L, 0.75, 200, epsilon=0.2, seed=8), Ls)
    dt = time.perf_counter() - t
    pe_low = [r.pe for r in low]
    pe_high = [r.pe for r in high]
    ok = (all(b <= a for a, b in zip(pe_low, pe_low[1:])) and pe_low[-1] < 0.1 and min(pe_high) > 0.5
          and dt < 900)
    save(results_dir, "c08_nonfeedback", {"low": [r.to_dict() for r in low], "high": [r.to_dict() for r in high]})
    assert criterion(8, ok, f"R=0.25 P_e {pe_low} over L={list(Ls)}, R=0.75 P_e {pe_high}, {dt:.0f}s")


def test_feedback_coding(criterion, results_dir):
    ch = gated_channel()
    noise = pr.NoiseModel.symmetric_markov(0.9)
    n = 2
    k = chmod.n_block_law(ch, pr.block_marginal(noise, n), n)
    fb = C.cfb_ascent(k, multistarts=16)
    blind = C.history_blind_rate(k)
    R = 0.2
    strategy = chmod.strategy_from_input_kernel(fb.maximizer)
    Ls = (250, 500, 1000, 2000)
    reps = [CL.run_fb_experiment(ch, noise, strategy, L=L, R=R, trials=200, epsilon=0.08, seed=9) for L in Ls]
    pe = [r.pe for r in reps]
    fano = all(CL.fano_check(r, fb.value) for r in reps)
    ok = blind.value < R < fb.value and all(b < a for a, b in zip(pe, pe[1:])) and fano
    save(results_dir, "c09_feedback", {"fb_capacity": fb.value, "history_blind": blind.value,
                                       "u_sizes": list(strategy.u_sizes), "runs": [r.to_dict() for r in reps]})
    assert criterion(9, ok, f"m=1 channel, {blind.value:.4f} < R={R} < C_FB,2={fb.value:.4f}, "
                            f"P_e {pe} over L={list(Ls)}, Fano {'ok' if fano else 'violated'}")


def test_superadditivity(criterion, results_dir):
    ch = gated_channel()
    noise = pr.NoiseModel.symmetric_markov(0.9)
    table = C.superadditivity_check(ch, noise, [1, 2, 3, 4, 5], tol=1e-6)
    # C_1 straight from the one-letter block law, whose single output is null
    c1 = C.nonfeedback_capacity(chmod.n_block_law(ch, pr.block_marginal(noise, 1), 1)).value
    ok = table.ok and abs(c1) < 1e-12 and table.n_c_n[1] == 0.0
    save(results_dir, "c10_superadditivity", {"n_c_n": table.n_c_n, "c1_direct": c1,
                                              "violations": list(table.violations)})
    vals = ", ".join(f"{v:.4f}" for v in table.n_c_n.values())
    assert criterion(10, ok, f"nC_n for n=1..5 = [{vals}], {len(table.violations)} violations, C_1 = {c1:.1e}")


REPRO_RUNS = [("run", "bsc_capacity"), ("run", "state1_suite"), ("run", "markov_fbcapacity"),
              ("run", "decompose_periodic"), ("run", "fb_gated"), ("sweep", "sweep_L_nf"),
              ("run", "superadditivity")]


def test_reproducibility(criterion, results_dir, tmp_path):
    outputs = []
    for rep in range(2):
        d = tmp_path / f"rep{rep}"
        for cmd, name in REPRO_RUNS:
            code = cli.main([cmd, str(ROOT / "configs" / f"{name}.json"), "-o", str(d)])
            assert code == 0
        outputs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    same = outputs[0] == outputs[1]
    diff = sorted(k for k in outputs[0] if outputs[0][k] != outputs[1].get(k))
    save(results_dir, "c11_reproducibility", {"files": sorted(outputs[0]), "differing": diff})
    assert criterion(11, same and len(outputs[0]) >= len(REPRO_RUNS),
                     f"{len(outputs[0])} result files from {len(REPRO_RUNS)} configs byte-identical across reruns")
