import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbcap import prob as P
from fbcap.processes import make_rng

from oracles import H, bsc_kernel, cmi, directed_info_loops, entropy_decimal, h2


def shapes(max_n=3, max_a=3):
    return st.integers(1, max_n).flatmap(
        lambda n: st.tuples(st.lists(st.integers(1, max_a), min_size=n, max_size=n),
                            st.lists(st.integers(1, max_a), min_size=n, max_size=n)))


def seeded_joint(seed, xs, ys, alpha=1.0):
    return P.random_joint(make_rng(seed), tuple(xs) + tuple(ys), alpha)


# -- entropy and mutual information ----------------------------------------------

def test_entropy_examples():
    assert P.entropy(P.Pmf([0.5, 0.5])) == 1.0
    assert P.entropy(P.Pmf([1.0, 0.0])) == 0.0
    oracle = entropy_decimal([0.11, 0.89])
    assert abs(oracle - 0.499916) < 1e-6
    assert abs(P.entropy(P.Pmf([0.11, 0.89])) - oracle) < 1e-15


@given(st.integers(0, 10**6), st.integers(1, 12))
def test_entropy_bounds(seed, k):
    p = P.Pmf(make_rng(seed).dirichlet(np.ones(k)))
    h = P.entropy(p)
    assert -1e-12 <= h <= np.log2(k) + 1e-12
    assert abs(h - entropy_decimal(p.probs)) < 1e-12


def test_mutual_information_examples():
    px, py = np.array([0.3, 0.7]), np.array([0.2, 0.5, 0.3])
    assert abs(P.mutual_information(P.JointPmf(np.outer(px, py)))) < 1e-12
    assert P.mutual_information(P.JointPmf(np.eye(2) / 2)) == pytest.approx(1.0, abs=1e-15)
    q = 0.11
    bsc = 0.5 * np.array([[1 - q, q], [q, 1 - q]])
    assert abs(P.mutual_information(P.JointPmf(bsc)) - (1 - h2(q))) < 1e-12
    assert abs(P.mutual_information(P.JointPmf(bsc)) - 0.500084) < 1e-5


def test_conditional_mi_examples():
    rng = make_rng(5)
    ab = rng.dirichlet(np.ones(4)).reshape(2, 2)
    c = np.array([0.4, 0.6])
    t = ab[:, :, None] * c[None, None, :]
    assert abs(P.conditional_mi(t, [0], [1], [2]) - P.mutual_information(ab)) < 1e-10
    copy3 = np.zeros((2, 2, 2))
    copy3[0, 0, 0] = copy3[1, 1, 1] = 0.5
    assert abs(P.conditional_mi(copy3, [0], [1], [2])) < 1e-12
    t3 = P.random_joint(make_rng(11), (2, 2, 2)).probs
    assert abs(P.conditional_mi(t3, [0], [1], [2]) - cmi(t3, [0], [1], [2])) < 1e-10


def test_conditional_mi_rejects_overlap():
    with pytest.raises(ValueError):
        P.conditional_mi(np.full((2, 2), 0.25), [0], [0, 1])


@given(st.integers(0, 10**6))
def test_chain_rule_for_mutual_information(seed):
    t = P.random_joint(make_rng(seed), (2, 3, 2)).probs
    lhs = P.conditional_mi(t, [0], [1, 2])
    rhs = P.conditional_mi(t, [0], [1]) + P.conditional_mi(t, [0], [2], [1])
    assert abs(lhs - rhs) < 1e-10


# -- directed information ---------------------------------------------------------

def test_directed_information_examples():
    px, py = np.full((2, 2), 0.25), make_rng(1).dirichlet(np.ones(4)).reshape(2, 2)
    indep = px[:, :, None, None] * py[None, None, :, :]
    assert abs(P.directed_information(indep).value) < 1e-10
    noiseless = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            noiseless[a, b, a, b] = 0.25
    assert P.directed_information(noiseless).value == pytest.approx(2.0, abs=1e-12)
    assert P.directed_information_alt(noiseless).value == pytest.approx(2.0, abs=1e-12)
    assert abs(P.directed_information_alt(indep).value) < 1e-10


def test_directed_information_n1_is_mutual_information():
    t = P.random_joint(make_rng(3), (3, 2)).probs
    assert abs(P.directed_information_alt(t).value - P.mutual_information(t)) < 1e-12
    assert abs(P.directed_information(t).value - P.mutual_information(t)) < 1e-12


def test_directed_information_decomposition_sums():
    t = seeded_joint(8, (2, 3, 2), (3, 2, 2))
    r = P.directed_information(t)
    assert len(r.decomposition) == 3
    assert abs(sum(r.decomposition) - r.value) < 1e-10
    assert min(r.decomposition) > -1e-10


def test_directed_information_axis_mismatch():
    with pytest.raises(ValueError):
        P.directed_information(np.full((2, 2, 2), 1 / 8))
    with pytest.raises(ValueError):
        P.directed_information(np.full((2, 2, 2, 2), 1 / 16), n=1)


@given(shapes(), st.integers(0, 10**6))
def test_two_formula_identity(sh, seed):
    xs, ys = sh
    t = seeded_joint(seed, xs, ys, 0.5).probs
    a = P.directed_information(t).value
    b = P.directed_information_alt(t).value
    assert abs(a - b) < 1e-10
    assert abs(a - directed_info_loops(t, len(xs))) < 1e-10


@given(shapes(), st.integers(0, 10**6))
def test_directed_below_mutual(sh, seed):
    xs, ys = sh
    t = seeded_joint(seed, xs, ys, 0.5)
    assert P.directed_information(t).value <= P.block_mutual_information(t) + 1e-10


@given(shapes(), st.integers(0, 10**6))
def test_massey_reduction_without_feedback(sh, seed):
    xs, ys = sh
    rng = make_rng(seed)
    px = rng.dirichlet(np.ones(int(np.prod(xs)))).reshape(xs)
    inp = P.input_from_block(px, ys)
    ch = P.random_kernel(rng, P.CHANNEL, xs, ys)
    j = P.compose(inp, ch)
    mi = P.block_mutual_information(j)
    assert abs(P.directed_information(j).value - mi) < 1e-10
    n = len(xs)
    assert abs(mi - (H(j.probs, range(n)) + H(j.probs, range(n, 2 * n)) - H(j.probs, range(2 * n)))) < 1e-10


# -- causal kernels -------------------------------------------------------------------

@given(shapes(), st.integers(0, 10**6))
def test_chain_rule_round_trip(sh, seed):
    xs, ys = sh
    j = seeded_joint(seed, xs, ys, 0.7)
    a, b = P.causal_factorize(j)
    assert P.tv_distance(P.compose(a, b), j) < 1e-10


@given(shapes(), st.integers(0, 10**6))
def test_kernel_slices_normalised(sh, seed):
    xs, ys = sh
    # sparse Dirichlet draws create zero histories that take the uniform fill
    j = seeded_joint(seed, xs, ys, 0.05)
    for k in P.causal_factorize(j):
        for f in k.factors:
            assert np.max(np.abs(f.sum(axis=-1) - 1)) <= 1e-12
            assert f.min() >= 0


@given(shapes(2, 2), st.integers(0, 10**6))
def test_factorize_recovers_kernels_on_support(sh, seed):
    xs, ys = sh
    rng = make_rng(seed)
    a = P.random_kernel(rng, P.INPUT, xs, ys)
    b = P.random_kernel(rng, P.CHANNEL, xs, ys)
    a2, b2 = P.causal_factorize(P.compose(a, b))
    for f, g in zip(a.factors + b.factors, a2.factors + b2.factors):
        assert np.max(np.abs(f - g)) < 1e-9


def test_product_joint_gives_y_free_input_kernel():
    rng = make_rng(2)
    px = rng.dirichlet(np.ones(4)).reshape(2, 2)
    py = rng.dirichlet(np.ones(4)).reshape(2, 2)
    a, _ = P.causal_factorize(px[:, :, None, None] * py[None, None])
    f = a.factors[1]                       # axes (x1, y1, x2)
    assert np.allclose(f[:, 0, :], f[:, 1, :], atol=1e-12)


def test_noiseless_joint_gives_indicator_kernel():
    t = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            t[a, b, a, b] = 0.25
    _, ch = P.causal_factorize(t)
    assert np.array_equal(ch.factors[0], np.eye(2))
    f = ch.factors[1]                      # axes (x1, x2, y1, y2)
    for x1 in range(2):
        for x2 in range(2):
            assert f[x1, x2, x1, x2] == 1.0


def test_seeded_round_trip_tight():
    j = seeded_joint(2024, (2, 2), (2, 2))
    a, b = P.causal_factorize(j)
    assert P.tv_distance(P.compose(a, b), j) < 1e-12


def test_compose_memoryless_factorises():
    q = 0.2
    ch = P.CausalKernel(P.CHANNEL, (2, 2), (2, 2),
                        (np.array([[1 - q, q], [q, 1 - q]]),
                         np.broadcast_to(np.array([[1 - q, q], [q, 1 - q]])[None, :, None, :], (2, 2, 2, 2))))
    inp = P.memoryless_input([[0.3, 0.7], [0.6, 0.4]], (2, 2))
    j = P.compose(inp, ch).probs
    expect = np.einsum("a,b,ac,bd->abcd", [0.3, 0.7], [0.6, 0.4], *(np.array([[1 - q, q], [q, 1 - q]]),) * 2)
    assert np.allclose(j, expect, atol=1e-15)
    assert abs(j.sum() - 1) < 1e-12
    assert np.allclose(ch.product(), bsc_kernel(q, 2))


def test_compose_rejects_mismatch():
    rng = make_rng(0)
    a = P.random_kernel(rng, P.INPUT, (2, 2), (2, 2))
    b = P.random_kernel(rng, P.CHANNEL, (2,), (2,))
    with pytest.raises(ValueError):
        P.compose(a, b)
    with pytest.raises(ValueError):
        P.compose(P.random_kernel(rng, P.CHANNEL, (2, 2), (2, 2)), a)


def test_kernel_validation():
    with pytest.raises(ValueError):
        P.CausalKernel(P.CHANNEL, (2,), (2,), (np.array([[0.5, 0.6], [0.5, 0.5]]),))
    with pytest.raises(ValueError):
        P.CausalKernel(P.CHANNEL, (2,), (2,), (np.ones((2, 3)) / 3,))


def test_table_size_guard():
    with pytest.raises(P.TableSizeError):
        P.check_size((2,) * 25)


def test_pmf_validation():
    with pytest.raises(ValueError):
        P.Pmf([0.5, 0.6])
    with pytest.raises(ValueError):
        P.Pmf([1.5, -0.5])
    with pytest.raises(ValueError):
        P.Alphabet(0)
    with pytest.raises(ValueError):
        P.Alphabet(2, null=2)


def test_marginal_is_valid_pmf():
    j = seeded_joint(4, (2, 3), (2, 2))
    for ax in range(4):
        m = j.marginal([ax])
        assert abs(m.probs.sum() - 1) < 1e-12


@given(st.integers(0, 10**6))
def test_json_round_trip(seed):
    rng = make_rng(seed)
    j = P.random_joint(rng, (2, 3, 2))
    k = P.random_kernel(rng, P.CHANNEL, (2, 2), (3, 2))
    p = P.Pmf(rng.dirichlet(np.ones(5)))
    for obj in (j, k, p):
        back = P.from_json(json.loads(json.dumps(P.to_json(obj))))
        assert type(back) is type(obj)
    assert np.array_equal(P.from_json(P.to_json(j)).probs, j.probs)
    assert all(np.array_equal(f, g) for f, g in zip(P.from_json(P.to_json(k)).factors, k.factors))


def test_json_is_row_major():
    j = P.JointPmf(np.arange(6.0).reshape(2, 3) / 15)
    d = P.to_json(j)
    assert d["sizes"] == [2, 3]
    assert d["probs"] == (np.arange(6.0) / 15).tolist()
