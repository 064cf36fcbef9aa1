import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfregions.catalog import binary_adder
from cfregions.channel import ChannelSpec
from cfregions.gflin import BudgetExceeded, GfMatrix, enum_fullrank_rref, rank
from cfregions.simulator import (
    Codebook,
    IntegralityError,
    SimConfig,
    SimResult,
    csv_header,
    csv_row,
    decode_joint,
    digits_count,
    encode,
    lemma1_oracle,
    nonincreasing_within_ci,
    partition_oracle,
    run_one,
    run_trials,
    sample_codebook,
    trial_rng,
    typical_set_test,
    wilson_interval,
)
from oracles import left_null_bf, rank_bf, span_set


def _identity_k1(q=2):
    return ChannelSpec(q, np.full((1, q), 1 / q), np.arange(q)[None, :], np.eye(q))


# -- typicality ---------------------------------------------------------------------


def test_typical_uniform_exact_half():
    x = [0, 1] * 10
    for eps in (0.0, 0.01, 0.5):
        assert typical_set_test(x, [0.5, 0.5], eps)


def test_typical_point_mass_rejects_other_symbols():
    for eps in (0.1, 1.0, 100.0):
        assert not typical_set_test([0, 0, 1, 0], [1.0, 0.0], eps)


def test_typical_exact_type():
    x = [0] * 14 + [1, 1, 2, 2, 3, 3]
    assert typical_set_test(x, [0.7, 0.1, 0.1, 0.1], 0.1)
    x = [0] * 13 + [1, 1, 1, 2, 2, 3, 3]
    assert not typical_set_test(x, [0.7, 0.1, 0.1, 0.1], 0.1)


def test_typical_rejects_out_of_alphabet_and_empty():
    assert not typical_set_test([0, 2], [0.5, 0.5], 1.0)
    assert not typical_set_test([], [0.5, 0.5], 1.0)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=40), st.floats(0, 2))
def test_typical_matches_definition(x, eps):
    p = np.array([0.5, 0.3, 0.2])
    emp = np.bincount(x, minlength=3) / len(x)
    expect = all(abs(emp[a] - p[a]) <= eps * p[a] + 1e-12 for a in range(3))
    assert typical_set_test(x, p, eps) == expect


# -- configuration ------------------------------------------------------------------


def test_digits_count():
    assert digits_count(8, 0.375, 2) == 3
    assert digits_count(10, 0.0, 3) == 0
    assert digits_count(4, math.log2(3) / 2, 3) == 2
    with pytest.raises(IntegralityError):
        digits_count(10, 0.375, 2)
    with pytest.raises(IntegralityError):
        digits_count(8, -0.125, 2)


def test_simconfig_validation():
    spec = binary_adder()
    a = GfMatrix([[1, 1]], 2)
    cfg = SimConfig(spec, a, 8, (0.25, 0.5), (0.125, 0.0))
    assert cfg.kappa == (2, 4) and cfg.kappa_aux == (1, 0) and cfg.kappa_total == (3, 4)
    with pytest.raises(IntegralityError):
        SimConfig(spec, a, 10, (0.25, 0.25))
    with pytest.raises(ValueError):
        SimConfig(spec, a, 8, (0.25, 0.25), eps=0.1, eps_prime=0.1)
    with pytest.raises(ValueError):
        SimConfig(spec, a, 8, (0.25,))
    with pytest.raises(ValueError):
        SimConfig(spec, GfMatrix([[1, 1, 1]], 2), 8, (0.25, 0.25))
    with pytest.raises(ValueError):
        SimConfig(spec, a, 8, (0.25, 0.25), trials=-1)


# -- codebook -----------------------------------------------------------------------


def _codebook(q, kappa, kappa_aux, n, seed):
    rng = np.random.default_rng(seed)
    width = max(a + b for a, b in zip(kappa, kappa_aux))
    return Codebook(q, rng.integers(0, q, (width, n)), rng.integers(0, q, (len(kappa), n)), tuple(kappa), tuple(kappa_aux))


@pytest.mark.parametrize("q,kappa", [(2, 4), (3, 2), (5, 1)])
def test_code_linearity_exhaustive(q, kappa):
    cb = _codebook(q, (kappa,), (0,), 7, 1)
    zero = cb.codeword(0, 0, 0)
    vecs = list(itertools.product(range(q), repeat=kappa))
    for v, w in itertools.product(vecs, vecs):
        s = (np.array(v) + np.array(w)) % q
        lhs = (cb.codeword_from_vector(0, v) + cb.codeword_from_vector(0, w) - zero) % q
        assert np.array_equal(lhs, cb.codeword_from_vector(0, s))


def test_index_layout_is_zero_padded():
    cb = _codebook(2, (2, 1), (1, 1), 5, 0)
    assert cb.width == 3
    assert cb.index_vector(0, 2, 1).tolist() == [1, 0, 1]
    assert cb.index_vector(1, 1, 1).tolist() == [1, 1, 0]
    rows = cb.all_vectors(1)
    assert rows.shape == (4, 3) and not rows[:, 2].any()
    # row m * q**kappa_aux + l
    assert rows[1 * 2 + 1].tolist() == cb.index_vector(1, 1, 1).tolist()
    assert np.array_equal(cb.all_codewords(0)[2 * 2 + 1], cb.codeword(0, 2, 1))
    with pytest.raises(ValueError):
        cb.index_vector(0, 4, 0)


@settings(max_examples=30)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 10_000))
def test_sumset_consistency(q, seed):
    rng = np.random.default_rng(seed)
    k, width, n = 3, 3, 6
    g = rng.integers(0, q, (width, n))
    d = rng.integers(0, q, (k, n))
    m = rng.integers(0, q, (k, width))
    a = rng.integers(0, q, (2, k))
    lhs = (a @ ((m @ g + d) % q)) % q
    rhs = (((a @ m) % q) @ g + a @ d) % q
    assert np.array_equal(lhs, rhs)


def test_sample_codebook_is_immutable_and_sized():
    cfg = SimConfig(binary_adder(), GfMatrix([[1, 1]], 2), 8, (0.25, 0.5), (0.125, 0.0))
    cb = sample_codebook(cfg, np.random.default_rng(0))
    assert cb.g.shape == (4, 8) and cb.dithers.shape == (2, 8)
    with pytest.raises(ValueError):
        cb.g[0, 0] = 1


# -- encoder ------------------------------------------------------------------------


def test_encode_without_aux_digits_has_one_candidate():
    cb = _codebook(2, (3,), (0,), 8, 2)
    rng = np.random.default_rng(0)
    for m in range(8):
        enc = encode(cb, 0, m, np.array([0.5, 0.5]), np.array([0, 1]), 0.05, rng)
        assert enc.l == 0
        assert np.array_equal(enc.u, cb.codeword(0, m, 0))


def test_encode_uniform_target_is_covered():
    rng = np.random.default_rng(3)
    for _ in range(50):
        cb = _codebook(2, (2,), (2,), 64, int(rng.integers(1 << 30)))
        enc = encode(cb, 0, 1, np.array([0.5, 0.5]), np.array([0, 1]), 0.5, rng)
        assert enc.covered
        assert typical_set_test(enc.u, [0.5, 0.5], 0.5)


def test_encode_picks_a_typical_aux_index_when_one_exists():
    rng = np.random.default_rng(5)
    pmf = np.array([0.75, 0.25])
    for _ in range(30):
        cb = _codebook(2, (1,), (4,), 8, int(rng.integers(1 << 30)))
        enc = encode(cb, 0, 1, pmf, np.array([0, 1]), 0.5, rng)
        any_typ = any(typical_set_test(cb.codeword(0, 1, l), pmf, 0.5) for l in range(16))
        assert enc.covered == any_typ
        if enc.covered:
            assert typical_set_test(enc.u, pmf, 0.5)
        assert np.array_equal(enc.x, enc.u)


def test_nonuniform_target_without_aux_rate_fails_to_cover():
    spec = ChannelSpec(2, np.array([[0.9, 0.1]]), np.array([[0, 1]]), np.eye(2))
    cfg = SimConfig(spec, GfMatrix([[1]], 2), 32, (0.125,), eps=0.3, eps_prime=0.2, trials=200, seed=4)
    res = run_trials(cfg)
    assert res.cover_failures / res.trials > 0.95
    assert res.errors >= res.cover_failures


def test_encode_rejects_bad_message():
    cb = _codebook(2, (2,), (0,), 4, 0)
    with pytest.raises(ValueError):
        encode(cb, 0, 4, np.array([0.5, 0.5]), np.array([0, 1]), 0.05, np.random.default_rng(0))


# -- decoder ------------------------------------------------------------------------


def _decode_bf(cb, y, a, spec, eps):
    """Every index tuple, joint type check, uniqueness of A * M."""
    q, k = cb.q, cb.K
    u_tuples = list(itertools.product(range(q), repeat=k))
    ny = spec.y_size
    pmf = {}
    for i, u in enumerate(u_tuples):
        for yy in range(ny):
            pmf[(u, yy)] = float(spec.joint.prob[i, yy])
    values = set()
    hits = 0
    sizes = [q ** (cb.kappa[j] + cb.kappa_aux[j]) for j in range(k)]
    for idx in itertools.product(*[range(s) for s in sizes]):
        vecs = [cb.all_vectors(j)[idx[j]] for j in range(k)]
        words = [cb.codeword_from_vector(j, vecs[j]) for j in range(k)]
        counts = {}
        for t in range(cb.n):
            key = (tuple(int(w[t]) for w in words), int(y[t]))
            counts[key] = counts.get(key, 0) + 1
        ok = all(counts.get(key, 0) in _interval(p, cb.n, eps) for key, p in pmf.items())
        ok = ok and all(key in pmf for key in counts)
        if ok:
            hits += 1
            m = np.stack(vecs)
            values.add(((a.data @ m) % q).tobytes())
    return hits, len(values)


def _interval(p, n, eps):
    return range(math.ceil((1 - eps) * p * n - 1e-9), math.floor((1 + eps) * p * n + 1e-9) + 1)


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.2]))
def test_decoder_matches_brute_force(seed, noise):
    spec = binary_adder(noise)
    a = GfMatrix([[1, 1]], 2)
    rng = np.random.default_rng(seed)
    cb = _codebook(2, (2, 1), (0, 1), 6, seed)
    y = rng.integers(0, 3, 6)
    dec = decode_joint(cb, y, a, spec.joint.prob, 0.9)
    hits, nvals = _decode_bf(cb, y, a, spec, 0.9)
    assert dec.n_typical == hits
    assert dec.ok == (nvals == 1)
    if dec.ok:
        assert dec.n_values == 1


def test_decoder_identity_channel_k1_recovers_codeword():
    spec = _identity_k1()
    a = GfMatrix([[1]], 2)
    cfg = SimConfig(spec, a, 8, (0.5,), eps=0.6, eps_prime=0.5, trials=0)
    seen = set()
    for t in range(80):
        rng = trial_rng(9, t)
        cb = sample_codebook(cfg, rng)
        enc = encode(cb, 0, int(rng.integers(16)), spec.pmf_u[0], spec.symbol_map[0], 0.5, rng)
        if not enc.covered:
            continue
        dec = decode_joint(cb, enc.x, a, spec.joint.prob, 0.6)
        # only u = y is typical; a singular G maps two indices onto it
        assert dec.ok == (rank(GfMatrix(cb.g, 2)) == cb.width)
        if dec.ok:
            assert np.array_equal(dec.estimate[0], enc.u)
        seen.add(dec.ok)
    assert seen == {True, False}


def test_zero_rate_users_have_a_single_candidate():
    spec = binary_adder()
    a = GfMatrix([[1, 1]], 2)
    cfg = SimConfig(spec, a, 8, (0.0, 0.0), eps=0.9, eps_prime=0.5)
    for t in range(30):
        rng = trial_rng(1, t)
        cb = sample_codebook(cfg, rng)
        assert cb.width == 0
        y = (cb.dithers[0] + cb.dithers[1]).astype(np.int64)
        dec = decode_joint(cb, y, a, spec.joint.prob, 0.9)
        assert dec.n_values <= 1
        if dec.ok:
            assert np.array_equal(dec.estimate[0], (cb.dithers[0] + cb.dithers[1]) % 2)


def test_decoder_budget():
    cb = _codebook(2, (6, 6), (0, 0), 12, 0)
    with pytest.raises(BudgetExceeded):
        decode_joint(cb, np.zeros(12, dtype=int), GfMatrix([[1, 1]], 2), binary_adder().joint.prob, 0.1, budget=1000)


# -- trials -------------------------------------------------------------------------


def test_trials_zero():
    res = run_trials(SimConfig(binary_adder(), GfMatrix([[1, 1]], 2), 8, (0.25, 0.25), trials=0))
    assert (res.trials, res.errors, res.cover_failures) == (0, 0, 0)
    assert math.isnan(res.rate)
    assert res.wilson() == (0.0, 1.0)


def test_same_seed_same_result_and_order_independence():
    cfg = SimConfig(binary_adder(0.1), GfMatrix([[1, 1]], 2), 8, (0.25, 0.25), eps=0.75, eps_prime=0.5, trials=40, seed=11)
    assert run_trials(cfg) == run_trials(cfg)
    forward = [run_one(cfg, t) for t in range(10)]
    backward = [run_one(cfg, t) for t in reversed(range(10))][::-1]
    assert forward == backward
    other = SimConfig(binary_adder(0.1), GfMatrix([[1, 1]], 2), 8, (0.25, 0.25), eps=0.75, eps_prime=0.5, trials=40, seed=12)
    assert [run_one(other, t) for t in range(10)] != forward or run_trials(other).seed == 12


def test_far_outside_mac_region_fails():
    # sum rate 1.8 against H(Y) = 1.5 when both messages are decoded
    cfg = SimConfig(binary_adder(), GfMatrix.identity(2, 2), 10, (0.9, 0.9), eps=0.75, eps_prime=0.5, trials=60, seed=3)
    assert run_trials(cfg).rate > 0.9


def test_errors_never_exceed_trials():
    cfg = SimConfig(binary_adder(0.2), GfMatrix([[1, 1]], 2), 8, (0.5, 0.5), eps=0.5, eps_prime=0.25, trials=30, seed=0)
    res = run_trials(cfg)
    assert 0 <= res.cover_failures <= res.errors <= res.trials


def test_wilson_interval_closed_form():
    z = 1.959963984540054
    for x, n in [(0, 10), (3, 10), (10, 10), (57, 2000)]:
        p = x / n
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        lo, hi = wilson_interval(x, n)
        assert lo == pytest.approx(max(0.0, centre - half), abs=1e-9)
        assert hi == pytest.approx(min(1.0, centre + half), abs=1e-9)


def test_nonincreasing_within_ci():
    def res(n, e, t=100):
        return SimResult(n, (0.0,), t, e, 0, 0)

    assert nonincreasing_within_ci([res(8, 50), res(16, 30), res(24, 10)])
    assert nonincreasing_within_ci([res(8, 30), res(16, 33)])
    assert not nonincreasing_within_ci([res(8, 5), res(16, 60)])


def test_csv_row_format():
    res = SimResult(16, (0.375, 0.25), 200, 10, 2, 7)
    assert csv_header(2) == "n,R_1,R_2,trials,errors,rate,cover_failures,seed"
    assert csv_row(res) == "16,0.375,0.25,200,10,0.05,2,7"
    assert csv_row(SimResult(8, (0.0,), 0, 0, 0, 1)) == "8,0,0,0,nan,0,1"


# -- cardinality oracles ------------------------------------------------------------


def _cell_count_bf(q, kappa, b, r, c):
    """Distinct nonzero B M with rank r and left nullspace equal to Span(C)."""
    k = len(kappa)
    width = max(kappa)
    lb = len(b)
    target = span_set(c, q) if c else {tuple([0] * lb)}
    seen = set()
    for digits in itertools.product(range(q), repeat=sum(kappa)):
        rows, off = [], 0
        for kr in kappa:
            rows.append(list(digits[off : off + kr]) + [0] * (width - kr))
            off += kr
        mb = tuple(tuple(sum(b[i][j] * rows[j][w] for j in range(k)) % q for w in range(width)) for i in range(lb))
        if any(any(row) for row in mb):
            seen.add(mb)
    return sum(1 for mb in seen if rank_bf(list(mb), q) == r and left_null_bf(mb, q) == target)


def test_cardinality_identity_example():
    b = GfMatrix.identity(2, 2)
    count, bound = lemma1_oracle(2, 2, (1, 1), b, 2, GfMatrix.empty(2, 2))
    # width-1 message matrices never reach rank 2
    assert (count, bound) == (0, 4)
    total = 0
    for c in enum_fullrank_rref(1, 2, 2):
        cnt, bnd = lemma1_oracle(2, 2, (1, 1), b, 1, c)
        assert cnt <= bnd
        total += cnt
    assert total == 3


def test_cardinality_zero_digit_profile():
    count, bound = lemma1_oracle(2, 2, (0, 0), GfMatrix.identity(2, 2), 1, GfMatrix([[1, 0]], 2))
    assert count == 0 and bound == 1


def test_cardinality_no_valid_s_is_vacuous():
    # [C; I(S)] needs L_B rows, so r = 1 with a rank-1 C over two rows of B
    # admits S = {2} only; r = 2 with a 1-row C has no S of the right size
    b = GfMatrix.identity(2, 2)
    count, bound = lemma1_oracle(2, 2, (1, 1), b, 1, GfMatrix([[1, 0]], 2))
    assert bound is not None and count <= bound
    with pytest.raises(ValueError):
        lemma1_oracle(2, 2, (1, 1), b, 2, GfMatrix([[1, 0]], 2))


@pytest.mark.parametrize(
    "q,kappa,b",
    [
        (2, (1, 1), [[1, 0], [0, 1]]),
        (2, (2, 1), [[1, 1]]),
        (3, (1, 1), [[1, 2]]),
        (3, (2, 1), [[1, 0], [0, 1]]),
        (2, (2, 1, 1), [[1, 0, 1], [0, 1, 1]]),
        (2, (1, 1, 1), [[1, 0, 0], [0, 1, 0], [0, 0, 1]]),
    ],
)
def test_cardinality_oracle_matches_brute_force(q, kappa, b):
    bm = GfMatrix(b, q)
    lb = len(b)
    for r in range(1, lb + 1):
        for c in enum_fullrank_rref(lb - r, lb, q):
            count, bound = lemma1_oracle(q, len(kappa), kappa, bm, r, c)
            assert count == _cell_count_bf(q, kappa, b, r, c.tolist())
            if bound is not None:
                assert count <= bound


def test_partition_examples():
    assert partition_oracle(2, 2, (1, 1), GfMatrix.identity(2, 2))
    for kappa in [(0,), (1,), (2,)]:
        assert partition_oracle(3, 1, kappa, GfMatrix([[1]], 3))
    assert partition_oracle(3, 2, (1, 0), GfMatrix([[1, 1]], 3))


def test_cells_sum_to_distinct_nonzero_count():
    # B = [1, 2] over F_3, kappa = (2, 1): M_B = m_1 + 2 [m_2, 0]
    b = GfMatrix([[1, 2]], 3)
    count = lemma1_oracle(3, 2, (2, 1), b, 1, GfMatrix.empty(1, 3))[0]
    distinct = {((x0 + 2 * y) % 3, x1) for x0, x1, y in itertools.product(range(3), repeat=3)}
    assert count == len(distinct - {(0, 0)}) == 8
