import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cfregions.catalog import binary_adder, mod4_adder
from cfregions.channel import NOTHING, ChannelSpec, SpecError, U, W, X, Y, cond_entropy_w
from cfregions.gflin import GfMatrix
from oracles import combo, cond_h_w, entropy_bf, h_users, joint_pmf_bf


def _normalise(a):
    a = np.asarray(a, dtype=float) + 1e-3
    return a / a.sum(axis=-1, keepdims=True)


@st.composite
def specs(draw):
    q = draw(st.sampled_from([2, 3]))
    k = draw(st.integers(1, 3))
    xs = tuple(draw(st.integers(1, 3)) for _ in range(k))
    ny = draw(st.integers(1, 4))
    floats = st.floats(0, 1, allow_nan=False)
    pmf = _normalise(np.array(draw(st.lists(floats, min_size=k * q, max_size=k * q))).reshape(k, q))
    smap = np.array(draw(st.lists(st.integers(0, 2), min_size=k * q, max_size=k * q))).reshape(k, q)
    smap = np.stack([smap[i] % xs[i] for i in range(k)])
    size = int(np.prod(xs)) * ny
    ch = _normalise(np.array(draw(st.lists(floats, min_size=size, max_size=size))).reshape(xs + (ny,)))
    return ChannelSpec(q, pmf, smap, ch)


def _bf(spec):
    return joint_pmf_bf(spec.q, spec.pmf_u.tolist(), spec.symbol_map.tolist(), spec.channel.tolist())


@given(specs())
def test_joint_table_normalised_and_matches_products(spec):
    d = spec.joint
    assert d.prob.shape == (spec.q**spec.K, spec.y_size)
    assert math.isclose(d.prob.sum(), 1.0)
    pmf = _bf(spec)
    for i, u in enumerate(d.u_tuples):
        for y in range(spec.y_size):
            assert math.isclose(d.prob[i, y], pmf.get(tuple(u) + (y,), 0.0), abs_tol=1e-12)


@given(specs(), st.data())
def test_entropies_match_brute_force(spec, data):
    d = spec.joint
    pmf = _bf(spec)
    k, q = spec.K, spec.q
    users = tuple(sorted(data.draw(st.sets(st.integers(0, k - 1), min_size=1))))
    assert math.isclose(d.entropy(U(*users)), h_users(pmf, users), abs_tol=1e-9)
    assert math.isclose(d.entropy(Y), entropy_bf(pmf, lambda key: key[-1]), abs_tol=1e-9)
    row = data.draw(st.lists(st.integers(0, q - 1), min_size=k, max_size=k))
    other = data.draw(st.lists(st.integers(0, q - 1), min_size=k, max_size=k))
    b_s, cb = GfMatrix([row], q), GfMatrix([other], q)
    assert math.isclose(cond_entropy_w(d, b_s, cb), cond_h_w(pmf, q, k, [row], [other]), abs_tol=1e-9)
    f = combo([row], q, k)
    assert math.isclose(d.entropy(W(b_s) | Y), entropy_bf(pmf, lambda key: (f(key), key[-1])), abs_tol=1e-9)


@given(specs())
def test_information_identities(spec):
    d = spec.joint
    k = spec.K
    # chain rule and nonnegativity
    assert d.entropy(U(*range(k))) == pytest.approx(sum(d.entropy(U(i)) for i in range(k)), abs=1e-9)
    assert d.mutual_info(U(0), Y) >= -1e-12
    assert d.cond_entropy(Y, U(*range(k))) <= d.entropy(Y) + 1e-12
    # U -> X -> Y: conditioning on the other user's input
    if k == 2:
        assert d.mutual_info(U(1), Y, U(0)) <= d.mutual_info(X(1), Y, X(0)) + 1e-9


def test_binary_adder_values():
    d = binary_adder().joint
    a = GfMatrix([[1, 1]], 2)
    assert d.entropy(Y) == pytest.approx(1.5)
    assert d.cond_entropy(W(a), Y) == pytest.approx(0.0, abs=1e-12)
    assert d.mutual_info(X(0), Y, X(1)) == pytest.approx(1.0)
    assert d.mutual_info(U(0), Y, NOTHING) == pytest.approx(0.5)


def test_mod4_adder_values():
    # derived with tests/oracles.py and frozen
    d = mod4_adder(0.1).joint
    assert d.cond_entropy(W(GfMatrix([[1, 1, 1]], 5)), Y) == pytest.approx(0.5788169184027769, abs=1e-12)
    assert d.entropy(Y) == pytest.approx(1.8599530497177523, abs=1e-12)
    assert mod4_adder(0.0).joint.entropy(Y) == pytest.approx(1.811278124459133, abs=1e-12)


def test_validation_errors_name_the_key():
    good = binary_adder()
    with pytest.raises(SpecError) as e:
        ChannelSpec(4, good.pmf_u, good.symbol_map, good.channel)
    assert e.value.key == "q"
    with pytest.raises(SpecError) as e:
        ChannelSpec(2, [[0.6, 0.6], [0.5, 0.5]], good.symbol_map, good.channel)
    assert e.value.key == "pmf_u"
    bad = good.channel.copy()
    bad[0, 0, 0] = 0.5
    with pytest.raises(SpecError) as e:
        good.with_channel(bad)
    assert e.value.key == "channel"
    with pytest.raises(SpecError) as e:
        ChannelSpec(2, good.pmf_u, [[0, 2], [0, 1]], good.channel)
    assert e.value.key == "x_map"


def test_small_rounding_is_renormalised():
    spec = ChannelSpec(2, [[0.5 + 4e-7, 0.5], [0.5, 0.5]], [[0, 1], [0, 1]], binary_adder().channel)
    assert spec.pmf_u.sum(axis=1) == pytest.approx([1.0, 1.0], abs=1e-15)


def test_equality_and_shared_inputs():
    assert binary_adder(0.1) == binary_adder(0.1)
    assert binary_adder(0.1) != binary_adder(0.2)
    assert binary_adder(0.1).same_inputs(binary_adder(0.2))
