import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilflow_lab import heisenberg as h
from nilflow_lab import symplectic as sp
from nilflow_lab.errors import InvalidArgumentError
from nilflow_lab.heisenberg import GroupElement, LieAlgebraVector


def ge(x, y, z):
    return GroupElement(np.atleast_1d(x), np.atleast_1d(y), z)


def rand_elem(rng, g, scale=3.0):
    return GroupElement(rng.uniform(-scale, scale, g), rng.uniform(-scale, scale, g), rng.uniform(-scale, scale))


coords = st.floats(-5, 5, allow_nan=False)


@st.composite
def elements(draw, g=2):
    x = [draw(coords) for _ in range(g)]
    y = [draw(coords) for _ in range(g)]
    return GroupElement(x, y, draw(coords))


def test_identity_is_neutral():
    a = ge([0.3, -1.2], [2.0, 0.5], 0.7)
    e = GroupElement.identity(2)
    assert (e * a).allclose(a) and (a * e).allclose(a)


def test_polarized_law_example():
    assert (ge(1, 0, 0) * ge(0, 1, 0)).allclose(ge(1, 1, 1))


def test_commutator_of_generators_is_central():
    s, t = 0.7, -1.9
    c = h.commutator(ge(s, 0, 0), ge(0, t, 0))
    assert c.allclose(ge(0, 0, s * t), atol=1e-14)


def test_inverse_examples():
    assert h.inverse(GroupElement.identity(1)).allclose(GroupElement.identity(1))
    assert h.inverse(ge(1, 1, 1)).allclose(ge(-1, -1, 0))


def test_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        h.multiply(GroupElement.identity(1), GroupElement.identity(2))
    with pytest.raises(InvalidArgumentError):
        GroupElement([1.0, 2.0], [1.0], 0.0)


@settings(max_examples=200, deadline=None)
@given(elements(), elements(), elements())
def test_associativity(a, b, c):
    assert ((a * b) * c).allclose(a * (b * c), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(elements())
def test_inverse_property(a):
    e = GroupElement.identity(a.g)
    assert (a * h.inverse(a)).allclose(e, atol=1e-12)
    assert (h.inverse(a) * a).allclose(e, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(elements(), elements(), coords)
def test_center_and_commutators(a, b, z):
    c = GroupElement.identity(a.g)
    c = GroupElement(c.x, c.y, z)
    assert (a * c).allclose(c * a, atol=1e-12)
    k = h.commutator(a, b)
    assert np.allclose(k.x, 0) and np.allclose(k.y, 0)


def test_exp_examples():
    assert h.exp_map(LieAlgebraVector([0.0], [0.0], 0.0)).allclose(GroupElement.identity(1))
    assert h.exp_map(LieAlgebraVector.basis_x(2, 0)).allclose(ge([1, 0], [0, 0], 0))
    v = LieAlgebraVector([1.0], [1.0], 0.0)
    assert h.exp_map(v).allclose(ge(1, 1, 0.5))
    assert (h.exp_map(v) * h.exp_map(v)).allclose(h.exp_map(2.0 * v))


@settings(max_examples=100, deadline=None)
@given(st.lists(coords, min_size=5, max_size=5), coords, coords)
def test_one_parameter_subgroups(c, s, t):
    v = LieAlgebraVector(c[:2], c[2:4], c[4])
    lhs = h.exp_map((s + t) * v)
    rhs = h.exp_map(s * v) * h.exp_map(t * v)
    assert lhs.allclose(rhs, atol=1e-10 * max(1.0, abs(s) + abs(t)) ** 2 * 25)
    assert h.exp_map(h.log_map(lhs)).allclose(lhs, atol=1e-12)


def test_bch_examples():
    X = LieAlgebraVector.basis_x(1, 0)
    Y = LieAlgebraVector.basis_y(1, 0)
    assert h.bch_check(X, Y) == 0.0
    assert h.bch_check(X + Y, X + Y) == 0.0
    assert h.bracket(X, Y).c == 1.0


def test_bch_randomized():
    rng = np.random.default_rng(11)
    worst = 0.0
    for k in range(1000):
        g = 1 + k % 3
        u = LieAlgebraVector(*np.split(rng.uniform(-2, 2, 2 * g), 2), rng.uniform(-2, 2))
        v = LieAlgebraVector(*np.split(rng.uniform(-2, 2, 2 * g), 2), rng.uniform(-2, 2))
        worst = max(worst, h.bch_check(u, v))
    assert worst <= 1e-12


def test_lattice_reduce_example_against_word_search():
    a = ge(1.25, -0.5, 0.9)
    r = h.lattice_reduce(a)
    assert r.x[0] == pytest.approx(0.25) and r.y[0] == pytest.approx(0.5)
    assert 0.0 <= r.z < 0.5
    # brute force: some small lattice word gamma with a . gamma == r
    found = False
    for n, m, k in itertools.product(range(-3, 4), range(-3, 4), range(-8, 9)):
        cand = a * ge(n, m, 0.5 * k)
        if cand.allclose(r, atol=1e-12):
            found = True
            break
    assert found


def test_lattice_reduce_identity_and_idempotent():
    assert h.lattice_reduce(GroupElement.identity(2)).allclose(GroupElement.identity(2))
    rng = np.random.default_rng(3)
    for _ in range(200):
        a = rand_elem(rng, 2, 10.0)
        r = h.lattice_reduce(a)
        assert np.all((r.x >= 0) & (r.x < 1) & (r.y >= 0) & (r.y < 1)) and 0 <= r.z < 0.5
        assert h.lattice_reduce(r).allclose(r, atol=1e-12)
        assert h.in_lattice(h.inverse(a) * r)


def test_frame_transform_examples():
    f = h.frame_transform(np.eye(2))
    assert np.allclose(f.matrix, np.eye(2))
    t = 0.8
    f = h.frame_transform(np.diag([np.exp(t), np.exp(-t)]))
    assert np.allclose(f.x_block[:, 0], [np.exp(-t), 0])
    assert np.allclose(f.y_block[:, 0], [0, np.exp(t)])


def test_frame_transform_functoriality():
    a = sp.random_preset(2, 1)
    b = sp.random_preset(2, 2)
    lhs = h.frame_transform(a @ b)
    rhs = h.frame_transform(a).then(h.frame_transform(b))
    assert np.allclose(lhs.matrix, rhs.matrix, atol=1e-12)
    assert lhs.is_symplectic()


def test_frame_transform_rejects_non_symplectic():
    with pytest.raises(InvalidArgumentError):
        h.frame_transform(np.diag([2.0, 1.0, 1.0, 1.0]))


def test_x_frame_vectors_commute():
    f = h.frame_transform(sp.random_preset(3, 5))
    xs = f.x_vectors
    for u, v in itertools.combinations(xs, 2):
        assert abs(h.bracket(u, v).c) < 1e-12
