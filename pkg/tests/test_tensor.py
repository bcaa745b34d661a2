import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mu_workbench.errors import PositivityError, ShapeError
from mu_workbench.tensor import (Functional, Operator, PositiveOperator, Space,
                                 apply_legs, flip, leg_embed, mat_pow, matrix_units,
                                 opnorm, partial_transpose, realign_left,
                                 slice_left, slice_right, tensor, transpose)

from oracles import CNOT, XFLIP, basis, embed, left_slice

TOL = 1e-12
seeds = st.integers(0, 2**32 - 1)


def rand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# -- Space and Operator ------------------------------------------------------

def test_space_dims_and_double_conjugate():
    s = Space.of(2, 3, conjugate=[True, False])
    assert s.dim == 6 and s.dims == (2, 3)
    assert s.conj().conj() == s
    assert s.conj()[0].conjugate is False


def test_space_rejects_zero_dim():
    with pytest.raises(ValueError):
        Space.of(2, 0)


def test_operator_shape_checked():
    with pytest.raises(ShapeError):
        Operator(np.eye(3), Space.of(2))


def test_adjoint_involution():
    m = Operator.on(rand(np.random.default_rng(1), 3, 3), 3)
    assert np.array_equal(m.adj().adj().mat, m.mat)


# -- tensor ------------------------------------------------------------------

def test_tensor_identities():
    i2 = Operator.identity(Space.of(2))
    assert np.array_equal(tensor(i2, i2).mat, np.eye(4))
    assert tensor(i2, i2).domain.dims == (2, 2)


def test_tensor_diagonal_order():
    t = tensor(Operator.on(np.diag([1.0, 2.0]), 2), Operator.identity(Space.of(2)))
    assert np.array_equal(t.mat, np.diag([1, 1, 2, 2]))


def test_tensor_flip_flip():
    x = Operator.on(XFLIP, 2)
    v = tensor(x, x).apply(np.kron(basis(2, 0), basis(2, 0)))
    assert np.array_equal(v, np.kron(basis(2, 1), basis(2, 1)))


# -- leg_embed -----------------------------------------------------------------

def test_leg_embed_identity():
    h3 = Space.of(2, 2, 2)
    assert np.array_equal(leg_embed(np.eye(4), [1, 2], h3).mat, np.eye(8))


def test_leg_embed_cnot_first_legs():
    out = leg_embed(Operator.on(CNOT, 2, 2), [0, 1], Space.of(2, 2, 2)).mat
    assert np.array_equal(out, np.kron(CNOT, np.eye(2)))
    assert np.array_equal(out, embed(CNOT, [0, 1], [2, 2, 2]))


def test_leg_embed_cnot_nonadjacent():
    out = leg_embed(Operator.on(CNOT, 2, 2), [0, 2], Space.of(2, 2, 2))
    e100 = np.kron(np.kron(basis(2, 1), basis(2, 0)), basis(2, 0))
    e101 = np.kron(np.kron(basis(2, 1), basis(2, 0)), basis(2, 1))
    assert np.array_equal(out.apply(e100), e101)


def test_leg_embed_factor_mismatch():
    with pytest.raises(ShapeError):
        leg_embed(Operator.on(CNOT, 2, 2), [0, 1], Space.of(3, 2, 2))
    with pytest.raises(ShapeError):
        leg_embed(np.eye(4), [0, 0], Space.of(2, 2, 2))


@settings(max_examples=25, deadline=None)
@given(seeds, st.permutations([0, 1, 2, 3]))
def test_leg_embed_matches_oracle(seed, perm):
    rng = np.random.default_rng(seed)
    dims = [2, 3, 2, 2]
    legs = list(perm[:2])
    u = rand(rng, dims[legs[0]] * dims[legs[1]], dims[legs[0]] * dims[legs[1]])
    got = leg_embed(u, legs, Space.of(*dims)).mat
    assert np.allclose(got, embed(u, legs, dims), atol=TOL)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_disjoint_legs_commute(seed):
    rng = np.random.default_rng(seed)
    amb = Space.of(2, 2, 2, 2)
    a = leg_embed(rand(rng, 4, 4), [0, 2], amb).mat
    b = leg_embed(rand(rng, 4, 4), [3, 1], amb).mat
    assert opnorm(a @ b - b @ a) < 1e-12 * max(1, opnorm(a) * opnorm(b))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_apply_legs_agrees_with_embedding(seed):
    rng = np.random.default_rng(seed)
    dims = (2, 3, 2)
    u = rand(rng, 4, 4)
    v = rand(rng, *dims)
    got = apply_legs(u, v, [2, 0]).reshape(-1)
    want = leg_embed(u, [2, 0], Space.of(*dims)).mat @ v.reshape(-1)
    assert np.allclose(got, want, atol=TOL)


# -- flip and transpose ------------------------------------------------------

def test_flip_action_and_involution():
    sig = flip(Space.of(2, 2))
    assert np.array_equal(sig.apply(np.kron(basis(2, 0), basis(2, 1))),
                          np.kron(basis(2, 1), basis(2, 0)))
    assert np.array_equal((sig @ sig).mat, np.eye(4))


def test_flip_conjugates_cnot():
    sig = flip(Space.of(2, 2)).mat
    want = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])
    assert np.array_equal(sig @ CNOT @ sig, want)


def test_flip_unequal_factors():
    sig = flip(Space.of(2, 3))
    x, y = basis(2, 1), basis(3, 2)
    assert np.array_equal(sig.apply(np.kron(x, y)), np.kron(y, x))
    assert sig.codomain.dims == (3, 2)


def test_transpose_examples():
    m = Operator.on(rand(np.random.default_rng(0), 3, 3), 3)
    assert np.array_equal(transpose(transpose(m)).mat, m.mat)
    assert transpose(transpose(m)).domain == m.domain
    d = transpose(Operator.on(np.diag([1.0, 2.0]), 2))
    assert np.array_equal(d.mat, np.diag([1, 2])) and d.domain[0].conjugate
    e = transpose(Operator.on(np.array([[0, 1], [0, 0]]), 2))
    assert np.array_equal(e.mat, [[0, 0], [1, 0]])


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_transpose_defining_relation(seed):
    rng = np.random.default_rng(seed)
    m = rand(rng, 3, 3)
    x, y = rand(rng, 3), rand(rng, 3)
    # <xbar, m^T ybar> = <y, m x>
    lhs = np.vdot(x.conj(), transpose(Operator.on(m, 3)).mat @ y.conj())
    assert abs(lhs - np.vdot(y, m @ x)) < 1e-12 * (1 + abs(lhs))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_transpose_antihomomorphism(seed):
    rng = np.random.default_rng(seed)
    m, n = (Operator.on(rand(rng, 3, 3), 3) for _ in range(2))
    assert opnorm(transpose(m @ n).mat - (transpose(n) @ transpose(m)).mat) < 1e-12 * 10
    assert opnorm(transpose(m.adj()).mat - transpose(m).adj().mat) < TOL


def test_partial_transpose_cnot_fixed():
    pt = partial_transpose(Operator.on(CNOT, 2, 2), [0])
    assert np.array_equal(pt.mat, CNOT)
    assert pt.domain[0].conjugate and not pt.domain[1].conjugate


# -- slices and realignment ----------------------------------------------------

def test_slice_left_examples():
    w = Operator.on(CNOT, 2, 2)
    assert np.array_equal(slice_left(w, Functional.matrix_unit(2, 0, 0)).mat, np.eye(2))
    assert np.array_equal(slice_left(w, Functional.matrix_unit(2, 1, 1)).mat, XFLIP)


def test_slice_left_product_operator():
    rng = np.random.default_rng(3)
    m = rand(rng, 3, 3)
    omega = Functional(np.diag([0.2, 0.8]))
    out = slice_left(Operator.on(np.kron(np.eye(2), m), 2, 3), omega).mat
    assert np.allclose(out, m, atol=TOL)


def test_slice_shape_error():
    with pytest.raises(ShapeError):
        slice_left(Operator.on(CNOT, 2, 2), Functional(np.eye(3)))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_slices_match_oracle_and_are_linear(seed):
    rng = np.random.default_rng(seed)
    w = rand(rng, 9, 9)
    f1, f2 = rand(rng, 3, 3), rand(rng, 3, 3)
    s1 = slice_left(w, Functional(f1)).mat
    assert np.allclose(s1, left_slice(w, 3, f1), atol=1e-12)
    comb = slice_left(w, Functional(f1 + 2j * f2)).mat
    assert np.allclose(comb, s1 + 2j * slice_left(w, Functional(f2)).mat, atol=1e-12)
    # right slice of w equals left slice of the flipped operator
    sig = flip(Space.of(3, 3)).mat
    assert np.allclose(slice_right(w, Functional(f1)).mat,
                       slice_left(sig @ w @ sig, Functional(f1)).mat, atol=1e-12)


def test_realign_rows_are_slices():
    rng = np.random.default_rng(5)
    w = rand(rng, 9, 9)
    rows = realign_left(w)
    for om in matrix_units(3):
        i, j = np.argwhere(om.frame.T == 1)[0]
        assert np.array_equal(rows[i * 3 + j].reshape(3, 3), slice_left(w, om).mat)


def test_realign_ranks():
    def rank(m):
        return np.linalg.matrix_rank(realign_left(m), tol=1e-9)
    assert rank(CNOT) == 2
    assert rank(np.eye(4)) == 1
    from oracles import kac_takesaki
    assert rank(kac_takesaki([[0, 1, 2], [1, 2, 0], [2, 0, 1]])) == 3


def test_functional_evaluation():
    rng = np.random.default_rng(2)
    x, y = rand(rng, 3), rand(rng, 3)
    m = rand(rng, 3, 3)
    assert np.isclose(Functional.vector(x, y)(m), np.vdot(x, m @ y))
    assert np.isclose(Functional.matrix_unit(3, 1, 2)(m), m[1, 2])


# -- functional calculus -------------------------------------------------------

def test_mat_pow_examples():
    p = PositiveOperator.from_diag([1.0, 4.0])
    assert np.allclose(mat_pow(p, 0.5).mat, np.diag([1, 2]), atol=TOL)
    assert np.allclose(mat_pow(PositiveOperator.identity(3), 0.3 - 2j).mat, np.eye(3))
    assert np.allclose(mat_pow(p, 1j * np.pi / np.log(2)).mat, np.eye(2), atol=TOL)


def test_positivity_errors():
    with pytest.raises(PositivityError):
        PositiveOperator.from_diag([1.0, 0.0])
    with pytest.raises(PositivityError):
        PositiveOperator.from_matrix(np.array([[1, 1j], [0, 1]]))
    with pytest.raises(PositivityError):
        PositiveOperator.from_matrix(np.diag([1.0, -2.0]))


def test_group_law_hundred_pairs():
    rng = np.random.default_rng(11)
    p = PositiveOperator.from_matrix((lambda a: a @ a.conj().T + np.eye(4))(rand(rng, 4, 4)))
    for t, s in rng.uniform(-5, 5, size=(100, 2)):
        lhs = p.power(1j * t) @ p.power(1j * s)
        assert opnorm(lhs - p.power(1j * (t + s))) < 1e-10
        u = p.power(1j * t)
        assert opnorm(u.conj().T @ u - np.eye(4)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_complex_powers_add(seed, a, b):
    rng = np.random.default_rng(seed)
    m = rand(rng, 3, 3)
    p = PositiveOperator.from_matrix(m @ m.conj().T + np.eye(3))
    z1, z2 = complex(a, b), complex(b, -a)
    lhs = p.power(z1) @ p.power(z2)
    rhs = p.power(z1 + z2)
    assert opnorm(lhs - rhs) < 1e-9 * max(1.0, opnorm(rhs))


def test_positive_transpose_and_inverse():
    rng = np.random.default_rng(4)
    m = rand(rng, 3, 3)
    p = PositiveOperator.from_matrix(m @ m.conj().T + np.eye(3))
    assert np.allclose(p.T.mat, p.mat.T)
    assert np.allclose(p.inv().mat @ p.mat, np.eye(3), atol=1e-12)
