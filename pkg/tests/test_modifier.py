import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, logm

from mu_workbench import modifier as mod
from mu_workbench.errors import BudgetError, PreconditionError, ShapeError
from mu_workbench.groups import cyclic, gen_group_kt, perturbed
from mu_workbench.munit import MultUnitary, build_wtilde, dual
from mu_workbench.qgroup import extract
from mu_workbench.tensor import PositiveOperator, opnorm

from oracles import CNOT, random_positive

D12 = PositiveOperator.from_diag([1.0, 2.0])
I2 = PositiveOperator.identity(2)


@pytest.fixture(scope="module")
def cnot():
    return MultUnitary(CNOT)


@pytest.fixture(scope="module")
def cnot_dual():
    return dual(MultUnitary(CNOT))


def x_oracle(wp, q, q_hat):
    """Dense ``sum_j P_j (x) Q^{i x_j} Qhat^{-i x_j}`` through matrix logarithms."""
    lq, lqh = logm(q.mat), logm(q_hat.mat)
    n, d = wp.n, q.dim
    out = np.zeros((n * d, n * d), dtype=complex)
    for j, xj in enumerate(wp.x):
        p = np.zeros((n, n))
        p[j, j] = 1
        out += np.kron(p, expm(1j * xj * lq) @ expm(-1j * xj * lqh))
    return out


def wm_oracle(w, x, n, d):
    """``X12 W24 X12*`` assembled from Kronecker products and a leg swap."""
    big = n * d * n * d
    w24 = np.zeros((big, big), dtype=complex)
    w4 = w.reshape(d, d, d, d)
    for k1 in range(n):
        for k2 in range(n):
            for a in range(d):
                for b in range(d):
                    for c in range(d):
                        for e in range(d):
                            row = ((k1 * d + a) * n + k2) * d + b
                            col = ((k1 * d + c) * n + k2) * d + e
                            w24[row, col] = w4[a, b, c, e]
    x12 = np.kron(x, np.eye(n * d))
    return x12 @ w24 @ x12.conj().T


# -- the Weyl pair ------------------------------------------------------------

def test_grid_must_be_power_of_two():
    with pytest.raises(ValueError):
        mod.WeylPair(48, 16.0)
    with pytest.raises(ValueError):
        mod.WeylPair(64, 16.0, stencil=3)


def test_grid_points():
    wp = mod.WeylPair(8, 4.0)
    assert np.allclose(wp.x, -2 + 0.5 * np.arange(8))


@pytest.mark.parametrize("stencil", [2, 4, "spectral"])
def test_momentum_symbol_low_frequency(stencil):
    n, length = 64, 16.0
    sym = mod.momentum_symbol(n, length, stencil)
    k = 2 * np.pi * np.fft.fftfreq(n, length / n)
    assert np.allclose(sym[:4], k[:4], rtol=2e-2)
    assert np.allclose(sym, np.real(sym))


def test_r_is_positive_and_r_power_matches_dense():
    wp = mod.WeylPair(16, 8.0)
    assert np.all(wp.r.eigvals > 0)
    v = wp.gaussian()
    for z in (0.7j, -1.3j, 0.5):
        assert np.allclose(wp.r_power(v, z), wp.r.power(z) @ v, atol=1e-12)


def test_translation_error_zero_at_t0():
    wp = mod.WeylPair(64, 16.0)
    assert wp.translation_error(wp.gaussian(), 0.0) < 1e-14


def test_translation_converges_at_fourth_order():
    errs = [mod.WeylPair(n, 16.0).translation_error(mod.WeylPair(n, 16.0).gaussian(), 1.0)
            for n in (64, 128, 256)]
    assert errs[1] / errs[0] < 0.1 and errs[2] / errs[1] < 0.1
    for n, e in zip((64, 128, 256), errs):
        assert e < mod.CALIBRATION[(n, 16.0)]["translation_error"]


def test_r_it_is_unitary():
    wp = mod.WeylPair(32, 16.0)
    u = wp.r.power(0.8j)
    assert np.allclose(u @ u.conj().T, np.eye(32), atol=1e-12)


# -- X -------------------------------------------------------------------------

@pytest.mark.parametrize("q,qh", [(I2, D12), (D12, I2),
                                  (PositiveOperator.from_matrix([[2, 1], [1, 3]]), D12)])
def test_X_matches_oracle(q, qh):
    wp = mod.WeylPair(16, 8.0)
    x = mod.build_X(wp, q, qh)
    assert opnorm(x.dense() - x_oracle(wp, q, qh)) < 1e-12
    assert np.allclose(x.dense() @ x.dense("adj"), np.eye(32), atol=1e-12)
    assert np.allclose(x.dense("T"), x.dense().T)
    assert np.allclose(x.dense("Tadj"), x.dense().conj())


def test_X_trivial_when_certificate_trivial():
    wp = mod.WeylPair(16, 8.0)
    assert np.allclose(mod.build_X(wp, I2, I2).dense(), np.eye(32))
    # Q = Qhat gives commuting factors that cancel
    assert np.allclose(mod.build_X(wp, D12, D12).dense(), np.eye(32), atol=1e-12)


def test_X_block_phases():
    wp = mod.WeylPair(8, 4.0)
    x = mod.build_X(wp, I2, D12)
    for j, xj in enumerate(wp.x):
        assert np.allclose(x.blocks[j], np.diag([1, 2 ** (-1j * xj)]))


def test_X_shape_mismatch():
    with pytest.raises(ShapeError):
        mod.build_X(mod.WeylPair(8, 4.0), I2, PositiveOperator.identity(3))


def test_trick(cnot):
    assert mod.check_trick(cnot, I2, D12) < 1e-12
    assert mod.check_trick(cnot, D12, I2) > 1e-3


# -- W_M: exact family -------------------------------------------------------

@pytest.fixture(scope="module")
def lifted(cnot):
    wp = mod.WeylPair(8, 8.0)
    return wp, mod.build_WM(cnot, mod.build_X(wp, I2, D12))


def test_wm_matches_kron_oracle(lifted, cnot):
    wp, lu = lifted
    oracle = wm_oracle(cnot.mat, lu.x.dense(), wp.n, 2)
    assert opnorm(lu.dense() - oracle) < 1e-12


def test_exact_family(lifted):
    wp, lu = lifted
    assert mod.check_pipeline_dense(lu) < 1e-12
    assert mod.check_unitarity(lu) < 1e-12
    assert mod.pentagon_residual_WM(lu) < 1e-10
    assert mod.check_redu(lu) < 1e-10
    assert mod.check_albeW(lu) < 1e-10
    assert mod.check_homomorphisms(lu) < 1e-10
    assert mod.inner_product_residual(lu, wp, I2, build_wtilde(lu.w, I2)) < 1e-10


def test_exact_family_dual(cnot_dual):
    wp = mod.WeylPair(8, 8.0)
    lu = mod.build_WM(cnot_dual, mod.build_X(wp, D12, I2))
    assert mod.pentagon_residual_WM(lu) < 1e-10
    assert mod.check_redu(lu) < 1e-10
    assert mod.inner_product_residual(lu, wp, D12, build_wtilde(cnot_dual, D12)) < 1e-10


def test_x_identity_reduces_to_w(cnot):
    wp = mod.WeylPair(4, 4.0)
    lu = mod.build_WM(cnot, mod.build_X(wp, I2, I2))
    # with X = I the lift is W24, i.e. W on the H legs and identity on K
    assert opnorm(lu.dense() - wm_oracle(cnot.mat, np.eye(8), 4, 2)) < 1e-14


def test_perturbed_w_breaks_exact_family(cnot):
    wp = mod.WeylPair(8, 8.0)
    lu = mod.build_WM(perturbed(cnot), mod.build_X(wp, I2, I2))
    assert mod.pentagon_residual_WM(lu) > 1e-4
    assert mod.check_redu(lu) > 1e-4


def test_dense_budget(cnot):
    wp = mod.WeylPair(64, 16.0)
    lu = mod.build_WM(cnot, mod.build_X(wp, I2, D12), budget=1000)
    with pytest.raises(BudgetError):
        lu.dense()
    rep = mod.span_transport(lu, None, None, I2, None)
    assert rep.ok and rep.notes


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_unitarity_property(seed):
    rng = np.random.default_rng(seed)
    q = PositiveOperator.from_matrix(random_positive(2, rng))
    qh = PositiveOperator.from_matrix(random_positive(2, rng))
    wp = mod.WeylPair(16, 8.0)
    lu = mod.build_WM(MultUnitary(CNOT), mod.build_X(wp, q, qh))
    assert mod.check_unitarity(lu, seed=seed % 1000) < 1e-12


# -- W_M: approximate family -------------------------------------------------

def test_tozs_convergence_cnot():
    out = {}
    for n in (64, 128):
        wp = mod.WeylPair(n, 16.0)
        out[n] = np.max(mod.check_tozs(wp, mod.build_X(wp, I2, D12), I2, D12))
        assert out[n] < mod.CALIBRATION[(n, 16.0)]["tozs"]
    assert out[128] / out[64] <= 0.5


def test_tozs_convergence_dual():
    out = [np.max(mod.check_tozs(wp, mod.build_X(wp, D12, I2), D12, I2))
           for wp in (mod.WeylPair(64, 16.0), mod.WeylPair(128, 16.0))]
    assert out[1] / out[0] <= 0.5


def test_tozs_trivial_certificate_is_exact():
    wp = mod.WeylPair(64, 16.0)
    assert np.max(mod.check_tozs(wp, mod.build_X(wp, I2, I2), I2, I2)) < 1e-12


def test_commutator_vanishes_for_cnot_data(cnot):
    # X commutes with W24 here, so W_M = W24 and the commutator is roundoff
    wp = mod.WeylPair(64, 16.0)
    lu = mod.build_WM(cnot, mod.build_X(wp, I2, D12))
    assert np.max(mod.commutator_residuals(lu, wp, I2)) < 1e-8


def test_commutator_converges_dual(cnot_dual):
    vals = []
    for n in (64, 128):
        wp = mod.WeylPair(n, 16.0)
        lu = mod.build_WM(cnot_dual, mod.build_X(wp, D12, I2))
        vals.append(np.max(mod.commutator_residuals(lu, wp, D12)))
        assert vals[-1] < mod.CALIBRATION[(n, 16.0)]["commutator"]
    assert vals[1] / vals[0] <= 0.5


def test_manageability_report(cnot_dual):
    wp = mod.WeylPair(64, 16.0)
    lu = mod.build_WM(cnot_dual, mod.build_X(wp, D12, I2))
    rep = mod.check_manageability_WM(lu, wp, D12)
    assert rep.ok and "commutator" in rep.residuals
    assert rep.tolerances["commutator"] == mod.CALIBRATION[(64, 16.0)]["commutator"]
    wp2 = mod.WeylPair(32, 16.0)
    rep2 = mod.check_manageability_WM(mod.build_WM(cnot_dual, mod.build_X(wp2, D12, I2)),
                                      wp2, D12)
    assert "commutator" in rep2.info and "commutator" not in rep2.residuals
    assert rep2.notes


def test_approx_tolerance_lookup():
    assert mod.approx_tolerance(mod.WeylPair(128, 16.0), "tozs") == 4e-3
    assert mod.approx_tolerance(mod.WeylPair(128, 16.0, 2), "tozs") is None
    assert mod.approx_tolerance(mod.WeylPair(256, 16.0), "commutator") is None


# -- transport ---------------------------------------------------------------

def test_span_transport_cnot(cnot):
    qg = extract(cnot, I2, D12)
    wp = mod.WeylPair(4, 4.0)
    lu = mod.build_WM(cnot, mod.build_X(wp, I2, D12))
    rep = mod.span_transport(lu, qg.algebra, qg.algebra_hat, I2, qg.r_map, wp=wp)
    assert rep.ok, rep.residuals
    assert rep.info["rank_A_M"] == rep.info["rank_beta_A"] == 2
    assert rep.info["rank_Ahat_M"] == rep.info["rank_alpha_Ahat"] == 2


def test_span_transport_z3():
    mu = gen_group_kt(cyclic(3))
    q = PositiveOperator.identity(3)
    qh = PositiveOperator.from_diag([1.0, 2.0, 4.0])
    qg = extract(mu, q, qh)
    wp = mod.WeylPair(2, 4.0)
    rep = mod.span_transport(mod.build_WM(mu, mod.build_X(wp, q, qh)), qg.algebra,
                             qg.algebra_hat, q, qg.r_map, wp=wp)
    assert rep.ok, rep.residuals


# -- convergence study and preconditions -------------------------------------

def test_convergence_study_rows(cnot_dual):
    rows = mod.convergence_study(cnot_dual, D12, I2, n_values=(32, 64), count=3)
    assert {r["check_name"] for r in rows} == {"translation_error", "tozs", "commutator"}
    assert len(rows) == 2 * (1 + 3 + 3)
    text = mod.rows_to_csv(rows)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert tuple(parsed[0]) == mod.CSV_FIELDS
    assert float(parsed[0]["residual"]) == rows[0]["residual"]
    agg = mod.max_by_check(rows)
    assert agg[("tozs", 64)] < agg[("tozs", 32)]


def test_preconditions(cnot):
    assert mod.check_preconditions(cnot, I2, D12) < 1e-12
    with pytest.raises(PreconditionError):
        mod.check_preconditions(cnot, D12, I2)
