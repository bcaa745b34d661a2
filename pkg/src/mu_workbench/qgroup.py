"""
Quantum-group data extracted from a modular multiplicative unitary.

The algebras are spans of slices,

    A    = span{(omega (x) id) W},     Ahat = span{(id (x) omega) W*},

stored through orthonormal bases (Hilbert-Schmidt inner product).  Linear
maps on ``A`` (coinverse, scaling group, unitary antipode) are matrices acting
on coefficient vectors in that basis; the comultiplication is stored as the
coefficient tensor ``D[mu, a, b]`` of ``Delta(a_mu)`` in the product basis of
``A (x) A``.  In finite dimension every closure in the theory collapses, so
the coinverse is an everywhere-defined map on ``A``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .munit import CheckReport, MultUnitary, build_wtilde
from .tensor import (EXACT_TOL, Functional, Operator, PositiveOperator,
                     Space, leg_embed, mat_pow, matrix_units, opnorm,
                     realign_left, realign_right, slice_right)

#: relative singular-value cutoff used to decide the dimension of a span
RANK_RTOL = 1e-9
DEFAULT_T = (0.3, 1.7, -2.5)


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    idx = int(np.argmax(mags > 1e-8 * mags.max()))
    return v * (np.conj(v[idx]) / mags[idx])


def span_basis(rows: np.ndarray, rtol: float = RANK_RTOL):
    """Orthonormal basis of the row space, descending singular values."""
    _, s, vh = np.linalg.svd(rows, full_matrices=False)
    rank = int(np.sum(s > rtol * max(s.max(), 1e-300))) if s.size else 0
    basis = np.array([_phase_normalize(v) for v in vh[:rank]])
    return basis, s


@dataclass(frozen=True, eq=False)
class SliceAlgebra:
    """A span of operators on ``C^d`` with an orthonormal basis ``(r, d, d)``."""

    basis: np.ndarray
    singular_values: np.ndarray = field(default=None, repr=False)
    closure_residual: float = 0.0
    unit_residual: float = 0.0
    orth_residual: float = 0.0

    @classmethod
    def from_rows(cls, rows: np.ndarray, dim: int) -> "SliceAlgebra":
        vecs, s = span_basis(rows)
        basis = vecs.reshape(len(vecs), dim, dim)
        alg = cls(basis, s)
        gram = np.einsum("kij,lij->kl", basis.conj(), basis)
        orth = opnorm(gram - np.eye(len(basis)))
        prods = np.einsum("kij,ljm->klim", basis, basis).reshape(-1, dim, dim)
        closure = max(alg.residual(p) for p in prods) if len(prods) else 0.0
        unit = alg.residual(np.eye(dim))
        return cls(basis, s, closure, unit, orth)

    @classmethod
    def from_matrices(cls, mats, dim: int) -> "SliceAlgebra":
        mats = np.asarray(mats)
        return cls.from_rows(mats.reshape(len(mats), -1), dim)

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def is_algebra(self, tol: float = EXACT_TOL) -> bool:
        return max(self.closure_residual, self.unit_residual,
                   self.orth_residual) < tol

    def coeffs(self, m) -> np.ndarray:
        m = np.asarray(getattr(m, "mat", m))
        return np.einsum("kij,...ij->...k", self.basis.conj(), m)

    def element(self, c) -> np.ndarray:
        return np.einsum("...k,kij->...ij", np.asarray(c), self.basis)

    def project(self, m) -> np.ndarray:
        return self.element(self.coeffs(m))

    def residual(self, m) -> float:
        m = np.asarray(getattr(m, "mat", m))
        return opnorm(m - self.project(m))

    def to_dict(self) -> dict:
        return {"rank": self.rank,
                "basis": [[[[z.real, z.imag] for z in row] for row in b]
                          for b in self.basis],
                "singular_values": [float(x) for x in self.singular_values[:self.rank]],
                "closure_residual": self.closure_residual,
                "unit_residual": self.unit_residual,
                "orth_residual": self.orth_residual}


def algebra_left(mu: MultUnitary) -> SliceAlgebra:
    """``A``: span of the left slices of ``W``."""
    return SliceAlgebra.from_rows(realign_left(mu.mat), mu.h_dim)


def algebra_right(mu: MultUnitary) -> SliceAlgebra:
    """``Ahat``: span of the right slices of ``W*``."""
    return SliceAlgebra.from_rows(realign_right(mu.mat.conj().T), mu.h_dim)


# -- tensor products of spans ----------------------------------------------

def pair_coeffs(x: np.ndarray, a: SliceAlgebra, b: SliceAlgebra) -> np.ndarray:
    """Coefficients of ``x`` on ``H (x) H`` in the basis ``a_mu (x) b_nu``."""
    d1, d2 = a.dim, b.dim
    x4 = np.asarray(x).reshape(d1, d2, d1, d2)
    return np.einsum("mij,nkl,ikjl->mn", a.basis.conj(), b.basis.conj(), x4,
                     optimize=True)


def pair_element(c: np.ndarray, a: SliceAlgebra, b: SliceAlgebra,
                 left=None, right=None) -> np.ndarray:
    """``sum c[mu, nu] left(a_mu) (x) right(b_nu)``; maps default to identity."""
    la = a.basis if left is None else left
    rb = b.basis if right is None else right
    d1, d2 = la.shape[1], rb.shape[1]
    t = np.einsum("mn,mij,nkl->ikjl", c, la, rb, optimize=True)
    return t.reshape(d1 * d2, d1 * d2)


def check_multiplier(mu: MultUnitary, a_hat: SliceAlgebra,
                     a: SliceAlgebra) -> float:
    """``|| W - P(W) ||`` for ``P`` the projection onto ``span(Ahat) (x) span(A)``.

    Both algebras are unital in finite dimension, so the multiplier algebra
    of ``Ahat (x) A`` is the tensor product itself.
    """
    c = pair_coeffs(mu.mat, a_hat, a)
    return opnorm(mu.mat - pair_element(c, a_hat, a))


# -- comultiplication ------------------------------------------------------

def comult(mu: MultUnitary, m) -> Operator:
    """``Delta(m) = W (m (x) I) W*``, defined for every operator ``m``."""
    m = np.asarray(getattr(m, "mat", m))
    w = mu.mat
    d = mu.h_dim
    return Operator(w @ np.kron(m, np.eye(d)) @ w.conj().T, Space.of(d, d))


def comult_tensor(mu: MultUnitary, a: SliceAlgebra) -> np.ndarray:
    """``D[mu, alpha, beta]``: coefficients of ``Delta(a_mu)`` in ``A (x) A``."""
    return np.array([pair_coeffs(comult(mu, b).mat, a, a) for b in a.basis])


def comult_checks(mu: MultUnitary, a: SliceAlgebra,
                  tol: float = EXACT_TOL) -> CheckReport:
    """Residuals for the comultiplication.

    ``c1`` ``||(id (x) Delta) W - W12 W13||``; ``c2`` membership of
    ``Delta(a_mu)`` in ``A (x) A``; ``c3`` coassociativity on basis
    coefficients; ``c4`` rank deficit of the two density families.
    """
    d = mu.h_dim
    h3 = Space.of(d, d, d)
    w12 = leg_embed(mu.w, [0, 1], h3).mat
    w13 = leg_embed(mu.w, [0, 2], h3).mat
    w23 = leg_embed(mu.w, [1, 2], h3).mat
    c1 = opnorm(w23 @ w12 @ w23.conj().T - w12 @ w13)

    deltas = [comult(mu, b).mat for b in a.basis]
    dt = np.array([pair_coeffs(x, a, a) for x in deltas])
    c2 = max((opnorm(x - pair_element(c, a, a)) for x, c in zip(deltas, dt)),
             default=0.0)

    # (Delta (x) id) Delta(a_mu) and (id (x) Delta) Delta(a_mu) as coefficient
    # tensors on A (x) A (x) A
    lhs = np.einsum("mpn,pab->mabn", dt, dt)
    rhs = np.einsum("mpq,qbc->mpbc", dt, dt)
    c3 = float(np.max(np.abs(lhs - rhs))) if dt.size else 0.0

    r = a.rank
    left = np.array([x @ np.kron(np.eye(d), b) for x in deltas for b in a.basis])
    right = np.array([np.kron(b, np.eye(d)) @ x for b in a.basis for x in deltas])

    def rank(mats):
        s = np.linalg.svd(mats.reshape(len(mats), -1), compute_uv=False)
        return int(np.sum(s > RANK_RTOL * s.max()))
    rank_l, rank_r = rank(left), rank(right)
    rep = CheckReport({"c1": c1, "c2": c2, "c3": c3,
                       "c4": float(r * r - min(rank_l, rank_r))},
                      tolerance=tol, tolerances={"c4": 0.5})
    rep.info.update({"density_rank_left": rank_l, "density_rank_right": rank_r,
                     "tensor_rank": r * r})
    return rep


def convolve(mu_f: Functional, nu_f: Functional, mu: MultUnitary) -> Functional:
    """``nu * mu = (mu (x) nu) o Delta`` as a functional on ``B(H)``."""
    d = mu.h_dim
    w = mu.mat
    big = w.conj().T @ np.kron(mu_f.frame, nu_f.frame) @ w
    return Functional(np.einsum("abcb->ac", big.reshape(d, d, d, d)))


# -- coinverse, scaling group, unitary antipode -------------------------------

def kappa(mu: MultUnitary, a: SliceAlgebra, tol: float = EXACT_TOL):
    """Matrix of the coinverse ``(omega (x) id) W -> (omega (x) id) W*``.

    Solved by least squares over all matrix-unit slices; returns
    ``(K, residuals)`` where the residuals measure whether the assignment is
    a well-defined map into ``A``.
    """
    slices_w = realign_left(mu.mat).reshape(-1, a.dim, a.dim)
    slices_ws = realign_left(mu.mat.conj().T).reshape(-1, a.dim, a.dim)
    bc = a.coeffs(slices_w)
    cc = a.coeffs(slices_ws)
    image = max(opnorm(s - a.element(c)) for s, c in zip(slices_ws, cc))
    kt, *_ = np.linalg.lstsq(bc, cc, rcond=None)
    consistency = float(np.max(np.abs(bc @ kt - cc)))
    if consistency > tol:
        raise PreconditionError(f"coinverse is not well defined on the slice span "
                                f"(consistency residual {consistency:.2e})")
    return kt.T, {"kappa_consistency": consistency, "kappa_image": image}


def tau(q: PositiveOperator, t: complex, m) -> Operator:
    """``Q^{2it} m Q^{-2it}``; complex ``t`` gives the analytic continuation,
    e.g. ``tau(q, 0.5j, m) = Q^-1 m Q``."""
    m = np.asarray(getattr(m, "mat", m))
    return Operator(q.power(2j * t) @ m @ q.power(-2j * t), q.op.domain)


def tau_matrix(q: PositiveOperator, t: complex, a: SliceAlgebra):
    """Matrix of ``tau_t`` on ``A`` and the largest out-of-span residual."""
    imgs = [tau(q, t, b).mat for b in a.basis]
    mat = np.array([a.coeffs(x) for x in imgs]).T
    leak = max((a.residual(x) for x in imgs), default=0.0)
    return mat, leak


def _apply(mat: np.ndarray, a: SliceAlgebra, m) -> np.ndarray:
    return a.element(mat @ a.coeffs(m))


def antimultiplicative_residual(mat: np.ndarray, a: SliceAlgebra) -> float:
    res = 0.0
    for x in a.basis:
        for y in a.basis:
            lhs = _apply(mat, a, x @ y)
            rhs = _apply(mat, a, y) @ _apply(mat, a, x)
            res = max(res, opnorm(lhs - rhs))
    return res


def kappa_involution_residual(k: np.ndarray, a: SliceAlgebra) -> float:
    """``max || kappa(kappa(a)^*)^* - a ||`` over the basis."""
    return max((opnorm(_apply(k, a, _apply(k, a, x).conj().T).conj().T - x)
                for x in a.basis), default=0.0)


def unitary_antipode(k: np.ndarray, q: PositiveOperator, a: SliceAlgebra,
                     t_samples=DEFAULT_T, tol: float = EXACT_TOL):
    """``R = kappa o tau_{-i/2}`` on ``A`` together with its residuals."""
    t_minus, leak_m = tau_matrix(q, -0.5j, a)
    t_plus, leak_p = tau_matrix(q, 0.5j, a)
    if max(leak_m, leak_p) > tol:
        raise PreconditionError("tau_{+-i/2} does not preserve span(A); the "
                                "certificate is inconsistent with W")
    r = k @ t_minus
    n = a.rank
    res = {"R_squared": opnorm(r @ r - np.eye(n)) if n else 0.0,
           "R_antimultiplicative": antimultiplicative_residual(r, a),
           "R_star": max((opnorm(_apply(r, a, x.conj().T) - _apply(r, a, x).conj().T)
                          for x in a.basis), default=0.0),
           "polar": opnorm(k - r @ t_plus) if n else 0.0,
           "tau_leak_half": max(leak_m, leak_p)}
    comm = 0.0
    for t in t_samples:
        tt, _ = tau_matrix(q, t, a)
        comm = max(comm, opnorm(r @ tt - tt @ r))
    res["R_tau_commute"] = comm
    return r, res


# -- statements 5 and 6 -----------------------------------------------------

def check_statement5(qg: "QGData", t_samples=DEFAULT_T,
                     tol: float = EXACT_TOL) -> CheckReport:
    """``Delta o tau_t = (tau_t (x) tau_t) o Delta`` and
    ``Delta o R = sigma (R (x) R) Delta`` through ``A (x) A`` coefficients."""
    a, dt, rmap = qg.algebra, qg.comult, qg.r_map
    s5i = 0.0
    for t in t_samples:
        tt, _ = tau_matrix(qg.q, t, a)
        lhs = np.einsum("nm,nab->mab", tt, dt)
        rhs = np.einsum("ap,mpq,bq->mab", tt, dt, tt)
        s5i = max(s5i, float(np.max(np.abs(lhs - rhs))) if dt.size else 0.0)
    lhs = np.einsum("nm,nab->mab", rmap, dt)
    rhs = np.einsum("ap,mpq,bq->mba", rmap, dt, rmap)
    s5ii = float(np.max(np.abs(lhs - rhs))) if dt.size else 0.0
    return CheckReport({"s5i": s5i, "s5ii": s5ii}, tolerance=tol)


def check_statement6i(q: PositiveOperator, a: SliceAlgebra, t_samples=DEFAULT_T) -> float:
    """``tau_t = Q^{2it} . Q^{-2it}`` maps ``A`` into itself as a *-automorphism."""
    res = 0.0
    for t in t_samples:
        _, leak = tau_matrix(q, t, a)
        res = max(res, leak)
        for x in a.basis:
            tx = tau(q, t, x).mat
            res = max(res, opnorm(tau(q, t, x.conj().T).mat - tx.conj().T))
            for y in a.basis:
                res = max(res, opnorm(tau(q, t, x @ y).mat - tx @ tau(q, t, y).mat))
    return res


def decompose(mu: MultUnitary, a_hat: SliceAlgebra, a: SliceAlgebra):
    c = pair_coeffs(mu.mat, a_hat, a)
    return c, opnorm(mu.mat - pair_element(c, a_hat, a))


def check_statement6ii(mu: MultUnitary, w_tilde, qg: "QGData",
                       tol: float = EXACT_TOL) -> float:
    """``|| W^{T (x) R} - Wtilde* ||`` with ``T`` on the ``Ahat`` leg and ``R``
    on the ``A`` leg of the decomposition of ``W``."""
    c, resid = decompose(mu, qg.algebra_hat, qg.algebra)
    if resid > tol:
        raise PreconditionError(f"W does not decompose in Ahat (x) A "
                                f"(residual {resid:.2e})")
    wt = np.asarray(getattr(w_tilde, "mat", w_tilde))
    transposed = qg.algebra_hat.basis.transpose(0, 2, 1)
    wtr = pair_element(c @ qg.r_map.T, qg.algebra_hat, qg.algebra,
                       left=transposed)
    return opnorm(wtr - wt.conj().T)


# -- the conjugate-space identities ---------------------------------------

def script_t(q_hat: PositiveOperator, m) -> Operator:
    """``(Qhat m Qhat^-1)^T`` on the conjugate space."""
    m = np.asarray(getattr(m, "mat", m))
    out = q_hat.mat @ m @ q_hat.power(-1)
    return Operator(out.T, q_hat.op.domain.conj())


def check_script_t(mu: MultUnitary, w_tilde, q_hat: PositiveOperator) -> float:
    """``max_omega || T((id (x) omega) W) - (id (x) omega) Wtilde ||`` over
    matrix-unit functionals."""
    wt = np.asarray(getattr(w_tilde, "mat", w_tilde))
    res = 0.0
    for om in matrix_units(mu.h_dim):
        lhs = script_t(q_hat, slice_right(mu.mat, om)).mat
        rhs = slice_right(wt, om).mat
        res = max(res, opnorm(lhs - rhs))
    return res


def check_wtilde_comult(mu: MultUnitary, w_tilde) -> float:
    """``|| (id (x) Delta) Wtilde - Wtilde13 Wtilde12 ||`` on ``Hbar (x) H (x) H``."""
    d = mu.h_dim
    wt = np.asarray(getattr(w_tilde, "mat", w_tilde))
    amb = Space.of(d, d, d, conjugate=[True, False, False])
    wt12 = leg_embed(wt, [0, 1], amb).mat
    wt13 = leg_embed(wt, [0, 2], amb).mat
    w23 = leg_embed(mu.mat, [1, 2], amb).mat
    return opnorm(w23 @ wt12 @ w23.conj().T - wt13 @ wt12)


# -- the full extraction ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class QGData:
    algebra: SliceAlgebra
    algebra_hat: SliceAlgebra
    comult: np.ndarray
    kappa: np.ndarray
    r_map: np.ndarray
    q: PositiveOperator
    report: CheckReport = None

    @property
    def tau_log(self) -> np.ndarray:
        """Generator ``2 log Q`` of the scaling group."""
        return 2 * self.q.log()

    def kappa_of(self, m) -> np.ndarray:
        return _apply(self.kappa, self.algebra, m)

    def r_of(self, m) -> np.ndarray:
        return _apply(self.r_map, self.algebra, m)

    def to_dict(self) -> dict:
        def cm(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]
        return {"algebra": self.algebra.to_dict(),
                "algebra_hat": self.algebra_hat.to_dict(),
                "comult": [cm(x) for x in self.comult],
                "kappa": cm(self.kappa),
                "r_map": cm(self.r_map),
                "tau_log": cm(self.tau_log),
                "report": self.report.to_dict() if self.report else None,
                "notes": ["finite dimension: the coinverse is everywhere defined "
                          "on A; closures and cores are trivial"]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def extract(mu: MultUnitary, q: PositiveOperator, q_hat: PositiveOperator | None = None,
            w_tilde=None, t_samples=DEFAULT_T, tol: float = EXACT_TOL) -> QGData:
    """Extract ``(A, Ahat, Delta, kappa, R, tau)`` and run every identity.

    ``q_hat`` enables the conjugate-space identities; ``w_tilde`` defaults to
    :func:`build_wtilde`.
    """
    a = algebra_left(mu)
    a_hat = algebra_right(mu)
    rep = CheckReport({}, tolerance=tol)
    for name, alg in (("A", a), ("Ahat", a_hat)):
        rep.residuals[f"s1_{name}_closure"] = alg.closure_residual
        rep.residuals[f"s1_{name}_unit"] = alg.unit_residual
        rep.residuals[f"s1_{name}_orth"] = alg.orth_residual
        rep.info[f"rank_{name}"] = alg.rank
    if not a.is_algebra(tol):
        raise PreconditionError("span of left slices is not an algebra; "
                                "W is likely not multiplicative")
    rep.residuals["s2_multiplier"] = check_multiplier(mu, a_hat, a)
    rep.merge(comult_checks(mu, a, tol), prefix="s3_")

    k, kres = kappa(mu, a, tol)
    for key, val in kres.items():
        rep.residuals["s4_" + key] = val
    rep.residuals["s4_kappa_antimultiplicative"] = antimultiplicative_residual(k, a)
    rep.residuals["s4_kappa_involution"] = kappa_involution_residual(k, a)
    rmap, rres = unitary_antipode(k, q, a, t_samples, tol)
    for key, val in rres.items():
        rep.residuals["s4_" + key] = val

    qg = QGData(a, a_hat, comult_tensor(mu, a), k, rmap, q, rep)
    rep.merge(check_statement5(qg, t_samples, tol))
    rep.residuals["s6i"] = check_statement6i(q, a, t_samples)
    if w_tilde is None:
        w_tilde = build_wtilde(mu, q)
    rep.residuals["s6ii"] = check_statement6ii(mu, w_tilde, qg, tol)
    if q_hat is not None:
        rep.residuals["script_T"] = check_script_t(mu, w_tilde, q_hat)
        rep.residuals["wtilde_comult"] = check_wtilde_comult(mu, w_tilde)
    rep.info["t_samples"] = [float(t) for t in t_samples]
    rep.notes.append("finite dimension: kappa is everywhere defined on A")
    return qg
