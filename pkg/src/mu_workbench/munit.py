"""
Multiplicative unitaries and modularity certificates.

A certificate for ``W`` is a pair of positive operators ``(Q, Qhat)`` with
trivial kernels and a unitary ``Wtilde`` on ``Hbar (x) H`` such that
``W (Qhat (x) Q) W* = Qhat (x) Q`` and

    <x (x) u, W (z (x) y)> = <zbar (x) Q u, Wtilde (xbar (x) Q^-1 y)>.

With ``Qhat = Q`` this is manageability.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import BudgetError, PreconditionError, ShapeError
from .tensor import (DENSE_BUDGET, EXACT_TOL, Operator, PositiveOperator,
                     Space, apply_legs, flip, leg_embed, opnorm,
                     partial_transpose)

logger = logging.getLogger(__name__)

#: product-basis grids are used for the inner-product checks up to this dim
GRID_LIMIT = 16
#: number of seeded random quadruples used above ``GRID_LIMIT``
RANDOM_QUADRUPLES = 512


@dataclass
class CheckReport:
    """Named residuals compared against tolerances.

    ``info`` carries diagnostics that do not enter the verdict.
    """

    residuals: dict[str, float]
    tolerance: float = EXACT_TOL
    tolerances: dict[str, float] = field(default_factory=dict)
    info: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def tol(self, name: str) -> float:
        return self.tolerances.get(name, self.tolerance)

    @property
    def passed(self) -> dict[str, bool]:
        return {k: bool(v < self.tol(k)) for k, v in self.residuals.items()}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    @property
    def verdict(self) -> str:
        return "pass" if self.ok else "fail"

    def __getitem__(self, name: str) -> float:
        return self.residuals[name]

    def merge(self, other: "CheckReport", prefix: str = "") -> "CheckReport":
        for k, v in other.residuals.items():
            self.residuals[prefix + k] = v
            if k in other.tolerances or other.tolerance != self.tolerance:
                self.tolerances[prefix + k] = other.tol(k)
        for k, v in other.info.items():
            self.info[prefix + k] = v
        self.notes.extend(other.notes)
        return self

    def to_dict(self) -> dict:
        out = {"residuals": {k: float(v) for k, v in self.residuals.items()},
               "tolerance": self.tolerance,
               "passed": self.passed,
               "verdict": self.verdict}
        if self.tolerances:
            out["tolerances"] = dict(self.tolerances)
        if self.info:
            out["info"] = self.info
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


@dataclass(frozen=True, eq=False)
class MultUnitary:
    """A unitary on ``H (x) H``; multiplicativity is checked separately."""

    w: Operator
    h_dim: int = None

    def __post_init__(self):
        w = self.w
        if not isinstance(w, Operator):
            m = np.asarray(w, dtype=complex)
            d = int(round(np.sqrt(m.shape[0])))
            w = Operator(m, Space.of(d, d))
            object.__setattr__(self, "w", w)
        if len(w.domain) != 2 or w.domain.dims[0] != w.domain.dims[1]:
            raise ShapeError("a multiplicative unitary acts on H (x) H")
        if any(f.conjugate for f in w.domain.factors):
            raise ShapeError("both factors of H (x) H must be non-conjugate")
        object.__setattr__(self, "h_dim", w.domain.dims[0])
        dev = opnorm(w.mat.conj().T @ w.mat - np.eye(w.mat.shape[0]))
        if dev >= EXACT_TOL:
            raise PreconditionError(f"operator is not unitary (deviation {dev:.2e})")

    @classmethod
    def from_matrix(cls, m) -> "MultUnitary":
        return cls(m)

    @property
    def mat(self) -> np.ndarray:
        return self.w.mat

    @property
    def space(self) -> Space:
        return self.w.domain

    @property
    def h_space(self) -> Space:
        return Space.of(self.h_dim)


@dataclass(frozen=True, eq=False)
class ModularStructure:
    q: PositiveOperator
    q_hat: PositiveOperator
    w_tilde: Operator
    report: CheckReport | None = None


# -- pentagon -----------------------------------------------------------------

def _three_legs(mu: MultUnitary):
    h3 = Space.of(mu.h_dim, mu.h_dim, mu.h_dim)
    return (leg_embed(mu.w, [0, 1], h3).mat, leg_embed(mu.w, [0, 2], h3).mat,
            leg_embed(mu.w, [1, 2], h3).mat)


def pentagon_residual(mu: MultUnitary, budget: int = DENSE_BUDGET) -> float:
    """``|| W23 W12 - W12 W13 W23 ||`` on ``H^{(x)3}``."""
    if mu.h_dim ** 3 > budget:
        raise BudgetError(f"H^(x)3 has dimension {mu.h_dim ** 3} > {budget}; "
                          "use pentagon_residual_probes")
    w12, w13, w23 = _three_legs(mu)
    return opnorm(w23 @ w12 - w12 @ w13 @ w23)


def random_vectors(shape, count: int, seed: int) -> np.ndarray:
    """Seeded complex Gaussian unit vectors; the batch axis is last."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((*shape, count)) + 1j * rng.standard_normal((*shape, count))
    norms = np.sqrt(np.sum(np.abs(v) ** 2, axis=tuple(range(len(shape)))))
    return v / norms


def pentagon_residual_probes(mu: MultUnitary, count: int = 64,
                             seed: int = 0) -> float:
    """Matrix-free pentagon residual, max over seeded unit probes."""
    d = mu.h_dim
    v = random_vectors((d, d, d), count, seed)
    w = mu.mat

    lhs = apply_legs(w, apply_legs(w, v, [0, 1]), [1, 2])
    rhs = apply_legs(w, apply_legs(w, apply_legs(w, v, [1, 2]), [0, 2]), [0, 1])
    diff = (lhs - rhs).reshape(d ** 3, count)
    return float(np.max(np.linalg.norm(diff, axis=0)))


def dual(mu: MultUnitary) -> MultUnitary:
    """``Sigma W* Sigma``."""
    sig = flip(mu.space)
    return MultUnitary(sig.adj() @ mu.w.adj() @ sig)


# -- certificates -------------------------------------------------------------

def build_wtilde(mu: MultUnitary, q: PositiveOperator) -> Operator:
    """The only candidate ``Wtilde`` for a given ``Q``.

    Reading off the defining inner-product relation on basis vectors gives
    ``Wtilde = (1 (x) Q^-1) W^{T_1} (1 (x) Q)`` on ``Hbar (x) H``, with
    ``T_1`` the transpose on the first leg.  The candidate satisfies the
    relation by construction; it is a certificate only if it is unitary.
    """
    d = mu.h_dim
    if q.dim != d:
        raise ShapeError(f"Q acts on C^{q.dim}, W on C^{d} (x) C^{d}")
    wt = partial_transpose(mu.w, [0])
    left = np.kron(np.eye(d), q.power(-1))
    right = np.kron(np.eye(d), q.mat)
    return Operator(left @ wt.mat @ right, wt.domain)


def bmmu2_residual(mu: MultUnitary, q: PositiveOperator, w_tilde,
                   grid_limit: int = GRID_LIMIT,
                   n_random: int = RANDOM_QUADRUPLES, seed: int = 0) -> float:
    """Max deviation of the defining inner-product relation.

    Both sides are evaluated as inner products of explicit vectors, on the full
    product basis grid for ``d <= grid_limit`` and on seeded random
    quadruples otherwise.
    """
    d = mu.h_dim
    w4 = mu.mat.reshape(d, d, d, d)
    wt4 = np.asarray(getattr(w_tilde, "mat", w_tilde)).reshape(d, d, d, d)
    qm, qinv = q.mat, q.power(-1)
    if d <= grid_limit:
        e = np.eye(d)
        # lhs[x,u,z,y] = <x (x) u, W (z (x) y)>
        lhs = np.einsum("ax,bu,abcd,cz,dy->xuzy", e.conj(), e.conj(), w4, e, e,
                        optimize=True)
        # left vector zbar (x) Q u has coordinates (conj z, Q u); conjugated in <,>
        qu = qm @ e
        qiy = qinv @ e
        rhs = np.einsum("zc,bu,cbad,xa,dy->xuzy", e, qu.conj(), wt4, e.conj(),
                        qiy, optimize=True)
        return float(np.max(np.abs(lhs - rhs)))
    rng = np.random.default_rng(seed)

    def vecs():
        return rng.standard_normal((n_random, d)) + 1j * rng.standard_normal((n_random, d))
    x, u, z, y = vecs(), vecs(), vecs(), vecs()
    lhs = np.einsum("na,nb,abcd,nc,nd->n", x.conj(), u.conj(), w4, z, y)
    qu = u @ qm.T
    qiy = y @ qinv.T
    rhs = np.einsum("nc,nb,cbad,na,nd->n", z, qu.conj(), wt4, x.conj(), qiy)
    return float(np.max(np.abs(lhs - rhs)))


def contin_residual(mu: MultUnitary, q_hat: PositiveOperator, w_tilde,
                    grid_limit: int = GRID_LIMIT,
                    n_random: int = RANDOM_QUADRUPLES, seed: int = 1) -> float:
    """Max deviation of
    ``<x (x) u, W (z (x) y)> = <conj(Qhat z) (x) u, Wtilde (conj(Qhat^-1 x) (x) y)>``.
    """
    d = mu.h_dim
    w4 = mu.mat.reshape(d, d, d, d)
    wt4 = np.asarray(getattr(w_tilde, "mat", w_tilde)).reshape(d, d, d, d)
    qh, qhi = q_hat.mat, q_hat.power(-1)
    if d <= grid_limit:
        e = np.eye(d)
        lhs = np.einsum("ax,bu,abcd,cz,dy->xuzy", e.conj(), e.conj(), w4, e, e,
                        optimize=True)
        qz = qh @ e
        qix = qhi @ e
        # left coords (conj(Qhat z), u) -> conjugated: (Qhat z, conj u)
        rhs = np.einsum("cz,ub,cbad,ax,dy->xuzy", qz, e.conj(), wt4, qix.conj(),
                        e, optimize=True)
        return float(np.max(np.abs(lhs - rhs)))
    rng = np.random.default_rng(seed)

    def vecs():
        return rng.standard_normal((n_random, d)) + 1j * rng.standard_normal((n_random, d))
    x, u, z, y = vecs(), vecs(), vecs(), vecs()
    lhs = np.einsum("na,nb,abcd,nc,nd->n", x.conj(), u.conj(), w4, z, y)
    qz = z @ qh.T
    qix = x @ qhi.T
    rhs = np.einsum("nc,nb,cbad,na,nd->n", qz, u.conj(), wt4, qix.conj(), y)
    return float(np.max(np.abs(lhs - rhs)))


def check_modular(mu: MultUnitary, q: PositiveOperator, q_hat: PositiveOperator,
                  w_tilde: Operator | None = None, tol: float = EXACT_TOL,
                  grid_limit: int = GRID_LIMIT, seed: int = 0) -> CheckReport:
    """Verify a modularity certificate.

    Residuals:

    ``r1``  ``||Wt* Wt - I||`` (unitarity of the candidate)
    ``r2``  ``||W (Qhat (x) Q) W* - Qhat (x) Q|| / ||Qhat (x) Q||``
    ``r3``  defining inner-product relation, direct evaluation
    ``r4``  ``||[Wt, Qhat^T (x) Q^-1]|| / ||Qhat^T (x) Q^-1||``
    ``r5``  the ``Qhat`` form of the inner-product relation

    ``Wt`` defaults to :func:`build_wtilde`.  The pentagon residual is
    recorded under ``info`` and does not enter the verdict.
    """
    d = mu.h_dim
    for name, p in (("Q", q), ("Qhat", q_hat)):
        if p.dim != d:
            raise ShapeError(f"{name} acts on C^{p.dim}, expected C^{d}")
    if w_tilde is None:
        w_tilde = build_wtilde(mu, q)
    wt = np.asarray(getattr(w_tilde, "mat", w_tilde))
    if wt.shape != mu.mat.shape:
        raise ShapeError("Wtilde must act on Hbar (x) H")
    w = mu.mat
    n = w.shape[0]

    qq = np.kron(q_hat.mat, q.mat)
    r1 = opnorm(wt.conj().T @ wt - np.eye(n))
    r2 = opnorm(w @ qq @ w.conj().T - qq) / opnorm(qq)
    r3 = bmmu2_residual(mu, q, wt, grid_limit=grid_limit, seed=seed)
    comm = np.kron(q_hat.mat.T, q.power(-1))
    r4 = opnorm(wt @ comm - comm @ wt) / opnorm(comm)
    r5 = contin_residual(mu, q_hat, wt, grid_limit=grid_limit, seed=seed + 1)

    report = CheckReport({"r1": r1, "r2": r2, "r3": r3, "r4": r4, "r5": r5},
                         tolerance=tol)
    report.info["r1_inf"] = float(np.max(np.abs(wt.conj().T @ wt - np.eye(n))))
    if d ** 3 <= DENSE_BUDGET:
        report.info["pentagon"] = pentagon_residual(mu)
    else:
        report.info["pentagon"] = pentagon_residual_probes(mu, seed=seed)
    return report


def check_manageable(mu: MultUnitary, q: PositiveOperator, **kw) -> CheckReport:
    return check_modular(mu, q, q, **kw)


def dual_modular(mu: MultUnitary, q: PositiveOperator, q_hat: PositiveOperator,
                 w_tilde: Operator, tol: float = EXACT_TOL) -> ModularStructure:
    """Certificate for ``Sigma W* Sigma``: ``Q`` and ``Qhat`` swap and
    ``Wtilde_new = (Sigma Wtilde* Sigma)^{T (x) T}``.

    Under the identification of the double conjugate with ``H`` the full
    transpose of ``Sigma Wt* Sigma`` is ``Sigma conj(Wt) Sigma``.
    """
    rep = check_modular(mu, q, q_hat, w_tilde, tol=tol)
    if not rep.ok:
        raise PreconditionError(f"input certificate fails check_modular: "
                                f"{rep.residuals}")
    wt = w_tilde if isinstance(w_tilde, Operator) else Operator(
        np.asarray(w_tilde), Space.of(mu.h_dim, mu.h_dim, conjugate=[True, False]))
    sig = flip(wt.domain)
    new = (sig.adj() @ wt.adj() @ sig).T
    new_space = Space((new.domain[0], new.domain[1]))
    new = Operator(new.mat, new_space)
    dmu = dual(mu)
    new_report = check_modular(dmu, q_hat, q, new, tol=tol)
    return ModularStructure(q=q_hat, q_hat=q, w_tilde=new, report=new_report)


# -- certificate search ----------------------------------------------------

@dataclass
class SearchResult:
    structure: ModularStructure | None
    report: CheckReport | None
    message: str
    objective: float = float("nan")
    restarts: list[float] = field(default_factory=list)


def _null_space(mat: np.ndarray, tol: float) -> np.ndarray:
    """Rows spanning the null space of ``mat``."""
    _, s, vh = np.linalg.svd(mat)
    scale = max(1.0, s.max()) if s.size else 1.0
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj()


def fixed_subspace(mu: MultUnitary, tol: float = 1e-9) -> np.ndarray:
    """Real-orthonormal Hermitian basis of ``{P = P* : W P W* = P}``, shape ``(k, n, n)``."""
    w = mu.mat
    n = w.shape[0]
    # vec(W P W*) = (W (x) conj W) vec(P) in row-major flattening
    null = _null_space(np.kron(w, w.conj()) - np.eye(n * n), tol)
    mats = null.reshape(-1, n, n)
    adj = mats.conj().transpose(0, 2, 1)
    # the fixed space is *-closed, so Hermitian and anti-Hermitian parts span it
    herm = np.concatenate([(mats + adj) / 2, (mats - adj) / 2j]).reshape(-1, n * n)
    realflat = np.concatenate([herm.real, herm.imag], axis=1)
    _, s, vh = np.linalg.svd(realflat, full_matrices=False)
    k = int(np.sum(s > tol * max(1.0, s.max())))
    return (vh[:k, :n * n] + 1j * vh[:k, n * n:]).reshape(k, n, n)


def _partial_trace(m: np.ndarray, d: int, keep: int) -> np.ndarray:
    m4 = m.reshape(d, d, d, d)
    return np.einsum("abcb->ac", m4) if keep == 0 else np.einsum("abad->bd", m4)


def _positive_in_null(lin, d: int, tol: float):
    """Positive definite element of the null space of a linear map on ``M_d``.

    Tries the orthogonal projection of the identity onto the null space.
    """
    mat = np.stack([lin(e.reshape(d, d)).reshape(-1) for e in np.eye(d * d)],
                   axis=1)
    null = _null_space(mat, tol)
    if not len(null):
        return None
    coef = np.linalg.lstsq(null.T, np.eye(d).reshape(-1), rcond=None)[0]
    cand = (null.T @ coef).reshape(d, d)
    cand = (cand + cand.conj().T) / 2
    if np.linalg.eigvalsh(cand).min() > 1e-8 * max(1.0, opnorm(cand)):
        return cand
    return None


def find_certificate(mu: MultUnitary, tol: float = EXACT_TOL, restarts: int = 4,
                     max_iter: int = 4000, seed: int = 0) -> SearchResult:
    """Heuristic search for a modularity certificate.

    Stage 1 takes the fixed space of ``P -> W P W*`` and a generic positive
    element of it; the eigenbases of its two partial traces give the frames
    for ``Qhat`` and ``Q``.  Stage 2 minimizes ``||Wt(Q)* Wt(Q) - I||_F^2`` over
    the log-eigenvalues of ``Q`` in its frame with Nelder-Mead and restarts,
    starting from ``Q = I``.  Among zero-objective solutions the one with the
    least log-eigenvalue spread is kept.  ``Qhat`` is then taken as the
    projection of ``I`` onto the solutions of the invariance equation.

    Failure to find a certificate does not prove that none exists.
    """
    d = mu.h_dim
    w = mu.mat
    fixed = fixed_subspace(mu)
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(len(fixed))
    generic = np.einsum("k,kij->ij", coeffs, fixed)
    shift = np.linalg.eigvalsh(generic).min()
    generic = generic + (abs(shift) + 1.0) * np.eye(d * d)
    frame = np.linalg.eigh(_partial_trace(generic, d, keep=1))[1]

    def q_of(logs):
        return PositiveOperator(Operator((frame * np.exp(logs)) @ frame.conj().T,
                                         Space.of(d)), np.exp(logs), frame)

    def objective(free):
        logs = np.append(free, -np.sum(free))
        wt = build_wtilde(mu, q_of(logs)).mat
        return float(np.sum(np.abs(wt.conj().T @ wt - np.eye(d * d)) ** 2))

    starts = [np.zeros(d - 1)] + [rng.normal(scale=1.0, size=d - 1)
                                  for _ in range(restarts)]
    results = []
    for i, x0 in enumerate(starts):
        if d == 1:
            results.append((objective(x0), i, x0))
            continue
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-12,
                                "fatol": 1e-28})
        results.append((float(res.fun), i, np.asarray(res.x)))
    # best objective, then lowest restart index
    best_val, best_idx, best_x = min(results, key=lambda r: (r[0], r[1]))
    obj_values = [r[0] for r in results]

    # shrink toward equal eigenvalues while the objective stays at its floor
    floor = max(best_val, tol ** 2)
    lo, hi = 0.0, 1.0
    if objective(np.zeros(d - 1)) <= floor:
        hi = 0.0
    else:
        for _ in range(60):
            mid = (lo + hi) / 2
            if objective(mid * best_x) <= floor:
                hi = mid
            else:
                lo = mid
    logs = np.append(hi * best_x, -np.sum(hi * best_x))
    q = q_of(logs)
    qm = q.mat

    def invariance(qh):
        big = np.kron(qh, qm)
        return w @ big @ w.conj().T - big

    qh = _positive_in_null(invariance, d, 1e-9)
    if qh is None:
        return SearchResult(None, None, "no positive Qhat solves the invariance "
                            "equation for the best Q", best_val, obj_values)
    q_hat = PositiveOperator.from_matrix(qh)
    wt = build_wtilde(mu, q)
    report = check_modular(mu, q, q_hat, wt, tol=tol)
    report.info["search_objective"] = best_val
    report.info["search_restart"] = best_idx
    if not report.ok:
        logger.info("certificate search failed: %s", report.residuals)
        return SearchResult(None, report, "best candidate fails check_modular",
                            best_val, obj_values)
    return SearchResult(ModularStructure(q, q_hat, wt, report), report,
                        "certificate found", best_val, obj_values)
