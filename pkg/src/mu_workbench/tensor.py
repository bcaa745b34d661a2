"""
Dense operator algebra on finite-dimensional Hilbert spaces and their conjugates.

Every space is a product of factors ``C^d`` (or their complex conjugates) with
the lexicographic product basis: the basis vector ``e_i (x) e_j`` of
``C^m (x) C^n`` sits at flat index ``i * n + j``.  Conjugation of a vector is
entrywise complex conjugation in that basis, so the transpose of an operator
is its plain matrix transpose, acting on the conjugate space.

Leg indices are zero-based throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from .errors import PositivityError, ShapeError

#: absolute tolerance for identities that hold exactly up to rounding
EXACT_TOL = 1e-10
#: relative tolerance used when validating Hermiticity and positivity
STRUCTURE_RTOL = 1e-12
#: largest total dimension for which dense operators are materialized
DENSE_BUDGET = 4096


class Factor(NamedTuple):
    dim: int
    conjugate: bool = False

    def conj(self) -> "Factor":
        return Factor(self.dim, not self.conjugate)


@dataclass(frozen=True)
class Space:
    """An ordered tensor product of factors."""

    factors: tuple[Factor, ...]

    def __post_init__(self):
        facs = tuple(Factor(int(f[0]), bool(f[1])) for f in self.factors)
        if not facs:
            raise ShapeError("a space needs at least one factor")
        if any(f.dim < 1 for f in facs):
            raise ShapeError(f"factor dimensions must be positive, got {facs}")
        object.__setattr__(self, "factors", facs)

    @classmethod
    def of(cls, *dims: int, conjugate: Sequence[bool] | None = None) -> "Space":
        flags = conjugate if conjugate is not None else [False] * len(dims)
        return cls(tuple(Factor(d, c) for d, c in zip(dims, flags)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return Space(self.factors[idx])
        return self.factors[idx]

    def conj(self, legs: Sequence[int] | None = None) -> "Space":
        """Conjugate every factor, or only the ones listed in ``legs``."""
        legs = range(len(self)) if legs is None else set(legs)
        return Space(tuple(f.conj() if i in legs else f
                           for i, f in enumerate(self.factors)))

    def __mul__(self, other: "Space") -> "Space":
        return Space(self.factors + other.factors)

    def select(self, legs: Sequence[int]) -> "Space":
        return Space(tuple(self.factors[i] for i in legs))

    def permute(self, order: Sequence[int]) -> "Space":
        return self.select(order)


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Operator:
    """A linear map ``domain -> codomain`` stored as a dense matrix."""

    mat: np.ndarray
    domain: Space
    codomain: Space = None

    def __post_init__(self):
        if self.codomain is None:
            object.__setattr__(self, "codomain", self.domain)
        mat = _frozen(self.mat)
        if mat.shape != (self.codomain.dim, self.domain.dim):
            raise ShapeError(f"matrix shape {mat.shape} does not match "
                             f"{self.codomain.dims} x {self.domain.dims}")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def on(cls, mat, *dims: int) -> "Operator":
        """Square operator on ``C^{d1} (x) ... (x) C^{dn}``."""
        mat = np.asarray(mat)
        if not dims:
            dims = (mat.shape[0],)
        return cls(mat, Space.of(*dims))

    @classmethod
    def identity(cls, space: Space) -> "Operator":
        return cls(np.eye(space.dim), space)

    @property
    def shape(self):
        return self.mat.shape

    def adj(self) -> "Operator":
        return Operator(self.mat.conj().T, self.codomain, self.domain)

    @property
    def T(self) -> "Operator":
        return transpose(self)

    def __matmul__(self, other: "Operator") -> "Operator":
        if not isinstance(other, Operator):
            return NotImplemented
        if self.domain.dims != other.codomain.dims:
            raise ShapeError(f"cannot compose {self.domain.dims} with "
                             f"{other.codomain.dims}")
        return Operator(self.mat @ other.mat, other.domain, self.codomain)

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.mat + other.mat, self.domain, self.codomain)

    def __sub__(self, other: "Operator") -> "Operator":
        return Operator(self.mat - other.mat, self.domain, self.codomain)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.mat * scalar, self.domain, self.codomain)

    __rmul__ = __mul__

    def apply(self, v) -> np.ndarray:
        return self.mat @ np.asarray(v)

    def norm(self) -> float:
        return opnorm(self.mat)


def as_matrix(m) -> np.ndarray:
    if isinstance(m, Operator):
        return m.mat
    if isinstance(m, PositiveOperator):
        return m.op.mat
    return np.asarray(m, dtype=complex)


def opnorm(m) -> float:
    """Operator norm (largest singular value)."""
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def infnorm(m) -> float:
    """Largest absolute entry; convenient for diagonal diagnostics."""
    m = as_matrix(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


@dataclass(frozen=True, eq=False)
class Functional:
    """Normal functional ``m -> trace(frame @ m)``."""

    frame: np.ndarray

    def __post_init__(self):
        f = _frozen(self.frame)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ShapeError(f"functional frame must be square, got {f.shape}")
        object.__setattr__(self, "frame", f)

    @classmethod
    def matrix_unit(cls, dim: int, i: int, j: int) -> "Functional":
        """The functional returning the ``(i, j)`` entry."""
        f = np.zeros((dim, dim), dtype=complex)
        f[j, i] = 1.0
        return cls(f)

    @classmethod
    def vector(cls, x, y) -> "Functional":
        """``m -> <x, m y>``."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        return cls(np.outer(y, x.conj()))

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    def __call__(self, m) -> complex:
        return complex(np.trace(self.frame @ as_matrix(m)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.frame, "nuc"))


def matrix_units(dim: int):
    """All ``dim**2`` matrix-unit functionals, row-major in ``(i, j)``."""
    return [Functional.matrix_unit(dim, i, j)
            for i in range(dim) for j in range(dim)]


@dataclass(frozen=True, eq=False)
class PositiveOperator:
    """A positive operator with trivial kernel and cached eigendecomposition."""

    op: Operator
    eigvals: np.ndarray = field(default=None, repr=False)
    eigvecs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        op = self.op
        if not isinstance(op, Operator):
            op = Operator.on(np.asarray(op))
            object.__setattr__(self, "op", op)
        m = op.mat
        if m.shape[0] != m.shape[1]:
            raise ShapeError("a positive operator must be square")
        scale = max(opnorm(m), 1.0)
        if np.linalg.norm(m - m.conj().T, 2) > STRUCTURE_RTOL * scale:
            raise PositivityError("operator is not Hermitian")
        if self.eigvals is None:
            w, v = np.linalg.eigh((m + m.conj().T) / 2)
        else:
            w, v = np.asarray(self.eigvals, float), np.asarray(self.eigvecs, complex)
        if np.any(w <= 0):
            raise PositivityError(f"eigenvalue {w.min():.3e} <= 0; "
                                  "kernel is not trivial")
        recon = (v * w) @ v.conj().T
        if opnorm(recon - m) > STRUCTURE_RTOL * scale * max(1.0, m.shape[0]):
            raise PositivityError("spectral decomposition does not reconstruct "
                                  "the operator")
        w = np.array(w, float)
        v = np.array(v, complex)
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "eigvals", w)
        object.__setattr__(self, "eigvecs", v)

    @classmethod
    def from_matrix(cls, m, space: Space | None = None) -> "PositiveOperator":
        m = np.asarray(m, dtype=complex)
        return cls(Operator(m, space or Space.of(m.shape[0])))

    @classmethod
    def from_diag(cls, values, space: Space | None = None) -> "PositiveOperator":
        values = np.asarray(values, dtype=float)
        n = len(values)
        return cls(Operator(np.diag(values), space or Space.of(n)),
                   values, np.eye(n))

    @classmethod
    def identity(cls, dim: int) -> "PositiveOperator":
        return cls.from_diag(np.ones(dim))

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def power(self, z: complex) -> np.ndarray:
        return mat_pow(self, z).mat

    def inv(self) -> "PositiveOperator":
        return PositiveOperator(Operator(self.power(-1), self.op.domain),
                                1.0 / self.eigvals, self.eigvecs)

    def scaled(self, lam: float) -> "PositiveOperator":
        return PositiveOperator(self.op * lam, self.eigvals * lam, self.eigvecs)

    @property
    def T(self) -> "PositiveOperator":
        # transpose of a positive operator is positive on the conjugate space
        return PositiveOperator(transpose(self.op), self.eigvals,
                                self.eigvecs.conj())

    def log(self) -> np.ndarray:
        v = self.eigvecs
        return (v * np.log(self.eigvals)) @ v.conj().T


# -- products and legs ------------------------------------------------------

def tensor(a: Operator, *rest: Operator) -> Operator:
    """Kronecker product; factor lists are concatenated."""
    def pair(x, y):
        return Operator(np.kron(x.mat, y.mat), x.domain * y.domain,
                        x.codomain * y.codomain)
    return reduce(pair, rest, a)


def _check_legs(legs: Sequence[int], n: int):
    legs = [int(k) for k in legs]
    if len(set(legs)) != len(legs):
        raise ShapeError(f"leg indices must be distinct, got {legs}")
    if any(k < 0 or k >= n for k in legs):
        raise ShapeError(f"leg indices {legs} out of range for {n} factors")
    return legs


def leg_embed(u, legs: Sequence[int], ambient: Space) -> Operator:
    """Place ``u`` on the listed legs of ``ambient``, identity elsewhere.

    Legs may be in any order: ``u``'s k-th factor is put on ``legs[k]``.
    """
    legs = _check_legs(legs, len(ambient))
    if isinstance(u, Operator):
        if u.domain.factors != ambient.select(legs).factors:
            raise ShapeError(f"operator factors {u.domain.factors} do not match "
                             f"ambient legs {ambient.select(legs).factors}")
        umat = u.mat
    else:
        umat = np.asarray(u, dtype=complex)
        if umat.shape[0] != int(np.prod([ambient.dims[k] for k in legs])):
            raise ShapeError("operator dimension does not match selected legs")
    n = len(ambient)
    rest = [k for k in range(n) if k not in legs]
    rest_dim = int(np.prod([ambient.dims[k] for k in rest])) if rest else 1
    big = np.kron(umat, np.eye(rest_dim))
    perm = legs + rest
    pdims = [ambient.dims[k] for k in perm]
    big = big.reshape(pdims + pdims)
    axes = [perm.index(i) for i in range(n)]
    big = big.transpose(axes + [n + a for a in axes])
    return Operator(big.reshape(ambient.dim, ambient.dim), ambient)


def apply_legs(u, vec: np.ndarray, legs: Sequence[int]) -> np.ndarray:
    """Apply the matrix ``u`` to the listed axes of the tensor ``vec``.

    ``vec`` has one axis per tensor factor, possibly followed by batch axes
    that are left untouched.
    """
    u = as_matrix(u)
    legs = list(legs)
    ldims = [vec.shape[k] for k in legs]
    if u.shape[0] != int(np.prod(ldims)):
        raise ShapeError(f"operator of size {u.shape[0]} cannot act on legs "
                         f"{legs} of dims {ldims}")
    ut = u.reshape(ldims + ldims)
    nl = len(legs)
    out = np.tensordot(ut, vec, axes=(list(range(nl, 2 * nl)), legs))
    return np.moveaxis(out, list(range(nl)), legs)


def flip(space: Space) -> Operator:
    """The flip ``x (x) y -> y (x) x`` on a two-factor space."""
    if len(space) != 2:
        raise ShapeError("flip needs exactly two factors")
    m, n = space.dims
    sig = np.zeros((n * m, m * n))
    for i in range(m):
        for j in range(n):
            sig[j * m + i, i * n + j] = 1.0
    return Operator(sig, space, Space((space[1], space[0])))


def transpose(m: Operator) -> Operator:
    """Transpose on the conjugate space: ``<xbar, m^T ybar> = <y, m x>``."""
    return Operator(m.mat.T, m.codomain.conj(), m.domain.conj())


def partial_transpose(m: Operator, legs: Sequence[int]) -> Operator:
    """Transpose on selected legs of a square operator.

    The listed factors are conjugated in both domain and codomain.
    """
    if m.domain.dims != m.codomain.dims:
        raise ShapeError("partial transpose needs a square operator")
    dims = list(m.domain.dims)
    n = len(dims)
    legs = _check_legs(legs, n)
    t = m.mat.reshape(dims + dims)
    axes = list(range(2 * n))
    for k in legs:
        axes[k], axes[n + k] = axes[n + k], axes[k]
    t = t.transpose(axes)
    return Operator(t.reshape(m.mat.shape), m.domain.conj(legs),
                    m.codomain.conj(legs))


def _four_index(w) -> tuple[np.ndarray, int, int]:
    if isinstance(w, Operator):
        if len(w.domain) != 2:
            raise ShapeError("slicing needs an operator on a two-factor space")
        d1, d2 = w.domain.dims
        mat = w.mat
    else:
        mat = np.asarray(w, dtype=complex)
        d1 = d2 = int(round(np.sqrt(mat.shape[0])))
    return mat.reshape(d1, d2, d1, d2), d1, d2


def slice_left(w, omega: Functional) -> Operator:
    """``(omega (x) id) w``."""
    w4, d1, d2 = _four_index(w)
    if omega.dim != d1:
        raise ShapeError(f"functional on C^{omega.dim} cannot slice a leg of "
                         f"dimension {d1}")
    out = np.einsum("ca,abcd->bd", omega.frame, w4)
    space = w.domain[1:] if isinstance(w, Operator) else Space.of(d2)
    return Operator(out, space)


def slice_right(w, omega: Functional) -> Operator:
    """``(id (x) omega) w``."""
    w4, d1, d2 = _four_index(w)
    if omega.dim != d2:
        raise ShapeError(f"functional on C^{omega.dim} cannot slice a leg of "
                         f"dimension {d2}")
    out = np.einsum("db,abcd->ac", omega.frame, w4)
    space = w.domain[:1] if isinstance(w, Operator) else Space.of(d1)
    return Operator(out, space)


def realign_left(w) -> np.ndarray:
    """Row ``(i, j)`` is the flattened left slice ``B_ij[u, y] = w[(i,u),(j,y)]``."""
    w4, d1, d2 = _four_index(w)
    return w4.transpose(0, 2, 1, 3).reshape(d1 * d1, d2 * d2)


def realign_right(w) -> np.ndarray:
    """Row ``(u, y)`` is the flattened right slice ``C_uy[i, j] = w[(i,u),(j,y)]``."""
    w4, d1, d2 = _four_index(w)
    return w4.transpose(1, 3, 0, 2).reshape(d2 * d2, d1 * d1)


def mat_pow(p: PositiveOperator, z: complex) -> Operator:
    """``p**z`` through the cached spectral decomposition."""
    lam = np.exp(complex(z) * np.log(p.eigvals))
    v = p.eigvecs
    return Operator((v * lam) @ v.conj().T, p.op.domain)
