"""Finite groups and the example unitaries built from them."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .munit import MultUnitary
from .tensor import PositiveOperator


@dataclass(frozen=True, eq=False)
class GroupTable:
    """Multiplication table on ``0..n-1``; ``table[g, h]`` is the index of ``gh``.

    The identity is element 0.
    """

    table: np.ndarray
    name: str = ""

    def __post_init__(self):
        t = np.array(self.table, dtype=int)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        self.validate()

    @property
    def order(self) -> int:
        return self.table.shape[0]

    @property
    def identity(self) -> int:
        return 0

    def validate(self):
        t = self.table
        n = t.shape[0] if t.ndim == 2 else 0
        if t.ndim != 2 or t.shape != (n, n) or n == 0:
            raise FormatError(f"group table must be a non-empty square, got {t.shape}")
        if t.min() < 0 or t.max() >= n:
            raise FormatError("group table entries out of range")
        if not (np.array_equal(t[0], np.arange(n)) and
                np.array_equal(t[:, 0], np.arange(n))):
            raise FormatError("element 0 must be the identity")
        for row in t:
            if len(set(row)) != n:
                raise FormatError("rows must be permutations (unique inverses)")
        for col in t.T:
            if len(set(col)) != n:
                raise FormatError("columns must be permutations (unique inverses)")
        # associativity: t[t[a, b], c] == t[a, t[b, c]]
        if not np.array_equal(t[t[:, :, None], np.arange(n)[None, None, :]],
                              t[np.arange(n)[:, None, None], t[None, :, :]]):
            raise FormatError("multiplication table is not associative")

    def inverse(self, g: int) -> int:
        return int(np.nonzero(self.table[g] == 0)[0][0])

    def mul(self, g: int, h: int) -> int:
        return int(self.table[g, h])

    def left_regular(self, g: int) -> np.ndarray:
        """Permutation matrix ``delta_h -> delta_{gh}``."""
        n = self.order
        m = np.zeros((n, n))
        m[self.table[g], np.arange(n)] = 1.0
        return m

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.table.tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, name: str = "") -> "GroupTable":
        try:
            rows = [[int(x) for x in row] for row in csv.reader(io.StringIO(text))
                    if row and any(c.strip() for c in row)]
        except ValueError as exc:
            raise FormatError(f"group table CSV: {exc}") from exc
        if not rows or len({len(r) for r in rows}) != 1:
            raise FormatError("group table CSV must be a non-empty rectangle")
        return cls(np.array(rows), name)

    @classmethod
    def load(cls, path) -> "GroupTable":
        path = Path(path)
        return cls.from_csv(path.read_text(), path.stem)


def cyclic(n: int) -> GroupTable:
    i = np.arange(n)
    return GroupTable((i[:, None] + i[None, :]) % n, f"Z{n}")


def trivial() -> GroupTable:
    return GroupTable(np.zeros((1, 1), dtype=int), "trivial")


def direct_product(a: GroupTable, b: GroupTable) -> GroupTable:
    """Elements ``(g, h)`` indexed as ``g * |b| + h``."""
    na, nb = a.order, b.order
    t = np.empty((na * nb, na * nb), dtype=int)
    for (g1, h1), (g2, h2) in itertools.product(
            itertools.product(range(na), range(nb)), repeat=2):
        t[g1 * nb + h1, g2 * nb + h2] = a.table[g1, g2] * nb + b.table[h1, h2]
    return GroupTable(t, f"{a.name}x{b.name}")


def symmetric(n: int) -> GroupTable:
    """Permutations of ``n`` points in lexicographic order (identity first).

    The product ``gh`` is the composition ``g o h``.
    """
    perms = list(itertools.permutations(range(n)))
    index = {p: k for k, p in enumerate(perms)}
    t = np.empty((len(perms), len(perms)), dtype=int)
    for i, g in enumerate(perms):
        for j, h in enumerate(perms):
            t[i, j] = index[tuple(g[h[k]] for k in range(n))]
    return GroupTable(t, f"S{n}")


def builtin_groups() -> dict[str, GroupTable]:
    z2 = cyclic(2)
    return {"Z2": z2, "Z3": cyclic(3), "Z4": cyclic(4),
            "Z2xZ2": direct_product(z2, z2), "S3": symmetric(3)}


def gen_group_kt(table: GroupTable) -> MultUnitary:
    """Kac-Takesaki operator ``W (delta_g (x) delta_h) = delta_g (x) delta_{gh}``."""
    n = table.order
    w = np.zeros((n * n, n * n))
    for g in range(n):
        for h in range(n):
            w[g * n + table.table[g, h], g * n + h] = 1.0
    return MultUnitary(w)


def gen_skewed_certificate(mu: MultUnitary, q_hat_diag):
    """Candidate certificate ``(Q, Qhat) = (I, diag(q_hat_diag))``."""
    vals = np.asarray(q_hat_diag, dtype=float)
    if vals.shape != (mu.h_dim,) or np.any(vals <= 0):
        raise ValueError("q_hat_diag needs one strictly positive entry per basis vector")
    return PositiveOperator.identity(mu.h_dim), PositiveOperator.from_diag(vals)


def random_hermitian(dim: int, seed: int) -> np.ndarray:
    """Seeded Hermitian matrix with unit operator norm."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2
    return h / np.linalg.norm(h, 2)


def perturbed(mu: MultUnitary, eps: float = 1e-2, seed: int = 7) -> MultUnitary:
    """``W exp(i eps h)`` for a seeded random Hermitian ``h``; a negative control."""
    h = random_hermitian(mu.mat.shape[0], seed)
    lam, v = np.linalg.eigh(h)
    return MultUnitary(mu.mat @ (v * np.exp(1j * eps * lam)) @ v.conj().T)
