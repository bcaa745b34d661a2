import numpy as np
import pytest

from mu_workbench.errors import FormatError
from mu_workbench.groups import (GroupTable, builtin_groups, cyclic, direct_product,
                                 gen_group_kt, gen_skewed_certificate, perturbed,
                                 symmetric, trivial)
from mu_workbench.munit import check_modular, pentagon_residual

from oracles import CNOT, kac_takesaki, pentagon


def test_builtin_tables_valid_and_named():
    groups = builtin_groups()
    assert sorted(groups) == ["S3", "Z2", "Z2xZ2", "Z3", "Z4"]
    assert [groups[k].order for k in ("Z2", "Z3", "Z4", "Z2xZ2", "S3")] == [2, 3, 4, 4, 6]


def test_symmetric_group_is_nonabelian():
    t = symmetric(3).table
    assert not np.array_equal(t, t.T)
    inv = [symmetric(3).inverse(g) for g in range(6)]
    assert all(t[g, inv[g]] == 0 for g in range(6))


def test_direct_product_indexing():
    z = cyclic(2)
    p = direct_product(z, cyclic(3))
    # (1, 2) * (1, 2) = (0, 1)
    assert p.mul(1 * 3 + 2, 1 * 3 + 2) == 0 * 3 + 1


@pytest.mark.parametrize("table,msg", [
    ([[0, 1], [1, 1]], "permutations"),
    ([[1, 0], [0, 1]], "identity"),
    ([[0, 1, 2], [1, 0, 2], [2, 2, 0]], "permutations"),
    ([[0, 1, 2, 3, 4], [1, 0, 3, 4, 2], [2, 4, 0, 1, 3], [3, 2, 4, 0, 1],
      [4, 3, 1, 2, 0]], "associative"),
    ([[0, 5], [5, 0]], "range"),
])
def test_invalid_tables(table, msg):
    with pytest.raises(FormatError, match=msg):
        GroupTable(np.array(table))


def test_csv_round_trip(tmp_path):
    g = symmetric(3)
    path = tmp_path / "s3.csv"
    path.write_text(g.to_csv())
    back = GroupTable.load(path)
    assert np.array_equal(back.table, g.table) and back.name == "s3"
    with pytest.raises(FormatError):
        GroupTable.from_csv("0,1\n1\n")
    with pytest.raises(FormatError):
        GroupTable.from_csv("0,x\n1,0\n")


def test_kt_z2_is_cnot():
    assert np.array_equal(gen_group_kt(cyclic(2)).mat, CNOT)


def test_kt_trivial_group():
    assert np.array_equal(gen_group_kt(trivial()).mat, np.eye(1))


@pytest.mark.parametrize("name", ["Z2", "Z3", "Z4", "Z2xZ2", "S3"])
def test_kt_matches_oracle_and_pentagon(name):
    table = builtin_groups()[name]
    mu = gen_group_kt(table)
    assert np.array_equal(mu.mat, kac_takesaki(table.table.tolist()))
    assert pentagon_residual(mu) < 1e-12
    if table.order <= 4:
        assert pentagon(mu.mat, table.order) < 1e-12


def test_left_regular_representation():
    g = symmetric(3)
    for a in range(6):
        for b in range(6):
            assert np.array_equal(g.left_regular(a) @ g.left_regular(b),
                                  g.left_regular(g.mul(a, b)))


def test_skewed_certificates():
    cnot = gen_group_kt(cyclic(2))
    q, qh = gen_skewed_certificate(cnot, [1, 2])
    assert check_modular(cnot, q, qh).ok
    q, qh = gen_skewed_certificate(cnot, [1, 1])
    assert np.array_equal(q.mat, qh.mat)
    z3 = gen_group_kt(cyclic(3))
    assert check_modular(z3, *gen_skewed_certificate(z3, [1, 2, 4])).ok
    with pytest.raises(ValueError):
        gen_skewed_certificate(cnot, [1, 0])


def test_perturbed_is_seeded_negative_control():
    cnot = gen_group_kt(cyclic(2))
    a, b = perturbed(cnot), perturbed(cnot)
    assert np.array_equal(a.mat, b.mat)
    assert pentagon_residual(a) > 1e-4
    assert not np.array_equal(perturbed(cnot, seed=8).mat, a.mat)
