import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import f_posets, named_posets, posets
from conewish.algebra import (PosetMismatch, StructuralZeroError, StructuredMatrix,
                              axiom_vi_discrepancy, involution, is_standard_mult_equivalent,
                              multiply, random_element, standard_product_mismatch, trace,
                              verify_axioms, vmul)
from conewish.poset import Poset, n_poset

DIAMOND = Poset.from_cover_edges("iksj", [("i", "k"), ("k", "j"), ("i", "s"), ("s", "j")])


def test_structural_zero_rejected():
    p = n_poset()
    arr = np.zeros((4, 4))
    arr[0, 3] = 1.0  # 1 and 4 are unrelated
    with pytest.raises(StructuralZeroError) as e:
        StructuredMatrix(p, arr)
    assert e.value.pair == ("1", "4")


def test_shape_checked():
    with pytest.raises(ValueError):
        StructuredMatrix(n_poset(), np.zeros((3, 3)))


def test_labeled_access_and_from_labeled():
    p = n_poset()
    a = StructuredMatrix.from_labeled(p, {("3", "1"): 2.0, ("4", "2"): -1.0}, symmetric=True)
    assert a["1", "3"] == a["3", "1"] == 2.0
    assert a["2", "4"] == -1.0
    assert a.is_hermitian()


def test_unit_is_neutral(rng):
    for p in named_posets().values():
        a = StructuredMatrix(p, random_element(p, rng))
        e = StructuredMatrix.unit(p)
        assert (e @ a).allclose(a, 0) and (a @ e).allclose(a, 0)


def test_involution_of_unit():
    p = n_poset()
    e = StructuredMatrix.unit(p)
    assert involution(e).allclose(e, 0)


def test_axiom_i_and_ii_examples(rng):
    p = n_poset()
    for _ in range(20):
        a = StructuredMatrix(p, random_element(p, rng))
        b = StructuredMatrix(p, random_element(p, rng))
        assert trace(a @ a.star) > 0
        assert (a @ b).star.allclose(b.star @ a.star, 1e-12)


def test_operands_on_different_posets():
    a = StructuredMatrix.unit(n_poset())
    with pytest.raises(PosetMismatch):
        a @ StructuredMatrix.unit(Poset.chain(4))


def test_product_by_hand_on_n_poset():
    # A_31 B_13 lands on (3, 3); A_31 B_14 would land on (3, 4), which is masked
    p = n_poset()
    a = StructuredMatrix.from_labeled(p, {("3", "1"): 2.0})
    b = StructuredMatrix.from_labeled(p, {("1", "3"): 5.0, ("1", "1"): 1.0})
    c = multiply(a, b)
    assert c["3", "3"] == 10.0 and c["3", "1"] == 2.0
    assert np.count_nonzero(c.entries) == 2


def test_random_element_kinds(rng):
    p = n_poset()
    assert StructuredMatrix(p, random_element(p, rng, "lower")).is_lower()
    assert StructuredMatrix(p, random_element(p, rng, "hermitian")).is_hermitian()
    t = random_element(p, rng, "lower+")
    assert np.all(np.diag(t) > 0)
    with pytest.raises(ValueError):
        random_element(p, rng, "bogus")


# ----------------------------------------------------------------------
# axioms

@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_axioms_hold_on_chains(n):
    rep = verify_axioms(Poset.chain(n), trials=100, seed=n)
    assert rep.passed
    assert all(r.max_residual < 1e-10 for r in rep.results)


def test_axioms_hold_on_star():
    assert verify_axioms(Poset.star(4), trials=100, seed=3).passed


@given(f_posets(), st.integers(0, 2**16))
def test_axioms_hold_under_F(p, seed):
    rep = verify_axioms(p, trials=30, seed=seed)
    assert rep.passed, rep.to_dict()


@given(posets(max_size=6, density=0.6), st.integers(0, 2**16))
def test_axiom_vi_fails_exactly_without_F(p, seed):
    rep = verify_axioms(p, trials=30, seed=seed)
    for ax in ("i", "ii", "iii", "iv", "v"):
        assert rep[ax].passed
    assert rep["vi"].passed == p.satisfies_condition_F()


def hand_expansions(t, u, i, j, k, s):
    """The two displayed expansions of [T(UU*)]_jk and [(TU)U*]_jk.

    U is lower triangular, so u_ik and u_ij there are read as the lower
    entries u_ki and u_ji.
    """
    lhs = (t[j, i] * u[i, i] * u[k, i] + t[j, k] * (u[k, i] ** 2 + u[k, k] ** 2)
           + t[j, j] * (u[k, i] * u[j, i] + u[j, k] * u[k, k]))
    rhs = ((t[j, i] * u[i, i] + t[j, k] * u[k, i] + t[j, s] * u[s, i] + t[j, j] * u[j, i]) * u[k, i]
           + (t[j, k] * u[k, k] + t[j, j] * u[j, k]) * u[k, k])
    return lhs, rhs


def test_axiom_vi_counterexample_matches_expansions(rng):
    p = DIAMOND
    i, k, s, j = (p.index(x) for x in "iksj")
    for _ in range(50):
        t = random_element(p, rng, "lower")
        u = random_element(p, rng, "lower")
        lhs, rhs = hand_expansions(t, u, i, j, k, s)
        mask = p.mask
        assert vmul(t, vmul(u, u.T, mask), mask)[j, k] == pytest.approx(lhs, rel=1e-12, abs=1e-12)
        assert vmul(vmul(t, u, mask), u.T, mask)[j, k] == pytest.approx(rhs, rel=1e-12, abs=1e-12)
        disc = axiom_vi_discrepancy(t, u, p)
        assert disc[j, k] == pytest.approx(rhs - lhs, rel=1e-12, abs=1e-12)
        assert disc[j, k] == pytest.approx(t[j, s] * u[s, i] * u[k, i], rel=1e-12, abs=1e-12)


def test_axiom_vi_needs_s_in_the_support(rng):
    # with T, U supported on {i, j, k} alone the discrepancy vanishes
    p = DIAMOND
    keep = np.array([x in "ijk" for x in p.labels])
    sub = np.outer(keep, keep)
    t = random_element(p, rng, "lower") * sub
    u = random_element(p, rng, "lower") * sub
    assert np.max(np.abs(axiom_vi_discrepancy(t, u, p))) < 1e-14


def test_verify_axioms_reports_witness_on_diamond():
    rep = verify_axioms(DIAMOND, trials=20, seed=1)
    assert not rep["vi"].passed
    assert rep["vi"].witness["entry"] == ["j", "k"] or rep["vi"].witness["entry"] == ["j", "s"]
    assert rep.to_dict()["passed"] is False


def test_verify_axioms_rejects_zero_trials():
    with pytest.raises(ValueError):
        verify_axioms(Poset.chain(2), trials=0)


# ----------------------------------------------------------------------
# ordinary product

def test_standard_mult_examples():
    assert is_standard_mult_equivalent(Poset.chain(5))
    assert not is_standard_mult_equivalent(n_poset())
    assert not is_standard_mult_equivalent(Poset.star(4))


def test_masked_product_differs_at_source():
    p = n_poset()
    rng = np.random.default_rng(5)
    t = random_element(p, rng, "lower+")
    plain = t @ t.T
    vin = multiply(StructuredMatrix(p, t), StructuredMatrix(p, t).star).entries
    a, b = p.index(3), p.index(4)
    assert plain[a, b] == pytest.approx(t[a, 1] * t[b, 1])
    assert plain[a, b] != 0 and vin[a, b] == 0


def test_non_source_branch_point_breaks_standard_product():
    # the shortcut needs no branch point at all, not only no source
    p = Poset.from_cover_edges([1, 2, 3, 4], [(1, 2), (2, 3), (2, 4)])
    assert p.sources() == frozenset()
    assert not is_standard_mult_equivalent(p)
    assert standard_product_mismatch(p, trials=20) > 0


@given(posets())
def test_standard_mult_matches_randomized_comparison(p):
    assert is_standard_mult_equivalent(p) == (standard_product_mismatch(p, trials=20) == 0.0)
