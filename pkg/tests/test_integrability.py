from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystcm import dunkl as dk
from crystcm import integrability as ig
from crystcm.groups import Group, GroupSpec
from crystcm.kernel import LatticeCurve

from conftest import EQUIANHARMONIC


def test_ml_numbers_trivial():
    rep = ig.ml_numbers([0, 0], 3)
    assert rep.verdict and rep.rounded() == [0, 1, 2]


def test_ml_numbers_non_integer():
    rep = ig.ml_numbers([0.3, 0], 3)
    assert not rep.integral and not rep.verdict


def _C_for(target):
    # invert m_l = l + sum_j C_j xi^(jl) by a discrete Fourier transform
    k = len(target)
    xi = np.exp(2j * np.pi / k)
    return [sum((target[l] - l) * xi ** (-j * l) for l in range(k)) / k for j in range(1, k)]


def test_ml_numbers_recover_target():
    rep = ig.ml_numbers(_C_for([-1, 1, 3]), 3)
    assert rep.verdict and rep.rounded() == [-1, 1, 3]


def test_ml_numbers_congruent():
    rep = ig.ml_numbers(_C_for([0, 3, 0]), 3)
    assert rep.integral and not rep.distinct and not rep.verdict


@pytest.mark.parametrize("family,params", [
    ((0, 1, 2), (0, 0)),
    ((-1, 0, 4), (-6, 0)),
    ((-1, 1, 3), (-3, Fraction(-3, 2))),
])
def test_named_families(family, params):
    assert ig.family_to_params(family) == tuple(Fraction(p) for p in params)


@pytest.mark.parametrize("n", [1, 2, 4, 5, 7])
def test_arithmetic_progression_families(n):
    a, b = ig.family_to_params((1 - n, 1, 1 + n))
    assert a == 1 - n * n and b == Fraction(1 - n * n, 2)


def test_congruent_progression_is_rejected():
    with pytest.raises(ig.IntegrabilityError):
        ig.IntegerFamily((-2, 1, 4))


@given(st.integers(0, 10**6))
def test_triple_round_trip(seed):
    fam = ig.random_family(np.random.default_rng(seed), 3, 5)
    assert ig.family_from_params(ig.family_to_params(fam)) == fam


@given(st.integers(0, 10**6))
def test_quadruple_round_trip(seed):
    fam = ig.random_family(np.random.default_rng(seed), 4, 3)
    assert ig.family_from_params(ig.family_to_params(fam)) == fam


def test_enumeration_is_admissible():
    fams = ig.enumerate_families(3, 4)
    assert ig.IntegerFamily((0, 1, 2)) in fams and ig.IntegerFamily((-1, 1, 3)) in fams
    assert all(sum(f.indices) == 3 for f in fams)


@pytest.mark.parametrize("family", [(0, 1, 2), (-1, 1, 3), (-3, 1, 5),
                                    (-1, 0, 4)])
def test_log_free_equianharmonic(family):
    a, b = ig.family_to_params(family)
    op = ig.halphen_cubic(float(a), float(b), LatticeCurve(EQUIANHARMONIC))
    assert ig.frobenius_check(op).log_free


def test_obstructed_off_symmetric_lattice():
    a, b = ig.family_to_params((-3, 1, 5))
    rep = ig.frobenius_check(ig.halphen_cubic(float(a), float(b), LatticeCurve(1.3j)))
    assert not rep.log_free and rep.obstruction > 1e-3


def test_non_integer_indices_fail_immediately():
    rep = ig.frobenius_check(ig.halphen_cubic(0.7, 0.1, LatticeCurve(EQUIANHARMONIC)))
    assert not rep.integral and not rep.log_free


def test_lame_commutation():
    assert ig.lame_commutation_check((-1, 1, 3)).passed


def test_lame_does_not_commute_with_other_families():
    assert not ig.lame_commutation_check((-3, 1, 5)).passed


def test_quartic_square_corrected_only():
    assert ig.quartic_square_check(2, corrected=True).passed
    assert not ig.quartic_square_check(2, corrected=False).passed


@pytest.mark.parametrize("m", [2, 3])
def test_construction_indices_match_ml(m):
    g = Group(GroupSpec(m, 1))
    rng = np.random.default_rng(40 + m)
    params = dk.default_parameters(g, rng, 0.4)
    links = ig.index_links(g, params, dk.Bundle(dk.sample_direction(g, rng)))
    assert max(link.residual for link in links) < 1e-8
