import itertools

import numpy as np
import pytest

from crystcm.groups import (Group, GroupError, GroupSpec, invariant_generators, weyl_a1)

SPECS = [GroupSpec(2, 1), GroupSpec(3, 1), GroupSpec(3, 2), GroupSpec(4, 1), GroupSpec(2, 2),
         weyl_a1()]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_order(spec):
    assert len(Group(spec)) == spec.order


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_closed_under_products(spec):
    g = Group(spec)
    mats = np.array(g.matrices)
    for a, b in itertools.product(range(len(g)), repeat=2):
        if a % 3 == 0 or b % 2 == 0:  # subsample for speed
            prod = g.matrices[a] @ g.matrices[b]
            assert np.min(np.abs(mats - prod).max(axis=(1, 2))) < 1e-10


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_reflections_fix_hyperplane(spec):
    g = Group(spec)
    for r in g.reflections:
        M = g.matrices[r.index]
        ev = np.linalg.eigvals(M)
        assert np.sum(np.abs(ev - 1) < 1e-9) == spec.n - 1
        # zeta refers to the action on functions, (s.F)(x) = F(s^-1 x)
        assert np.abs(np.prod(ev) * r.zeta - 1) < 1e-9
        assert np.allclose(r.alpha @ np.linalg.inv(M), r.zeta * r.alpha)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_hypertori_stabilisers(spec):
    g = Group(spec)
    for T in g.hypertori:
        s = g.matrices[T.s_T]
        # s_T fixes T pointwise: it is a reflection (or a rotation about a point in rank 1)
        ev = np.linalg.eigvals(s)
        assert np.sum(np.abs(ev - 1) < 1e-9) == spec.n - 1
        assert np.allclose(np.linalg.matrix_power(s, T.m_T), np.eye(spec.n))
        assert spec.m % T.m_T == 0 or T.m_T == 2


def test_pair_hypertori_have_order_two():
    g = Group(GroupSpec(3, 2))
    kinds = {(T.kind, T.m_T) for T in g.hypertori}
    assert kinds == {("pair", 2), ("diag", 3)}


def test_label_sets():
    assert Group(GroupSpec(3, 2)).parameter_labels == [
        "pair", "pt:0:j1", "pt:0:j2", "pt:eta1:j1", "pt:eta1:j2", "pt:eta2:j1", "pt:eta2:j2"]
    assert Group(weyl_a1()).parameter_labels == [
        "pt:0:j1", "pt:half:j1", "pt:halftau:j1", "pt:halfsum:j1"]


def test_invalid_specs():
    with pytest.raises(GroupError):
        GroupSpec(5, 1)
    with pytest.raises(GroupError):
        GroupSpec(3, 1, 1j)  # m = 3 needs the equianharmonic curve
    with pytest.raises(GroupError):
        GroupSpec(2, 0)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.name)
def test_generators_invariant(spec, rng):
    g = Group(spec)
    p = rng.normal(size=spec.n) + 1j * rng.normal(size=spec.n)
    for gen in invariant_generators(spec):
        v = gen(p)
        for M in g.matrices[:: max(1, len(g) // 8)]:
            assert abs(gen(M @ p) - v) < 1e-10 * (1 + abs(v))
