from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystcm import construction as cons
from crystcm import dunkl as dk
from crystcm.groups import Group, GroupSpec, weyl_a1


def setup(spec, seed, scale=0.5, lame=False):
    g = Group(spec)
    rng = np.random.default_rng(seed)
    params = dk.default_parameters(g, rng, scale)
    if lame:
        params = {k: (v if k == "pt:0:j1" else 0j) for k, v in params.items()}
    return g, params, dk.Bundle(dk.sample_direction(g, rng)), rng


@pytest.mark.parametrize("spec", [GroupSpec(2, 1), GroupSpec(3, 1), GroupSpec(4, 1), weyl_a1()],
                         ids=lambda s: s.name)
def test_pole_cancellation_rank_one(spec):
    g, params, bundle, rng = setup(spec, 21)
    cert, _ = cons.build(g, 1, params, bundle, dk.sample_regular_point(g, rng, 0.08))
    assert cert.passed and cert.relative < 1e-8
    # individual summands have poles; cancellation is many orders below them
    assert cert.summand_pole > 1e6 * cert.worst and cert.summand_pole > 1e-3


def test_zero_coupling_gives_free_operator():
    g = Group(GroupSpec(3, 1))
    rng = np.random.default_rng(0)
    _, ham = cons.build(g, 1, dk.default_parameters(g), dk.Bundle(np.array([1.0])),
                        dk.sample_regular_point(g, rng))
    vals = ham.values()
    assert vals[(3,)] == pytest.approx(1)
    assert max(abs(v) for k, v in vals.items() if k != (3,)) < 1e-12


def test_independent_of_bundle_direction():
    g, params, bundle, rng = setup(GroupSpec(3, 1), 22)
    x = dk.sample_regular_point(g, rng, 0.08)
    a = cons.build(g, 1, params, bundle, x)[1].values()
    b = cons.build(g, 1, params, dk.Bundle(dk.sample_direction(g, rng)), x)[1].values()
    scale = max(map(abs, a.values()))
    assert max(abs(a[k] - b[k]) for k in a) < 1e-7 * scale


def test_a1_fit_potential_coefficient():
    g, params, bundle, rng = setup(weyl_a1(), 23, 1.0, lame=True)
    fit = cons.explicit_fit(g, 1, params, bundle, "A1", rng)
    C = params["pt:0:j1"]
    assert fit.passed
    assert abs(fit.params["potential"] + 2 * C * (C + 1)) < 1e-8  # (alpha, alpha) = 2


def test_darboux_coefficients():
    g, params, bundle, rng = setup(GroupSpec(2, 1, 0.2 + 1.3j), 24, 1.0)
    fit = cons.explicit_fit(g, 1, params, bundle, "darboux", rng)
    assert fit.passed
    labels = ["pt:0:j1", "pt:half:j1", "pt:halftau:j1", "pt:halfsum:j1"]
    for l, lab in enumerate(labels, start=1):
        C = params[lab]
        assert abs(fit.params[f"C{l}"] + C * (C + 1)) < 1e-8


def test_cubic_rank_one_fit():
    g, params, bundle, rng = setup(GroupSpec(3, 1), 25, 1.0)
    assert cons.explicit_fit(g, 1, params, bundle, "cubic-rank1", rng).passed


def test_fit_rejects_wrong_form():
    # the A1 form cannot describe a generic Darboux operator
    g, params, bundle, rng = setup(GroupSpec(2, 1, 0.2 + 1.3j), 26, 1.0)
    assert not cons.explicit_fit(g, 1, params, bundle, "A1", rng).passed


def test_commuting_hamiltonians_b2():
    g, params, bundle, rng = setup(GroupSpec(2, 2), 27, 0.5)
    rep = cons.quantum_commutator_check(g, 1, 2, params, bundle,
                                        [dk.sample_regular_point(g, rng, 0.08)], rng=rng)
    assert rep.passed


def test_known_duals():
    assert cons.dual_parameters([1, 0, 0, 0]) == [Fraction(1, 2)] * 4
    assert cons.dual_parameters([2, 2, 2, 2]) == [4, 0, 0, 0]


@given(st.lists(st.fractions(min_value=-50, max_value=50, max_denominator=12), min_size=4,
                max_size=4))
def test_dual_is_an_involution(c4):
    assert cons.dual_parameters(cons.dual_parameters(c4)) == c4


def test_rational_limit_rate_a1():
    g, params, bundle, rng = setup(weyl_a1(), 28, 0.5, lame=True)
    x = np.array([0.3 + 0.2j])
    r10 = cons.rational_limit_check(g, 1, params, bundle, x, 10.0)
    r20 = cons.rational_limit_check(g, 1, params, bundle, x, 20.0)
    assert r10.passed and r20.relative < r10.relative / 8


def test_poisson_bracket_g312():
    g, params, bundle, rng = setup(GroupSpec(3, 2), 29, 0.5)
    pts = [(dk.sample_regular_point(g, rng, 0.08), rng.normal(size=2) + 1j * rng.normal(size=2))]
    assert cons.poisson_bracket_check(g, 1, 2, params, bundle, pts).passed


def test_free_flow_conserves_exactly():
    g = Group(GroupSpec(3, 2))
    setup_ = cons.prepare_flow(g, np.random.default_rng(1))
    zero = {k: 0 for k in setup_.fit.params}
    zero["A"] = 0
    fit = cons.FitResult(setup_.fit.ansatz, zero, 0.0, 0.0, 1.0, 1e-6, setup_.fit.points,
                         setup_.fit.holdout_points, {})
    free = cons.ExplicitCubic(g, fit)
    params = {k: 0j for k in setup_.params}
    rep = cons.hamiltonian_flow(g, params, setup_.bundle, free, setup_.x, setup_.p, 0.01, 20)
    assert rep.drift[2] < 1e-13
