import numpy as np
import pytest
from hypothesis import given, strategies as st

from crystcm import construction as cons
from crystcm import dunkl as dk
from crystcm.groups import Group, GroupSpec, invariant_generators, weyl_a1

SMALL = [GroupSpec(2, 1), GroupSpec(3, 1), GroupSpec(3, 2), weyl_a1()]


def setup(spec, seed, scale=0.5):
    g = Group(spec)
    rng = np.random.default_rng(seed)
    params = dk.default_parameters(g, rng, scale)
    return g, params, dk.Bundle(dk.sample_direction(g, rng)), rng


def basis(n):
    return [np.eye(n)[k] for k in range(n)] if n > 1 else [np.array([1.0]), np.array([0.4 - 0.9j])]


@pytest.mark.parametrize("spec", SMALL, ids=lambda s: s.name)
def test_elliptic_dunkl_commute(spec):
    g, params, bundle, rng = setup(spec, 11)
    frame = dk.Frame(g, dk.sample_regular_point(g, rng, 0.08))
    rep = dk.dunkl_commutator_residual(
        lambda v: dk.elliptic_dunkl(frame, v, params, bundle, 2, t_top=1), frame, basis(g.n))
    assert rep.relative < 1e-8


@pytest.mark.parametrize("spec", SMALL, ids=lambda s: s.name)
def test_rational_and_classical_dunkl_commute(spec):
    g, params, _, rng = setup(spec, 12)
    c = cons.rational_limit_parameters(g, params)
    frame = dk.Frame(g, dk.sample_regular_point(g, rng, 0.08))
    for make in (dk.rational_dunkl, dk.classical_dunkl):
        rep = dk.dunkl_commutator_residual(lambda v: make(frame, v, c, 2), frame, basis(g.n))
        assert rep.relative < 1e-8


def test_zero_coupling_is_plain_derivative():
    g = Group(GroupSpec(3, 2))
    frame = dk.Frame(g, dk.sample_regular_point(g, np.random.default_rng(0), 0.1))
    params = dk.default_parameters(g)
    op = dk.elliptic_dunkl(frame, [1.0, 0.0], params, dk.Bundle(np.array([1.0, 0.3j])), 1, t_top=0)
    # only the identity group component survives
    assert np.abs(op.coef[:, 1:]).max() == 0


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_dunkl_linear_in_direction(a, b):
    g, params, bundle, rng = setup(GroupSpec(3, 2), 3)
    frame = dk.Frame(g, dk.sample_regular_point(g, np.random.default_rng(1), 0.08))
    u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    lhs = dk.elliptic_dunkl(frame, a * u + b * v, params, bundle, 1, t_top=0)
    rhs = (dk.elliptic_dunkl(frame, u, params, bundle, 1, t_top=0).coef * a
           + dk.elliptic_dunkl(frame, v, params, bundle, 1, t_top=0).coef * b)
    assert np.abs(lhs.coef - rhs).max() < 1e-9 * (1 + np.abs(rhs).max())


@pytest.mark.parametrize("spec", SMALL, ids=lambda s: s.name)
def test_measured_cB_matches_prediction(spec):
    g, params, bundle, rng = setup(spec, 5)
    shape = dk.measure_cB(dk.Frame(g, dk.sample_regular_point(g, rng, 0.08)), params, bundle)
    assert shape.shape_residual < 1e-8 * shape.scale
    assert shape.prediction_residual < 1e-8 * max(1, max(map(abs, shape.c_B.values())))


def test_a1_cB_is_coupling():
    # (alpha, alpha) = 2: c = C (alpha, alpha) / 2 = C
    g, params, bundle, rng = setup(weyl_a1(), 6)
    params = {k: (v if k == "pt:0:j1" else 0j) for k, v in params.items()}
    shape = dk.measure_cB(dk.Frame(g, dk.sample_regular_point(g, rng, 0.08)), params, bundle)
    (val,) = shape.c_B.values()
    assert abs(val - params["pt:0:j1"]) < 1e-8


@pytest.mark.parametrize("m", [2, 3, 4])
def test_rank_one_b_sums_to_zero(m):
    g, params, bundle, rng = setup(GroupSpec(m, 1), 7)
    b = dk.rank_one_b_vector(dk.Frame(g, dk.sample_regular_point(g, rng, 0.08)), params, bundle)
    assert abs(b.sum()) < 1e-10 * max(1, np.abs(b).max())


@pytest.mark.parametrize("spec", [GroupSpec(3, 2), GroupSpec(2, 2)], ids=lambda s: s.name)
def test_classical_hamiltonians_have_no_group_part(spec):
    g, params, bundle, _ = setup(spec, 8)
    cb = dk.predicted_cB(g, params)
    for i in range(1, len(invariant_generators(spec)) + 1):
        assert dk.cm_hamiltonian_classical(g, i, cb, bundle.q0, tol=np.inf).purity < 1e-10


def test_regular_points_respect_margin():
    g = Group(GroupSpec(3, 2))
    rng = np.random.default_rng(2)
    for _ in range(5):
        assert dk.hypertorus_margin(g, dk.sample_regular_point(g, rng, 0.1), g.curve) >= 0.1
