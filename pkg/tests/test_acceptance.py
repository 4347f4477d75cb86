"""Acceptance criteria 1-9, each at its stated tolerance and under five minutes.

Every test prints one line ``ACCEPTANCE <k> PASS|FAIL <summary>`` before asserting.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from crystcm import construction as cons
from crystcm import dunkl as dk
from crystcm import integrability as ig
from crystcm.groups import Group, GroupSpec, invariant_generators, weyl_a1
from crystcm.kernel import LatticeCurve, weierstrass_p, weierstrass_p_prime

from conftest import EQUIANHARMONIC

BUDGET_S = 300.0


class Verdict:
    def __init__(self, label, capsys):
        self.label, self.capsys = label, capsys
        self.checks = []
        self.t0 = time.perf_counter()

    def __call__(self, name, ok, value=""):
        self.checks.append((name, bool(ok), value))

    def done(self):
        elapsed = time.perf_counter() - self.t0
        self("runtime < 300 s", elapsed < BUDGET_S, f"{elapsed:.1f}s")
        ok = all(c[1] for c in self.checks)
        failed = [f"{n} [{v}]" for n, passed, v in self.checks if not passed]
        summary = f"{len(self.checks)} checks, {elapsed:.1f}s" + (
            "" if ok else "; failed: " + "; ".join(failed))
        with self.capsys.disabled():
            print(f"\nACCEPTANCE {self.label} {'PASS' if ok else 'FAIL'} {summary}")
        assert ok, summary


@pytest.fixture
def verdict(capsys, request):
    return Verdict(request.node.name.split("_")[1], capsys)


def seeded(spec, seed, scale=1.0, lame=False):
    g = Group(spec)
    rng = np.random.default_rng(seed)
    params = dk.default_parameters(g, rng, scale)
    if lame:
        params = {k: (v if k == "pt:0:j1" else 0j) for k, v in params.items()}
    return g, params, dk.Bundle(dk.sample_direction(g, rng)), rng


def test_1_special_functions(verdict):
    rng = np.random.default_rng(1)
    for name, tau in (("i", 1j), ("e^(2 pi i/3)", EQUIANHARMONIC)):
        c = LatticeCurve(tau)
        z = rng.uniform(0.05, 0.95, 20) + rng.uniform(0.05, 0.95, 20) * tau
        wp, dwp = weierstrass_p(z, c), weierstrass_p_prime(z, c)
        res = np.abs(dwp**2 - (4 * wp**3 - c.g2 * wp - c.g3)) / np.maximum(1, np.abs(wp) ** 3)
        verdict(f"wp ODE tau={name}", res.max() <= 1e-9, f"{res.max():.1e}")
    g2 = abs(LatticeCurve(EQUIANHARMONIC).g2)
    g3 = abs(LatticeCurve(1j).g3)
    verdict("g2(equianharmonic)", g2 <= 1e-10, f"{g2:.1e}")
    verdict("g3(lemniscatic)", g3 <= 1e-10, f"{g3:.1e}")
    verdict.done()


def test_2_dunkl_commutativity(verdict):
    for spec in (GroupSpec(2, 1), GroupSpec(3, 1), GroupSpec(3, 2), weyl_a1()):
        g, params, bundle, rng = seeded(spec, 2, 0.5, lame=spec.label == "A1")
        c = cons.rational_limit_parameters(g, params)
        vs = ([np.eye(g.n)[k] for k in range(g.n)] if g.n > 1
              else [np.array([1.0]), np.array([0.4 - 0.9j])])
        worst = {"rational": 0.0, "classical": 0.0, "elliptic": 0.0}
        for _ in range(5):
            frame = dk.Frame(g, dk.sample_regular_point(g, rng, 0.08))
            makers = {
                "rational": lambda v: dk.rational_dunkl(frame, v, c, 2),
                "classical": lambda v: dk.classical_dunkl(frame, v, c, 2),
                "elliptic": lambda v: dk.elliptic_dunkl(frame, v, params, bundle, 2, t_top=1),
            }
            for fam, make in makers.items():
                worst[fam] = max(worst[fam], dk.dunkl_commutator_residual(make, frame, vs).relative)
        for fam, r in worst.items():
            verdict(f"{spec.name} {fam}", r <= 1e-8, f"{r:.1e}")
    verdict.done()


def test_3_group_components_vanish(verdict):
    g, params, bundle, _ = seeded(GroupSpec(3, 2), 3)
    for cname, c in (("c_B", dk.predicted_cB(g, params)),
                     ("rational c'", cons.rational_limit_parameters(g, params))):
        for i in (1, 2):
            purity = dk.cm_hamiltonian_classical(g, i, c, bundle.q0, tol=np.inf).purity
            verdict(f"P{i} with {cname}", purity <= 1e-10, f"{purity:.1e}")
    verdict.done()


def test_4_pole_shape_and_cB(verdict):
    for spec in (GroupSpec(2, 1), GroupSpec(3, 1), GroupSpec(3, 2), GroupSpec(4, 1), weyl_a1()):
        g, params, bundle, rng = seeded(spec, 4, lame=spec.label == "A1")
        frame = dk.Frame(g, dk.sample_regular_point(g, rng, 0.08))
        shape = dk.measure_cB(frame, params, bundle)
        rel = shape.shape_residual / shape.scale
        verdict(f"{spec.name} t^-1 shape", rel <= 1e-8, f"{rel:.1e}")
        if spec.label == "A1":
            # c_alpha = C_alpha (alpha, alpha) / 2 with (alpha, alpha) = 2
            want = params["pt:0:j1"] * 2 / 2
            err = max(abs(v - want) for v in shape.c_B.values())
            verdict("A1 c_alpha", err <= 1e-8, f"{err:.1e}")
        elif (spec.m, spec.n) == (2, 1):
            want = sum(params.values()) / 2
            err = max(abs(v - want) for v in shape.c_B.values())
            verdict("B-type n=1 c_alpha", err <= 1e-8, f"{err:.1e}")
    for m in (2, 3, 4, 6):
        g, params, bundle, rng = seeded(GroupSpec(m, 1), 40 + m)
        b = dk.rank_one_b_vector(dk.Frame(g, dk.sample_regular_point(g, rng, 0.08)), params, bundle)
        verdict(f"G({m},1,1) sum b", abs(b.sum()) <= 1e-10, f"{abs(b.sum()):.1e}")
    verdict.done()


def test_5_limit_certificate(verdict):
    for spec in (GroupSpec(3, 1), GroupSpec(3, 2), GroupSpec(4, 1), GroupSpec(2, 2), weyl_a1()):
        g, params, bundle, rng = seeded(spec, 5, 1.0, lame=spec.label == "A1")
        other = dk.Bundle(dk.sample_direction(g, rng))
        x = dk.sample_regular_point(g, rng, 0.08)
        for i in range(1, len(invariant_generators(spec)) + 1):
            cert, ham = cons.build(g, i, params, bundle, x)
            verdict(f"{spec.name} L{i} poles", cert.relative <= 1e-8, f"{cert.relative:.1e}")
            verdict(f"{spec.name} L{i} summand pole >= 1", cert.summand_pole >= 1,
                    f"{cert.summand_pole:.2g}")
            a, b = ham.values(), cons.build(g, i, params, other, x)[1].values()
            diff = max(abs(a[k] - b.get(k, 0)) for k in a) / max(map(abs, a.values()))
            verdict(f"{spec.name} L{i} lambda0 independence", diff <= 1e-7, f"{diff:.1e}")
    verdict.done()


def test_6_explicit_forms(verdict):
    cases = [(weyl_a1(), "A1"), (GroupSpec(2, 1, 0.2 + 1.3j), "darboux"),
             (GroupSpec(3, 1), "cubic-rank1"), (GroupSpec(3, 2), "cubic-pair"),
             (GroupSpec(4, 1), "lemniscatic-quartic"), (GroupSpec(4, 1), "lemniscatic-quartic-corrected")]
    for spec, name in cases:
        g, params, bundle, rng = seeded(spec, 6, 1.0, lame=name == "A1")
        fit = cons.explicit_fit(g, 1, params, bundle, name, rng)
        if name == "lemniscatic-quartic-corrected":
            # not a criterion: reported next to the literal form it replaces
            print(f"  lemniscatic-quartic-corrected holdout {fit.holdout_residual:.1e}, "
                  f"B - (A^2 - 6A) {fit.derived['quadratic_relation']:.1e}, "
                  f"odd relation {fit.derived['odd_relation']:.1e}")
            continue
        verdict(f"{name} holdout", fit.passed, f"{fit.holdout_residual:.1e}")
        if name == "A1":
            C = params["pt:0:j1"]
            err = abs(fit.params["potential"] + C * (C + 1) * 2)
            verdict("A1 potential = -C(C+1)(alpha,alpha)", err <= 1e-6, f"{err:.1e}")
        if name == "darboux":
            labels = ["pt:0:j1", "pt:half:j1", "pt:halftau:j1", "pt:halfsum:j1"]
            err = max(abs(fit.params[f"C{l}"] + params[lab] * (params[lab] + 1))
                      for l, lab in enumerate(labels, start=1))
            verdict("darboux coefficients -C_l(C_l+1)", err <= 1e-6, f"{err:.1e}")
        if name == "cubic-pair":
            k = params["pair"]
            err = min(abs(r - k) for r in fit.derived["k_roots"])
            verdict("cubic-pair A = k(k+1)", err <= 1e-6, f"{err:.1e}")
    verdict.done()


def test_7_classical_system(verdict):
    g, params, bundle, rng = seeded(GroupSpec(3, 2), 7, 0.5)
    pts = [(dk.sample_regular_point(g, rng, 0.08), rng.normal(size=2) + 1j * rng.normal(size=2))
           for _ in range(5)]
    rep = cons.poisson_bracket_check(g, 1, 2, params, bundle, pts)
    verdict("{L1, L2} at 5 phase points", rep.relative <= 1e-7, f"{rep.relative:.1e}")
    setup = cons.prepare_flow(g, np.random.default_rng(1))
    long = cons.hamiltonian_flow(g, setup.params, setup.bundle, setup.hamiltonian, setup.x,
                                 setup.p, 1e-3, 1000)
    verdict("L2 drift, 1000 RK4 steps at dt=1e-3", long.drift[2] <= 1e-6 and not long.truncated,
            f"{long.drift[2]:.1e}")
    order = cons.flow_order(setup, 0.005, 200)
    verdict("drift ratio dt -> dt/2 near 16", 8 <= order["ratio"] <= 32 and not order["truncated"],
            f"{order['ratio']:.1f}")
    verdict.done()


def test_8_integer_families(verdict):
    fams = ig.enumerate_families(3, 12)
    rng = np.random.default_rng(8)
    sample = [fams[k] for k in rng.choice(len(fams), 50, replace=False)]
    ok = all(ig.family_from_params(ig.family_to_params(f)) == f for f in sample)
    verdict("round trip on 50 admissible triples", ok and len(sample) == 50)
    verdict("(0,1,2) -> D^3", ig.family_to_params((0, 1, 2)) == (0, 0))
    verdict("(-1,0,4) -> Picard", ig.family_to_params((-1, 0, 4)) == (-6, 0))
    prog = [n for n in range(1, 8) if n % 3]
    ok = all(ig.family_to_params((1 - n, 1, 1 + n)) == (1 - n * n, Fraction(1 - n * n, 2))
             for n in prog)
    verdict("(1-n,1,1+n) parameters", ok)
    lame = ig.lame_commutation_check((-1, 1, 3))
    verdict("Lame commutation (-1,1,3)", lame.relative <= 1e-8, f"{lame.relative:.1e}")
    curve = LatticeCurve(EQUIANHARMONIC)
    for n in prog:
        a, b = ig.family_to_params((1 - n, 1, 1 + n))
        rep = ig.frobenius_check(ig.halphen_cubic(float(a), float(b), curve))
        verdict(f"log-free n={n} equianharmonic", rep.log_free, f"{rep.obstruction:.1e}")
    a, b = ig.family_to_params((-3, 1, 5))
    rep = ig.frobenius_check(ig.halphen_cubic(float(a), float(b), LatticeCurve(1.3j)))
    verdict("(-3,1,5) obstructed at tau=1.3i", not rep.log_free and rep.obstruction >= 1e-3,
            f"{rep.obstruction:.2g}")
    verdict.done()


def test_9_rational_limit(verdict):
    g, params, bundle, _ = seeded(weyl_a1(), 9, 0.5, lame=True)
    x = np.array([0.3 + 0.2j])
    r10 = cons.rational_limit_check(g, 1, params, bundle, x, 10.0)
    r20 = cons.rational_limit_check(g, 1, params, bundle, x, 20.0)
    verdict("R=10 relative", r10.relative <= 1e-3, f"{r10.relative:.1e}")
    ratio = r10.relative / r20.relative
    verdict("R=10 -> 20 improvement near 16", 8 <= ratio <= 32, f"{ratio:.1f}")
    verdict.done()
