"""Verification suites and their JSON report lines."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import construction as cons
from . import dunkl as dk
from .config import RunConfig
from .groups import invariant_generators
from .kernel import KernelError, weierstrass_p, weierstrass_p_prime

SUITES = ("kernel", "dunkl", "limit", "commutativity", "classical", "explicit-fit")


@dataclass
class Report:
    check: str
    absolute: float
    scale: float
    tolerance: float
    config_hash: str = ""
    seed: int = 0
    samples: int = 0
    runtime_ms: float = 0.0
    details: dict = field(default_factory=dict)
    passed: bool | None = None

    @property
    def relative(self) -> float:
        return self.absolute / self.scale if self.scale else self.absolute

    @property
    def ok(self) -> bool:
        return bool(self.relative <= self.tolerance) if self.passed is None else self.passed

    def body(self) -> dict:
        """Everything except timing (deterministic for a fixed config and seed)."""
        return {"check": self.check, "config_hash": self.config_hash,
                "absolute": _num(self.absolute), "scale": _num(self.scale),
                "relative": _num(self.relative), "tolerance": self.tolerance,
                "pass": self.ok, "seed": self.seed, "samples": self.samples,
                **{k: _jsonable(v) for k, v in sorted(self.details.items())}}

    def line(self, timing: bool = True) -> str:
        body = self.body()
        if timing:
            body["runtime_ms"] = round(self.runtime_ms, 1)
        return json.dumps(body, sort_keys=True)


def _num(x) -> float:
    x = float(x)
    return float(f"{x:.6e}")  # stable digits for byte-identical reports


def _jsonable(v):
    if isinstance(v, complex):
        return [_num(v.real), _num(v.imag)]
    if isinstance(v, (np.floating, float)):
        return _num(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in sorted(v.items(), key=lambda kv: str(kv[0]))}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1000 * (time.perf_counter() - self.t0)


# ---------------------------------------------------------------------------
# shared state


@dataclass
class Context:
    cfg: RunConfig

    def __post_init__(self):
        self.group = self.cfg.group()
        self.params = dict(self.cfg.parameters)
        rng = self.cfg.rng(1)
        self.q0 = dk.sample_direction(self.group, rng)
        self.bundle = dk.Bundle(self.q0)
        self.points = [dk.sample_regular_point(self.group, rng, 0.08) for _ in range(self.cfg.samples)]
        self.gens = invariant_generators(self.group.spec)

    def stamp(self, rep: Report, samples: int | None = None) -> Report:
        rep.config_hash = self.cfg.digest()
        rep.seed = self.cfg.seed
        rep.samples = self.cfg.samples if samples is None else samples
        return rep


def _timed(fn):
    def wrapper(ctx: Context):
        out = []
        for rep_fn in fn(ctx):
            with _Timer() as t:
                rep = rep_fn()
            rep.runtime_ms = t.ms
            out.append(ctx.stamp(rep))
        return out
    wrapper.__name__ = fn.__name__
    return wrapper


# ---------------------------------------------------------------------------
# suites


@_timed
def suite_kernel(ctx: Context):
    curve = ctx.group.curve

    def wp_ode():
        rng = ctx.cfg.rng(2)
        z = (rng.uniform(0.05, 0.95, 20) + rng.uniform(0.05, 0.95, 20) * curve.tau) * curve.scale
        wp, dwp = weierstrass_p(z, curve), weierstrass_p_prime(z, curve)
        res = np.abs(dwp**2 - (4 * wp**3 - curve.g2 * wp - curve.g3)) / np.maximum(1, np.abs(wp) ** 3)
        return Report("kernel.wp_differential_equation", float(res.max()), 1.0, 1e-9)

    def wp_periods():
        rng = ctx.cfg.rng(3)
        z = (rng.uniform(0.1, 0.9, 10) + rng.uniform(0.1, 0.9, 10) * curve.tau) * curve.scale
        w = weierstrass_p(z, curve)
        d = max(np.abs(weierstrass_p(z + curve.scale, curve) - w).max(),
                np.abs(weierstrass_p(z + curve.scale * curve.tau, curve) - w).max())
        return Report("kernel.wp_periodicity", float(d), float(np.abs(w).max()), 1e-10)

    yield wp_ode
    yield wp_periods
    m = ctx.group.spec.m
    if m in (3, 6) or m == 4:
        def symmetry():
            val = curve.g2 if m in (3, 6) else curve.g3
            name = "g2" if m in (3, 6) else "g3"
            return Report(f"kernel.{name}_vanishes", abs(val), 1.0, 1e-10)
        yield symmetry


@_timed
def suite_dunkl(ctx: Context):
    g, n = ctx.group, ctx.group.n
    vs = [np.eye(n)[k] for k in range(n)] if n > 1 else [np.array([1.0]), np.array([0.3 - 0.7j])]
    tol = ctx.cfg.tolerances.commutator
    c_rat = cons.rational_limit_parameters(g, ctx.params)

    def family(name, make):
        def run():
            worst = scale = 0.0
            for x in ctx.points:
                frame = dk.Frame(g, x)
                rep = dk.dunkl_commutator_residual(lambda v: make(frame, v), frame, vs)
                worst, scale = max(worst, rep.absolute), max(scale, rep.scale)
            return Report(f"dunkl.{name}_commutator", worst, scale, tol)
        return run

    yield family("rational", lambda f, v: dk.rational_dunkl(f, v, c_rat, 2))
    yield family("classical", lambda f, v: dk.classical_dunkl(f, v, c_rat, 2))
    yield family("elliptic", lambda f, v: dk.elliptic_dunkl(f, v, ctx.params, ctx.bundle, 2,
                                                           t_top=1))

    def pole_shape():
        worst = pred = 0.0
        scale = 1.0
        for x in ctx.points:
            s = dk.measure_cB(dk.Frame(g, x), ctx.params, ctx.bundle, jet_order=1)
            worst = max(worst, s.shape_residual)
            pred = max(pred, s.prediction_residual)
            scale = max(scale, s.scale)
        return Report("dunkl.pole_shape", worst, scale, 1e-8, {"cB_prediction_residual": pred})

    yield pole_shape

    def purity(i):
        def run():
            cb = dk.predicted_cB(g, ctx.params)
            pexp = dk.cm_hamiltonian_classical(g, i, cb, ctx.q0, tol=np.inf)
            return Report(f"dunkl.classical_hamiltonian_purity.L{i}", pexp.purity, 1.0, 1e-10)
        return run

    for i in range(1, len(ctx.gens) + 1):
        yield purity(i)


@_timed
def suite_limit(ctx: Context):
    g = ctx.group
    tol = ctx.cfg.tolerances.regularity

    def certificate(i):
        def run():
            worst = pole = 0.0
            for x in ctx.points:
                cert, _ = cons.build(g, i, ctx.params, ctx.bundle, x, e_top=ctx.cfg.truncation.laurent_pos)
                worst = max(worst, cert.relative)
                pole = max(pole, cert.summand_pole)
            return Report(f"limit.certificate.L{i}", worst, 1.0, tol, {"summand_pole": pole})
        return run

    for i in range(1, len(ctx.gens) + 1):
        yield certificate(i)

    def direction_independence():
        rng = ctx.cfg.rng(4)
        other = dk.Bundle(dk.sample_direction(g, rng))
        worst = scale = 0.0
        for x in ctx.points:
            a = cons.build(g, 1, ctx.params, ctx.bundle, x)[1].values()
            b = cons.build(g, 1, ctx.params, other, x)[1].values()
            worst = max(worst, max(abs(a[k] - b.get(k, 0)) for k in a))
            scale = max(scale, max(abs(v) for v in a.values()))
        return Report("limit.direction_independence", worst, scale, 1e-7)

    def periodicity():
        worst = scale = 0.0
        for x in ctx.points:
            a = cons.build(g, 1, ctx.params, ctx.bundle, x)[1].values()
            shift = np.zeros(g.n, dtype=complex)
            shift[0] = g.curve.scale * g.curve.tau
            b = cons.build(g, 1, ctx.params, ctx.bundle, x + shift)[1].values()
            worst = max(worst, max(abs(a[k] - b.get(k, 0)) for k in a))
            scale = max(scale, max(abs(v) for v in a.values()))
        return Report("limit.periodicity", worst, scale, 1e-8)

    def top_symbol():
        worst = 0.0
        for i, gen in enumerate(ctx.gens, start=1):
            vals = cons.build(g, i, ctx.params, ctx.bundle, ctx.points[0])[1].values()
            for a, v in vals.items():
                if sum(a) == gen.degree:
                    want = gen.scale if max(a) == gen.degree else 0.0
                    worst = max(worst, abs(v - want))
        return Report("limit.top_symbol", worst, 1.0, 1e-10)

    yield direction_independence
    yield periodicity
    yield top_symbol


@_timed
def suite_commutativity(ctx: Context):
    g = ctx.group
    if len(ctx.gens) < 2:
        return
    tol = max(ctx.cfg.tolerances.commutator, 1e-7)

    def run():
        rep = cons.quantum_commutator_check(g, 1, 2, ctx.params, ctx.bundle, ctx.points[:1],
                                            rng=ctx.cfg.rng(5), tol=tol)
        return Report("commutativity.L1_L2", rep.absolute, rep.scale, tol,
                      {"restricted_relative": rep.details.get("restricted_relative", 0.0)})

    yield run


@_timed
def suite_classical(ctx: Context):
    g = ctx.group
    tol = ctx.cfg.tolerances.regularity

    def certificate():
        worst = 0.0
        for i in range(1, len(ctx.gens) + 1):
            cert, _ = cons.build(g, i, ctx.params, ctx.bundle, ctx.points[0], classical=True)
            worst = max(worst, cert.relative)
        return Report("classical.certificate", worst, 1.0, tol)

    yield certificate
    if len(ctx.gens) >= 2:
        def poisson():
            rng = ctx.cfg.rng(6)
            pts = [(x, rng.normal(size=g.n) + 1j * rng.normal(size=g.n)) for x in ctx.points]
            rep = cons.poisson_bracket_check(g, 1, 2, ctx.params, ctx.bundle, pts)
            return Report("classical.poisson_bracket", rep.absolute, rep.scale, 1e-7)
        yield poisson


def ansatz_names(cfg: RunConfig) -> list[str]:
    if cfg.kind == "A1":
        lame = all(abs(v) == 0 for k, v in cfg.parameters.items() if k != "pt:0:j1")
        return ["A1"] if lame else []
    table = {(2, 1): ["darboux"], (2, 2): ["inozemtsev"], (3, 1): ["cubic-rank1"], (3, 2): ["cubic-pair"]}
    if (cfg.m, cfg.n) == (4, 1) and abs(cfg.tau - 1j) < 1e-12:
        return ["lemniscatic-quartic", "lemniscatic-quartic-corrected"]
    return table.get((cfg.m, cfg.n), [])


@_timed
def suite_explicit_fit(ctx: Context):
    for name in ansatz_names(ctx.cfg):
        def run(name=name):
            fit = cons.explicit_fit(ctx.group, 1, ctx.params, ctx.bundle, name, ctx.cfg.rng(7),
                                    tol=ctx.cfg.tolerances.fit)
            return Report(f"explicit-fit.{name}", fit.holdout_residual, 1.0, fit.tol,
                          {"parameters": fit.params, **fit.derived})
        yield run


SUITE_FUNCS = {"kernel": suite_kernel, "dunkl": suite_dunkl, "limit": suite_limit,
               "commutativity": suite_commutativity, "classical": suite_classical,
               "explicit-fit": suite_explicit_fit}


def run_suites(cfg: RunConfig, names=SUITES) -> list[Report]:
    ctx = Context(cfg)
    out = []
    for name in names:
        try:
            out.extend(SUITE_FUNCS[name](ctx))
        except (KernelError, dk.ConventionError) as exc:
            out.append(ctx.stamp(Report(f"{name}.error", np.inf, 1.0, 0.0,
                                        {"error": str(exc)}, passed=False)))
    # kernel checks first, then sorted by name within each suite
    order = {s: k for k, s in enumerate(SUITES)}
    return sorted(out, key=lambda r: (order.get(r.check.split(".")[0], 99), r.check))


__all__ = ["Report", "run_suites", "SUITES", "ansatz_names"]
