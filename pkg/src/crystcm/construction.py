"""The t -> 0 limit construction of the crystallographic elliptic CM systems.

``build_quantum`` substitutes Laurent-expanded elliptic Dunkl operators into
the classical rational Hamiltonian P_i^{c_B}(p, q) with q = t q0, checks that
every negative power of t cancels, and returns the t^0 part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dunkl import (Bundle, Frame, Operator, PExpansion, cm_hamiltonian_classical,
                    elliptic_dunkl, identity_operator, measure_cB, multiply)
from .groups import Group, invariant_generators, slot_label
from .kernel import jet_mul, monomials, weierstrass_p


@dataclass
class LimitCertificate:
    generator: int
    negative: dict[int, float]  # exponent -> max |coefficient|
    scale: float
    tol: float
    summand_pole: float  # largest pole coefficient among individual summands

    @property
    def worst(self) -> float:
        return max(self.negative.values(), default=0.0)

    @property
    def relative(self) -> float:
        return self.worst / self.scale

    @property
    def passed(self) -> bool:
        return self.relative <= self.tol

    def summary(self) -> dict:
        return {"generator": self.generator, "relative": self.relative, "scale": self.scale,
                "tolerance": self.tol, "summand_pole": self.summand_pole,
                "negative": {str(k): v for k, v in sorted(self.negative.items())},
                "pass": self.passed}


@dataclass
class Hamiltonian:
    """L-bar (group-algebra valued) and its restriction L at one base point."""

    group: Group
    params: dict[str, complex]
    generator: int
    bundle: Bundle
    full: Operator  # t-window [.., e_top]; t^0 part is L-bar
    classical: bool
    pexp: PExpansion
    c_B: dict[int, complex] = field(default_factory=dict)

    @property
    def frame(self) -> Frame:
        return self.full.frame

    @property
    def limit(self) -> Operator:
        """L-bar as an operator with window [0, 0]."""
        return self.full.window(0, 0)

    @property
    def restricted(self) -> Operator:
        """L = m(L-bar), acting on invariant functions."""
        return self.limit.project_m()

    def coefficients(self, orbit_index: int = 0) -> dict[tuple[int, ...], np.ndarray]:
        """Jets of the coefficients of L at the base point, by derivative multi-index."""
        return self.restricted.restricted(0, orbit_index)

    def values(self) -> dict[tuple[int, ...], complex]:
        return {k: complex(v[0]) for k, v in self.coefficients().items()}


def rational_c_from_cB(c_B: dict[int, complex]) -> dict[int, complex]:
    return dict(c_B)


def _beta_chain(beta: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    k = next(i for i, b in enumerate(beta) if b)
    rest = list(beta)
    rest[k] -= 1
    return k, tuple(rest)


def build(group: Group, i: int, params: dict[str, complex], bundle: Bundle, x0, *,
          jet_order: int = 0, classical: bool = False, e_top: int = 0, tol: float = 1e-8,
          curve=None, frame: Frame | None = None) -> tuple[LimitCertificate, Hamiltonian]:
    """Build L-bar_i (quantum or classical) at the base point x0.

    The t-window of the result is [-deg P_i, e_top]; jets are valid to ``jet_order``.
    """
    gen = invariant_generators(group.spec)[i - 1]
    d = gen.degree
    if frame is None:
        frame = Frame(group, x0, curve)
    curve = frame.curve
    q0 = np.asarray(bundle.q0, dtype=complex)
    shape = measure_cB(Frame(group, frame.x0, curve), params, bundle, jet_order=0)
    c_B = shape.c_B
    pexp = cm_hamiltonian_classical(group, i, c_B, q0, jet_order=0)
    k0 = jet_order if classical else jet_order + d - 1
    kt = d - 1 + e_top
    dunkls = [elliptic_dunkl(frame, np.eye(group.n)[k], params, bundle, k0, t_top=kt,
                             classical=classical) for k in range(group.n)]
    ident = identity_operator(frame, k0 + (0 if classical else 1), t_hi=kt + 1,
                              classical=classical)
    memo: dict[tuple[int, ...], Operator] = {(0,) * group.n: ident}

    def power(beta):
        if beta not in memo:
            k, rest = _beta_chain(beta)
            memo[beta] = multiply(dunkls[k], power(rest))
        return memo[beta]

    total = None
    summand_pole = 0.0
    for beta, coef in sorted(pexp.values().items(), key=lambda kv: (sum(kv[0]), kv[0])):
        if abs(coef) < 1e-300:
            continue
        term = power(beta).shifted(sum(beta) - d, coef)
        term = term.window(-d, e_top).truncated(jet_order)
        neg = max(term.negative_norms().values(), default=0.0)
        summand_pole = max(summand_pole, neg)
        total = term if total is None else total + term
    total = total.padded(d)
    cert = LimitCertificate(i, total.negative_norms(), total.scale(), tol, summand_pole)
    ham = Hamiltonian(group, dict(params), i, bundle, total, classical, pexp, c_B)
    return cert, ham


def build_quantum(group, i, params, bundle, x0, **kw):
    return build(group, i, params, bundle, x0, classical=False, **kw)


def build_classical(group, i, params, bundle, x0, **kw):
    return build(group, i, params, bundle, x0, classical=True, **kw)


# ---------------------------------------------------------------------------
# explicit forms


@dataclass
class Ansatz:
    """coefficient multi-index -> (fixed function, [(parameter, basis function)])."""

    name: str
    fixed: dict[tuple[int, ...], object]
    columns: dict[tuple[int, ...], list[tuple[str, object]]]
    params: list[str]


@dataclass
class FitResult:
    ansatz: str
    params: dict[str, complex]
    fit_residual: float
    holdout_residual: float  # relative
    scale: float
    tol: float
    points: int
    holdout_points: int
    derived: dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.holdout_residual <= self.tol


def _wp(curve):
    from .kernel import weierstrass_p, weierstrass_p_prime

    return (lambda z: weierstrass_p(z, curve)), (lambda z: weierstrass_p_prime(z, curve))


def _half_points(curve):
    w1, w2, w3 = curve.half_periods()
    return [0.0, w1, w2, w3]


def ansatz_for(name: str, group: Group) -> Ansatz:
    """Operator forms with meromorphic coefficients built from wp at shifts."""
    curve = group.curve
    wp, wpp = _wp(curve)
    n = group.n
    const = ("const", lambda x: np.ones(len(x), dtype=complex))

    def col(f):
        return lambda x: f(np.asarray(x))

    if name == "A1":
        return Ansatz(name, {(2,): 2.0, (1,): 0.0},
                      {(0,): [("potential", col(lambda x: wp(x[:, 0]))), const]},
                      ["potential", "const"])
    if name == "darboux":
        xs = _half_points(curve)
        cols = [(f"C{l + 1}", col(lambda x, s=s: wp(x[:, 0] - s))) for l, s in enumerate(xs)]
        return Ansatz(name, {(2,): 1.0, (1,): 0.0}, {(0,): cols + [const]},
                      [c[0] for c in cols] + ["const"])
    if name == "inozemtsev":
        xs = _half_points(curve)
        cols = [(f"C{l + 1}", col(lambda x, s=s: sum(wp(x[:, i] - s) for i in range(n))))
                for l, s in enumerate(xs)]
        pair = ("pair", col(lambda x: sum(wp(x[:, i] - x[:, j]) + wp(x[:, i] + x[:, j])
                                         for i in range(n) for j in range(i + 1, n))))
        fixed = {}
        mons = monomials(n, 2)
        for e in mons.exps:
            if sum(e) == 2:
                fixed[e] = 1.0 if max(e) == 2 else 0.0
            elif sum(e) == 1:
                fixed[e] = 0.0
        return Ansatz(name, fixed, {(0,) * n: cols + [pair, const]},
                      [c[0] for c in cols] + ["pair", "const"])
    if name in ("cubic-rank1", "cubic-pair"):
        eps = group.spec.eps
        etas = [0.0, (1 + 2 * curve.tau) / 3, (2 + curve.tau) / 3]
        fixed = {}
        mons = monomials(n, 3)
        for e in mons.exps:
            if sum(e) == 3:
                fixed[e] = 1.0 if max(e) == 3 else 0.0
            elif sum(e) == 2:
                fixed[e] = 0.0
        columns = {}
        for i in range(n):
            e = tuple(1 if k == i else 0 for k in range(n))
            cols = [(f"a{l}", col(lambda x, s=s, i=i: wp(x[:, i] - s))) for l, s in enumerate(etas)]
            if n > 1:
                def pair_fn(x, i=i):
                    tot = 0
                    for a in range(n):
                        for b in range(a + 1, n):
                            for p in range(3):
                                w = wp(x[:, a] - eps**p * x[:, b])
                                if i == a:
                                    tot = tot + w
                                elif i == b:
                                    tot = tot + eps ** (-p) * w
                    return -3 * tot
                cols.append(("A", pair_fn))
            columns[e] = cols
        columns[(0,) * n] = [(f"b{l}", col(lambda x, s=s: sum(wpp(x[:, i] - s) for i in range(n))))
                             for l, s in enumerate(etas)] + [const]
        params = [f"a{l}" for l in range(3)] + (["A"] if n > 1 else []) + \
            [f"b{l}" for l in range(3)] + ["const"]
        return Ansatz(name, fixed, columns, params)
    if name in ("lemniscatic-quartic", "lemniscatic-quartic-corrected"):
        # lemniscatic quartic; the corrected variant leaves the coefficient of
        # wp(z-w2) - wp(z-w3) free and checks it afterwards
        w1, w2, w3 = (1 + 1j) / 2, 1j / 2, 0.5
        wp_w3 = complex(wp(np.array(w3)))
        cols2 = [("a0", col(lambda x: wp(x[:, 0]))), ("a1", col(lambda x: wp(x[:, 0] - w1))),
                 ("A", col(lambda x: -2 * (wp(x[:, 0] - w2) + wp(x[:, 0] - w3))))]
        cols1 = [("b0", col(lambda x: wpp(x[:, 0]))), ("b1", col(lambda x: wpp(x[:, 0] - w1))),
                 ("A", col(lambda x: -2 * (wpp(x[:, 0] - w2) + wpp(x[:, 0] - w3))))]
        odd = col(lambda x: wp(x[:, 0] - w2) - wp(x[:, 0] - w3))
        cols0 = [("B", col(lambda x: wp(x[:, 0] - w2) ** 2 + wp(x[:, 0] - w3) ** 2)),
                 ("c0", col(lambda x: wp(x[:, 0]) ** 2)),
                 ("c1", col(lambda x: wp(x[:, 0] - w1) ** 2)), const]
        params = ["a0", "a1", "A", "b0", "b1", "B", "c0", "c1", "const"]
        if name == "lemniscatic-quartic":
            cols0.append(("A", lambda x: wp_w3 * odd(x)))
        else:
            cols0.append(("d", odd))
            params.append("d")
        return Ansatz(name, {(4,): 1.0, (3,): 0.0}, {(2,): cols2, (1,): cols1, (0,): cols0},
                      params)
    raise ValueError(f"unknown ansatz {name!r}")


def fit_explicit_form(values: list[dict[tuple[int, ...], complex]], points: np.ndarray,
                      ansatz: Ansatz, n_fit: int, tol: float = 1e-6) -> FitResult:
    """Least squares for the ansatz parameters on the first ``n_fit`` points,
    validated on the remaining ones."""
    points = np.asarray(points, dtype=complex)
    pidx = {p: k for k, p in enumerate(ansatz.params)}
    keys = sorted(set(values[0]))

    def system(sel):
        rows, rhs = [], []
        x = points[sel]
        for key in keys:
            obs = np.array([values[s][key] for s in sel])
            if key in ansatz.columns:
                mat = np.zeros((len(sel), len(ansatz.params)), dtype=complex)
                for name, fn in ansatz.columns[key]:
                    mat[:, pidx[name]] += fn(x)
                rows.append(mat)
                rhs.append(obs)
            else:
                fixed = ansatz.fixed.get(key, 0.0)
                rows.append(np.zeros((len(sel), len(ansatz.params)), dtype=complex))
                rhs.append(obs - fixed)
        return np.vstack(rows), np.concatenate(rhs)

    fit_sel = list(range(n_fit))
    hold_sel = list(range(n_fit, len(values)))
    mat, rhs = system(fit_sel)
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    scale = max(abs(v) for vals in values for v in vals.values())
    fit_res = float(np.abs(mat @ sol - rhs).max()) / scale
    hmat, hrhs = system(hold_sel)
    hold_res = float(np.abs(hmat @ sol - hrhs).max()) / scale if hold_sel else float("nan")
    params = {name: complex(sol[k]) for name, k in pidx.items()}
    return FitResult(ansatz.name, params, fit_res, hold_res, scale, tol, n_fit, len(hold_sel))


def k_from_A(A: complex) -> tuple[complex, complex]:
    """Both roots of k(k+1) = A."""
    disc = np.sqrt(complex(1 + 4 * A))
    return complex((-1 + disc) / 2), complex((-1 - disc) / 2)


def sample_hamiltonian_values(group: Group, i: int, params, bundle, count: int, rng,
                              delta: float = 0.08, classical: bool = False):
    """Build L_i at ``count`` regular points; returns (points, coefficient values, certificates)."""
    from .dunkl import sample_regular_point

    pts, vals, certs = [], [], []
    for _ in range(count):
        x0 = sample_regular_point(group, rng, delta)
        cert, ham = build(group, i, params, bundle, x0, classical=classical)
        pts.append(x0)
        vals.append(ham.values())
        certs.append(cert)
    return np.array(pts), vals, certs


def explicit_fit(group: Group, i: int, params, bundle, ansatz_name: str, rng,
                 n_fit: int = 12, n_hold: int = 8, tol: float = 1e-6) -> FitResult:
    pts, vals, _ = sample_hamiltonian_values(group, i, params, bundle, n_fit + n_hold, rng)
    res = fit_explicit_form(vals, pts, ansatz_for(ansatz_name, group), n_fit, tol)
    if "A" in res.params:
        res.derived["k_roots"] = k_from_A(res.params["A"])
    if ansatz_name.startswith("lemniscatic-quartic"):
        A = res.params["A"]
        res.derived["quadratic_relation"] = abs(res.params["B"] - (A * A - 6 * A))
    if ansatz_name == "lemniscatic-quartic-corrected":
        A, p = res.params["A"], res.params
        wp_w3 = complex(weierstrass_p(np.array(0.5), group.curve))
        res.derived["odd_relation"] = abs(p["d"] - A * (p["a0"] - p["a1"]) * wp_w3)
    return res


# ---------------------------------------------------------------------------
# commutativity


@dataclass
class ResidualReport:
    name: str
    absolute: float
    scale: float
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def relative(self) -> float:
        return self.absolute / self.scale if self.scale else self.absolute

    @property
    def passed(self) -> bool:
        return bool(self.relative <= self.tol)

    def summary(self) -> dict:
        return {"check": self.name, "absolute": self.absolute, "scale": self.scale,
                "relative": self.relative, "tolerance": self.tol, "pass": self.passed,
                **self.details}


def invariant_test_function(group: Group, rng, terms: int = 3):
    """F = sum_g f(g^-1 x) with f a random sum of exponentials; returns wave vectors and weights."""
    n = group.n
    ks = (rng.normal(size=(terms, n)) + 1j * rng.normal(size=(terms, n))) * 0.7
    cs = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    waves, weights = [], []
    for g in range(len(group)):
        # f(g^-1 x) = sum c exp(k . g^-1 x) = sum c exp((g^-T k) . x)
        ginv = np.linalg.inv(group.matrices[g])
        for k, c in zip(ks, cs):
            waves.append(ginv.T @ k)
            weights.append(c)
    return np.array(waves), np.array(weights)


def exponential_jet(waves, weights, x0, order: int) -> np.ndarray:
    """Taylor coefficients at x0 of sum_w c_w exp(w . x)."""
    n = len(x0)
    mons = monomials(n, order)
    out = np.zeros(len(mons), dtype=complex)
    fact = np.array([math.prod(math.factorial(e) for e in ex) for ex in mons.exps])
    for w, c in zip(waves, weights):
        pw = np.array([np.prod(w ** np.array(ex)) for ex in mons.exps])
        out += c * np.exp(w @ x0) * pw / fact
    return out


def apply_restricted(coeffs: dict[tuple[int, ...], np.ndarray], coef_order: int,
                     f: np.ndarray, f_order: int, n: int, degree: int) -> tuple[np.ndarray, int]:
    """Jet of sum_a c_a(x) d^a F from coefficient jets and the jet of F."""
    out_order = min(coef_order, f_order - degree)
    mons_f = monomials(n, f_order)
    mons_o = monomials(n, out_order)
    size = mons_o.size(out_order)
    out = np.zeros(size, dtype=complex)
    for a, cj in coeffs.items():
        d = f.copy()
        order = f_order
        for var, times in enumerate(a):
            for _ in range(times):
                d = monomials(n, order).deriv_matrix(var) @ d
                order -= 1
        out += jet_mul(np.asarray(cj)[:size], d[:size], mons_o)
    del mons_f
    return out, out_order


def quantum_commutator_check(group: Group, i: int, j: int, params, bundle, points,
                             rng=None, tol: float = 1e-7, classical: bool = False) -> ResidualReport:
    """[L-bar_i, L-bar_j] at each base point, plus the same commutator of the
    restricted operators applied to G-invariant test functions."""
    gens = invariant_generators(group.spec)
    di, dj = gens[i - 1].degree, gens[j - 1].degree
    worst = scale = 0.0
    worst_r = scale_r = 0.0
    for x0 in points:
        frame = Frame(group, x0)
        _, hi = build(group, i, params, bundle, x0, jet_order=dj, classical=classical, frame=frame)
        _, hj = build(group, j, params, bundle, x0, jet_order=di, classical=classical, frame=frame)
        a, b = hi.limit, hj.limit
        ab, ba = multiply(a, b), multiply(b, a)
        worst = max(worst, float(np.abs((ab - ba).coef).max()))
        scale = max(scale, float(np.abs(ab.coef).max()))
        if classical or rng is None:
            continue
        waves, weights = invariant_test_function(group, rng)
        f = exponential_jet(waves, weights, np.asarray(x0, dtype=complex), di + dj)
        n = group.n
        cj, ci = hj.coefficients(), hi.coefficients()
        lj_f, oj = apply_restricted(cj, di, f, di + dj, n, dj)
        li_lj, _ = apply_restricted(ci, 0, lj_f, oj, n, di)
        li_f, oi = apply_restricted(ci, dj, f, di + dj, n, di)
        lj_li, _ = apply_restricted(cj, 0, li_f, oi, n, dj)
        worst_r = max(worst_r, abs(li_lj[0] - lj_li[0]))
        scale_r = max(scale_r, abs(li_lj[0]))
    details = {"pair": [i, j], "points": len(points)}
    if scale_r:
        details["restricted_relative"] = worst_r / scale_r
    return ResidualReport("quantum_commutator" if not classical else "classical_symbol_commutator",
                          worst, scale or 1.0, tol, details)


# ---------------------------------------------------------------------------
# dual parameters (m = 2)


_HADAMARD = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])


def dual_parameters(c4, k=None):
    """Fourier transform on the points of order two: C' = H C / 2, k' = k."""
    from fractions import Fraction

    c4 = list(c4)
    if len(c4) != 4:
        raise ValueError(f"expected four point parameters, got {len(c4)}")
    if all(isinstance(v, (int, Fraction)) for v in c4):
        out = [sum(Fraction(int(h)) * v for h, v in zip(row, c4)) / 2 for row in _HADAMARD]
    else:
        out = list(_HADAMARD @ np.asarray(c4, dtype=complex) / 2)
    return out if k is None else (out, k)


def dual_parameter_table(group: Group, params: dict[str, complex]) -> dict[str, complex]:
    """Dual of an m = 2 parameter table; the point labels follow the order 0, half, halftau, halfsum."""
    if group.m != 2:
        raise ValueError("dual parameters are defined for m = 2")
    keys = ["pt:0:j1", "pt:half:j1", "pt:halftau:j1", "pt:halfsum:j1"]
    dual = dual_parameters([params.get(k, 0) for k in keys])
    out = dict(params)
    out.update(dict(zip(keys, (complex(v) for v in dual))))
    return out


# ---------------------------------------------------------------------------
# rational limit


def rational_limit_parameters(group: Group, params: dict[str, complex]) -> dict[int, complex]:
    """c'(s) = (1 - zeta_s) C(T_s, j(s)) / 2 for reflections whose hypertorus passes through 0."""
    from .dunkl import _power

    out: dict[int, complex] = {}
    for refl in group.reflections:
        for T in group.hypertori:
            if np.any(np.abs(T.xi) > 1e-12):
                continue
            for j in range(1, T.m_T):
                if _power(group, T.s_T, j) == refl.index:
                    out[refl.index] = (1 - refl.zeta) * complex(params.get(slot_label(T, j), 0)) / 2
    return out


def rational_hamiltonian_values(group: Group, i: int, c: dict[int, complex], x) -> dict:
    """Coefficients of m(P_i(D_c)) for the rational Dunkl operators, at x."""
    from .dunkl import power_sum_of_operators, rational_dunkl

    gen = invariant_generators(group.spec)[i - 1]
    frame = Frame(group, x)
    ops = [rational_dunkl(frame, np.eye(group.n)[k], c, gen.degree) for k in range(group.n)]
    total = power_sum_of_operators(ops, gen.degree, gen.scale).project_m()
    return {k: complex(v[0]) for k, v in total.restricted(0).items()}


def rational_limit_check(group: Group, i: int, params, bundle, x, R: float,
                         c_rational: dict[int, complex] | None = None,
                         tol: float = 1e-3) -> ResidualReport:
    """Compare L_i on the lattice R * Gamma at fixed x with the rational Hamiltonian."""
    from .kernel import LatticeCurve

    curve = LatticeCurve(group.spec.tau, R)
    _, ham = build(group, i, params, bundle, np.asarray(x, dtype=complex), curve=curve)
    vals = ham.values()
    c = rational_limit_parameters(group, params) if c_rational is None else c_rational
    ref = rational_hamiltonian_values(group, i, c, x)
    keys = set(vals) | set(ref)
    diff = max(abs(vals.get(k, 0) - ref.get(k, 0)) for k in keys)
    scale = max(abs(v) for v in ref.values())
    return ResidualReport("rational_limit", diff, scale, tol, {"R": R})


# ---------------------------------------------------------------------------
# classical systems


def classical_value_and_gradients(ham: Hamiltonian, p) -> tuple[complex, np.ndarray, np.ndarray]:
    """H(x0, p), dH/dx and dH/dp from a classical Hamiltonian with jets of order >= 1."""
    n = ham.group.n
    p = np.asarray(p, dtype=complex)
    coeffs = ham.coefficients()
    val = 0j
    gx = np.zeros(n, dtype=complex)
    gp = np.zeros(n, dtype=complex)
    for a, jet in coeffs.items():
        a_arr = np.array(a)
        mono = np.prod(p ** a_arr)
        val += jet[0] * mono
        gx += jet[1: 1 + n] * mono
        for k in range(n):
            if a[k]:
                da = a_arr.copy()
                da[k] -= 1
                gp[k] += jet[0] * a[k] * np.prod(p ** da)
    return val, gx, gp


def poisson_bracket_check(group: Group, i: int, j: int, params, bundle, phase_points,
                          tol: float = 1e-7) -> ResidualReport:
    """{L_i, L_j} = sum_k dL_i/dp_k dL_j/dx_k - dL_i/dx_k dL_j/dp_k at phase points."""
    worst = scale = 0.0
    for x0, p in phase_points:
        _, hi = build(group, i, params, bundle, x0, jet_order=1, classical=True)
        _, hj = build(group, j, params, bundle, x0, jet_order=1, classical=True)
        _, gxi, gpi = classical_value_and_gradients(hi, p)
        _, gxj, gpj = classical_value_and_gradients(hj, p)
        t1, t2 = gpi * gxj, gxi * gpj
        worst = max(worst, abs(t1.sum() - t2.sum()))
        scale = max(scale, float(np.abs(t1).max()), float(np.abs(t2).max()))
    return ResidualReport("poisson_bracket", worst, scale or 1.0, tol,
                          {"pair": [i, j], "points": len(phase_points)})


class ExplicitCubic:
    """Closed-form H = sum p_i^3 + sum_i u_i(x) p_i + w(x) for m = 3 (fitted parameters)."""

    def __init__(self, group: Group, fit: FitResult):
        self.group = group
        self.curve = group.curve
        self.eps = group.spec.eps
        self.p = fit.params
        tau = self.curve.tau
        self.etas = np.array([0.0, (1 + 2 * tau) / 3, (2 + tau) / 3])
        self.a = np.array([self.p[f"a{l}"] for l in range(3)])
        self.b = np.array([self.p[f"b{l}"] for l in range(3)])
        self.A = self.p.get("A", 0)
        n = group.n
        self.pairs = [(i, j, q) for i in range(n) for j in range(i + 1, n) for q in range(3)]

    def value_and_gradients(self, x, p):
        from .kernel import wp_taylor

        x = np.asarray(x, dtype=complex)
        p = np.asarray(p, dtype=complex)
        n = len(x)
        eps = self.eps
        z_pt = (x[:, None] - self.etas[None, :]).ravel()
        z_pair = np.array([x[i] - eps**q * x[j] for i, j, q in self.pairs], dtype=complex)
        tay = wp_taylor(np.concatenate([z_pt, z_pair]), self.curve, 2)
        w, dw, ddw = tay[:, 0], tay[:, 1], 2 * tay[:, 2]
        m = len(z_pt)
        w_pt, dw_pt, ddw_pt = (v[:m].reshape(n, 3) for v in (w, dw, ddw))
        u = w_pt @ self.a
        val = np.sum(p ** 3) + self.p["const"] + np.sum(u * p) + np.sum(dw_pt @ self.b)
        gp = 3 * p ** 2 + u
        gx = (dw_pt @ self.a) * p + ddw_pt @ self.b
        for k, (i, j, q) in enumerate(self.pairs):
            e = eps**q
            wk, dwk = w[m + k], dw[m + k]
            mom = p[i] + p[j] / e
            val += -3 * self.A * wk * mom
            gp[i] += -3 * self.A * wk
            gp[j] += -3 * self.A * wk / e
            gx[i] += -3 * self.A * dwk * mom
            gx[j] += 3 * self.A * e * dwk * mom
        return complex(val), gx, gp


@dataclass
class FlowReport:
    steps: int
    dt: float
    drift: dict[int, float]  # generator -> relative drift
    h_drift: float
    truncated: bool
    final: tuple[np.ndarray, np.ndarray]


def rk4_flow(vector_field, x, p, dt: float, steps: int, guard=None):
    """Classical RK4 for dx/dt = dH/dp, dp/dt = -dH/dx; stops if ``guard`` fails."""
    x = np.asarray(x, dtype=complex).copy()
    p = np.asarray(p, dtype=complex).copy()

    def f(x, p):
        gx, gp = vector_field(x, p)
        return gp, -gx

    for step in range(steps):
        k1 = f(x, p)
        k2 = f(x + dt / 2 * k1[0], p + dt / 2 * k1[1])
        k3 = f(x + dt / 2 * k2[0], p + dt / 2 * k2[1])
        k4 = f(x + dt * k3[0], p + dt * k3[1])
        x = x + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if guard is not None and not guard(x):
            return x, p, step + 1, True
    return x, p, steps, False


def hamiltonian_flow(group: Group, params, bundle, hamiltonian, x, p, dt: float, steps: int,
                     monitor=(2,), delta: float = 0.02) -> FlowReport:
    """Integrate the flow of ``hamiltonian`` (an object with value_and_gradients) and
    report the drift of the constructed classical L_j along it."""
    from .dunkl import hypertorus_margin

    def field_(x, p):
        _, gx, gp = hamiltonian.value_and_gradients(x, p)
        return gx, gp

    def guard(x):
        return bool(np.all(np.isfinite(x))) and hypertorus_margin(group, x, group.curve) >= delta

    x1, p1, done, cut = rk4_flow(field_, x, p, dt, steps, guard)

    def lval(j, x, p):
        _, h = build(group, j, params, bundle, x, classical=True)
        coeffs = h.values()
        return sum(c * np.prod(np.asarray(p, dtype=complex) ** np.array(a)) for a, c in coeffs.items())

    drift = {}
    for j in monitor:
        v0, v1 = lval(j, x, p), lval(j, x1, p1)
        drift[j] = abs(v1 - v0) / max(abs(v0), 1.0)
    h0 = hamiltonian.value_and_gradients(x, p)[0]
    h1 = hamiltonian.value_and_gradients(x1, p1)[0]
    return FlowReport(done, dt, drift, abs(h1 - h0) / max(abs(h0), 1.0), cut, (x1, p1))


@dataclass
class FlowSetup:
    group: Group
    params: dict[str, complex]
    bundle: object
    hamiltonian: ExplicitCubic
    fit: FitResult
    x: np.ndarray
    p: np.ndarray


def prepare_flow(group: Group, rng, scale: float = 0.1, delta: float = 0.2,
                 momentum: float = 0.15) -> FlowSetup:
    """Parameters, fitted closed-form cubic and an initial phase point for m = 3.

    Small couplings keep the trajectory away from the singular locus, where the
    vector field is stiff.
    """
    from .dunkl import Bundle, default_parameters, sample_direction, sample_regular_point

    if group.spec.m != 3:
        raise ValueError("the closed-form flow Hamiltonian is available for m = 3 only")
    params = default_parameters(group, rng, scale)
    bundle = Bundle(sample_direction(group, rng))
    pts, vals, _ = sample_hamiltonian_values(group, 1, params, bundle, 14, rng, classical=True)
    name = "cubic-pair" if group.n >= 2 else "cubic-rank1"
    fit = fit_explicit_form(vals, pts, ansatz_for(name, group), 9)
    x = sample_regular_point(group, rng, delta)
    p = momentum * (rng.normal(size=group.n) + 1j * rng.normal(size=group.n))
    return FlowSetup(group, params, bundle, ExplicitCubic(group, fit), fit, x, p)


def flow_order(setup: FlowSetup, dt: float, steps: int, monitor: int = 2) -> dict:
    """Drift at (dt, steps) and (dt/2, 2 steps); the observed order is log2 of the ratio."""
    coarse = hamiltonian_flow(setup.group, setup.params, setup.bundle, setup.hamiltonian,
                              setup.x, setup.p, dt, steps, monitor=(monitor,))
    fine = hamiltonian_flow(setup.group, setup.params, setup.bundle, setup.hamiltonian,
                            setup.x, setup.p, dt / 2, 2 * steps, monitor=(monitor,))
    ratio = coarse.drift[monitor] / fine.drift[monitor] if fine.drift[monitor] else np.inf
    return {"coarse": coarse, "fine": fine, "ratio": ratio, "order": float(np.log2(ratio)),
            "truncated": coarse.truncated or fine.truncated}
