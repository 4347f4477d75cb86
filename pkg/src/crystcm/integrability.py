"""Local tests of algebraic integrability for rank-one elliptic operators.

Operators are L = sum_k a_k(z) D^k with a_k built from wp, wp' and wp^2 at
shifts. Frobenius series at a singular point detect logarithms: a resonance
whose right-hand side does not vanish forces a log term, hence nontrivial
local monodromy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernel import LatticeCurve, series_deriv, series_mul, wp_laurent_at_zero, wp_taylor

POLE = 4  # largest pole order of any basis function (wp^2)


class IntegrabilityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# m_l numbers


@dataclass
class MlReport:
    m_T: int
    values: list[complex]
    integral: bool
    distinct: bool

    @property
    def verdict(self) -> bool:
        return self.integral and self.distinct

    def rounded(self) -> list[int]:
        return [int(round(v.real)) for v in self.values]


def ml_numbers(C, m_T: int, tol: float = 1e-9) -> MlReport:
    """m_l = l + sum_{j=1}^{m_T-1} C_j exp(2 pi i j l / m_T), l = 0..m_T-1.

    ``C`` lists C(T, 1), ..., C(T, m_T - 1).
    """
    C = [complex(c) for c in C]
    if len(C) != m_T - 1:
        raise IntegrabilityError(f"need {m_T - 1} parameters for m_T = {m_T}, got {len(C)}")
    vals = []
    for l in range(m_T):
        s = sum(c * np.exp(2j * np.pi * j * l / m_T) for j, c in enumerate(C, start=1))
        vals.append(complex(l + s))
    integral = all(abs(v - round(v.real)) <= tol for v in vals)
    distinct = integral and len({int(round(v.real)) % m_T for v in vals}) == m_T
    return MlReport(m_T, vals, integral, distinct)


def local_indices_expected(C, m_T: int, m: int, sign: int = -1) -> list[complex]:
    """Frobenius indices of the rank-one L at a point with stabiliser order m_T.

    The construction uses the opposite sign of C from the m_l formula, hence
    ``sign = -1``; each m_l recurs shifted by multiples of m_T.
    """
    rep = ml_numbers([sign * complex(c) for c in C], m_T)
    return sorted((v + m_T * r for v in rep.values for r in range(m // m_T)),
                  key=lambda z: (round(z.real, 6), round(z.imag, 6)))


# ---------------------------------------------------------------------------
# integer families


@dataclass(frozen=True)
class IntegerFamily:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        object.__setattr__(self, "indices", idx)
        k = len(idx)
        if k not in (3, 4):
            raise IntegrabilityError("families are triples (m = 3) or quadruples (m = 4)")
        target = 3 if k == 3 else 6
        if sum(idx) != target:
            raise IntegrabilityError(f"indices must sum to {target}, got {sum(idx)}")
        if len({i % k for i in idx}) != k:
            raise IntegrabilityError(f"indices must be pairwise distinct modulo {k}")

    @property
    def m(self) -> int:
        return len(self.indices)

    def params(self) -> tuple[Fraction, ...]:
        return family_to_params(self)


def _elementary(vals, r: int) -> int:
    return sum(math.prod(c) for c in itertools.combinations(vals, r))


def family_to_params(family: IntegerFamily | tuple, check: bool = True) -> tuple[Fraction, ...]:
    """(a, b) for triples, (a, b, c) for quadruples; exact.

    ``check=False`` skips the sum/congruence conditions (plain arithmetic).
    """
    if isinstance(family, IntegerFamily):
        m = family.indices
    elif check:
        m = IntegerFamily(tuple(family)).indices
    else:
        m = tuple(sorted(int(i) for i in family))
    if len(m) == 3:
        a = Fraction(_elementary(m, 2) - 2)
        b = Fraction(_elementary(m, 3), 2)
        return a, b
    a = Fraction(_elementary(m, 2) - 11)
    b = (Fraction(_elementary(m, 3)) - 6 - a) / 2
    c = Fraction(_elementary(m, 4))
    return a, b, c


def indicial_value_exact(rho: int, params) -> Fraction:
    """The indicial polynomial at an integer, in exact arithmetic."""
    def falling(k):
        return math.prod(rho - i for i in range(k))

    if len(params) == 2:
        a, b = params
        return falling(3) + Fraction(a) * rho - 2 * Fraction(b)
    a, b, c = params
    return falling(4) + Fraction(a) * falling(2) - 2 * Fraction(b) * rho + Fraction(c)


def family_from_params(params) -> IntegerFamily:
    """Inverse of ``family_to_params``: the integer indices, certified exactly."""
    roots = indicial_roots(*[float(p) for p in params])
    ints = tuple(int(round(r.real)) for r in roots)
    if any(indicial_value_exact(k, params) != 0 for k in ints) or len(set(ints)) != len(ints):
        raise IntegrabilityError(f"parameters {tuple(map(str, params))} have non-integer indices")
    return IntegerFamily(ints)


def enumerate_families(size: int, bound: int) -> list[IntegerFamily]:
    """All admissible triples/quadruples with entries in [-bound, bound]."""
    target = 3 if size == 3 else 6
    out = []
    for combo in itertools.combinations(range(-bound, bound + 1), size):
        if sum(combo) == target and len({c % size for c in combo}) == size:
            out.append(IntegerFamily(combo))
    return out


def random_family(rng: np.random.Generator, size: int = 3, spread: int = 4) -> IntegerFamily:
    """Residues 0..size-1 shifted by multiples of size, constrained to the right sum."""
    while True:
        k = rng.integers(-spread, spread + 1, size=size - 1)
        last = -int(k.sum())
        if abs(last) > spread:
            continue
        base = [size * int(x) + r for r, x in enumerate(list(k) + [last])]
        shift = (3 if size == 3 else 6) - sum(base)
        if shift % size:
            continue
        base[0] += shift
        try:
            return IntegerFamily(tuple(base))
        except IntegrabilityError:
            continue


# ---------------------------------------------------------------------------
# indicial polynomials


def _falling(k: int) -> np.poly1d:
    p = np.poly1d([1.0])
    for i in range(k):
        p = p * np.poly1d([1.0, -i])
    return p


def indicial_polynomial(a, b, c=None) -> np.poly1d:
    """rho(rho-1)(rho-2) + a rho - 2b, or the quartic
    rho(rho-1)(rho-2)(rho-3) + a rho(rho-1) - 2b rho + c."""
    if c is None:
        return _falling(3) + float(a) * _falling(1) - 2 * float(b)
    return _falling(4) + float(a) * _falling(2) - 2 * float(b) * _falling(1) + float(c)


def _sorted_roots(roots) -> list[complex]:
    return sorted((complex(r) for r in roots), key=lambda z: (round(z.real, 8), round(z.imag, 8)))


def indicial_roots(a, b, c=None) -> list[complex]:
    return _sorted_roots(np.roots(indicial_polynomial(a, b, c).coeffs))


def roots_from_local_data(alpha) -> list[complex]:
    """Roots of sum_k alpha_k [rho]_k for L ~ sum_k alpha_k z^(k-n) D^k."""
    poly = np.poly1d([0.0])
    for k, ak in enumerate(alpha):
        poly = poly + complex(ak) * _falling(k)
    return _sorted_roots(np.roots(poly.coeffs))


# ---------------------------------------------------------------------------
# rank-one elliptic operators


KINDS = ("const", "wp", "dwp", "wp2")


@dataclass
class EllipticOperator:
    """L = sum_k (sum weight * basis(z - shift)) D^k.

    ``terms[k]`` lists (kind, shift, weight) with kind in const/wp/dwp/wp2.
    """

    order: int
    terms: dict[int, list[tuple[str, complex, complex]]]
    curve: LatticeCurve
    name: str = ""

    def __post_init__(self):
        for k, lst in self.terms.items():
            if not 0 <= k <= self.order:
                raise IntegrabilityError(f"term of order {k} in an operator of order {self.order}")
            for kind, _, _ in lst:
                if kind not in KINDS:
                    raise IntegrabilityError(f"unknown basis function {kind!r}")

    def coefficient_series(self, k: int, z0: complex, order: int) -> np.ndarray:
        """Laurent coefficients of a_k at z0: entry i is the coefficient of u^(i - POLE)."""
        out = np.zeros(order + POLE + 1, dtype=complex)
        for kind, shift, weight in self.terms.get(k, []):
            out += weight * _basis_series(kind, z0 - shift, self.curve, order)
        if k == self.order:
            out[POLE] += 1.0
        return out

    def taylor(self, z0: complex, order: int) -> list[np.ndarray]:
        """Taylor coefficients of every a_k at a regular point."""
        out = []
        for k in range(self.order + 1):
            s = self.coefficient_series(k, z0, order)
            if np.any(np.abs(s[:POLE]) > 0):
                raise IntegrabilityError(f"{z0} is a singular point")
            out.append(s[POLE:])
        return out

    def local_data(self, z0: complex, order: int) -> np.ndarray:
        """alpha[k, j]: coefficient of u^j in u^(n-k) a_k(u), j = 0..order."""
        n = self.order
        alpha = np.zeros((n + 1, order + 1), dtype=complex)
        for k in range(n + 1):
            s = self.coefficient_series(k, z0, order + n)
            pole = n - k
            if np.any(np.abs(s[: POLE - pole]) > 1e-12 * max(1.0, np.abs(s).max())):
                raise IntegrabilityError(f"irregular singularity: a_{k} has a pole of order > {pole}")
            alpha[k] = s[POLE - pole: POLE - pole + order + 1]
        return alpha


def _basis_series(kind: str, w: complex, curve: LatticeCurve, order: int) -> np.ndarray:
    """Series of the basis function at distance w from its centre, powers u^-POLE .. u^order."""
    out = np.zeros(order + POLE + 1, dtype=complex)
    if kind == "const":
        out[POLE] = 1.0
        return out
    if curve.on_lattice(w):
        nterms = (order + POLE) // 2 + 3
        z2wp = wp_laurent_at_zero(curve, nterms)  # powers z^0.. of z^2 wp
        wp = np.zeros(order + POLE + 3, dtype=complex)  # powers u^-POLE..
        m = min(len(z2wp), len(wp) - (POLE - 2))
        wp[POLE - 2: POLE - 2 + m] = z2wp[:m]
        if kind == "wp":
            return wp[: order + POLE + 1]
        if kind == "dwp":
            powers = np.arange(len(wp)) - POLE
            d = np.zeros_like(wp)
            d[:-1] = wp[1:] * powers[1:]
            return d[: order + POLE + 1]
        sq = series_mul(z2wp, z2wp, order + POLE + 1)  # z^4 wp^2
        out[:] = sq[: order + POLE + 1]
        return out
    t = wp_taylor(np.array(w), curve, order + 1)
    if kind == "wp":
        out[POLE:] = t[: order + 1]
    elif kind == "dwp":
        out[POLE:] = series_deriv(t)[: order + 1]
    else:
        out[POLE:] = series_mul(t, t, order + 1)
    return out


def halphen_cubic(a, b, curve: LatticeCurve) -> EllipticOperator:
    """D^3 + a wp D + b wp'."""
    return EllipticOperator(3, {1: [("wp", 0, complex(a))], 0: [("dwp", 0, complex(b))]},
                            curve, f"D^3 + ({a}) wp D + ({b}) wp'")


def lame(A, curve: LatticeCurve, shift: complex = 0) -> EllipticOperator:
    """D^2 - A wp(z - shift)."""
    return EllipticOperator(2, {0: [("wp", shift, -complex(A))]}, curve, f"D^2 - ({A}) wp")


def cubic_from_params(a, b, curve: LatticeCurve) -> EllipticOperator:
    """The m = 3 rank-one operator with coefficients a_l, b_l at 0, eta_1, eta_2."""
    tau = curve.tau
    etas = [0.0, (1 + 2 * tau) / 3 * curve.scale, (2 + tau) / 3 * curve.scale]
    return EllipticOperator(3, {1: [("wp", s, complex(x)) for s, x in zip(etas, a)],
                                0: [("dwp", s, complex(x)) for s, x in zip(etas, b)]}, curve,
                            "m=3 cubic")


def lemniscatic_quartic(k, a=(0, 0), b=(0, 0), c=(0, 0), corrected: bool = True,
                        curve: LatticeCurve | None = None) -> EllipticOperator:
    """The m = 4 rank-one operator at tau = i.

    ``corrected`` uses k(k+1)(a0 - a1) wp(w3) for the coefficient of
    wp(z - w2) - wp(z - w3); otherwise the coefficient k(k+1) wp(w3).
    """
    curve = curve if curve is not None else LatticeCurve(1j, 1.0)
    A = complex(k) * (complex(k) + 1)
    w1, w2, w3 = (1 + 1j) / 2, 1j / 2, 0.5
    wp_w3 = complex(wp_taylor(np.array(w3), curve, 0)[0])
    odd = A * wp_w3 * ((complex(a[0]) - complex(a[1])) if corrected else 1.0)
    terms = {
        2: [("wp", 0, a[0]), ("wp", w1, a[1]), ("wp", w2, -2 * A), ("wp", w3, -2 * A)],
        1: [("dwp", 0, b[0]), ("dwp", w1, b[1]), ("dwp", w2, -2 * A), ("dwp", w3, -2 * A)],
        0: [("wp2", w2, A * A - 6 * A), ("wp2", w3, A * A - 6 * A), ("wp", w2, odd),
            ("wp", w3, -odd), ("wp2", 0, c[0]), ("wp2", w1, c[1])],
    }
    terms = {kk: [(kind, s, complex(x)) for kind, s, x in v] for kk, v in terms.items()}
    return EllipticOperator(4, terms, curve, "lemniscatic quartic")


def quartic_from_family(families: tuple, k: int = 0, corrected: bool = True) -> EllipticOperator:
    """Quartic with (a_i, b_i, c_i) from integer quadruples at 0 and w1."""
    ps = [family_to_params(f) for f in families]
    return lemniscatic_quartic(k, a=(ps[0][0], ps[1][0]), b=(ps[0][1], ps[1][1]),
                               c=(ps[0][2], ps[1][2]), corrected=corrected)


# ---------------------------------------------------------------------------
# Frobenius series


@dataclass
class FrobeniusSolution:
    rho: complex
    coeffs: np.ndarray
    obstructions: list[tuple[int, float]] = field(default_factory=list)  # (s, normalised)

    @property
    def log_obstruction(self) -> float:
        return max((v for _, v in self.obstructions), default=0.0)


@dataclass
class FrobeniusReport:
    point: complex
    roots: list[complex]
    solutions: list[FrobeniusSolution]
    tol: float
    integral: bool

    @property
    def obstruction(self) -> float:
        return max((s.log_obstruction for s in self.solutions), default=0.0)

    @property
    def log_free(self) -> bool:
        return self.integral and self.obstruction <= self.tol


def frobenius_series(alpha: np.ndarray, rho: complex, roots, N: int) -> FrobeniusSolution:
    """Series u^rho sum c_s u^s annihilated by the operator with local data alpha."""
    n = alpha.shape[0] - 1
    ff = [_falling(k) for k in range(n + 1)]

    def ind(j, r):
        return sum(alpha[k, j] * ff[k](r) for k in range(n + 1))

    c = np.zeros(N + 1, dtype=complex)
    c[0] = 1.0
    obstructions = []
    for s in range(1, N + 1):
        rhs = -sum(ind(j, rho + s - j) * c[s - j] for j in range(1, min(s, alpha.shape[1] - 1) + 1))
        resonant = any(abs(rho + s - r) < 1e-6 for r in roots)
        if resonant:
            scale = max(1.0, float(np.abs(c[:s]).max()))
            obstructions.append((s, float(abs(rhs)) / scale))
            c[s] = 0.0
        else:
            c[s] = rhs / ind(0, rho + s)
    return FrobeniusSolution(complex(rho), c, obstructions)


def frobenius_check(op: EllipticOperator, point: complex = 0.0, N: int = 16,
                    tol: float = 1e-8) -> FrobeniusReport:
    """Log-free test at a singular point (a necessary condition for integrability)."""
    alpha = op.local_data(point, N)
    roots = roots_from_local_data(alpha[:, 0])
    integral = all(abs(r - round(r.real)) < 1e-8 for r in roots)
    if not integral:
        return FrobeniusReport(point, roots, [], tol, False)
    ints = sorted({int(round(r.real)) for r in roots}, reverse=True)
    span = ints[0] - ints[-1]
    if N < span:
        raise IntegrabilityError(f"order {N} does not reach the largest resonance ({span})")
    sols = [frobenius_series(alpha, r, ints, N) for r in ints]
    return FrobeniusReport(point, roots, sols, tol, True)


# ---------------------------------------------------------------------------
# operator algebra with Taylor coefficients


def _compose(x: list[np.ndarray], y: list[np.ndarray]) -> list[np.ndarray]:
    """(sum a_i D^i)(sum b_j D^j) with Taylor-series coefficients."""
    order = min(len(v) for v in x + y) - 1
    nx, ny = len(x) - 1, len(y) - 1
    out = [np.zeros(order + 1, dtype=complex) for _ in range(nx + ny + 1)]
    for i, a in enumerate(x):
        for j, b in enumerate(y):
            d = b[: order + 1]
            for r in range(i + 1):
                if r:
                    d = series_deriv(d)
                padded = np.zeros(order + 1, dtype=complex)
                padded[: len(d)] = d
                out[i + j - r] += math.comb(i, r) * series_mul(a[: order + 1], padded, order + 1)
    valid = order - max(nx, ny)
    return [v[: valid + 1] for v in out]


@dataclass
class CommutationReport:
    residual: float
    scale: float
    tol: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale

    @property
    def passed(self) -> bool:
        return self.relative <= self.tol


def commutator_residual(x: EllipticOperator, y: EllipticOperator, points, order: int = 4,
                        tol: float = 1e-8) -> CommutationReport:
    worst = scale = 0.0
    for z0 in points:
        tx = x.taylor(z0, order + x.order + y.order)
        ty = y.taylor(z0, order + x.order + y.order)
        xy, yx = _compose(tx, ty), _compose(ty, tx)
        k = min(len(xy[0]), len(yx[0]))
        for a, b in zip(xy, yx):
            worst = max(worst, float(np.abs(a[:k] - b[:k]).max()))
            scale = max(scale, float(np.abs(a[:k]).max()))
    return CommutationReport(worst, scale, tol)


def lame_commutation_check(family=(-1, 1, 3), points=None, tol: float = 1e-8,
                           curve: LatticeCurve | None = None) -> CommutationReport:
    """[D^3 + a wp D + b wp', D^2 - 2 wp] for the cubic family."""
    curve = curve if curve is not None else LatticeCurve(np.exp(2j * np.pi / 3), 1.0)
    a, b = family_to_params(family)
    if points is None:
        points = [0.31 + 0.17j, 0.13 + 0.52j, 0.61 + 0.24j, 0.45 + 0.4j, 0.22 + 0.29j]
    return commutator_residual(halphen_cubic(a, b, curve), lame(2, curve), points, tol=tol)


@dataclass
class SquareReport:
    lower_order: float  # largest |difference| in the D^1..D^3 coefficients
    derivative: float  # largest |d/dw| of the D^0 difference
    constant: complex
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.lower_order, self.derivative) <= self.tol * self.scale


def quartic_square_check(k, corrected: bool = True, points=None, tol: float = 1e-8,
                         order: int = 3) -> SquareReport:
    """-4 L(z = (1+i) w) - (D_w^2 - k(k+1) wp~(w - (1+i)/4))^2 should be a constant.

    wp~ is the Weierstrass function of the lattice (1/2) Z[i].
    """
    curve = LatticeCurve(1j, 1.0)
    half = LatticeCurve(1j, 0.5)
    A = complex(k) * (complex(k) + 1)
    L = lemniscatic_quartic(k, corrected=corrected, curve=curve)
    M = lame(A, half, shift=(1 + 1j) / 4)
    if points is None:
        points = [0.02 + 0.03j, -0.05 + 0.04j, 0.03 - 0.06j, 0.48 + 0.02j]
    lower = deriv = scale = 0.0
    const = 0j
    lam = 1 + 1j
    for w0 in points:
        tz = L.taylor(lam * w0, order + 8)
        scaled = [-4 * t * lam ** np.arange(len(t)) / lam**kk for kk, t in enumerate(tz)]
        tw = M.taylor(w0, order + 8)
        sq = _compose(tw, tw)
        for kk in range(1, 5):
            m = min(len(sq[kk]), len(scaled[kk]), order + 1)
            lower = max(lower, float(np.abs(scaled[kk][:m] - sq[kk][:m]).max()))
        m = min(len(scaled[0]), len(sq[0]))
        diff = scaled[0][:m] - sq[0][:m]
        deriv = max(deriv, float(np.abs(diff[1: order + 1]).max()))
        const = complex(diff[0])
        scale = max(scale, float(np.abs(sq[0][: order + 1]).max()), 1.0)
    return SquareReport(lower, deriv, const, scale, tol)


# ---------------------------------------------------------------------------
# link with the constructed rank-one Hamiltonians


@dataclass
class IndexLink:
    point: complex
    m_T: int
    measured: list[complex]
    expected: list[complex]

    @property
    def residual(self) -> float:
        return max(abs(a - b) for a, b in zip(self.measured, self.expected))


def local_data_from_construction(group, params, bundle, point: complex, radius: float = 0.05,
                                 nodes: int = 32) -> np.ndarray:
    """alpha_k = [z^0] z^(n-k) a_k(z) around ``point`` by the trapezoid rule on a circle."""
    from .construction import build

    n = group.spec.m
    acc = np.zeros(n + 1, dtype=complex)
    for q in range(nodes):
        z = radius * np.exp(2j * np.pi * (q + 0.5) / nodes)
        _, ham = build(group, 1, params, bundle, np.array([point + z]))
        vals = ham.values()
        acc += np.array([vals.get((k,), 0) * z ** (n - k) for k in range(n + 1)])
    return acc / nodes


def index_links(group, params, bundle, radius: float = 0.05, nodes: int = 32) -> list[IndexLink]:
    """Frobenius indices of L_1 at every fixed point against the m_l numbers."""
    from .groups import slot_label

    if group.n != 1:
        raise IntegrabilityError("index links are defined for rank one")
    out = []
    for T in group.hypertori:
        point = complex(np.atleast_1d(T.xi)[0] / T.alpha[0]) * group.curve.scale
        alpha = local_data_from_construction(group, params, bundle, point, radius, nodes)
        measured = roots_from_local_data(alpha)
        C = [params.get(slot_label(T, j), 0) for j in range(1, T.m_T)]
        expected = local_indices_expected(C, T.m_T, group.spec.m)
        out.append(IndexLink(point, T.m_T, _match(measured, expected), expected))
    return out


def _match(measured, expected):
    """Reorder ``measured`` to best match ``expected`` (greedy, small sets)."""
    rest = list(measured)
    out = []
    for e in expected:
        k = int(np.argmin([abs(r - e) for r in rest]))
        out.append(rest.pop(k))
    return out
