"""Special functions and truncated series arithmetic.

Everything downstream consumes three things from here:

* graded monomial tables (:class:`Monomials`) that fix the coefficient layout
  of multivariate truncated Taylor series,
* the value types :class:`Jet` and :class:`LaurentJet`,
* the elliptic primitives ``theta1``, ``weierstrass_p`` and ``sigma_mu`` on a
  :class:`LatticeCurve`.

Jets store Taylor coefficients (not derivatives): ``coeffs[k]`` multiplies
``delta**alpha_k`` where ``alpha_k`` is the k-th monomial in graded order.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

THETA_REL_TOL = 1e-18
THETA_MAX_TERMS = 400


class KernelError(ValueError):
    """Raised for pole proximity, degenerate bundles and series failures."""


# ---------------------------------------------------------------------------
# monomial bookkeeping


class Monomials:
    """Graded-lexicographic monomials in ``nvars`` variables of degree <= order."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1 or order < 0:
            raise ValueError("need nvars >= 1 and order >= 0")
        self.nvars = nvars
        self.order = order
        exps: list[tuple[int, ...]] = []
        for deg in range(order + 1):
            exps.extend(_compositions(deg, nvars))
        self.exps = exps
        self.index = {e: i for i, e in enumerate(exps)}
        self.degrees = np.array([sum(e) for e in exps])

    def __len__(self) -> int:
        return len(self.exps)

    def size(self, order: int) -> int:
        return math.comb(self.nvars + order, self.nvars)

    @functools.cached_property
    def mul_tensor(self) -> np.ndarray:
        """T[k, i, j] = 1 when monomial i times monomial j is monomial k."""
        n = len(self)
        t = np.zeros((n, n, n))
        for i, a in enumerate(self.exps):
            for j, b in enumerate(self.exps):
                c = tuple(x + y for x, y in zip(a, b))
                k = self.index.get(c)
                if k is not None:
                    t[k, i, j] = 1.0
        return t

    @functools.cached_property
    def add_table(self) -> np.ndarray:
        """add_table[i, j] = index of monomial i + j, or -1 past the order."""
        n = len(self)
        out = -np.ones((n, n), dtype=int)
        for i, a in enumerate(self.exps):
            for j, b in enumerate(self.exps):
                out[i, j] = self.index.get(tuple(x + y for x, y in zip(a, b)), -1)
        return out

    def deriv_matrix(self, var: int) -> np.ndarray:
        """Matrix of d/d(delta_var) on coefficient vectors (order K -> K-1)."""
        return _deriv_matrix(self.nvars, self.order, var)

    def substitution(self, a: np.ndarray) -> np.ndarray:
        """Matrix sending coefficients of F(y) to those of F(A @ delta)."""
        return _substitution(self.nvars, self.order, np.asarray(a, dtype=complex))

    def linear_form_powers(self, a: Sequence[complex]) -> np.ndarray:
        """Row k holds the coefficients of (a . delta)**k, k = 0..order."""
        a = np.asarray(a, dtype=complex)
        out = np.zeros((self.order + 1, len(self)), dtype=complex)
        out[0, 0] = 1.0
        lin = np.zeros(len(self), dtype=complex)
        for v in range(self.nvars):
            if self.order >= 1:
                lin[1 + v] = a[v]
        for k in range(1, self.order + 1):
            out[k] = jet_mul(out[k - 1], lin, self)
        return out


def _compositions(total: int, parts: int) -> list[tuple[int, ...]]:
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


@functools.lru_cache(maxsize=None)
def monomials(nvars: int, order: int) -> Monomials:
    return Monomials(nvars, order)


@functools.lru_cache(maxsize=None)
def _deriv_matrix(nvars: int, order: int, var: int) -> np.ndarray:
    src = monomials(nvars, order)
    if order == 0:
        return np.zeros((0, 1))
    dst = monomials(nvars, order - 1)
    d = np.zeros((len(dst), len(src)))
    for i, e in enumerate(dst.exps):
        up = list(e)
        up[var] += 1
        d[i, src.index[tuple(up)]] = up[var]
    return d


def _substitution(nvars: int, order: int, a: np.ndarray) -> np.ndarray:
    mons = monomials(nvars, order)
    n = len(mons)
    cols = np.zeros((n, n), dtype=complex)
    lin = []
    for k in range(nvars):
        v = np.zeros(n, dtype=complex)
        if order >= 1:
            v[1 : 1 + nvars] = a[k]
        lin.append(v)
    cols[0, 0] = 1.0
    for idx, e in enumerate(mons.exps):
        if idx == 0:
            continue
        k = next(i for i, x in enumerate(e) if x)
        prev = list(e)
        prev[k] -= 1
        cols[:, idx] = jet_mul(cols[:, mons.index[tuple(prev)]], lin[k], mons)
    return cols


def jet_mul(a: np.ndarray, b: np.ndarray, mons: Monomials) -> np.ndarray:
    """Truncated product of coefficient arrays (broadcast over leading axes)."""
    n = a.shape[-1]
    t = mons.mul_tensor[:n, :n, :n]
    return np.einsum("kij,...i,...j->...k", t, a, b, optimize=True)


def mul_matrix(f: np.ndarray, mons: Monomials, n_out: int, n_in: int) -> np.ndarray:
    """M[..., k, j] with (f*b)[k] = sum_j M[k, j] b[j]."""
    n_f = f.shape[-1]
    t = mons.mul_tensor[:n_out, :n_f, :n_in]
    return np.einsum("kij,...i->...kj", t, f, optimize=True)


# ---------------------------------------------------------------------------
# univariate truncated series helpers (last axis = power)


def series_mul(a: np.ndarray, b: np.ndarray, n: int | None = None) -> np.ndarray:
    if n is None:
        n = min(a.shape[-1], b.shape[-1])
    out = np.zeros(np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (n,), dtype=complex)
    for i in range(min(n, a.shape[-1])):
        m = min(n - i, b.shape[-1])
        out[..., i : i + m] += a[..., i : i + 1] * b[..., :m]
    return out


def series_inv(a: np.ndarray) -> np.ndarray:
    """Reciprocal of a unit power series."""
    n = a.shape[-1]
    a0 = a[..., 0]
    if np.any(np.abs(a0) == 0):
        raise KernelError("reciprocal of a non-unit series")
    out = np.zeros_like(a, dtype=complex)
    out[..., 0] = 1.0 / a0
    for k in range(1, n):
        acc = np.zeros_like(a0, dtype=complex)
        for i in range(1, k + 1):
            acc = acc + a[..., i] * out[..., k - i]
        out[..., k] = -acc / a0
    return out


def series_exp_linear(c: np.ndarray, n: int) -> np.ndarray:
    """Taylor coefficients of exp(c * d) in d, up to d**(n-1)."""
    c = np.asarray(c, dtype=complex)
    k = np.arange(n)
    fact = np.array([math.factorial(i) for i in range(n)], dtype=float)
    return c[..., None] ** k / fact


def series_deriv(a: np.ndarray) -> np.ndarray:
    k = np.arange(1, a.shape[-1])
    return a[..., 1:] * k


# ---------------------------------------------------------------------------
# jets


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion in ``delta = x - base_point``."""

    base_point: np.ndarray
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.base_point, dtype=complex))
        object.__setattr__(self, "base_point", bp)
        c = np.asarray(self.coeffs, dtype=complex)
        need = math.comb(len(bp) + self.order, len(bp))
        if c.shape != (need,):
            raise ValueError(f"expected {need} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def nvars(self) -> int:
        return len(self.base_point)

    @property
    def mons(self) -> Monomials:
        return monomials(self.nvars, self.order)

    @classmethod
    def constant(cls, value, base_point, order: int) -> "Jet":
        bp = np.atleast_1d(np.asarray(base_point, dtype=complex))
        c = np.zeros(math.comb(len(bp) + order, len(bp)), dtype=complex)
        c[0] = value
        return cls(bp, order, c)

    @classmethod
    def variable(cls, var: int, base_point, order: int) -> "Jet":
        j = cls.constant(np.atleast_1d(base_point)[var], base_point, order)
        if order >= 1:
            j.coeffs[1 + var] = 1.0
        return j

    @classmethod
    def from_univariate(cls, taylor: np.ndarray, form, base_point, order: int) -> "Jet":
        """Compose a univariate Taylor series u(w) with w = form . delta."""
        bp = np.atleast_1d(np.asarray(base_point, dtype=complex))
        mons = monomials(len(bp), order)
        pw = mons.linear_form_powers(form)
        k = min(order + 1, len(taylor))
        return cls(bp, order, np.asarray(taylor[:k]) @ pw[:k])

    @property
    def value(self) -> complex:
        return complex(self.coeffs[0])

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.nvars != self.nvars or not np.allclose(other.base_point, self.base_point):
                raise ValueError("jets at different base points")
            return other
        return Jet.constant(other, self.base_point, self.order)

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"requested order {order} exceeds stored order {self.order}")
        return Jet(self.base_point, order, self.coeffs[: self.mons.size(order)])

    def __add__(self, other):
        o = self._coerce(other)
        k = min(self.order, o.order)
        n = self.mons.size(k)
        return Jet(self.base_point, k, self.coeffs[:n] + o.coeffs[:n])

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.base_point, self.order, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return Jet(self.base_point, self.order, self.coeffs * other)
        o = self._coerce(other)
        k = min(self.order, o.order)
        n = self.mons.size(k)
        return Jet(self.base_point, k, jet_mul(self.coeffs[:n], o.coeffs[:n], monomials(self.nvars, k)))

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        c0 = self.coeffs[0]
        if abs(c0) == 0:
            raise KernelError("reciprocal of a jet with zero constant term")
        # 1/(c0 (1 + r)) = sum (-r)^k / c0
        r = self * (1.0 / c0)
        r = Jet(self.base_point, self.order, np.concatenate([[0], r.coeffs[1:]]))
        acc = Jet.constant(1.0, self.base_point, self.order)
        term = acc
        for _ in range(self.order):
            term = term * (-r)
            acc = acc + term
        return acc * (1.0 / c0)

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def deriv(self, var: int) -> "Jet":
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        d = self.mons.deriv_matrix(var)
        return Jet(self.base_point, self.order - 1, d @ self.coeffs)

    def derivative(self, multi_index: Sequence[int]) -> complex:
        """Partial derivative at the base point."""
        e = tuple(multi_index)
        return complex(self.coeffs[self.mons.index[e]] * np.prod([math.factorial(x) for x in e]))

    def compose_affine(self, a: np.ndarray, shift=None) -> "Jet":
        """Jet of G(x) = F(A x + shift) at the point y with A y + shift = base."""
        a = np.atleast_2d(np.asarray(a, dtype=complex))
        sub = self.mons.substitution(a)
        newc = sub @ self.coeffs
        if shift is None:
            shift = np.zeros(self.nvars)
        y = np.linalg.solve(a, self.base_point - np.asarray(shift))
        return Jet(y, self.order, newc)

    def evaluate(self, x) -> complex:
        d = np.atleast_1d(np.asarray(x, dtype=complex)) - self.base_point
        mons = np.array([np.prod(d ** np.array(e)) for e in self.mons.exps])
        return complex(self.coeffs @ mons)


@dataclass(frozen=True)
class LaurentJet:
    """Laurent series in t whose coefficients are jets in x.

    ``coeffs[k + pole_order]`` is the coefficient of t**k for k in
    [-pole_order, top_order].
    """

    pole_order: int
    top_order: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.top_order + self.pole_order + 1:
            raise ValueError("coefficient count does not match the exponent window")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    def coeff(self, k: int) -> Jet:
        return self.coeffs[k + self.pole_order]

    def exponents(self) -> range:
        return range(-self.pole_order, self.top_order + 1)

    def __add__(self, other: "LaurentJet") -> "LaurentJet":
        lo = max(self.pole_order, other.pole_order)
        hi = min(self.top_order, other.top_order)
        out = []
        for k in range(-lo, hi + 1):
            terms = [s.coeff(k) for s in (self, other) if -s.pole_order <= k]
            acc = terms[0]
            for t in terms[1:]:
                acc = acc + t
            out.append(acc)
        return LaurentJet(lo, hi, out)

    def __mul__(self, other):
        if not isinstance(other, LaurentJet):
            return LaurentJet(self.pole_order, self.top_order, [c * other for c in self.coeffs])
        lo = self.pole_order + other.pole_order
        hi = min(self.top_order - other.pole_order, other.top_order - self.pole_order)
        out = []
        for k in range(-lo, hi + 1):
            acc = None
            for i in self.exponents():
                j = k - i
                if -other.pole_order <= j <= other.top_order:
                    term = self.coeff(i) * other.coeff(j)
                    acc = term if acc is None else acc + term
            out.append(acc)
        return LaurentJet(lo, hi, out)

    __rmul__ = __mul__

    def max_negative(self) -> float:
        vals = [np.max(np.abs(self.coeff(k).coeffs)) for k in range(-self.pole_order, 0)]
        return float(max(vals, default=0.0))

    def is_regular(self, tol: float) -> bool:
        return self.max_negative() <= tol

    def evaluate(self, t: complex) -> Jet:
        acc = None
        for k in self.exponents():
            term = self.coeff(k) * (t**k)
            acc = term if acc is None else acc + term
        return acc


# ---------------------------------------------------------------------------
# the curve


@dataclass(frozen=True)
class LatticeCurve:
    """E = C / (scale * (Z + Z tau))."""

    tau: complex
    scale: float = 1.0
    g2: complex = field(init=False)
    g3: complex = field(init=False)

    def __post_init__(self):
        tau = complex(self.tau)
        if tau.imag <= 0:
            raise KernelError(f"Im(tau) must be positive, got {tau}")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "scale", float(self.scale))
        e1, e2, e3 = (weierstrass_p(w, self) for w in self.half_periods())
        object.__setattr__(self, "g2", complex(-4 * (e1 * e2 + e1 * e3 + e2 * e3)))
        object.__setattr__(self, "g3", complex(4 * e1 * e2 * e3))

    @property
    def nome(self) -> complex:
        return np.exp(1j * np.pi * self.tau)

    @property
    def periods(self) -> tuple[complex, complex]:
        return self.scale, self.scale * self.tau

    def half_periods(self) -> tuple[complex, complex, complex]:
        w1, w2 = self.periods
        return w1 / 2, w2 / 2, (w1 + w2) / 2

    def lattice_coords(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Real (a, b) with z = scale * (a + b tau)."""
        u = np.asarray(z, dtype=complex) / self.scale
        b = u.imag / self.tau.imag
        a = u.real - b * self.tau.real
        return a, b

    def reduce(self, z):
        """Representative of z in the fundamental parallelogram [0,1)^2."""
        a, b = self.lattice_coords(z)
        return self.scale * ((a - np.floor(a)) + (b - np.floor(b)) * self.tau)

    def lattice_distance(self, z) -> np.ndarray:
        """Distance from z to the nearest lattice point."""
        a, b = self.lattice_coords(z)
        best = np.full(np.shape(a), np.inf)
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                pa = np.round(a) + da
                pb = np.round(b) + db
                w = self.scale * (pa + pb * self.tau)
                best = np.minimum(best, np.abs(np.asarray(z) - w))
        return best

    def on_lattice(self, z, tol: float = 1e-9) -> bool:
        return bool(np.all(self.lattice_distance(z) < tol))


# ---------------------------------------------------------------------------
# theta


def theta_taylor(u, tau: complex, order: int) -> np.ndarray:
    """Taylor coefficients theta1^(k)(u)/k!, k = 0..order, for normalised u.

    theta1(u) = -sum_n exp(2 pi i (u + 1/2)(n + 1/2) + pi i tau (n + 1/2)^2),
    evaluated after reducing u into the fundamental parallelogram.
    """
    u = np.asarray(u, dtype=complex)
    tau = complex(tau)
    b = np.round(u.imag / tau.imag)
    ur = u - b * tau
    a = np.round(ur.real)
    ur = ur - a
    nome_abs = abs(np.exp(1j * np.pi * tau))
    # terms decay like |q|^{(n+1/2)^2} e^{pi |Im u| (2n+1)} (2 pi n)^order
    n_half = 3
    while True:
        n = np.arange(-n_half, n_half)
        edge = (n_half - 0.5) ** 2 * np.log(nome_abs) + np.pi * (2 * n_half) * tau.imag
        edge += order * np.log(2 * np.pi * n_half + 1)
        if edge < np.log(THETA_REL_TOL) - 5:
            break
        n_half += 2
        if 2 * n_half > THETA_MAX_TERMS:
            raise KernelError(f"theta series did not converge (|nome| = {nome_abs:.6g})")
    nh = n + 0.5
    expo = 2j * np.pi * (ur[..., None] + 0.5) * nh + 1j * np.pi * tau * nh**2
    base = -np.exp(expo)
    k = np.arange(order + 1)
    fact = np.array([math.factorial(i) for i in k], dtype=float)
    factors = (2j * np.pi * nh)[:, None] ** k / fact  # (nterms, order+1)
    reduced = np.einsum("...n,nk->...k", base, factors)
    # theta(u + a + b tau) = (-1)^(a+b) exp(-pi i tau b^2 - 2 pi i b u) theta(u)
    sign = np.where(((a + b) % 2) == 0, 1.0, -1.0)
    pref0 = sign * np.exp(-1j * np.pi * tau * b**2 - 2j * np.pi * b * ur)
    pref = pref0[..., None] * series_exp_linear(-2j * np.pi * b, order + 1)
    return series_mul(pref, reduced, order + 1)


@functools.lru_cache(maxsize=64)
def theta_odd_taylor(tau: complex, order: int) -> np.ndarray:
    """Taylor coefficients of theta1 at 0 (odd function)."""
    return theta_taylor(np.array(0.0 + 0j), tau, order)


def theta1(z, curve: LatticeCurve):
    """First Jacobi theta function of z / scale (Jet input composes)."""
    if isinstance(z, Jet):
        return _compose_univariate(z, lambda u0, k: theta_taylor(u0 / curve.scale, curve.tau, k)
                                   * curve.scale ** (-np.arange(k + 1)))
    return theta_taylor(np.asarray(z) / curve.scale, curve.tau, 0)[..., 0]


def theta1_prime0(curve: LatticeCurve) -> complex:
    return complex(theta_odd_taylor(curve.tau, 1)[1])


def _compose_univariate(z: Jet, taylor_fn):
    """h(z(x)) for a scalar jet z, given the Taylor coefficients of h at z0."""
    z0 = z.value
    tay = taylor_fn(np.array(z0), z.order)
    dz = Jet(z.base_point, z.order, np.concatenate([[0], z.coeffs[1:]]))
    acc = Jet.constant(tay[0], z.base_point, z.order)
    pw = Jet.constant(1.0, z.base_point, z.order)
    for k in range(1, z.order + 1):
        pw = pw * dz
        acc = acc + pw * tay[k]
    return acc


# ---------------------------------------------------------------------------
# Weierstrass p


def wp_taylor(z, curve: LatticeCurve, order: int, delta: float = 1e-3) -> np.ndarray:
    """Taylor coefficients of wp at z (array input), k = 0..order."""
    z = np.asarray(z, dtype=complex)
    if np.any(curve.lattice_distance(z) < delta * curve.scale):
        raise KernelError(f"point within {delta} of a lattice point: pole of wp")
    u = z / curve.scale
    th = theta_taylor(u, curve.tau, order + 2)
    # wp(u) = -(log theta)''(u) + theta'''(0) / (3 theta'(0))
    logd = series_mul(series_deriv(th), series_inv(th), order + 2)
    second = series_deriv(logd)
    t0 = theta_odd_taylor(curve.tau, 3)
    const = 6 * t0[3] / (3 * t0[1])
    out = -second[..., : order + 1].copy()
    out[..., 0] += const
    return out / curve.scale ** (2 + np.arange(order + 1))


def weierstrass_p(z, curve: LatticeCurve, delta: float = 1e-3):
    """wp(z) for scalar/array z; Jet input gives the composed jet."""
    if isinstance(z, Jet):
        return _compose_univariate(z, lambda z0, k: wp_taylor(z0, curve, k, delta))
    return wp_taylor(z, curve, 0, delta)[..., 0]


def weierstrass_p_prime(z, curve: LatticeCurve, delta: float = 1e-3):
    return wp_taylor(z, curve, 1, delta)[..., 1]


def wp_laurent_at_zero(curve: LatticeCurve, nterms: int) -> np.ndarray:
    """Coefficients c_k of wp(z) = z^-2 + sum_{k>=2} c_k z^(2k-2); returns
    the series z^2 wp(z) as dense coefficients of z^0 .. z^(2 nterms)."""
    c = {2: curve.g2 / 20, 3: curve.g3 / 28}
    for k in range(4, nterms + 1):
        c[k] = 3 / ((2 * k + 1) * (k - 3)) * sum(c[m] * c[k - m] for m in range(2, k - 1))
    out = np.zeros(2 * nterms + 1, dtype=complex)
    out[0] = 1.0
    for k in range(2, nterms + 1):
        out[2 * k] = c[k]
    return out


# ---------------------------------------------------------------------------
# sigma_mu sections


def sigma_mu(z, z0: complex, mu, curve: LatticeCurve, delta: float = 1e-3):
    """sigma_mu(z) = theta(z - z0 - mu) theta'(0) / (theta(z - z0) theta(-mu)).

    Lattice-scaled: the pole at z0 has residue 1 for every scale.  ``mu`` may be
    a complex number, or a tuple ``("t", c)`` meaning mu = c t, in which case a
    :class:`LaurentJet` in t with pole order 1 is returned (``z`` a Jet).
    """
    if isinstance(mu, tuple):
        _, c = mu
        if not isinstance(z, Jet):
            z = Jet.constant(z, [0.0], 0)
        return sigma_laurent(z, z0, complex(c), curve, top=z.order + 2, delta=delta)
    if isinstance(z, Jet):
        w0 = z.value - z0
        if curve.lattice_distance(w0) < delta * curve.scale:
            raise KernelError("evaluation point on the pole locus of sigma_mu")
        taylor = sigma_taylor(w0, complex(mu), curve, z.order)
        return _compose_univariate(z, lambda _z, k: taylor[: k + 1])
    w = np.asarray(z, dtype=complex) - z0
    if np.any(curve.lattice_distance(w) < delta * curve.scale):
        raise KernelError("evaluation point on the pole locus of sigma_mu")
    if curve.lattice_distance(mu) < 1e-12 * curve.scale:
        raise KernelError("mu on the lattice: degenerate (trivial) bundle")
    return sigma_taylor(w, complex(mu), curve, 0)[..., 0]


def sigma_taylor(w, mu: complex, curve: LatticeCurve, order: int) -> np.ndarray:
    """Taylor coefficients in w of sigma_mu(w) (pole placed at w = 0)."""
    if curve.lattice_distance(mu) < 1e-12 * curve.scale:
        raise KernelError("mu on the lattice: degenerate (trivial) bundle")
    s = curve.scale
    w = np.asarray(w, dtype=complex)
    num = theta_taylor((w - mu) / s, curve.tau, order) * s ** (-np.arange(order + 1))
    den = theta_taylor(w / s, curve.tau, order) * s ** (-np.arange(order + 1))
    th_mu = theta_taylor(np.array(-mu / s), curve.tau, 0)[0]
    ratio = series_mul(num, series_inv(den), order + 1)
    return ratio * theta1_prime0(curve) / (s * th_mu)


def sigma_bivariate(w0, mu0: complex, curve: LatticeCurve, kw: int, kt: int) -> np.ndarray:
    """Coefficients S[..., j, a] of t^(j-1) dw^a in sigma_{mu0 t}(w0 + dw).

    The t-window is [-1, kt]; ``w0`` may be an array (leading axes).
    """
    s = curve.scale
    w0 = np.asarray(w0, dtype=complex)
    eps_scale = mu0 / s  # normalised mu per unit t
    ntot = kw + kt + 2
    th = theta_taylor(w0 / s, curve.tau, ntot)  # (..., ntot+1)
    # theta((w0 + dw - mu0 t)/s): coefficient of dw^a t^b
    numer = np.zeros(w0.shape + (kt + 2, kw + 1), dtype=complex)
    for b in range(kt + 2):
        for a in range(kw + 1):
            n = a + b
            numer[..., b, a] = (th[..., n] * math.comb(n, b) * (-eps_scale) ** b
                                * s ** (-a))
    inv_den = series_inv(th[..., : kw + 1] * s ** (-np.arange(kw + 1)))  # in dw
    # 1/theta(-mu0 t / s) = -1/theta(mu0 t/s); theta odd: T1 e + T3 e^3 + ...
    t0 = theta_odd_taylor(curve.tau, kt + 3)
    # theta(eps t) / (T1 eps t) as series in t
    red = np.array([t0[k + 1] * eps_scale ** (k + 1) for k in range(kt + 2)]) / (t0[1] * eps_scale)
    inv_red = series_inv(red)  # 1/theta(eps t) = inv_red / (T1 eps t)
    # sigma = theta'(0)/s * numer * inv_den * (-1) * inv_red / (T1 eps t)
    pref = -t0[1] / s / (t0[1] * eps_scale)
    out = np.zeros(w0.shape + (kt + 2, kw + 1), dtype=complex)
    nd = np.einsum("...ba,...c->...bac", numer, inv_den)
    nd2 = np.zeros_like(numer)
    for a in range(kw + 1):
        for c in range(kw + 1 - a):
            nd2[..., :, a + c] += nd[..., :, a, c]
    for j in range(kt + 2):
        for b in range(j + 1):
            out[..., j, :] += inv_red[j - b] * nd2[..., b, :]
    return out * pref


def sigma_laurent(z: Jet, z0: complex, c: complex, curve: LatticeCurve, top: int,
                  delta: float = 1e-3) -> LaurentJet:
    """sigma_{c t}(z) as a LaurentJet in t, window [-1, top]."""
    w0 = z.value - z0
    if curve.lattice_distance(w0) < delta * curve.scale:
        raise KernelError("evaluation point on the pole locus of sigma_mu")
    biv = sigma_bivariate(np.array(w0), c, curve, z.order, top)
    coeffs = [_compose_univariate(z, lambda _z, k, row=row: row[: k + 1]) for row in biv]
    return LaurentJet(1, top, coeffs)
