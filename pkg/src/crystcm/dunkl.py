"""The algebra CG x| D(h_reg) with jet coefficients, and Dunkl operators.

An :class:`Operator` is stored densely as ``coef[o, g, a, t, j]``:

* ``o`` - orbit point ``y_o = g_o x0`` at which coefficients are expanded,
* ``g`` - group element (index into ``Group.elements``),
* ``a`` - derivative (or momentum) monomial in graded order,
* ``t`` - power of the Laurent variable, ``t_lo + index``,
* ``j`` - Taylor coefficient of the jet in ``delta = x - y_o``.

Expanding every coefficient at every orbit point is what makes products
closed: moving a group element g past a coefficient b replaces b by
``b o g^-1``, whose jet at ``y_o`` is the jet of b at ``g^-1 y_o``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .groups import Group, HypertorusComponent, slot_label
from .kernel import (KernelError, LatticeCurve, monomials, mul_matrix, series_mul,
                     sigma_bivariate, sigma_taylor)


class ConventionError(RuntimeError):
    """A structural identity that must hold exactly failed (twist rules, pole shape)."""


# ---------------------------------------------------------------------------
# frames


class Frame:
    """A base point, its G-orbit and the cached linear maps used by products."""

    def __init__(self, group: Group, x0, curve: LatticeCurve | None = None):
        self.group = group
        self.n = group.n
        self.x0 = np.asarray(x0, dtype=complex)
        self.curve = curve if curve is not None else group.curve
        self.orbit = group.orbit_of_point(self.x0)
        self.size = len(group)
        self._jet_sub: dict = {}
        self._poly_sub: dict = {}
        self._deriv: dict = {}

    def orbit_perm(self, g: int) -> np.ndarray:
        """Index of g^-1 y_o for every orbit point o."""
        return self.group.mult[self.group.inverse[g], :]

    def jet_sub(self, g: int, order: int) -> np.ndarray:
        key = (g, order)
        if key not in self._jet_sub:
            ginv = self.group.matrices[self.group.inverse[g]]
            self._jet_sub[key] = monomials(self.n, order).substitution(ginv)
        return self._jet_sub[key]

    def poly_sub(self, g: int, degree: int) -> np.ndarray:
        key = (g, degree)
        if key not in self._poly_sub:
            self._poly_sub[key] = monomials(self.n, degree).substitution(self.group.matrices[g].T)
        return self._poly_sub[key]

    def deriv(self, gamma: tuple[int, ...], order: int) -> np.ndarray:
        """Matrix of d^gamma on jets of the given order (to order - |gamma|)."""
        key = (gamma, order)
        if key not in self._deriv:
            mat = np.eye(monomials(self.n, order).size(order))
            k = order
            for var, power in enumerate(gamma):
                for _ in range(power):
                    mat = monomials(self.n, k).deriv_matrix(var) @ mat
                    k -= 1
            self._deriv[key] = mat
        return self._deriv[key]


def _shift_index(n: int, deg_in: int, deg_out: int, delta: tuple[int, ...]) -> np.ndarray:
    src = monomials(n, deg_in)
    dst = monomials(n, deg_out)
    return np.array([dst.index[tuple(x + d for x, d in zip(e, delta))] for e in src.exps])


# ---------------------------------------------------------------------------
# operators


@dataclass
class Operator:
    frame: Frame
    coef: np.ndarray
    degree: int
    t_lo: int
    jet_order: int
    classical: bool = False

    @property
    def nt(self) -> int:
        return self.coef.shape[3]

    @property
    def t_hi(self) -> int:
        return self.t_lo + self.nt - 1

    def group_support(self, tol: float = 0.0) -> list[int]:
        mags = np.abs(self.coef).max(axis=(0, 2, 3, 4)) if self.coef.size else []
        return [g for g, v in enumerate(mags) if v > tol]

    def copy_with(self, **kw) -> "Operator":
        return replace(self, **kw)

    # -- Laurent bookkeeping ---------------------------------------------------

    def t_coeff(self, e: int) -> np.ndarray:
        """Coefficient array [o, g, a, j] of t^e."""
        if e < self.t_lo or e > self.t_hi:
            raise KernelError(f"t^{e} outside the valid window [{self.t_lo}, {self.t_hi}]")
        return self.coef[:, :, :, e - self.t_lo, :]

    def window(self, lo: int, hi: int) -> "Operator":
        if lo < self.t_lo or hi > self.t_hi:
            raise KernelError("requested window exceeds the valid window")
        return self.copy_with(coef=self.coef[:, :, :, lo - self.t_lo: hi - self.t_lo + 1].copy(),
                              t_lo=lo)

    def shifted(self, e: int, scale: complex = 1.0) -> "Operator":
        """scale * t^e * self."""
        return self.copy_with(coef=self.coef * scale, t_lo=self.t_lo + e)

    def truncated(self, order: int) -> "Operator":
        if order > self.jet_order:
            raise KernelError("jet order overflow")
        size = monomials(self.frame.n, order).size(order)
        return self.copy_with(coef=self.coef[..., :size].copy(), jet_order=order)

    def padded(self, degree: int) -> "Operator":
        if degree == self.degree:
            return self
        n = self.frame.n
        size = monomials(n, degree).size(degree)
        c = np.zeros(self.coef.shape[:2] + (size,) + self.coef.shape[3:], dtype=complex)
        c[:, :, : self.coef.shape[2]] = self.coef
        return self.copy_with(coef=c, degree=degree)

    def __add__(self, other: "Operator") -> "Operator":
        lo = min(self.t_lo, other.t_lo)
        hi = min(self.t_hi, other.t_hi)
        k = min(self.jet_order, other.jet_order)
        deg = max(self.degree, other.degree)
        a, b = self.truncated(k).padded(deg), other.truncated(k).padded(deg)
        c = np.zeros(a.coef.shape[:3] + (hi - lo + 1, a.coef.shape[4]), dtype=complex)
        for op in (a, b):
            top = min(op.t_hi, hi)
            c[:, :, :, op.t_lo - lo: top - lo + 1] += op.coef[:, :, :, : top - op.t_lo + 1]
        return replace(a, coef=c, t_lo=lo)

    def __sub__(self, other: "Operator") -> "Operator":
        return self + other.shifted(0, -1.0)

    def __mul__(self, other: "Operator") -> "Operator":
        return multiply(self, other)

    # -- summaries -------------------------------------------------------------

    def negative_norms(self) -> dict[int, float]:
        return {e: float(np.abs(self.t_coeff(e)).max()) for e in range(self.t_lo, min(0, self.t_hi + 1))}

    def scale(self) -> float:
        """Largest coefficient magnitude of the t^0 part (1 if that vanishes)."""
        if self.t_lo <= 0 <= self.t_hi:
            s = float(np.abs(self.t_coeff(0)).max())
            return s if s > 0 else 1.0
        return float(np.abs(self.coef).max()) or 1.0

    def project_m(self) -> "Operator":
        """m(sum_g L_g g) = sum_g L_g, stored in the identity slot."""
        c = np.zeros_like(self.coef)
        c[:, 0] = self.coef.sum(axis=1)
        return self.copy_with(coef=c)

    def restricted(self, e: int = 0, orbit_index: int = 0) -> dict[tuple[int, ...], np.ndarray]:
        """Coefficient jets of the t^e part of the identity component."""
        mons = monomials(self.frame.n, self.degree)
        arr = self.t_coeff(e)[orbit_index, 0]
        return {ex: arr[i] for i, ex in enumerate(mons.exps)}


def identity_operator(frame: Frame, jet_order: int, t_hi: int = 0, t_lo: int = 0,
                      classical: bool = False) -> Operator:
    size = monomials(frame.n, jet_order).size(jet_order)
    c = np.zeros((frame.size, frame.size, 1, t_hi - t_lo + 1, size), dtype=complex)
    if t_lo <= 0 <= t_hi:
        c[:, 0, 0, -t_lo, 0] = 1.0
    return Operator(frame, c, 0, t_lo, jet_order, classical)


def twist(op: Operator, g: int) -> Operator:
    """g o op: coefficients moved to the left of g (group labels h -> g h)."""
    fr = op.frame
    c = op.coef[fr.orbit_perm(g)]
    psub = fr.poly_sub(g, op.degree)
    if not np.allclose(psub, np.diag(np.diag(psub))):
        c = np.einsum("pa,ogatj->ogptj", psub, c, optimize=True)
    else:
        c = c * np.diag(psub)[None, None, :, None, None]
    jsub = fr.jet_sub(g, op.jet_order)
    c = c @ jsub.T
    out = np.empty_like(c)
    out[:, fr.group.mult[g, :]] = c
    return op.copy_with(coef=out)


def conjugate(op: Operator, g: int) -> Operator:
    """g o op o g^-1."""
    left = twist(op, g)
    ginv = op.frame.group.inverse[g]
    out = np.empty_like(left.coef)
    out[:, op.frame.group.mult[:, ginv]] = left.coef
    return left.copy_with(coef=out)


def group_element_operator(frame: Frame, g: int, jet_order: int, classical=False) -> Operator:
    op = identity_operator(frame, jet_order, classical=classical)
    c = np.zeros_like(op.coef)
    c[:, g] = op.coef[:, 0]
    return op.copy_with(coef=c)


def _laurent_mul(f: np.ndarray, f_lo: int, y: np.ndarray, y_lo: int, lo: int, hi: int,
                 order: int, n: int) -> np.ndarray:
    """(f * y) for f[o, tf, jf] and y[o, g, a, ty, jy], window [lo, hi], jet order ``order``."""
    mons = monomials(n, order)
    size = mons.size(order)
    out = np.zeros(y.shape[:3] + (hi - lo + 1, size), dtype=complex)
    ny = y.shape[3]
    f = f[..., :size]
    const = not np.any(f[..., 1:])
    for tf in range(f.shape[1]):
        ef = f_lo + tf
        fs = f[:, tf]
        if not np.any(fs):
            continue
        ey0 = max(y_lo, lo - ef)
        ey1 = min(y_lo + ny - 1, hi - ef)
        if ey0 > ey1:
            continue
        ysl = y[:, :, :, ey0 - y_lo: ey1 - y_lo + 1, :size]
        dst = slice(ey0 + ef - lo, ey1 + ef - lo + 1)
        if const:
            out[:, :, :, dst] += fs[:, 0][:, None, None, None, None] * ysl
        else:
            mat = mul_matrix(fs, mons, size, size)  # [o, k, j]
            shp = ysl.shape
            prod = ysl.reshape(shp[0], -1, size) @ np.transpose(mat, (0, 2, 1))
            out[:, :, :, dst] += prod.reshape(shp)
    return out


def multiply(x: Operator, y: Operator) -> Operator:
    """Product in CG x| D (Leibniz rule) or CG x| O(T^*) (classical)."""
    if x.frame is not y.frame or x.classical != y.classical:
        raise KernelError("operators live on different frames")
    fr = x.frame
    n = fr.n
    classical = x.classical
    deg_out = x.degree + y.degree
    order = min(x.jet_order, y.jet_order if classical else y.jet_order - x.degree)
    if order < 0:
        raise KernelError("jet order overflow: increase the jet order of the factors")
    lo = x.t_lo + y.t_lo
    hi = min(x.t_hi + y.t_lo, y.t_hi + x.t_lo)
    size = monomials(n, order).size(order)
    out = np.zeros((fr.size, fr.size, monomials(n, deg_out).size(deg_out), hi - lo + 1, size),
                   dtype=complex)
    xmons = monomials(n, x.degree)
    for g in x.group_support():
        yt = twist(y, g).coef
        for ai, alpha in enumerate(xmons.exps):
            f = x.coef[:, g, ai]
            if not np.any(f):
                continue
            gammas = [()] if classical else itertools.product(*(range(k + 1) for k in alpha))
            for gamma in gammas:
                if classical:
                    gamma = (0,) * n
                binom = math.prod(math.comb(a, b) for a, b in zip(alpha, gamma))
                yd = yt
                if any(gamma):
                    yd = yt[..., : monomials(n, y.jet_order).size(y.jet_order)] @ \
                        fr.deriv(tuple(gamma), y.jet_order).T
                prod = _laurent_mul(f, x.t_lo, yd, y.t_lo, lo, hi, order, n)
                rest = tuple(a - b for a, b in zip(alpha, gamma))
                idx = _shift_index(n, y.degree, deg_out, rest)
                out[:, :, idx] += binom * prod
    return Operator(fr, out, deg_out, lo, order, classical)


def commutator(x: Operator, y: Operator) -> Operator:
    return multiply(x, y) - multiply(y, x)


def relative_residual(op: Operator, scale: float, e: int = 0) -> float:
    return float(np.abs(op.t_coeff(e)).max()) / scale


# ---------------------------------------------------------------------------
# Dunkl operators


def _reciprocal_linear_jets(alpha: np.ndarray, points: np.ndarray, n: int, order: int) -> np.ndarray:
    """Jets of 1/alpha(x) at each point: [o, j]."""
    a0 = points @ alpha
    k = np.arange(order + 1)
    taylor = (-1.0) ** k / a0[:, None] ** (k + 1)
    return taylor @ monomials(n, order).linear_form_powers(alpha)


def dunkl_from_terms(frame: Frame, v, terms: dict[int, np.ndarray], t_lo: int, jet_order: int,
                     classical: bool, connection: np.ndarray | None = None) -> Operator:
    """Assemble d_v (or p_v) + sum_s F_s s from reflection coefficient arrays F_s[o, t, j].

    ``connection[k]`` is added to the identity component as the coefficient of
    t^(t_lo + k) (a constant connection form evaluated on v).
    """
    n = frame.n
    v = np.asarray(v, dtype=complex)
    size = monomials(n, jet_order).size(jet_order)
    nt = max([f.shape[1] for f in terms.values()], default=1)
    nt = max(nt, 1 - t_lo)
    c = np.zeros((frame.size, frame.size, 1 + n, nt, size), dtype=complex)
    for i in range(n):
        c[:, 0, 1 + i, -t_lo, 0] = v[i]
    for s, f in terms.items():
        c[:, s, 0, : f.shape[1]] += f[..., :size]
    if connection is not None:
        c[:, 0, 0, : len(connection), 0] += connection
    return Operator(frame, c, 1, t_lo, jet_order, classical)


def rational_terms(frame: Frame, v, c: dict[int, complex], jet_order: int) -> dict[int, np.ndarray]:
    """F_s = 2 c(s) alpha_s(v) / ((1 - zeta_s) alpha_s(x)) at every orbit point."""
    v = np.asarray(v, dtype=complex)
    out = {}
    for refl in frame.group.reflections:
        cs = c.get(refl.index, 0)
        if cs == 0:
            continue
        av = refl.alpha @ v
        if av == 0:
            continue
        a0 = frame.orbit @ refl.alpha
        if np.min(np.abs(a0)) < 1e-12:
            raise KernelError("evaluation point on a reflection hyperplane")
        jets = _reciprocal_linear_jets(refl.alpha, frame.orbit, frame.n, jet_order)
        out[refl.index] = (2 * cs * av / (1 - refl.zeta) * jets)[:, None, :]
    return out


def rational_dunkl(frame: Frame, v, c: dict[int, complex], jet_order: int,
                   classical: bool = False) -> Operator:
    """D_{v,c} = d_v + sum_s 2c(s) alpha_s(v) / ((1-zeta_s) alpha_s) s."""
    return dunkl_from_terms(frame, v, rational_terms(frame, v, c, jet_order), 0, jet_order,
                            classical)


def classical_dunkl(frame: Frame, v, c: dict[int, complex], jet_order: int) -> Operator:
    return rational_dunkl(frame, v, c, jet_order, classical=True)


# -- elliptic ------------------------------------------------------------------


@dataclass(frozen=True)
class Bundle:
    """Degree-zero line bundle L_{t lambda0}.

    Sections are functions on h with multipliers exp(2 pi i Lambda(gamma)) where
    Lambda(x) = t (gauge . x + Bv . conj(x)).  The antiholomorphic part is fixed
    by the direction ``q0`` (the image of lambda0 in h) so that the pole of the
    Dunkl operators at t = 0 sits on the line q = t q0.  ``gauge`` is a purely
    holomorphic change of trivialisation.
    """

    q0: np.ndarray
    gauge: np.ndarray | None = None

    def antilinear(self, curve: LatticeCurve, form_scale: float) -> np.ndarray:
        return 1j * np.asarray(self.q0, dtype=complex) / (2 * curve.tau.imag * curve.scale**2
                                                          * form_scale)

    def transported(self, g_matrix: np.ndarray) -> "Bundle":
        gauge = None if self.gauge is None else np.conj(g_matrix) @ self.gauge
        return Bundle(g_matrix @ np.asarray(self.q0, dtype=complex), gauge)


def section_parameters(T: HypertorusComponent, j: int, bundle: Bundle, curve: LatticeCurve,
                       form_scale: float) -> tuple[complex, complex]:
    """(mu0, c0) with f_{T,j} = exp(2 pi i t (c0 z + b mu0 / R)) sigma_{t mu0}(z - xi)."""
    w = 1 - cmath.exp(-2j * cmath.pi * j / T.m_T)
    norm2 = float(np.real(np.vdot(T.alpha, T.alpha)))
    q0 = np.asarray(bundle.q0, dtype=complex)
    mu0 = np.conj(w) * (T.alpha @ q0) / (form_scale * norm2)
    bv = bundle.antilinear(curve, form_scale)
    c0 = np.conj(w) * (T.alpha @ bv) / norm2
    if bundle.gauge is not None:
        c0 += w * (np.asarray(bundle.gauge) @ T.alpha_star)
    return complex(mu0), complex(c0)


def _power(group: Group, g: int, k: int) -> int:
    out = 0
    for _ in range(k):
        out = int(group.mult[g, out])
    return out


def elliptic_terms(frame: Frame, v, params: dict[str, complex], bundle: Bundle, jet_order: int,
                   t: complex | None = None, t_top: int = 2, form_scale: float | None = None,
                   delta: float = 1e-3) -> tuple[dict[int, np.ndarray], int]:
    """Reflection coefficients C(T,j) alpha_T(v) f_{T,j}, grouped by s_T^j.

    With ``t=None`` they are Laurent series in t on the window [-1, t_top];
    otherwise they are evaluated at the given t (window [0, 0]).
    """
    group = frame.group
    curve = frame.curve
    kappa = group.spec.form_scale if form_scale is None else form_scale
    n = frame.n
    v = np.asarray(v, dtype=complex)
    size = monomials(n, jet_order).size(jet_order)
    laurent = t is None
    nt = t_top + 2 if laurent else 1
    out: dict[int, np.ndarray] = {}
    for T in group.hypertori:
        av = T.alpha @ v
        for j in range(1, T.m_T):
            cval = complex(params.get(slot_label(T, j), 0))
            if cval == 0 or av == 0:
                continue
            s = _power(group, T.s_T, j)
            mu0, c0 = section_parameters(T, j, bundle, curve, kappa)
            if abs(mu0) < 1e-14:
                raise KernelError("non-generic direction: alpha_T(q0) = 0")
            xi = T.xi * curve.scale
            b = float(T.xi_coords[1])
            z0 = frame.orbit @ T.alpha
            w0 = z0 - xi
            if np.min(curve.lattice_distance(w0)) < delta * curve.scale:
                raise KernelError("evaluation point too close to a reflection hypertorus")
            lfp = monomials(n, jet_order).linear_form_powers(T.alpha)
            u0 = 2j * np.pi * (c0 * z0 + b * mu0 / curve.scale)
            cp = 2j * np.pi * c0
            fact = np.array([math.factorial(k) for k in range(max(nt, jet_order + 1) + 1)], float)
            if laurent:
                sig = sigma_bivariate(w0, mu0, curve, jet_order, t_top)  # [o, nt, a]
                # exp(t u0 + t cp dz): coefficient of t^k dz^a
                ex = np.zeros((len(z0), nt, jet_order + 1), dtype=complex)
                for k in range(nt):
                    for a in range(min(k, jet_order) + 1):
                        ex[:, k, a] = u0 ** (k - a) / fact[k - a] * cp**a / fact[a]
                res = np.zeros_like(sig)
                for jj in range(nt):
                    for k in range(jj + 1):
                        res[:, jj] += series_mul(ex[:, k], sig[:, jj - k], jet_order + 1)
            else:
                sig = sigma_taylor(w0, t * mu0, curve, jet_order)
                ex = np.exp(t * u0)[:, None] * (t * cp) ** np.arange(jet_order + 1) \
                    / fact[: jet_order + 1]
                res = series_mul(ex, sig, jet_order + 1)[:, None, :]
            jets = res @ lfp  # [o, nt, size]
            out[s] = out.get(s, 0) + cval * av * jets[..., :size]
    return out, (-1 if laurent else 0)


def elliptic_dunkl(frame: Frame, v, params: dict[str, complex], bundle: Bundle, jet_order: int,
                   t: complex | None = None, t_top: int = 2, classical: bool = False,
                   form_scale: float | None = None) -> Operator:
    """Elliptic Dunkl operator d_v + sum C(T,j) alpha_T(v) f_{T,j} s_T^j."""
    terms, lo = elliptic_terms(frame, v, params, bundle, jet_order, t, t_top, form_scale)
    conn = None
    if bundle.gauge is not None:
        # nabla_v = d_v - 2 pi i t gauge(v) in the gauged trivialisation
        a_v = -2j * np.pi * (np.asarray(bundle.gauge, dtype=complex) @ np.asarray(v, dtype=complex))
        conn = np.array([0, 0, a_v][: t_top + 2]) if t is None else np.array([a_v * t])
    op = dunkl_from_terms(frame, v, terms, lo, jet_order, classical, conn)
    if lo == -1 and op.nt < t_top + 2:
        pad = np.zeros(op.coef.shape[:3] + (t_top + 2 - op.nt, op.coef.shape[4]), dtype=complex)
        op = op.copy_with(coef=np.concatenate([op.coef, pad], axis=3))
    return op


# ---------------------------------------------------------------------------
# pole shape, c_B and the rank-one b-vector


@dataclass
class PoleShape:
    c_B: dict[int, complex]  # reflection element index -> measured c_B
    predicted: dict[int, complex]  # -1/2 zeta a_B sum_T C(T, j(s))
    shape_residual: float  # non-constant / off-support part of the t^-1 term
    scale: float

    @property
    def prediction_residual(self) -> float:
        return max((abs(self.c_B[s] - self.predicted[s]) for s in self.c_B), default=0.0)


def predicted_cB(group: Group, params: dict[str, complex]) -> dict[int, complex]:
    """-1/2 zeta_s a_B(s) sum_{T in X^s} C(T, j(s)) with a_B = form_scale |alpha|^2."""
    out: dict[int, complex] = {}
    for refl in group.reflections:
        total = 0j
        for T in group.hypertori:
            for j in range(1, T.m_T):
                if _power(group, T.s_T, j) == refl.index:
                    total += complex(params.get(slot_label(T, j), 0))
                    a_b = group.spec.form_scale * float(np.real(np.vdot(T.alpha, T.alpha)))
        out[refl.index] = -0.5 * refl.zeta * a_b * total if total else 0j
    return out


def measure_cB(frame: Frame, params: dict[str, complex], bundle: Bundle,
               jet_order: int = 2) -> PoleShape:
    """Read c_B off the t^-1 part of the elliptic Dunkl operators.

    For each reflection the t^-1 coefficient must be the constant
    -2 c_B(s) alpha_s(v) / ((1 - zeta_s) alpha_s(q0)).
    """
    group = frame.group
    q0 = np.asarray(bundle.q0, dtype=complex)
    n = frame.n
    measured: dict[int, complex] = {}
    shape_res = 0.0
    scale = 1.0
    for refl in group.reflections:
        v = np.conj(refl.alpha)
        op = elliptic_dunkl(frame, v, params, bundle, jet_order, t_top=0)
        pole = op.t_coeff(-1)  # [o, g, a, j]
        scale = max(scale, float(np.abs(op.t_coeff(0)).max()))
        val = pole[0, refl.index, 0, 0]
        const = np.zeros_like(pole[:, refl.index, 0])
        const[:, 0] = val
        shape_res = max(shape_res, float(np.abs(pole[:, refl.index, 0] - const).max()))
        # nothing else may have a pole except reflections
        mask = np.ones(frame.size, bool)
        mask[[r.index for r in group.reflections]] = False
        shape_res = max(shape_res, float(np.abs(pole[:, mask]).max(initial=0.0)),
                        float(np.abs(pole[:, :, 1:]).max(initial=0.0)))
        measured[refl.index] = complex(-val * (1 - refl.zeta) * (refl.alpha @ q0)
                                       / (2 * (refl.alpha @ v)))
    del n
    return PoleShape(measured, predicted_cB(group, params), shape_res, scale)


def rank_one_b_vector(frame: Frame, params: dict[str, complex], bundle: Bundle) -> np.ndarray:
    """b with pole part (1/q) sum_i b_i e_i, e_i = (1/m) sum_j xi^{ij} g^j (rank 1)."""
    group = frame.group
    if group.n != 1:
        raise ValueError("b-vector is defined in rank one")
    m = group.spec.m
    q0 = complex(np.asarray(bundle.q0)[0])
    op = elliptic_dunkl(frame, [1.0], params, bundle, 0, t_top=0)
    pole = op.t_coeff(-1)[0, :, 0, 0]
    gen = group.index_of([0], [1])
    coeffs = np.array([pole[_power(group, gen, j)] for j in range(m)])
    xi = cmath.exp(2j * cmath.pi / m)
    return np.array([q0 * sum(coeffs[j] * xi ** (-i * j) for j in range(m)) for i in range(m)])


# ---------------------------------------------------------------------------
# classical rational Hamiltonians


@dataclass
class PExpansion:
    """P^c(p, q) = sum_beta coeff_beta(q) p^beta with jets in q at ``q0``."""

    degree: int
    exps: list[tuple[int, ...]]
    coeffs: np.ndarray  # [a, j] jets at q0
    jet_order: int
    purity: float  # largest non-identity component (relative)
    q0: np.ndarray

    def values(self) -> dict[tuple[int, ...], complex]:
        return {e: complex(self.coeffs[i, 0]) for i, e in enumerate(self.exps)
                if abs(self.coeffs[i, 0]) > 0}

    def __call__(self, p) -> complex:
        p = np.asarray(p, dtype=complex)
        return complex(sum(c * np.prod(p ** np.array(e)) for e, c in self.values().items()))

    def homogeneous_coeff(self, beta: tuple[int, ...], q0) -> complex:
        """coeff_beta at q0 (identical to the stored value; kept for clarity)."""
        return self.values().get(beta, 0j)


def power_sum_of_operators(ops: list[Operator], degree: int, scale: float = 1.0) -> Operator:
    total = None
    for op in ops:
        acc = op
        for _ in range(degree - 1):
            acc = multiply(op, acc)
        total = acc if total is None else total + acc
    return total.shifted(0, scale)


def cm_hamiltonian_classical(group: Group, i: int, c: dict[int, complex], q0,
                             jet_order: int = 0, tol: float = 1e-10) -> PExpansion:
    """P_i^c(p, q) = P_i(D^0_{.,c}); asserts the group components vanish."""
    from .groups import invariant_generators

    gen = invariant_generators(group.spec)[i - 1]
    frame = Frame(group, q0)
    n = group.n
    ops = [classical_dunkl(frame, np.eye(n)[k], c, jet_order + gen.degree) for k in range(n)]
    total = power_sum_of_operators(ops, gen.degree, gen.scale)
    total = total.truncated(jet_order)
    coef0 = total.t_coeff(0)
    scale = float(np.abs(coef0[0, 0]).max()) or 1.0
    purity = float(np.abs(coef0[0, 1:]).max(initial=0.0)) / scale
    if purity > tol:
        raise ConventionError(f"classical Hamiltonian has group components of size {purity:.3e}")
    mons = monomials(n, total.degree)
    return PExpansion(total.degree, list(mons.exps), coef0[0, 0].copy(), jet_order, purity,
                      np.asarray(q0, dtype=complex))


def reflection_c_from_table(group: Group, c_of_label) -> dict[int, complex]:
    """Convenience: c(s) from a callable on reflections."""
    return {r.index: complex(c_of_label(r)) for r in group.reflections}


# ---------------------------------------------------------------------------
# sampling


def hypertorus_margin(group: Group, x, curve: LatticeCurve) -> float:
    x = np.asarray(x, dtype=complex)
    best = np.inf
    for T in group.hypertori:
        d = curve.lattice_distance(T.alpha @ x - T.xi * curve.scale) / curve.scale
        best = min(best, float(d))
    return best


def sample_regular_point(group: Group, rng: np.random.Generator, delta: float = 0.05,
                         curve: LatticeCurve | None = None) -> np.ndarray:
    """Uniform point of the fundamental domain at distance >= delta from all hypertori."""
    curve = curve if curve is not None else group.curve
    for _ in range(10000):
        a, b = rng.uniform(0, 1, size=(2, group.n))
        x = curve.scale * (a + b * curve.tau)
        if hypertorus_margin(group, x, curve) >= delta:
            return x
    raise RuntimeError("could not sample a regular point")


def sample_direction(group: Group, rng: np.random.Generator, margin: float = 1e-2) -> np.ndarray:
    """Generic q0: |alpha_T(q0)| >= margin |alpha_T| |q0| for every hypertorus."""
    for _ in range(10000):
        q = rng.normal(size=group.n) + 1j * rng.normal(size=group.n)
        ok = all(abs(T.alpha @ q) >= margin * np.linalg.norm(T.alpha) * np.linalg.norm(q)
                 for T in group.hypertori)
        ok = ok and all(abs(r.alpha @ q) >= margin * np.linalg.norm(r.alpha) * np.linalg.norm(q)
                        for r in group.reflections)
        if ok:
            return q
    raise RuntimeError("could not sample a generic direction")


def genericity_margin(group: Group, q0) -> float:
    q0 = np.asarray(q0, dtype=complex)
    return min(abs(r.alpha @ q0) / (np.linalg.norm(r.alpha) * np.linalg.norm(q0))
               for r in group.reflections)


def default_parameters(group: Group, rng: np.random.Generator | None = None,
                       scale: float = 0.5) -> dict[str, complex]:
    labels = group.parameter_labels
    if rng is None:
        return {lab: 0j for lab in labels}
    # magnitudes in [0.5, 1.5] * scale keep every parameter visibly nonzero
    mag = rng.uniform(0.5, 1.5, size=len(labels))
    phase = rng.uniform(0, 2 * np.pi, size=len(labels))
    return {lab: complex(scale * r * np.exp(1j * a)) for lab, r, a in zip(labels, mag, phase)}


@dataclass
class CommutatorReport:
    absolute: float
    scale: float

    @property
    def relative(self) -> float:
        return self.absolute / self.scale


def dunkl_commutator_residual(make, frame: Frame, vs) -> CommutatorReport:
    """max |[D_v, D_w]| over pairs from ``vs``; ``make(v)`` builds D_v on ``frame``."""
    ops = [make(v) for v in vs]
    worst = 0.0
    scale = 0.0
    for a, b in itertools.combinations(range(len(ops)), 2):
        prod = multiply(ops[a], ops[b])
        comm = prod - multiply(ops[b], ops[a])
        worst = max(worst, float(np.abs(comm.coef).max()))
        scale = max(scale, float(np.abs(prod.coef).max()))
    return CommutatorReport(worst, scale or 1.0)

