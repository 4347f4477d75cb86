"""G(m,1,n) = S_n x| (Z/m)^n acting on E_tau^n: reflections, hypertori, orbits.

Conventions
-----------
A group element is ``(perm, phases)`` acting on vectors by
``(g x)_i = eps**phases[i] * x[perm^-1(i)]`` with ``eps = exp(2 pi i / m)``.
On functions it acts by ``(g F)(x) = F(g^-1 x)``.
"""

from __future__ import annotations

import cmath
import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernel import LatticeCurve

EQUIANHARMONIC = cmath.exp(2j * cmath.pi / 3)
LEMNISCATIC = 1j

# names for distinguished points, in lattice coordinates (a, b): xi = a + b tau
POINT_NAMES = {
    (Fraction(0), Fraction(0)): "0",
    (Fraction(1, 2), Fraction(0)): "half",
    (Fraction(0), Fraction(1, 2)): "halftau",
    (Fraction(1, 2), Fraction(1, 2)): "halfsum",
    (Fraction(1, 3), Fraction(2, 3)): "eta1",
    (Fraction(2, 3), Fraction(1, 3)): "eta2",
}
_NAME_RANK = {name: i for i, name in enumerate(POINT_NAMES.values())}


class GroupError(ValueError):
    pass


@dataclass(frozen=True)
class GroupSpec:
    """A crystallographic group G(m,1,n) together with its curve.

    ``form_scale`` multiplies the standard Hermitian form; the A1 Weyl
    normalisation (alpha, alpha) = 2 uses G(2,1,1) with form_scale = 2 and
    parameters supported on the hypertorus through 0.
    """

    m: int
    n: int
    tau: complex | None = None
    form_scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.m not in (1, 2, 3, 4, 6):
            raise GroupError(f"m must be one of 1, 2, 3, 4, 6 (got {self.m})")
        if self.n < 1:
            raise GroupError("n must be positive")
        tau = self.tau
        required = {3: EQUIANHARMONIC, 6: EQUIANHARMONIC, 4: LEMNISCATIC}.get(self.m)
        if tau is None:
            tau = required if required is not None else 1j
        tau = complex(tau)
        if tau.imag <= 0:
            raise GroupError("Im(tau) must be positive")
        if required is not None and abs(tau - required) > 1e-12:
            raise GroupError(f"m = {self.m} requires tau = {required}")
        object.__setattr__(self, "tau", tau)

    @property
    def order(self) -> int:
        return self.m**self.n * math.factorial(self.n)

    @property
    def eps(self) -> complex:
        return cmath.exp(2j * cmath.pi / self.m)

    @property
    def name(self) -> str:
        return self.label or f"G({self.m},1,{self.n})"


def weyl_a1(tau: complex = 1j) -> GroupSpec:
    """Rank-one Weyl group of type A1 with (alpha, alpha) = 2."""
    return GroupSpec(2, 1, tau, form_scale=2.0, label="A1")


def weyl_b2(tau: complex = 1j) -> GroupSpec:
    return GroupSpec(2, 2, tau, form_scale=1.0, label="B2")


@dataclass(frozen=True)
class GroupElement:
    perm: tuple[int, ...]
    phases: tuple[int, ...]
    m: int

    def matrix(self) -> np.ndarray:
        n = len(self.perm)
        eps = cmath.exp(2j * cmath.pi / self.m)
        inv = [0] * n
        for i, p in enumerate(self.perm):
            inv[p] = i
        mat = np.zeros((n, n), dtype=complex)
        for i in range(n):
            mat[i, inv[i]] = eps ** self.phases[i]
        return mat

    def compose(self, other: "GroupElement") -> "GroupElement":
        """self o other."""
        n = len(self.perm)
        inv = [0] * n
        for i, p in enumerate(self.perm):
            inv[p] = i
        perm = tuple(self.perm[other.perm[k]] for k in range(n))
        phases = tuple((self.phases[i] + other.phases[inv[i]]) % self.m for i in range(n))
        return GroupElement(perm, phases, self.m)

    def __call__(self, x):
        return self.matrix() @ np.asarray(x, dtype=complex)


@dataclass(frozen=True)
class Reflection:
    index: int  # index into Group.elements
    zeta: complex  # nontrivial eigenvalue on covectors
    alpha: np.ndarray  # covector, first nonzero entry 1
    order: int
    j_of_s: int  # zeta = exp(-2 pi i j / order)
    kind: str  # "pair" or "diag"


@dataclass(frozen=True)
class HypertorusComponent:
    """The component {alpha_T(x) = xi_T} of a reflection fixed locus."""

    kind: str  # "pair" or "diag"
    alpha: np.ndarray
    alpha_star: np.ndarray
    xi: complex
    xi_coords: tuple[Fraction, Fraction]
    m_T: int
    s_T: int  # element index; acts on the normal by exp(2 pi i / m_T)
    key: tuple  # (kind, i, j, p) or (kind, i, point name)
    orbit: str  # orbit label of the underlying point type


@dataclass
class Group:
    spec: GroupSpec
    elements: list[GroupElement] = field(init=False)

    def __post_init__(self):
        m, n = self.spec.m, self.spec.n
        els = []
        for perm in itertools.permutations(range(n)):
            for ph in itertools.product(range(m), repeat=n):
                els.append(GroupElement(perm, ph, m))
        # identity first
        ident = GroupElement(tuple(range(n)), (0,) * n, m)
        els.remove(ident)
        self.elements = [ident] + els
        self._index = {(e.perm, e.phases): i for i, e in enumerate(self.elements)}
        self.matrices = np.array([e.matrix() for e in self.elements])
        size = len(self.elements)
        self.mult = np.zeros((size, size), dtype=int)
        for i, a in enumerate(self.elements):
            for j, b in enumerate(self.elements):
                c = a.compose(b)
                self.mult[i, j] = self._index[(c.perm, c.phases)]
        self.inverse = np.array([int(np.where(self.mult[i] == 0)[0][0]) for i in range(size)])
        self.curve = LatticeCurve(self.spec.tau)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def n(self) -> int:
        return self.spec.n

    def index_of(self, perm, phases) -> int:
        return self._index[(tuple(perm), tuple(p % self.spec.m for p in phases))]

    def generators(self) -> list[int]:
        m, n = self.spec.m, self.spec.n
        gens = []
        if m > 1:
            gens.append(self.index_of(range(n), [1] + [0] * (n - 1)))
        for i in range(n - 1):
            perm = list(range(n))
            perm[i], perm[i + 1] = perm[i + 1], perm[i]
            gens.append(self.index_of(perm, [0] * n))
        return gens

    # -- reflections ---------------------------------------------------------

    @functools.cached_property
    def reflections(self) -> list[Reflection]:
        return enumerate_reflections(self)

    @functools.cached_property
    def hypertori(self) -> list[HypertorusComponent]:
        return enumerate_hypertori(self)

    @functools.cached_property
    def parameter_labels(self) -> list[str]:
        labels = set()
        for T in self.hypertori:
            for j in range(1, T.m_T):
                labels.add(slot_label(T, j))
        return sorted(labels, key=_label_sort_key)

    def orbit_pairs(self) -> dict[str, list[tuple[int, int]]]:
        """Orbit label -> list of (hypertorus index, j)."""
        out: dict[str, list[tuple[int, int]]] = {}
        for ti, T in enumerate(self.hypertori):
            for j in range(1, T.m_T):
                out.setdefault(slot_label(T, j), []).append((ti, j))
        return out

    def act_on_hypertorus(self, g: int, ti: int) -> int:
        """Index of g(T) for the hypertorus with index ti."""
        T = self.hypertori[ti]
        mat = self.matrices[g]
        # g T = {alpha(g^-1 x) = xi}; new covector alpha o g^-1
        new_alpha = T.alpha @ np.linalg.inv(mat)
        k = np.flatnonzero(np.abs(new_alpha) > 1e-9)[0]
        scale = new_alpha[k]
        new_alpha = new_alpha / scale
        new_xi = T.xi / scale
        for tj, S in enumerate(self.hypertori):
            if S.kind == T.kind and np.allclose(S.alpha, new_alpha) and \
                    self.curve.lattice_distance(S.xi - new_xi) < 1e-9:
                return tj
        raise GroupError("hypertorus image not found")

    def orbit_of_point(self, x0) -> np.ndarray:
        """Points g x0 for every element, in element order."""
        return np.einsum("gij,j->gi", self.matrices, np.asarray(x0, dtype=complex))


def _label_sort_key(label: str):
    if label == "pair":
        return (0, 0, 0)
    _, name, j = label.split(":")
    return (1, _NAME_RANK.get(name, 99), int(j[1:]))


def slot_label(T: HypertorusComponent, j: int) -> str:
    if T.kind == "pair":
        return "pair"
    return f"pt:{T.orbit}:j{j}"


def enumerate_reflections(group: Group) -> list[Reflection]:
    out = []
    n = group.n
    eye = np.eye(n)
    for idx, mat in enumerate(group.matrices):
        if idx == 0:
            continue
        if np.linalg.matrix_rank(eye - mat, tol=1e-9) != 1:
            continue
        # eigenvalue on covectors: alpha o s^-1 = zeta alpha
        w, v = np.linalg.eig(mat.T)
        k = int(np.argmax(np.abs(w - 1)))
        alpha = v[:, k]
        # alpha(s^-1 x) = zeta alpha(x): alpha @ inv(mat) = zeta alpha
        zeta = complex((alpha @ np.linalg.inv(mat)) @ np.conj(alpha) / (alpha @ np.conj(alpha)))
        first = np.flatnonzero(np.abs(alpha) > 1e-9)[0]
        alpha = alpha / alpha[first]
        alpha = _clean(alpha, group.spec.m)
        order = 1
        power = mat.copy()
        while not np.allclose(power, eye):
            power = power @ mat
            order += 1
        j = int(round((-cmath.phase(zeta) / (2 * cmath.pi) * order))) % order
        kind = "diag" if np.count_nonzero(np.abs(alpha) > 1e-9) == 1 else "pair"
        out.append(Reflection(idx, zeta, alpha, order, j, kind))
    return out


def _clean(v: np.ndarray, m: int) -> np.ndarray:
    roots = np.exp(2j * np.pi * np.arange(m) / m)
    out = v.copy()
    for i, x in enumerate(v):
        if abs(x) < 1e-9:
            out[i] = 0
        else:
            k = int(np.argmin(np.abs(roots - x)))
            if abs(roots[k] - x) < 1e-9:
                out[i] = roots[k]
    return out


def fixed_points(m: int, tau: complex) -> list[tuple[tuple[Fraction, Fraction], int]]:
    """Points of E_tau with nontrivial stabiliser in Z/m: ((a, b), |stab|)."""
    if m == 1:
        return []
    eps = cmath.exp(2j * cmath.pi / m)
    curve = LatticeCurve(tau)
    out = []
    grid = 12
    for a in range(grid):
        for b in range(grid):
            fa, fb = Fraction(a, grid), Fraction(b, grid)
            xi = float(fa) + float(fb) * tau
            stab = sum(1 for k in range(m) if curve.lattice_distance((eps**k - 1) * xi) < 1e-9)
            if stab > 1:
                out.append(((fa, fb), stab))
    return out


def point_orbits(m: int, tau: complex) -> list[list[tuple[Fraction, Fraction]]]:
    """Z/m-orbits of points with nontrivial stabiliser."""
    pts = [p for p, _ in fixed_points(m, tau)]
    eps = cmath.exp(2j * cmath.pi / m)
    curve = LatticeCurve(tau)
    seen: set = set()
    orbits = []
    for p in pts:
        if p in seen:
            continue
        xi = float(p[0]) + float(p[1]) * tau
        orbit = []
        for q in pts:
            xq = float(q[0]) + float(q[1]) * tau
            if any(curve.lattice_distance(eps**k * xi - xq) < 1e-9 for k in range(m)):
                orbit.append(q)
        seen.update(orbit)
        orbits.append(orbit)
    return orbits


def point_name(p: tuple[Fraction, Fraction]) -> str:
    return POINT_NAMES.get(p, f"{p[0]}+{p[1]}tau")


def _orbit_name(orbit) -> str:
    names = [point_name(p) for p in orbit]
    return min(names, key=lambda s: (_NAME_RANK.get(s, 99), s))


def enumerate_hypertori(group: Group) -> list[HypertorusComponent]:
    spec = group.spec
    m, n, tau = spec.m, spec.n, spec.tau
    eps = spec.eps
    out = []
    # pair type: x_i - eps^p x_j = 0 (one component), s swaps with phases
    for i in range(n):
        for j in range(i + 1, n):
            for p in range(m):
                alpha = np.zeros(n, dtype=complex)
                alpha[i], alpha[j] = 1.0, -(eps**p)
                astar = np.conj(alpha) / 2
                perm = list(range(n))
                perm[i], perm[j] = j, i
                phases = [0] * n
                phases[i], phases[j] = p, -p
                s = group.index_of(perm, phases)
                out.append(HypertorusComponent("pair", alpha, astar, 0j,
                                               (Fraction(0), Fraction(0)), 2, s,
                                               ("pair", i, j, p), "pair"))
    # diagonal type: x_i = xi
    if m > 1:
        stab = dict(fixed_points(m, tau))
        for orbit in point_orbits(m, tau):
            oname = _orbit_name(orbit)
            for p in sorted(orbit, key=lambda q: (_NAME_RANK.get(point_name(q), 99), q)):
                m_T = stab[p]
                xi = float(p[0]) + float(p[1]) * tau
                for i in range(n):
                    alpha = np.zeros(n, dtype=complex)
                    alpha[i] = 1.0
                    phases = [0] * n
                    phases[i] = m // m_T
                    s = group.index_of(range(n), phases)
                    out.append(HypertorusComponent("diag", alpha, alpha.copy(), complex(xi), p,
                                                   m_T, s, ("diag", i, point_name(p)), oname))
    return out


def invariant_generators(spec: GroupSpec) -> list["PowerSum"]:
    """P_j(p) = form_scale * sum_i p_i^(m j), j = 1..n (m = 1 uses power sums)."""
    return [PowerSum(spec.m * j, spec.n, spec.form_scale if spec.m == 2 and spec.n == 1 else 1.0)
            for j in range(1, spec.n + 1)]


@dataclass(frozen=True)
class PowerSum:
    degree: int
    nvars: int
    scale: float = 1.0

    def __call__(self, p) -> complex:
        p = np.asarray(p, dtype=complex)
        return complex(self.scale * np.sum(p**self.degree))

    def monomials(self) -> dict[tuple[int, ...], complex]:
        out = {}
        for i in range(self.nvars):
            e = [0] * self.nvars
            e[i] = self.degree
            out[tuple(e)] = complex(self.scale)
        return out

    def __repr__(self):
        s = "" if self.scale == 1 else f"{self.scale:g}*"
        return s + " + ".join(f"p{i + 1}^{self.degree}" for i in range(self.nvars))


def parameter_count(spec: GroupSpec) -> int:
    return len(Group(spec).parameter_labels)
