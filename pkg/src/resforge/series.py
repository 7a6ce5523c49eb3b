"""Truncated multivariate power series with a two-parameter grading.

A :class:`FormalSeries` stores coefficients of monomials ``z^e h^j`` in a
dense array indexed by ``(j, e_1, ..., e_nvars)``.  Two truncation modes are
supported:

* plain: every h-power ``j <= max_hpow`` keeps phase degrees ``|e| <= max_degree``;
* graded (``order=r``): h-power ``j <= r`` keeps phase degrees ``|e| <= 2(r - j)``,
  i.e. terms that are equivalent to zero to the order ``r`` are never stored.

Truncation is applied eagerly after every operation, followed by pruning of
coefficients that are negligible relative to the largest coefficient of the
same grade ``(j, |e|)``.

Canonical variables for Poisson brackets are ordered ``(x_1..x_n, xi_1..xi_n)``
and ``{a, b} = sum_j d_xi_j a * d_x_j b - d_x_j a * d_xi_j b``, so that
``{x xi, (x^2 - xi^2)/2} = x^2 + xi^2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

PRUNE_RELATIVE = 1e-14


class DimensionError(ValueError):
    """Operands live in incompatible coordinate spaces."""


class GradingError(ValueError):
    """Operands use incompatible truncation rules."""


@lru_cache(maxsize=None)
def _layout(nvars: int, max_degree: int, max_hpow: int, graded: bool):
    """Boolean keep-mask and per-cell grade index for one truncation rule."""
    shape = (max_hpow + 1,) + (max_degree + 1,) * nvars
    grids = np.indices(shape)
    hpow = grids[0]
    degree = grids[1:].sum(axis=0) if nvars else np.zeros(shape, dtype=int)
    if graded:
        cap = max_degree - 2 * hpow
    else:
        cap = np.full(shape, max_degree)
    mask = degree <= cap
    grade = hpow * (max_degree + 1) + degree
    mask.setflags(write=False)
    grade.setflags(write=False)
    return mask, grade


def monomials(nvars: int, degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree ``degree``, in lexicographic order."""
    if nvars == 0:
        return [()] if degree == 0 else []
    out = []
    for first in range(degree, -1, -1):
        for rest in monomials(nvars - 1, degree - first):
            out.append((first,) + rest)
    return out


class FormalSeries:
    """Immutable truncated power series in ``nvars`` phase variables and ``h``."""

    __slots__ = ("nvars", "max_degree", "max_hpow", "graded", "coeffs")

    def __init__(self, nvars: int, coeffs: np.ndarray, max_degree: int,
                 max_hpow: int = 0, graded: bool = False, *, _prune: bool = True):
        shape = (max_hpow + 1,) + (max_degree + 1,) * nvars
        if coeffs.shape != shape:
            raise DimensionError(f"coefficient array has shape {coeffs.shape}, expected {shape}")
        self.nvars = nvars
        self.max_degree = max_degree
        self.max_hpow = max_hpow
        self.graded = graded
        arr = np.array(coeffs, copy=True)
        mask, grade = _layout(nvars, max_degree, max_hpow, graded)
        arr[~mask] = 0
        if _prune and arr.dtype != object:
            arr = _prune_relative(arr, grade)
        arr.setflags(write=False)
        self.coeffs = arr

    # -- construction -------------------------------------------------

    @classmethod
    def zeros(cls, nvars: int, max_degree: int, *, order: int | None = None,
              max_hpow: int = 0, dtype=complex) -> "FormalSeries":
        if order is not None:
            max_degree, max_hpow, graded = 2 * order, order, True
        else:
            graded = False
        shape = (max_hpow + 1,) + (max_degree + 1,) * nvars
        return cls(nvars, np.zeros(shape, dtype=dtype), max_degree, max_hpow, graded)

    @classmethod
    def from_terms(cls, nvars: int, terms: Mapping, max_degree: int | None = None, *,
                   order: int | None = None, max_hpow: int | None = None,
                   dtype=complex) -> "FormalSeries":
        """Build a series from ``{exp: c}`` or ``{(exp, hpow): c}``.

        Without ``max_degree``/``order`` the cap is the largest degree present.
        """
        items = []
        for key, value in terms.items():
            if len(key) == 2 and isinstance(key[0], tuple):
                exp, hpow = tuple(key[0]), int(key[1])
            else:
                exp, hpow = tuple(key), 0
            if len(exp) != nvars:
                raise DimensionError(f"exponent {exp} has {len(exp)} entries, expected {nvars}")
            if any(e < 0 for e in exp) or hpow < 0:
                raise ValueError(f"negative exponent in {exp}, h^{hpow}")
            items.append((exp, hpow, value))
        if order is not None:
            max_degree, mh, graded = 2 * order, order, True
        else:
            graded = False
            if max_degree is None:
                max_degree = max((sum(e) for e, _, _ in items), default=0)
            mh = max_hpow if max_hpow is not None else max((j for _, j, _ in items), default=0)
        arr = np.zeros((mh + 1,) + (max_degree + 1,) * nvars, dtype=dtype)
        for exp, hpow, value in items:
            if hpow <= mh and all(e <= max_degree for e in exp):
                arr[(hpow,) + exp] += value
        return cls(nvars, arr, max_degree, mh, graded)

    @classmethod
    def constant(cls, value, nvars: int, max_degree: int, **kw) -> "FormalSeries":
        return cls.from_terms(nvars, {(0,) * nvars: value}, max_degree, **kw)

    @classmethod
    def variable(cls, index: int, nvars: int, max_degree: int, **kw) -> "FormalSeries":
        exp = [0] * nvars
        exp[index] = 1
        return cls.from_terms(nvars, {tuple(exp): 1.0}, max_degree, **kw)

    def _like(self, arr: np.ndarray, prune: bool = True) -> "FormalSeries":
        return FormalSeries(self.nvars, arr, self.max_degree, self.max_hpow, self.graded,
                            _prune=prune)

    def with_cap(self, max_degree: int) -> "FormalSeries":
        """Same terms re-truncated (or zero-padded) to a new degree cap."""
        if self.graded:
            raise GradingError("cap changes are only defined for plain truncation")
        shape = (self.max_hpow + 1,) + (max_degree + 1,) * self.nvars
        arr = np.zeros(shape, dtype=self.coeffs.dtype)
        m = min(max_degree, self.max_degree) + 1
        sl = (slice(None),) + (slice(0, m),) * self.nvars
        arr[sl] = self.coeffs[sl]
        return FormalSeries(self.nvars, arr, max_degree, self.max_hpow, False)

    def astype(self, dtype) -> "FormalSeries":
        return self._like(self.coeffs.astype(dtype), prune=False)

    # -- inspection ---------------------------------------------------

    def terms(self) -> dict[tuple[tuple[int, ...], int], complex]:
        """Nonzero coefficients keyed by ``(exponent, hpow)``."""
        out = {}
        for idx in zip(*np.nonzero(self.coeffs)):
            idx = tuple(int(i) for i in idx)
            out[(idx[1:], idx[0])] = self.coeffs[idx]
        return out

    def coeff(self, exp: Sequence[int], hpow: int = 0):
        exp = tuple(exp)
        if hpow > self.max_hpow or any(e > self.max_degree for e in exp):
            return 0.0
        return self.coeffs[(hpow,) + exp]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs != 0)

    def max_abs(self) -> float:
        if self.coeffs.size == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs.astype(complex))))

    def degree_part(self, degree: int) -> "FormalSeries":
        """Homogeneous component of phase degree ``degree`` (all h-powers)."""
        mask, grade = _layout(self.nvars, self.max_degree, self.max_hpow, self.graded)
        deg = grade % (self.max_degree + 1)
        arr = np.where(deg == degree, self.coeffs, 0)
        return self._like(arr.astype(self.coeffs.dtype), prune=False)

    def hpow_part(self, hpow: int) -> "FormalSeries":
        arr = np.zeros_like(self.coeffs)
        if hpow <= self.max_hpow:
            arr[hpow] = self.coeffs[hpow]
        return self._like(arr, prune=False)

    def real_if_close(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.imag(self.coeffs.astype(complex))) <= tol))

    # -- algebra ------------------------------------------------------

    def _check(self, other: "FormalSeries") -> None:
        if other.nvars != self.nvars:
            raise DimensionError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
        if other.graded != self.graded:
            raise GradingError("cannot mix graded and plain truncation")
        if self.graded and (other.max_degree != self.max_degree):
            raise GradingError("graded series must share the same order")

    def _common(self, other: "FormalSeries"):
        self._check(other)
        deg = min(self.max_degree, other.max_degree)
        hp = min(self.max_hpow, other.max_hpow)
        return deg, hp

    def _view(self, deg: int, hp: int) -> np.ndarray:
        return self.coeffs[(slice(0, hp + 1),) + (slice(0, deg + 1),) * self.nvars]

    def __add__(self, other):
        if not isinstance(other, FormalSeries):
            return self + self._constant_like(other)
        deg, hp = self._common(other)
        arr = self._view(deg, hp) + other._view(deg, hp)
        return FormalSeries(self.nvars, arr, deg, hp, self.graded)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs, prune=False)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, FormalSeries):
            return self._like(self.coeffs * other)
        deg, hp = self._common(other)
        a, b = self._view(deg, hp), other._view(deg, hp)
        if np.count_nonzero(a) > np.count_nonzero(b):
            a, b = b, a
        dtype = np.result_type(a.dtype, b.dtype)
        out = np.zeros(a.shape, dtype=dtype)
        full = a.shape
        for idx in zip(*np.nonzero(a)):
            c = a[idx]
            dst = tuple(slice(int(i), None) for i in idx)
            src = tuple(slice(0, n - int(i)) for n, i in zip(full, idx))
            out[dst] += c * b[src]
        return FormalSeries(self.nvars, out, deg, hp, self.graded)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._like(self.coeffs / scalar)

    def __pow__(self, n: int) -> "FormalSeries":
        if n < 0:
            return self.reciprocal() ** (-n)
        result = self._constant_like(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def _constant_like(self, value) -> "FormalSeries":
        arr = np.zeros_like(self.coeffs)
        arr[(0,) * (self.nvars + 1)] = value
        return self._like(arr, prune=False)

    def reciprocal(self) -> "FormalSeries":
        """Multiplicative inverse; requires a nonzero constant term."""
        c0 = self.coeffs[(0,) * (self.nvars + 1)]
        if c0 == 0:
            raise ZeroDivisionError("series has no constant term to invert")
        t = self / c0 - self._constant_like(1)
        # 1/(1+t) = sum (-t)^k, t has no constant term so the sum terminates
        total = self._constant_like(1)
        term = self._constant_like(1)
        for _ in range(self.max_degree + self.max_hpow + 1):
            term = -(term * t)
            if term.is_zero:
                break
            total = total + term
        return total / c0

    def derivative(self, index: int) -> "FormalSeries":
        """Partial derivative with respect to phase variable ``index``."""
        if not 0 <= index < self.nvars:
            raise DimensionError(f"variable index {index} out of range for nvars={self.nvars}")
        axis = index + 1
        arr = np.zeros_like(self.coeffs)
        n = self.max_degree
        src = [slice(None)] * (self.nvars + 1)
        dst = [slice(None)] * (self.nvars + 1)
        src[axis] = slice(1, n + 1)
        dst[axis] = slice(0, n)
        shape = [1] * (self.nvars + 1)
        shape[axis] = n
        weights = np.arange(1, n + 1).reshape(shape)
        arr[tuple(dst)] = self.coeffs[tuple(src)] * weights
        return self._like(arr, prune=False)

    def evaluate(self, point, h=0.0):
        """Numerical value at ``point`` (last axis of length ``nvars``)."""
        pt = np.asarray(point)
        if pt.shape[-1:] != (self.nvars,):
            raise DimensionError(f"point must have trailing dimension {self.nvars}")
        total = 0
        for (exp, hpow), c in self.terms().items():
            term = c * (h ** hpow if hpow else 1)
            for i, e in enumerate(exp):
                if e:
                    term = term * pt[..., i] ** e
            total = total + term
        if isinstance(total, int):
            return np.zeros(pt.shape[:-1], dtype=complex) if pt.ndim > 1 else 0j
        return total

    def compose(self, images: Sequence["FormalSeries"]) -> "FormalSeries":
        """Substitute series ``images[i]`` for variable ``i``.

        Images must have no constant term (h-free monomials of degree 0) unless
        the series is a polynomial, in which case the result is still exact up
        to the common cap.
        """
        if len(images) != self.nvars:
            raise DimensionError(f"need {self.nvars} images, got {len(images)}")
        ref = images[0]
        cache: dict[tuple[int, ...], FormalSeries] = {(0,) * self.nvars: ref._constant_like(1)}

        def power(exp):
            if exp in cache:
                return cache[exp]
            k = max(i for i, e in enumerate(exp) if e)
            parent = list(exp)
            parent[k] -= 1
            val = power(tuple(parent)) * images[k]
            cache[exp] = val
            return val

        total = ref._constant_like(0)
        for (exp, hpow), c in sorted(self.terms().items()):
            if hpow:
                raise GradingError("compose is defined for h-free series only")
            total = total + power(exp) * c
        return total


def _prune_relative(arr: np.ndarray, grade: np.ndarray) -> np.ndarray:
    mags = np.abs(arr)
    if not np.any(mags):
        return arr
    gmax = np.zeros(grade.max() + 1)
    np.maximum.at(gmax, grade.ravel(), mags.ravel())
    floor = PRUNE_RELATIVE * gmax[grade]
    arr[mags < floor] = 0
    return arr


def poisson(a: FormalSeries, b: FormalSeries) -> FormalSeries:
    """Poisson bracket ``{a, b} = sum d_xi a d_x b - d_x a d_xi b``."""
    if a.nvars != b.nvars:
        raise DimensionError(f"nvars mismatch: {a.nvars} vs {b.nvars}")
    if a.nvars % 2:
        raise DimensionError(f"Poisson bracket needs an even variable count, got {a.nvars}")
    n = a.nvars // 2
    out = None
    for j in range(n):
        term = a.derivative(n + j) * b.derivative(j) - a.derivative(j) * b.derivative(n + j)
        out = term if out is None else out + term
    return out


def lie_exp(generator: FormalSeries, f: FormalSeries, *, sign: float = 1.0,
            max_terms: int = 400, rtol: float = 1e-18) -> FormalSeries:
    """``exp(sign * H_g) f = sum (sign H_g)^k f / k!`` (the pullback of f by the flow)."""
    total = f
    term = f
    for k in range(1, max_terms + 1):
        term = poisson(generator, term) * (sign / k)
        if term.is_zero:
            break
        if term.max_abs() <= rtol * max(total.max_abs(), 1e-300) and k > 2:
            total = total + term
            break
        total = total + term
    return total


@dataclass(frozen=True)
class HamiltonianGerm:
    """Hamiltonian ``p`` in ``2n`` canonical variables with quadratic part ``sum mu_j x_j xi_j``."""

    p: FormalSeries

    def __post_init__(self):
        p = self.p
        if p.nvars % 2:
            raise DimensionError("a Hamiltonian germ needs an even number of variables")
        n = p.nvars // 2
        tol = 1e-12 * max(p.max_abs(), 1.0)
        if abs(p.coeff((0,) * p.nvars)) > tol:
            raise ValueError("Hamiltonian germ must vanish at the origin")
        for exp in monomials(p.nvars, 1):
            if abs(p.coeff(exp)) > tol:
                raise ValueError("Hamiltonian germ must have a critical point at the origin")
        mu = self.mu
        for exp in monomials(p.nvars, 2):
            x, xi = exp[:n], exp[n:]
            diag = sum(x) == 1 and x == xi
            if not diag and abs(p.coeff(exp)) > tol:
                raise ValueError(f"quadratic part must be diagonal sum mu_j x_j xi_j; found term {exp}")
        if np.any(np.abs(np.imag(mu)) > tol) or np.any(np.real(mu) <= 0):
            raise ValueError(f"exponents mu must be real and positive, got {mu}")

    @property
    def n(self) -> int:
        return self.p.nvars // 2

    @property
    def mu(self) -> np.ndarray:
        n = self.n
        out = []
        for j in range(n):
            exp = [0] * (2 * n)
            exp[j] = exp[n + j] = 1
            out.append(self.p.coeff(exp))
        return np.array(out)


@dataclass(frozen=True)
class SymplecticMapGerm:
    """Taylor germ of a map fixing the origin: image coordinates as series."""

    n: int
    components: tuple
    order: int

    def __post_init__(self):
        if len(self.components) != 2 * self.n:
            raise DimensionError(f"need {2 * self.n} components, got {len(self.components)}")
        for c in self.components:
            if c.nvars != 2 * self.n:
                raise DimensionError("component series must have 2n variables")

    @classmethod
    def identity(cls, n: int, order: int) -> "SymplecticMapGerm":
        comps = tuple(FormalSeries.variable(i, 2 * n, order) for i in range(2 * n))
        return cls(n, comps, order)

    @classmethod
    def linear(cls, matrix, order: int) -> "SymplecticMapGerm":
        m = np.asarray(matrix)
        dim = m.shape[0]
        comps = []
        for i in range(dim):
            terms = {}
            for j in range(dim):
                exp = [0] * dim
                exp[j] = 1
                terms[tuple(exp)] = m[i, j]
            comps.append(FormalSeries.from_terms(dim, terms, order))
        return cls(dim // 2, tuple(comps), order)

    def linear_part(self) -> np.ndarray:
        dim = 2 * self.n
        out = np.zeros((dim, dim), dtype=complex)
        for i, comp in enumerate(self.components):
            for j in range(dim):
                exp = [0] * dim
                exp[j] = 1
                out[i, j] = comp.coeff(exp)
        return out

    def __call__(self, point):
        pt = np.asarray(point, dtype=complex)
        return np.stack([c.evaluate(pt) for c in self.components], axis=-1)

    def compose(self, inner: "SymplecticMapGerm") -> "SymplecticMapGerm":
        """``self o inner``."""
        order = min(self.order, inner.order)
        imgs = [c.with_cap(order) for c in inner.components]
        comps = tuple(c.with_cap(order).compose(imgs) for c in self.components)
        return SymplecticMapGerm(self.n, comps, order)

    def inverse(self) -> "SymplecticMapGerm":
        """Formal inverse by fixed-point iteration on the nonlinear part."""
        dim = 2 * self.n
        lin = self.linear_part()
        lin_inv = np.linalg.inv(lin)
        nonlin = tuple(c - _linear_series(c) for c in self.components)
        ident = SymplecticMapGerm.identity(self.n, self.order)
        guess = SymplecticMapGerm.linear(lin_inv, self.order)
        for _ in range(self.order + 1):
            # z = L^{-1}(w - N(z))
            n_of_z = [c.compose(list(guess.components)) for c in nonlin]
            resid = [ident.components[i] - n_of_z[i] for i in range(dim)]
            comps = tuple(sum((resid[j] * lin_inv[i, j] for j in range(dim)),
                              FormalSeries.zeros(dim, self.order))
                          for i in range(dim))
            guess = SymplecticMapGerm(self.n, comps, self.order)
        return guess

    def symplectic_defect(self) -> float:
        """Max coefficient of ``{z_i o G, z_j o G} - {z_i, z_j}`` below the trustworthy degree."""
        dim = 2 * self.n
        n = self.n
        worst = 0.0
        trusted = self.order - 1
        for i in range(dim):
            for j in range(i + 1, dim):
                br = poisson(self.components[i], self.components[j])
                target = 0.0
                if j == i + n and i < n:
                    target = -1.0
                arr = br.coeffs.copy()
                arr[(0,) * (dim + 1)] -= target
                mask, grade = _layout(dim, br.max_degree, br.max_hpow, br.graded)
                deg = grade % (br.max_degree + 1)
                worst = max(worst, float(np.max(np.abs(np.where(deg <= trusted, arr, 0)))))
        return worst

    def max_coefficient_diff(self, other: "SymplecticMapGerm") -> float:
        order = min(self.order, other.order)
        return max((a.with_cap(order) - b.with_cap(order)).max_abs()
                   for a, b in zip(self.components, other.components))


def _linear_series(s: FormalSeries) -> FormalSeries:
    return s.degree_part(1)


def basis(nvars: int, max_degree: int) -> list[tuple[int, ...]]:
    """Monomials of degree ``<= max_degree`` ordered by degree, then lexicographically."""
    return list(all_exponents(nvars, max_degree))


def lie_matrix(generator: FormalSeries, max_degree: int) -> tuple[np.ndarray, list]:
    """Matrix of ``f -> {generator, f}`` on h-free monomials of degree ``<= max_degree``."""
    nv = generator.nvars
    mons = basis(nv, max_degree)
    index = {m: i for i, m in enumerate(mons)}
    gen = generator.with_cap(max_degree + 1) if not generator.graded else generator
    mat = np.zeros((len(mons), len(mons)), dtype=complex)
    for col, m in enumerate(mons):
        mono = FormalSeries.from_terms(nv, {m: 1.0}, max_degree + 1)
        for (exp, hpow), c in poisson(gen, mono).terms().items():
            if hpow == 0 and sum(exp) <= max_degree:
                mat[index[exp], col] = c
    return mat, mons


def symplectic_flow(generator: FormalSeries, order: int) -> "SymplecticMapGerm":
    """Time-one map of an arbitrary Hamiltonian (no constraint on its quadratic part)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    nv = generator.nvars
    if nv % 2:
        raise DimensionError("a Hamiltonian flow needs an even number of variables")
    mat, mons = lie_matrix(generator, order)
    prop = expm(mat)
    comps = []
    for i in range(nv):
        unit = tuple(1 if j == i else 0 for j in range(nv))
        column = prop[:, mons.index(unit)]
        terms = {m: column[k] for k, m in enumerate(mons) if column[k] != 0}
        comps.append(FormalSeries.from_terms(nv, terms, order))
    return SymplecticMapGerm(nv // 2, tuple(comps), order)


def hamiltonian_flow_map(p: HamiltonianGerm | FormalSeries, order: int) -> SymplecticMapGerm:
    """Taylor germ of the time-one map ``exp H_p`` to total degree ``order``.

    The Lie series ``sum_k H_p^k(z)/k!`` is summed exactly on the truncated
    monomial space as a matrix exponential; truncation commutes with ``H_p``
    because ``p`` has no linear part.
    """
    germ = p if isinstance(p, HamiltonianGerm) else HamiltonianGerm(p)
    return symplectic_flow(germ.p, order)


# -- serialization ----------------------------------------------------

def series_to_dict(s: FormalSeries) -> dict:
    terms = []
    for (exp, hpow), c in sorted(s.terms().items()):
        c = complex(c)
        terms.append({"exp": list(exp), "hpow": hpow, "re": c.real, "im": c.imag})
    out = {"nvars": s.nvars, "terms": terms}
    if s.graded:
        out["order"] = s.max_degree // 2
    else:
        out["max_degree"] = s.max_degree
        out["max_hpow"] = s.max_hpow
    return out


def series_from_dict(data: Mapping) -> FormalSeries:
    nvars = int(data["nvars"])
    terms = {}
    for t in data["terms"]:
        key = (tuple(int(e) for e in t["exp"]), int(t.get("hpow", 0)))
        terms[key] = complex(float(t["re"]), float(t.get("im", 0.0)))
    if "order" in data:
        return FormalSeries.from_terms(nvars, terms, order=int(data["order"]))
    return FormalSeries.from_terms(nvars, terms, data.get("max_degree"),
                                   max_hpow=data.get("max_hpow"))


def dumps(s: FormalSeries) -> str:
    return json.dumps(series_to_dict(s))


def loads(text: str) -> FormalSeries:
    return series_from_dict(json.loads(text))


def random_series(rng: np.random.Generator, nvars: int, degrees: Iterable[int],
                  max_degree: int, density: float = 0.5, scale: float = 1.0,
                  real: bool = True) -> FormalSeries:
    """Sparse random series with terms in the given homogeneous degrees (test helper)."""
    terms = {}
    for deg in degrees:
        for exp in monomials(nvars, deg):
            if rng.random() < density:
                val = rng.normal() * scale
                if not real:
                    val = val + 1j * rng.normal() * scale
                terms[exp] = val
    return FormalSeries.from_terms(nvars, terms, max_degree)


def all_exponents(nvars: int, max_degree: int):
    for deg in range(max_degree + 1):
        yield from monomials(nvars, deg)


__all__ = [
    "FormalSeries", "HamiltonianGerm", "SymplecticMapGerm", "DimensionError", "GradingError",
    "poisson", "lie_exp", "lie_matrix", "symplectic_flow", "hamiltonian_flow_map", "basis", "monomials", "all_exponents",
    "series_to_dict", "series_from_dict", "dumps", "loads", "random_series",
]
