"""Resonance strings of the model equation ``2 d lam + lam F^r(y/lam; 1/lam) = 2 pi k``.

Here ``y = (2 alpha + 1)/(2i)`` is the quantized action of the multi-index
``alpha``.  Writing ``F^r(iota; h) = sum_j h^j F_j(iota)`` with coefficients
``c_{j,a}`` of ``iota^a``, the left side is the Laurent polynomial

    2 d lam + b_1 + sum_{m=2}^{r} b_m lam^{1-m},   b_m = sum_{j+|a|=m} c_{j,a} y^a,

so ``b_1 = mu . y + F_1(0)`` and ``b_m = F_m(0) + f_m(y)``.  Each string
``lam(alpha, k) = k sum_j a_j k^{-j}`` follows from expanding in ``1/k``.

All routines accept ``dps`` to run in mpmath with that many decimal digits;
residuals at large ``k`` are far below double precision.
"""

from __future__ import annotations

import cmath
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import mpmath as mp
import numpy as np

from .series import FormalSeries, monomials

SMALLNESS_BOUND = 0.2


class NormalFormError(ValueError):
    """Normal-form data violates one of its invariants; ``field`` names it."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainWarning(UserWarning):
    """``|alpha|/|lam|`` exceeds the smallness bound of the asymptotic regime."""


class OracleError(RuntimeError):
    """Newton iteration on the model equation failed."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class ConditioningError(OracleError):
    """``|g'(lam)|`` dropped below ``d``."""


# -- numbers -------------------------------------------------------------------

class _Ctx:
    """Arithmetic backend: double precision or mpmath at ``dps`` digits."""

    def __init__(self, dps: int | None):
        self.dps = dps
        self.mp = dps is not None

    def num(self, x):
        if self.mp:
            return mp.mpc(complex(x)) if not isinstance(x, (mp.mpc, mp.mpf)) else mp.mpc(x)
        return complex(x)

    def real(self, x):
        if self.mp:
            return mp.mpf(x) if not isinstance(x, mp.mpf) else x
        return float(x)

    @property
    def pi(self):
        return mp.pi if self.mp else math.pi

    def exp(self, z):
        return mp.exp(z) if self.mp else cmath.exp(z)

    def log(self, x):
        return mp.log(x) if self.mp else math.log(x)

    def __enter__(self):
        if self.mp:
            self._wd = mp.workdps(self.dps)
            self._wd.__enter__()
        return self

    def __exit__(self, *exc):
        if self.mp:
            self._wd.__exit__(*exc)
        return False


def _alpha(alpha, n: int) -> tuple:
    if np.isscalar(alpha):
        alpha = (alpha,)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n:
        raise ValueError(f"multi-index {alpha} has length {len(alpha)}, expected {n}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"multi-index {alpha} has a negative entry")
    return alpha


# -- data ------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeWindow:
    """``{Im lam < A ln Re lam, Re lam > B}``."""

    A: float
    B: float

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("window constants A and B must be positive")

    def contains(self, lam):
        lam = np.asarray(lam, dtype=complex)
        re = lam.real
        with np.errstate(divide="ignore", invalid="ignore"):
            return (re > self.B) & (lam.imag < self.A * np.log(np.where(re > 0, re, np.nan)))


def is_resonance_frequency(lam) -> bool:
    """Convention check: ``Re lam > 0`` and ``Im lam > 0``."""
    lam = complex(lam)
    return lam.real > 0 and lam.imag > 0


@dataclass(frozen=True)
class NormalFormData:
    """``F^r(iota; h) = sum_{j<=r} h^j F_j(iota)`` with trapped length ``d``.

    ``F[j]`` is a plain series in ``n`` action variables.  ``F[0]`` contains
    the linear part ``mu . iota``.
    """

    n: int
    d: float
    r: int
    mu: np.ndarray
    F: tuple
    validated: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).reshape(-1))
        object.__setattr__(self, "F", tuple(self.F))
        if self.validated:
            self.validate()

    # construction
    @classmethod
    def from_terms(cls, d: float, mu: Sequence[float], F: Sequence[dict], r: int | None = None,
                   validate: bool = True) -> "NormalFormData":
        """``F[j]`` given as ``{exponent tuple: coefficient}``; missing ``F_0`` linear part is added."""
        mu = np.asarray(mu, dtype=float).reshape(-1)
        n = len(mu)
        r = len(F) - 1 if r is None else r
        series = []
        for j in range(r + 1):
            terms = dict(F[j]) if j < len(F) else {}
            terms = {tuple(int(e) for e in (k if isinstance(k, tuple) else (k,))): v
                     for k, v in terms.items()}
            if j == 0:
                for i in range(n):
                    unit = tuple(int(i == q) for q in range(n))
                    terms.setdefault(unit, mu[i])
            cap = max(r - j, max((sum(e) for e in terms), default=0))
            series.append(FormalSeries.from_terms(n, terms, cap))
        return cls(n, float(d), r, mu, tuple(series), validate)

    @classmethod
    def case_a(cls, d: float, mu: Sequence[float], r: int = 1) -> "NormalFormData":
        return cls.from_terms(d, mu, [{}] * (r + 1), r)

    def terms(self) -> list[tuple[int, tuple, complex]]:
        """Flat list ``(j, a, c_{j,a})``."""
        out = []
        for j, Fj in enumerate(self.F):
            for (a, _), c in sorted(Fj.terms().items()):
                out.append((j, tuple(a), complex(c)))
        return out

    def validate(self) -> None:
        n = self.n
        if len(self.mu) != n:
            raise NormalFormError("mu", f"expected {n} exponents, got {len(self.mu)}")
        if np.any(self.mu <= 0):
            raise NormalFormError("mu", "exponents mu_j must be positive")
        if not self.d > 0:
            raise NormalFormError("d", "trapped length must be positive")
        if self.r < 1:
            raise NormalFormError("r", "order must be at least 1")
        if len(self.F) != self.r + 1:
            raise NormalFormError("F", f"expected F_0..F_{self.r}, got {len(self.F)} entries")
        for j, Fj in enumerate(self.F):
            if Fj.nvars != n:
                raise NormalFormError(f"F[{j}]", f"needs {n} variables")
            for (a, hp), c in Fj.terms().items():
                if sum(a) > self.r - j:
                    raise NormalFormError(f"F[{j}]", f"degree {sum(a)} exceeds r - j = {self.r - j}")
        F0 = self.F[0]
        if abs(F0.coeff((0,) * n)) > 1e-14:
            raise NormalFormError("F[0]", "F_0(0) must vanish")
        for i in range(n):
            unit = tuple(int(i == q) for q in range(n))
            c = complex(F0.coeff(unit))
            if abs(c - self.mu[i]) > 1e-12 * max(1.0, abs(self.mu[i])):
                raise NormalFormError("F[0]", f"linear coefficient of iota_{i + 1} is {c}, expected mu = {self.mu[i]}")
        if self.r >= 1:
            f10 = complex(self.F[1].coeff((0,) * n))
            if abs(f10.imag) > 1e-14 * max(1.0, abs(f10)):
                raise NormalFormError("F[1]", f"F_1(0) must be real (flux conservation); Im F_1(0) = {f10.imag:g}")

    # transformations
    def weight_filter(self, r: int) -> "NormalFormData":
        """Order-``r`` data: keep terms of weight ``j + |a| <= r``, zero-pad missing ``F_j``."""
        blocks = []
        for j in range(r + 1):
            if j < len(self.F):
                blocks.append({a: c for (a, _), c in self.F[j].terms().items() if j + sum(a) <= r})
            else:
                blocks.append({})
        return NormalFormData.from_terms(self.d, self.mu, blocks, r, self.validated)

    truncate = weight_filter

    def with_F0(self, H: FormalSeries) -> "NormalFormData":
        blocks = [{a: c for (a, _), c in H.terms().items()}] + [
            {a: c for (a, _), c in Fj.terms().items()} for Fj in self.F[1:]]
        return NormalFormData.from_terms(self.d, self.mu, blocks, self.r, self.validated)

    def F1_0(self) -> complex:
        return complex(self.F[1].coeff((0,) * self.n)) if self.r >= 1 else 0j

    # serialization
    def to_dict(self) -> dict:
        F = []
        for j, Fj in enumerate(self.F):
            terms = []
            for (a, _), c in sorted(Fj.terms().items()):
                c = complex(c)
                terms.append({"iexp": list(a), "re": c.real, "im": c.imag})
            F.append({"j": j, "terms": terms})
        return {"n": self.n, "d": self.d, "r": self.r, "mu": [float(m) for m in self.mu], "F": F}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict, validate: bool = True) -> "NormalFormData":
        try:
            n = int(data["n"])
            d = float(data["d"])
            r = int(data["r"])
            mu = [float(m) for m in data["mu"]]
            blocks = data["F"]
        except KeyError as exc:
            raise NormalFormError(str(exc.args[0]), "missing field") from exc
        except (TypeError, ValueError) as exc:
            raise NormalFormError("file", f"malformed value ({exc})") from exc
        if len(mu) != n:
            raise NormalFormError("mu", f"expected {n} exponents, got {len(mu)}")
        F = [dict() for _ in range(r + 1)]
        for block in blocks:
            j = int(block["j"])
            if not 0 <= j <= r:
                raise NormalFormError("F", f"block index j = {j} outside 0..{r}")
            for t in block.get("terms", []):
                a = tuple(int(e) for e in t["iexp"])
                if len(a) != n:
                    raise NormalFormError(f"F[{j}]", f"exponent {list(a)} has wrong length")
                F[j][a] = F[j].get(a, 0) + complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
        return cls.from_terms(d, mu, F, r, validate)

    @classmethod
    def loads(cls, text: str, validate: bool = True) -> "NormalFormData":
        return cls.from_dict(json.loads(text), validate)


# -- evaluation ------------------------------------------------------------------

def _y(alpha: tuple, ctx: _Ctx):
    return [ctx.num((2 * a + 1)) / ctx.num(2j) for a in alpha]


def _mono(y, a):
    v = 1
    for yi, ai in zip(y, a):
        if ai:
            v = v * yi ** ai
    return v


def laurent_coefficients(nf: NormalFormData, alpha, dps: int | None = None) -> list:
    """``[b_0, b_1, ..., b_r]`` of ``lam F^r(y/lam; 1/lam) = sum_m b_m lam^{1-m}``."""
    alpha = _alpha(alpha, nf.n)
    with _Ctx(dps) as ctx:
        y = _y(alpha, ctx)
        b = [ctx.num(0) for _ in range(nf.r + 1)]
        for j, a, c in nf.terms():
            m = j + sum(a)
            if m <= nf.r:
                b[m] = b[m] + ctx.num(c) * _mono(y, a)
        return b


def _check_domain(alpha: tuple, lam, bound: float) -> bool:
    ratio = sum(alpha) / abs(complex(lam))
    if ratio > bound:
        warnings.warn(f"|alpha|/|lam| = {ratio:.3g} exceeds the smallness bound {bound}",
                      DomainWarning, stacklevel=3)
        return False
    return True


def _F_parts(nf: NormalFormData, alpha: tuple, lam, ctx: _Ctx):
    """``F``, ``grad_iota F . y`` and ``d_h F`` at ``iota = y/lam``, ``h = 1/lam``."""
    lam = ctx.num(lam)
    y = _y(alpha, ctx)
    h = 1 / lam
    iota = [yi * h for yi in y]
    F = ctx.num(0)
    Fy = ctx.num(0)
    Fh = ctx.num(0)
    for j, a, c in nf.terms():
        c = ctx.num(c)
        mono = _mono(iota, a)
        hj = h ** j
        F += c * hj * mono
        # iota_i d/d iota_i (iota^a) = a_i iota^a, and y_i = lam iota_i
        Fy += c * hj * mono * sum(a) * lam
        if j:
            Fh += c * j * h ** (j - 1) * mono
    return F, Fy, Fh


def eval_F(nf: NormalFormData, alpha, lam, *, bound: float = SMALLNESS_BOUND,
           dps: int | None = None):
    """``F^r((2 alpha + 1)/(2 i lam); 1/lam)`` by direct polynomial evaluation."""
    alpha = _alpha(alpha, nf.n)
    _check_domain(alpha, lam, bound)
    with _Ctx(dps) as ctx:
        return _F_parts(nf, alpha, lam, ctx)[0]


def eval_F_decomposed(df: "DecomposedForm", alpha, lam, *, dps: int | None = None):
    """Same value assembled as ``(mu.y + F_1(0) + sum_m q_m lam^{1-m}) / lam``."""
    alpha = _alpha(alpha, df.n)
    with _Ctx(dps) as ctx:
        lam = ctx.num(lam)
        y = _y(alpha, ctx)
        total = sum((ctx.num(m) * yi for m, yi in zip(df.mu, y)), ctx.num(0)) + ctx.num(df.F1_0)
        for m in range(2, df.r + 1):
            total += df.q(m, alpha, dps) * lam ** (1 - m)
        return total / lam


def K_alpha(nf: NormalFormData, alpha, lam, *, bound: float = SMALLNESS_BOUND,
            dps: int | None = None):
    """``exp(-1/2 sum mu_i (2 alpha_i + 1) - i F_1(0) - i sum_{j>=2} lam^{1-j} q_j(alpha))``."""
    alpha = _alpha(alpha, nf.n)
    _check_domain(alpha, lam, bound)
    df = decompose(nf)
    with _Ctx(dps) as ctx:
        lam = ctx.num(lam)
        expo = -sum(ctx.real(m) * (2 * a + 1) for m, a in zip(nf.mu, alpha)) / 2
        expo = ctx.num(expo) - 1j * ctx.num(df.F1_0)
        for m in range(2, nf.r + 1):
            expo -= 1j * df.q(m, alpha, dps) * lam ** (1 - m)
        return ctx.exp(expo)


def model_function(nf: NormalFormData, alpha, lam, k: int, *, dps: int | None = None):
    """``g(lam) = 2 d lam + lam F^r(y/lam; 1/lam) - 2 pi k`` (direct evaluation)."""
    alpha = _alpha(alpha, nf.n)
    with _Ctx(dps) as ctx:
        lam = ctx.num(lam)
        F = _F_parts(nf, alpha, lam, ctx)[0]
        return 2 * ctx.real(nf.d) * lam + lam * F - 2 * ctx.pi * k


def pseudopole(k, alpha, d: float, mu):
    """``k pi/d + (i/4d) sum mu_j (2 alpha_j + 1)``; vectorized over ``k``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    alpha = _alpha(alpha, len(mu))
    im = float(np.dot(mu, 2 * np.asarray(alpha) + 1)) / (4 * d)
    k = np.asarray(k)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    out = k * (math.pi / d) + 1j * im
    return complex(out) if out.ndim == 0 else out


# -- decomposition -------------------------------------------------------------------

@dataclass(frozen=True)
class DecomposedForm:
    """``mu``, ``F_1(0)``, constants ``F_j(0)`` and ``f_j = h_j + k_{j-1}`` as polynomials in ``y``."""

    n: int
    d: float
    r: int
    mu: np.ndarray
    F1_0: complex
    Fconst: tuple
    h: tuple
    k: tuple

    def f(self, m: int) -> FormalSeries:
        return self.h[m] + self.k[m - 1]

    def q(self, m: int, alpha, dps: int | None = None):
        """``q_m(alpha) = F_m(0) + f_m((2 alpha + 1)/(2i))``."""
        alpha = _alpha(alpha, self.n)
        with _Ctx(dps) as ctx:
            y = _y(alpha, ctx)
            val = ctx.num(self.Fconst[m])
            for poly in (self.h[m], self.k[m - 1]):
                for (a, _), c in poly.terms().items():
                    val += ctx.num(c) * _mono(y, a)
            return val


def decompose(nf: NormalFormData) -> DecomposedForm:
    """Split ``F^r`` into ``mu``, ``F_1(0)``, ``F_j(0)``, ``h_j`` and ``k_j``.

    ``h_m`` is the degree-``m`` part of ``F_0``; ``k_{m-1}`` collects the
    coefficients ``c_{j,a}`` with ``j >= 1``, ``|a| >= 1`` and ``j + |a| = m``.
    """
    if nf.validated:
        nf.validate()
    n, r = nf.n, nf.r
    h = [FormalSeries.zeros(n, max(r, 1)) for _ in range(r + 1)]
    k = [FormalSeries.zeros(n, max(r, 1)) for _ in range(r + 1)]
    htab = [dict() for _ in range(r + 1)]
    ktab = [dict() for _ in range(r + 1)]
    for j, a, c in nf.terms():
        deg = sum(a)
        m = j + deg
        if m > r or deg == 0:
            continue
        if j == 0:
            if deg >= 2:
                htab[m][a] = htab[m].get(a, 0) + c
        else:
            ktab[m - 1][a] = ktab[m - 1].get(a, 0) + c
    h = tuple(FormalSeries.from_terms(n, t, max(r, 1)) for t in htab)
    k = tuple(FormalSeries.from_terms(n, t, max(r, 1)) for t in ktab)
    Fconst = tuple(complex(F.coeff((0,) * n)) for F in nf.F)
    return DecomposedForm(n, nf.d, r, nf.mu.copy(), nf.F1_0(), Fconst, h, k)


# -- strings -------------------------------------------------------------------------

@dataclass(frozen=True)
class StringExpansion:
    """``lam(alpha, k) = k sum_{j=0}^{r+1} a_j k^{-j}``."""

    alpha: tuple
    a: tuple
    d: float
    r: int

    def coefficients(self) -> np.ndarray:
        return np.array([complex(c) for c in self.a])

    def __call__(self, k):
        """Double-precision value, vectorized over ``k``."""
        k = np.asarray(k, dtype=float)
        a = self.coefficients()
        inv = 1.0 / k
        acc = np.zeros_like(k, dtype=complex) + a[-1]
        for c in a[-2::-1]:
            acc = acc * inv + c
        out = acc * k
        return complex(out) if out.ndim == 0 else out

    def evaluate_mp(self, k: int, dps: int = 50):
        with mp.workdps(dps):
            kk = mp.mpf(k)
            return sum(mp.mpc(c) * kk ** (1 - j) for j, c in enumerate(self.a))


def evaluate_strings(strings: Sequence[StringExpansion], ks) -> np.ndarray:
    """Matrix ``lam[i, k]`` for many strings at shared ``ks`` (one matrix product)."""
    ks = np.asarray(ks, dtype=float)
    width = max(len(s.a) for s in strings)
    A = np.zeros((len(strings), width), dtype=complex)
    for i, s in enumerate(strings):
        A[i, : len(s.a)] = s.coefficients()
    powers = ks[None, :] ** (1 - np.arange(width))[:, None]
    return A @ powers


def _string_coefficients(b, d, r: int, ctx: _Ctx) -> list:
    """``a_0..a_{r+1}`` from Laurent coefficients ``b`` by expansion in ``eps = 1/k``.

    With ``u = lam/k = sum a_j eps^j`` the model equation divided by ``k`` is
    ``2 d u = 2 pi - eps b_1 - sum_{j>=2} b_j eps^j u^{1-j}``; the coefficient
    of ``eps^m`` involves ``a_0..a_{m-2}`` on the right only.
    """
    dd = ctx.real(d)
    cap = r + 1
    dtype = object if ctx.mp else complex
    a = [ctx.pi / dd, -b[1] / (2 * dd)]
    for m in range(2, cap + 1):
        u = FormalSeries.from_terms(1, {(i,): a[i] for i in range(m)}, cap, dtype=dtype)
        inv = u.reciprocal()
        acc = ctx.num(0)
        power = inv  # u^{-1}
        for j in range(2, min(m, r) + 1):
            acc += b[j] * power.coeff((m - j,))
            power = power * inv
        a.append(-acc / (2 * dd))
    return a


def solve_string(df, alpha, d: float | None = None, r: int | None = None, *,
                 dps: int | None = None) -> StringExpansion:
    """Coefficients ``a_0..a_{r+1}`` of the string through ``alpha``.

    ``df`` is a :class:`DecomposedForm` or :class:`NormalFormData`.  ``r``
    defaults to the order of the data and may exceed it (missing ``q_m`` are
    zero).  ``a_0 = pi/d`` and ``a_1 = -(mu.y + F_1(0))/(2d)``.
    """
    if isinstance(df, NormalFormData):
        df = decompose(df)
    d = df.d if d is None else d
    r = df.r if r is None else r
    if r < 1:
        raise ValueError("order r must be >= 1")
    alpha = _alpha(alpha, df.n)
    with _Ctx(dps) as ctx:
        y = _y(alpha, ctx)
        b = [ctx.num(0) for _ in range(r + 1)]
        b[1] = sum((ctx.real(m) * yi for m, yi in zip(df.mu, y)), ctx.num(0)) + ctx.num(df.F1_0)
        for m in range(2, min(r, df.r) + 1):
            b[m] = df.q(m, alpha, dps)
        a = _string_coefficients(b, d, r, ctx)
    return StringExpansion(alpha, tuple(a), float(d), r)


def string_from_laurent(nf: NormalFormData, alpha, r: int | None = None, *,
                        dps: int | None = None) -> StringExpansion:
    """Same coefficients from ``b_m`` read straight off the polynomial terms (oracle route)."""
    r = nf.r if r is None else r
    alpha = _alpha(alpha, nf.n)
    b = laurent_coefficients(nf, alpha, dps)
    with _Ctx(dps) as ctx:
        b = b + [ctx.num(0)] * (r + 1 - len(b))
        a = _string_coefficients(b[: r + 1], nf.d, r, ctx)
    return StringExpansion(alpha, tuple(a), nf.d, r)


# -- Newton oracle ----------------------------------------------------------------

@dataclass(frozen=True)
class NewtonResult:
    lam: complex
    iterations: int
    residual: float
    trace: tuple = ()
    lam_mp: object = None


def newton_root(nf: NormalFormData, alpha, k: int, seed=None, *, tol: float | None = None,
                maxiter: int = 50, dps: int | None = None,
                bound: float = SMALLNESS_BOUND) -> NewtonResult:
    """Root of ``g(lam) = 2 d lam + lam F^r(y/lam; 1/lam) - 2 pi k`` by complex Newton.

    The derivative is ``g' = 2d + F - (grad_iota F . y + d_h F)/lam``.  Stops
    when ``|g| < tol k`` (``tol`` defaults to ``1e-12``, or ``10^(10 - dps)``
    in mpmath mode).  The seed defaults to the pseudopole.
    """
    alpha = _alpha(alpha, nf.n)
    if seed is None:
        seed = pseudopole(k, alpha, nf.d, nf.mu)
    _check_domain(alpha, seed, bound)
    if tol is None:
        tol = 1e-12 if dps is None else 10.0 ** (10 - dps)
    trace = []
    with _Ctx(dps) as ctx:
        lam = ctx.num(seed)
        d = ctx.real(nf.d)
        two_pi_k = 2 * ctx.pi * k
        thresh = tol * k
        for it in range(maxiter + 1):
            F, Fy, Fh = _F_parts(nf, alpha, lam, ctx)
            g = 2 * d * lam + lam * F - two_pi_k
            trace.append((complex(lam), float(abs(g))))
            if abs(g) < thresh:
                return NewtonResult(complex(lam), it, float(abs(g)), tuple(trace),
                                    lam if ctx.mp else None)
            if it == maxiter:
                break
            gp = 2 * d + F - (Fy + Fh) / lam
            if abs(gp) < nf.d:
                raise ConditioningError(f"|g'(lam)| = {float(abs(gp)):.3g} < d at lam = {complex(lam)}", trace)
            lam = lam - g / gp
    raise OracleError(f"Newton did not converge in {maxiter} iterations for alpha={alpha}, k={k}", trace)


def residual_certificate(nf, alpha, k: int, r: int | None = None, *, dps: int | None = None) -> float:
    """``|g(lam_r)|`` for the model equation of ``nf`` at the order-``r`` string value.

    ``lam_r = k sum_{j<=r+1} a_j k^{-j}`` keeps the first ``r + 2`` string
    coefficients of ``nf`` (computed at order ``max(r, nf.r)``), so the
    certificate measures how well the truncated expansion solves the fixed
    equation defined by ``nf``.
    """
    if isinstance(nf, DecomposedForm):
        raise TypeError("residual_certificate needs NormalFormData to evaluate F directly")
    r = nf.r if r is None else r
    s = solve_string(nf, alpha, r=max(r, nf.r), dps=dps)
    with _Ctx(dps) as ctx:
        kk = ctx.real(k)
        lam = sum((ctx.num(c) * kk ** (1 - j) for j, c in enumerate(s.a[: r + 2])), ctx.num(0))
        F = _F_parts(nf, s.alpha, lam, ctx)[0]
        g = 2 * ctx.real(nf.d) * lam + lam * F - 2 * ctx.pi * k
        return float(abs(g))


def multi_indices(n: int, max_norm: int) -> list[tuple]:
    """All ``alpha`` in ``N^n`` with ``|alpha| <= max_norm``, by norm then lexicographically."""
    out = []
    for m in range(max_norm + 1):
        out.extend(sorted(monomials(n, m)))
    return out


def loglog_slope(x: Iterable[float], y: Iterable[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(list(x), dtype=float))
    ly = np.log(np.asarray(list(y), dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


__all__ = [
    "NormalFormData", "DecomposedForm", "StringExpansion", "LatticeWindow", "NewtonResult",
    "NormalFormError", "DomainWarning", "OracleError", "ConditioningError", "SMALLNESS_BOUND",
    "pseudopole", "decompose", "eval_F", "eval_F_decomposed", "K_alpha", "model_function",
    "laurent_coefficients", "solve_string", "string_from_laurent", "evaluate_strings",
    "newton_root", "residual_certificate", "multi_indices", "loglog_slope",
    "is_resonance_frequency",
]
