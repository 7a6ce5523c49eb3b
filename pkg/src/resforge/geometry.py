"""Planar two-obstacle billiard: trapped ray, billiard map, germs and escape data.

Boundary curves are stored as trigonometric polynomials ``gamma(t)`` on
``[0, 2 pi)`` traversed counterclockwise, so every derivative is available in
closed form.  Phase points ``(s, xi)`` live on the cotangent bundle of the
first boundary: ``s`` is arc length from ``t = 0`` and ``xi`` is the cosine
between the outgoing ray and the unit tangent.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .series import FormalSeries, SymplecticMapGerm, all_exponents

try:  # Python < 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

GLANCING_TOL = 1e-9
OK, ESCAPED, GLANCING = 0, 1, 2
STENCIL_RADII = (1e-2, 5e-3, 2.5e-3)


class GeometryError(ValueError):
    """Invalid obstacle configuration (non-convex, overlapping, malformed)."""


class CertificationError(RuntimeError):
    """The trapped ray could not be certified as the global distance minimizer."""


class GlancingError(RuntimeError):
    """A ray meets a boundary tangentially."""


class HyperbolicityError(RuntimeError):
    """The linearized return map is not strictly hyperbolic."""


class GermExtractionError(RuntimeError):
    """Stencil fits of the return map disagree beyond tolerance."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


class _Escaped:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "ESCAPED"

    def __bool__(self):
        return False


ESCAPED_POINT = _Escaped()


@dataclass(frozen=True)
class PhasePoint:
    s: float
    xi: float


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# -- curves ----------------------------------------------------------------

class BoundaryCurve:
    """Closed strictly convex analytic curve ``gamma(t) = Re sum_m C_m e^{imt}``.

    ``coef`` has shape ``(M + 1, 2)``: complex Fourier weights of the x and y
    coordinates.  Use :meth:`ellipse`, :meth:`circle` or :meth:`fourier`.
    """

    def __init__(self, coef: np.ndarray, desc: dict):
        self.coef = np.asarray(coef, dtype=complex)
        self.desc = dict(desc)
        self.modes = np.arange(self.coef.shape[0])
        grid = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        kappa = self.curvature(grid)
        if not np.all(np.isfinite(kappa)) or np.min(kappa) <= 0:
            raise GeometryError(f"curve is not strictly convex (min curvature {np.min(kappa):.3e})")

    # constructors
    @classmethod
    def ellipse(cls, center=(0.0, 0.0), semiaxes=(1.0, 1.0), rotation: float = 0.0) -> "BoundaryCurve":
        a, b = map(float, semiaxes)
        if not (a >= b > 0):
            raise GeometryError(f"ellipse needs semiaxes a >= b > 0, got {semiaxes}")
        R = _rot(rotation)
        coef = np.zeros((2, 2), dtype=complex)
        coef[0] = center
        # (a cos t, b sin t) -> cos weight a, sin weight b (C = A - iB)
        coef[1] = R @ np.array([a, 0.0]) - 1j * (R @ np.array([0.0, b]))
        desc = {"curve": "ellipse", "center": list(map(float, center)),
                "semiaxes": [a, b], "rotation": float(rotation)}
        return cls(coef, desc)

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius: float = 1.0) -> "BoundaryCurve":
        return cls.ellipse(center, (radius, radius), 0.0)

    @classmethod
    def fourier(cls, c0: float, coeffs: Sequence = (), center=(0.0, 0.0),
                rotation: float = 0.0) -> "BoundaryCurve":
        """Radial curve ``r(t) (cos t, sin t)`` with ``r = c0 + sum a_m cos mt + b_m sin mt``."""
        if c0 <= 0:
            raise GeometryError("fourier curve needs c0 > 0")
        ab = np.asarray(coeffs, dtype=float).reshape(-1, 2) if len(coeffs) else np.zeros((0, 2))
        M = ab.shape[0]
        # r(t) as complex exponential weights r = sum_{|m|<=M} R_m e^{imt}
        R = np.zeros(2 * M + 1, dtype=complex)
        R[M] = c0
        for m in range(1, M + 1):
            a, b = ab[m - 1]
            R[M + m] = (a - 1j * b) / 2
            R[M - m] = (a + 1j * b) / 2
        # x = r cos t = r (e^{it} + e^{-it})/2, y = r sin t = r (e^{it} - e^{-it})/(2i)
        full_x = np.zeros(2 * M + 3, dtype=complex)
        full_y = np.zeros(2 * M + 3, dtype=complex)
        full_x[2:] += R / 2
        full_x[:-2] += R / 2
        full_y[2:] += R / 2j
        full_y[:-2] -= R / 2j
        off = M + 1
        coef = np.zeros((M + 2, 2), dtype=complex)
        rot = _rot(rotation)
        for m in range(M + 2):
            vec = np.array([full_x[off + m], full_y[off + m]])
            if m == 0:
                w = vec
            else:
                w = 2 * vec  # Re-form: C_m e^{imt} + conj(C_m) e^{-imt} = 2 Re(C_m e^{imt})
            coef[m] = rot @ w
        coef[0] = np.real(coef[0]) + np.asarray(center, dtype=float)
        desc = {"curve": "fourier", "c0": float(c0), "coeffs": ab.tolist(),
                "center": list(map(float, center)), "rotation": float(rotation)}
        return cls(coef, desc)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundaryCurve":
        kind = data.get("curve")
        try:
            if kind == "ellipse":
                return cls.ellipse(data.get("center", (0.0, 0.0)), data["semiaxes"],
                                   float(data.get("rotation", 0.0)))
            if kind == "circle":
                return cls.circle(data.get("center", (0.0, 0.0)), float(data["radius"]))
            if kind == "fourier":
                return cls.fourier(float(data["c0"]), data.get("coeffs", []),
                                   data.get("center", (0.0, 0.0)), float(data.get("rotation", 0.0)))
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed {kind} curve: missing or invalid field {exc}") from exc
        raise GeometryError(f"unknown curve type {kind!r}")

    def to_dict(self) -> dict:
        return dict(self.desc)

    def moved(self, rotation: float = 0.0, shift=(0.0, 0.0)) -> "BoundaryCurve":
        """Image under the rigid motion ``z -> R z + shift`` (same parametrization)."""
        R = _rot(rotation)
        coef = self.coef @ R.T
        coef[0] = coef[0] + np.asarray(shift, dtype=float)
        desc = dict(self.desc, moved={"rotation": rotation, "shift": list(shift)})
        return BoundaryCurve(coef, desc)

    # evaluation
    def derivative(self, t, k: int = 0) -> np.ndarray:
        """``d^k gamma / dt^k`` with trailing axis of length 2."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * np.multiply.outer(t, self.modes))
        w = (1j * self.modes) ** k
        return np.real(phase @ (w[:, None] * self.coef))

    def position(self, t) -> np.ndarray:
        return self.derivative(t, 0)

    def speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.derivative(t, 1), axis=-1)

    def tangent(self, t) -> np.ndarray:
        d = self.derivative(t, 1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, t) -> np.ndarray:
        """Outward unit normal."""
        T = self.tangent(t)
        return np.stack([T[..., 1], -T[..., 0]], axis=-1)

    def curvature(self, t) -> np.ndarray:
        d1 = self.derivative(t, 1)
        d2 = self.derivative(t, 2)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    # arc length via the Fourier series of the speed
    @cached_property
    def _speed_modes(self) -> np.ndarray:
        N = 4096
        t = np.linspace(0.0, 2 * np.pi, N, endpoint=False)
        F = np.fft.rfft(self.speed(t)) / N
        c = np.zeros(N // 2, dtype=complex)
        c[0] = F[0].real
        c[1:] = 2 * F[1:N // 2]
        keep = np.abs(c) > 1e-17 * abs(c[0])
        last = int(np.max(np.flatnonzero(keep))) + 1
        return c[:last]

    @property
    def length(self) -> float:
        return float(2 * np.pi * self._speed_modes[0].real)

    def arclength_derivative(self, t, k: int) -> np.ndarray:
        """``d^k s/dt^k`` for ``k >= 0`` where ``s(0) = 0``."""
        t = np.asarray(t, dtype=float)
        c = self._speed_modes
        m = np.arange(len(c))
        if k == 0:
            phase = np.exp(1j * np.multiply.outer(t, m[1:]))
            osc = np.real(phase @ (c[1:] / (1j * m[1:]))) - np.real(np.sum(c[1:] / (1j * m[1:])))
            return c[0].real * t + osc
        phase = np.exp(1j * np.multiply.outer(t, m))
        return np.real(phase @ (c * (1j * m) ** (k - 1)))

    def arclength(self, t) -> np.ndarray:
        return self.arclength_derivative(t, 0)

    def param_of_arclength(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        L = self.length
        turns = np.floor(s / L)
        r = s - turns * L
        t = 2 * np.pi * r / L
        for _ in range(60):
            step = (self.arclength(t) - r) / self.speed(t)
            t = t - step
            if np.all(np.abs(step) < 1e-15):
                break
        return t + 2 * np.pi * turns

    # tangent-angle table for support points
    @cached_property
    def _angle_table(self):
        N = 8192
        t = np.linspace(0.0, 2 * np.pi, N + 1)
        d = self.derivative(t, 1)
        ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
        return t, ang

    def support_param(self, angle) -> np.ndarray:
        """Parameter where the tangent has direction ``angle`` (vectorized)."""
        t_tab, a_tab = self._angle_table
        a0 = a_tab[0]
        a = a0 + np.mod(np.asarray(angle, dtype=float) - a0, 2 * np.pi)
        t = np.interp(a, a_tab, t_tab)
        for _ in range(8):
            d1 = self.derivative(t, 1)
            cur = np.arctan2(d1[..., 1], d1[..., 0])
            err = np.angle(np.exp(1j * (cur - a)))
            rate = self.curvature(t) * np.linalg.norm(d1, axis=-1)
            t = t - err / rate
        return t

    def contains(self, point) -> bool:
        t = np.linspace(0.0, 2 * np.pi, 720, endpoint=False)
        g = self.position(t)
        d = self.derivative(t, 1)
        rel = np.asarray(point, dtype=float) - g
        return bool(np.all(d[:, 0] * rel[:, 1] - d[:, 1] * rel[:, 0] > 0))


# -- ray / curve intersection ----------------------------------------------

def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _bracket_root(curve: BoundaryCurve, P, W, lo, hi):
    """Root of ``cross(W, gamma(t) - P)`` in ``[lo, hi]`` (sign change assumed)."""
    f_lo = _cross(W, curve.position(lo) - P)
    t = 0.5 * (lo + hi)
    for _ in range(100):
        g = curve.position(t)
        f = _cross(W, g - P)
        fp = _cross(W, curve.derivative(t, 1))
        same = np.sign(f) == np.sign(f_lo)
        lo = np.where(same, t, lo)
        f_lo = np.where(same, f, f_lo)
        hi = np.where(same, hi, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = t - f / fp
        ok = (newton > np.minimum(lo, hi)) & (newton < np.maximum(lo, hi)) & np.isfinite(newton)
        t_new = np.where(ok, newton, 0.5 * (lo + hi))
        done = np.abs(t_new - t) < 1e-15
        t = t_new
        if np.all(done):
            break
    return t


def ray_hit(curve: BoundaryCurve, P, W):
    """First intersection of rays ``P + tau W`` (``tau > 0``) with ``curve``.

    Returns ``(t, status)`` arrays; status is ``OK``, ``ESCAPED`` (no forward
    intersection) or ``GLANCING`` (``|<W, n>| < GLANCING_TOL`` at the hit).
    The two tangency points of lines parallel to ``W`` bracket the entry and
    exit roots, which are then refined by safeguarded Newton.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    psi = np.arctan2(W[:, 1], W[:, 0])
    ta = curve.support_param(psi)
    tb = curve.support_param(psi + np.pi)
    tb = ta + np.mod(tb - ta, 2 * np.pi)
    fa = _cross(W, curve.position(ta) - P)
    fb = _cross(W, curve.position(tb) - P)
    n = P.shape[0]
    t_out = np.full(n, np.nan)
    status = np.full(n, ESCAPED, dtype=np.int8)
    crossing = fa * fb < 0
    tangent_line = (~crossing) & (np.minimum(np.abs(fa), np.abs(fb)) < 1e-14)
    idx = np.flatnonzero(crossing)
    if idx.size:
        r1 = _bracket_root(curve, P[idx], W[idx], ta[idx], tb[idx])
        r2 = _bracket_root(curve, P[idx], W[idx], tb[idx], ta[idx] + 2 * np.pi)
        n1 = curve.normal(r1)
        entry_first = np.sum(n1 * W[idx], axis=-1) < 0
        tr = np.where(entry_first, r1, r2)
        g = curve.position(tr)
        tau = np.sum((g - P[idx]) * W[idx], axis=-1)
        cosang = np.sum(curve.normal(tr) * W[idx], axis=-1)
        ahead = tau > 0
        t_out[idx] = np.mod(tr, 2 * np.pi)
        st = np.where(ahead, OK, ESCAPED)
        st = np.where(ahead & (np.abs(cosang) < GLANCING_TOL), GLANCING, st)
        status[idx] = st
    tidx = np.flatnonzero(tangent_line)
    if tidx.size:
        tt = np.where(np.abs(fa[tidx]) < np.abs(fb[tidx]), ta[tidx], tb[tidx])
        tau = np.sum((curve.position(tt) - P[tidx]) * W[tidx], axis=-1)
        status[tidx] = np.where(tau > 0, GLANCING, ESCAPED)
        t_out[tidx] = np.mod(tt, 2 * np.pi)
    return t_out, status


# -- obstacle pair -----------------------------------------------------------

@dataclass(frozen=True)
class ObstaclePair:
    """Two disjoint convex obstacles and their trapped ray ``a1 -> a2``."""

    omega1: BoundaryCurve
    omega2: BoundaryCurve
    d: float
    t1: float
    t2: float
    foot1: np.ndarray
    foot2: np.ndarray
    normality_residual: float = 0.0

    @property
    def s1(self) -> float:
        """Arc-length coordinate of the first foot on the first boundary."""
        return float(self.omega1.arclength(self.t1))

    @property
    def a1(self) -> float:
        return self.t1

    @property
    def a2(self) -> float:
        return self.t2

    @property
    def fixed_point(self) -> PhasePoint:
        return PhasePoint(self.s1, 0.0)


def trapped_ray(omega1: BoundaryCurve, omega2: BoundaryCurve, grid: int = 720) -> ObstaclePair:
    """Shortest segment between the two boundaries, certified doubly normal."""
    t = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
    g1 = omega1.position(t)
    g2 = omega2.position(t)
    if omega1.contains(g2[0]) or omega2.contains(g1[0]):
        raise GeometryError("obstacles overlap: one boundary lies inside the other")
    diff = g1[:, None, :] - g2[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    i, j = np.unravel_index(int(np.argmin(dist2)), dist2.shape)
    grid_min = math.sqrt(dist2[i, j])
    scale = max(np.ptp(g1, axis=0).max(), np.ptp(g2, axis=0).max())
    inside = np.array([omega2.contains(p) for p in g1[::36]])
    if grid_min < 1e-9 * scale or inside.any():
        raise GeometryError(f"obstacles overlap or touch (grid distance {grid_min:.3e})")
    x = np.array([t[i], t[j]])
    hstep = 2 * np.pi / grid
    for _ in range(100):
        p1, p2 = omega1.derivative(x[0]), omega2.derivative(x[1])
        d1, d2 = omega1.derivative(x[0], 1), omega2.derivative(x[1], 1)
        dd1, dd2 = omega1.derivative(x[0], 2), omega2.derivative(x[1], 2)
        D = p1 - p2
        grad = np.array([D @ d1, -D @ d2])
        hess = np.array([[d1 @ d1 + D @ dd1, -(d1 @ d2)], [-(d1 @ d2), d2 @ d2 - D @ dd2]])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise CertificationError("singular Hessian while refining the trapped ray") from exc
        step = np.clip(step, -hstep, hstep)
        x = x - step
        if np.max(np.abs(step)) < 1e-15:
            break
    x = np.mod(x, 2 * np.pi)
    a1, a2 = omega1.position(x[0]), omega2.position(x[1])
    seg = a2 - a1
    d = float(np.linalg.norm(seg))
    res = max(abs(seg @ omega1.tangent(x[0])), abs(seg @ omega2.tangent(x[1])))
    outward = seg @ omega1.normal(x[0]) > 0 and seg @ omega2.normal(x[1]) < 0
    if res > 1e-10 * d or not outward or d > grid_min + 1e-12 * scale:
        raise CertificationError(
            f"trapped ray not certified: normality residual {res:.3e}, d = {d!r}, grid min = {grid_min!r}")
    return ObstaclePair(omega1, omega2, d, float(x[0]), float(x[1]), a1, a2, float(res))


# -- billiard map ------------------------------------------------------------

def _outgoing(curve: BoundaryCurve, t, xi):
    T = curve.tangent(t)
    N = np.stack([T[..., 1], -T[..., 0]], axis=-1)
    xi = np.asarray(xi, dtype=float)
    return xi[..., None] * T + np.sqrt(np.clip(1 - xi ** 2, 0, None))[..., None] * N


def billiard_map_batch(P: ObstaclePair, s, xi):
    """Vectorized billiard map ``kappa``; returns ``(s', xi', status)``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = s.size
    out_s = np.full(n, np.nan)
    out_xi = np.full(n, np.nan)
    status = np.full(n, ESCAPED, dtype=np.int8)
    bad = np.abs(xi) >= 1
    status[bad] = GLANCING
    idx = np.flatnonzero(~bad)
    if not idx.size:
        return out_s, out_xi, status
    c1, c2 = P.omega1, P.omega2
    t = c1.param_of_arclength(s[idx])
    start = c1.position(t)
    W = _outgoing(c1, t, xi[idx])
    u, st = ray_hit(c2, start, W)
    status[idx] = st
    go = st == OK
    idx, start, W, u = idx[go], start[go], W[go], u[go]
    if not idx.size:
        return out_s, out_xi, status
    Q = c2.position(u)
    n2 = c2.normal(u)
    W2 = W - 2 * np.sum(W * n2, axis=-1)[:, None] * n2
    v, st = ray_hit(c1, Q, W2)
    status[idx] = st
    go = st == OK
    idx, W2, v = idx[go], W2[go], v[go]
    out_s[idx] = np.mod(c1.arclength(v), c1.length)
    out_xi[idx] = np.sum(W2 * c1.tangent(v), axis=-1)
    return out_s, out_xi, status


def inverse_map_batch(P: ObstaclePair, s, xi):
    """``kappa^{-1} = R kappa R`` with the momentum reversal ``R(s, xi) = (s, -xi)``.

    Reversing the outgoing momentum at ``s'`` and tracing forward retraces
    the orbit backwards; the arrival momentum is reversed again.
    """
    s2, xi2, st = billiard_map_batch(P, s, -np.asarray(xi, dtype=float))
    return s2, -xi2, st


def billiard_map(P: ObstaclePair, rho: PhasePoint):
    """Image of one phase point, or ``ESCAPED_POINT``; glancing raises."""
    s2, xi2, st = billiard_map_batch(P, [rho.s], [rho.xi])
    if st[0] == GLANCING:
        raise GlancingError(f"glancing incidence from {rho}")
    if st[0] == ESCAPED:
        return ESCAPED_POINT
    return PhasePoint(float(s2[0]), float(xi2[0]))


def inverse_billiard_map(P: ObstaclePair, rho: PhasePoint):
    out = billiard_map(P, PhasePoint(rho.s, -rho.xi))
    if out is ESCAPED_POINT:
        return out
    return PhasePoint(out.s, -out.xi)


def _wrap(ds, L):
    return (ds + 0.5 * L) % L - 0.5 * L


# -- linearization -------------------------------------------------------------

@dataclass(frozen=True)
class Linearization:
    nu: float
    jacobian: np.ndarray
    det: float
    step_agreement: float
    unstable: np.ndarray
    stable: np.ndarray

    @property
    def mu(self) -> float:
        return math.log(self.nu)


def _jacobian(P: ObstaclePair, s0: float, xi0: float, h: float) -> np.ndarray:
    L = P.omega1.length
    pts_s = np.array([s0 + h, s0 - h, s0, s0])
    pts_xi = np.array([xi0, xi0, xi0 + h, xi0 - h])
    s2, xi2, st = billiard_map_batch(P, pts_s, pts_xi)
    if np.any(st != OK):
        raise GeometryError("finite-difference stencil leaves the domain of the billiard map")
    J = np.empty((2, 2))
    J[0, 0] = _wrap(s2[0] - s2[1], L) / (2 * h)
    J[1, 0] = (xi2[0] - xi2[1]) / (2 * h)
    J[0, 1] = _wrap(s2[2] - s2[3], L) / (2 * h)
    J[1, 1] = (xi2[2] - xi2[3]) / (2 * h)
    return J


def numerical_jacobian(P: ObstaclePair, s0: float, xi0: float, h: float = 1e-3) -> np.ndarray:
    """Richardson-extrapolated central-difference Jacobian of ``kappa`` at ``(s0, xi0)``."""
    return (4 * _jacobian(P, s0, xi0, h / 2) - _jacobian(P, s0, xi0, h)) / 3


def poincare_linearization(P: ObstaclePair, h: float = 2e-4) -> Linearization:
    """``D kappa`` at the fixed point and its eigenvalue ``nu > 1``.

    The Richardson Jacobian is formed at steps ``h``, ``h/2``, ``h/4``; the
    reported agreement is the largest entry change across the three.
    """
    s0 = P.s1
    Js = [numerical_jacobian(P, s0, 0.0, h / 2 ** i) for i in range(3)]
    agree = max(np.max(np.abs(Js[i + 1] - Js[i])) for i in range(2))
    J = Js[-1]
    return _linearization_from(J, agree)


def _linearization_from(J: np.ndarray, agree: float = 0.0) -> Linearization:
    tr, det = np.trace(J), np.linalg.det(J)
    disc = tr * tr / 4 - det
    if disc <= 0 or abs(tr) <= 2:
        raise HyperbolicityError(f"eigenvalues of D kappa are not real and off the unit circle (trace {tr:.6g})")
    lam = tr / 2 + math.copysign(math.sqrt(disc), tr)
    if lam <= 1:
        raise HyperbolicityError(f"leading eigenvalue {lam:.6g} is not > 1")
    vu = _eigvec(J, lam)
    vs = _eigvec(J, det / lam)
    return Linearization(float(lam), J, float(det), float(agree), vu, vs)


def _eigvec(J, lam):
    A = J - lam * np.eye(2)
    v = np.array([-A[0, 1], A[0, 0]]) if abs(A[0, 0]) + abs(A[0, 1]) > abs(A[1, 0]) + abs(A[1, 1]) \
        else np.array([-A[1, 1], A[1, 0]])
    return v / np.linalg.norm(v)


def aligned_frame(lin: Linearization) -> np.ndarray:
    """Columns ``(e_u, e_s)`` with ``det = 1`` and ``e_s = c R e_u``, ``|c| = 1``.

    Here ``R(ds, xi) = (ds, -xi)`` reverses momentum.  With this balancing the
    reversal acts in aligned coordinates as ``(x, xi) -> sign (xi, x)``.
    """
    u = lin.unstable.copy()
    if u[0] < 0:
        u = -u
    u = u / math.sqrt(2 * abs(u[0] * u[1]))
    c = -1.0 / (2 * u[0] * u[1])
    es = c * np.array([u[0], -u[1]])
    return np.column_stack([u, es])


def reversal_sign(frame: np.ndarray) -> float:
    """``+1`` if time reversal is ``(x, xi) -> (xi, x)``, ``-1`` for ``(-xi, -x)``."""
    u = frame[:, 0]
    return float(np.sign(-1.0 / (2 * u[0] * u[1])))


# -- Taylor germ -----------------------------------------------------------------

def _jet_compose(derivs, delta_powers):
    """``sum_j f^{(j)}(t0) delta^j / j!`` given precomputed ``delta^j / j!``."""
    out = delta_powers[0] * float(derivs[0])
    for j in range(1, len(delta_powers)):
        out = out + delta_powers[j] * float(derivs[j])
    return out


def _delta_powers(delta: FormalSeries, D: int):
    one = FormalSeries.constant(1.0, delta.nvars, delta.max_degree)
    pw = [one]
    for j in range(1, D + 1):
        pw.append(pw[-1] * delta * (1.0 / j))
    return pw


def _series_pow(a: FormalSeries, p: float, D: int) -> FormalSeries:
    a0 = complex(a.coeff((0,) * a.nvars)).real
    u = (a - a0) * (1.0 / a0)
    out = FormalSeries.constant(1.0, a.nvars, a.max_degree)
    term = out
    coef = 1.0
    for j in range(1, D + 1):
        coef *= (p - j + 1) / j
        term = term * u
        out = out + term * coef
    return out * a0 ** p


class _JetCurve:
    """Curve quantities at a series-valued parameter ``t0 + delta``."""

    def __init__(self, curve: BoundaryCurve, t0: float, delta: FormalSeries, D: int):
        pw = _delta_powers(delta, D + 2)
        self.pw = pw
        dk = [curve.derivative(t0, k) for k in range(D + 5)]
        self.x = [_jet_compose([dk[k + j][0] for j in range(D + 3)], pw) for k in range(2)]
        self.y = [_jet_compose([dk[k + j][1] for j in range(D + 3)], pw) for k in range(2)]
        self.s = _jet_compose([curve.arclength_derivative(t0, j) for j in range(D + 3)], pw)
        self.ds = _jet_compose([curve.arclength_derivative(t0, j + 1) for j in range(D + 3)], pw)
        inv_speed = _series_pow(self.x[1] * self.x[1] + self.y[1] * self.y[1], -0.5, D)
        self.T = (self.x[1] * inv_speed, self.y[1] * inv_speed)
        self.N = (self.T[1], self.T[0] * -1.0)


def _jet_root(curve, t0, P, W, D):
    """Series ``delta`` with ``cross(W, gamma(t0 + delta) - P) = 0``."""
    delta = FormalSeries.zeros(P[0].nvars, D)
    for _ in range(int(math.ceil(math.log2(D + 1))) + 3):
        J = _JetCurve(curve, t0, delta, D)
        f = W[0] * (J.y[0] - P[1]) - W[1] * (J.x[0] - P[0])
        fp = W[0] * J.y[1] - W[1] * J.x[1]
        delta = delta - f * fp.reciprocal()
    return delta


def _germ_by_jets(P: ObstaclePair, frame: np.ndarray, order: int) -> SymplecticMapGerm:
    D = order
    c1, c2 = P.omega1, P.omega2
    X = FormalSeries.variable(0, 2, D)
    Xi = FormalSeries.variable(1, 2, D)
    ds = X * frame[0, 0] + Xi * frame[0, 1]
    xi = X * frame[1, 0] + Xi * frame[1, 1]
    # parameter of s1 + ds on the first curve
    delta = FormalSeries.zeros(2, D)
    for _ in range(int(math.ceil(math.log2(D + 1))) + 3):
        J = _JetCurve(c1, P.t1, delta, D)
        delta = delta - (J.s - (ds + P.s1)) * J.ds.reciprocal()
    J1 = _JetCurve(c1, P.t1, delta, D)
    root = _series_pow(1.0 - xi * xi, 0.5, D)
    W = (xi * J1.T[0] + root * J1.N[0], xi * J1.T[1] + root * J1.N[1])
    Pt = (J1.x[0], J1.y[0])
    du = _jet_root(c2, P.t2, Pt, W, D)
    J2 = _JetCurve(c2, P.t2, du, D)
    dot = W[0] * J2.N[0] + W[1] * J2.N[1]
    W2 = (W[0] - J2.N[0] * dot * 2.0, W[1] - J2.N[1] * dot * 2.0)
    dv = _jet_root(c1, P.t1, (J2.x[0], J2.y[0]), W2, D)
    J3 = _JetCurve(c1, P.t1, dv, D)
    s_new = J3.s - P.s1
    xi_new = W2[0] * J3.T[0] + W2[1] * J3.T[1]
    inv = np.linalg.inv(frame)
    comps = (s_new * inv[0, 0] + xi_new * inv[0, 1], s_new * inv[1, 0] + xi_new * inv[1, 1])
    comps = tuple(_real_series(c) for c in comps)
    return SymplecticMapGerm(1, comps, order)


def _real_series(s: FormalSeries) -> FormalSeries:
    """Real parts, dropping round-off below ``1e-15 A^|e|`` (``A`` = coefficient growth rate)."""
    terms = {e: complex(v).real for (e, _), v in s.terms().items()}
    growth = max((abs(v) ** (1.0 / sum(e)) for e, v in terms.items() if sum(e) > 0), default=1.0)
    terms = {e: v for e, v in terms.items() if abs(v) > 1e-15 * max(growth, 1.0) ** sum(e)}
    return FormalSeries.from_terms(s.nvars, terms, s.max_degree)


def _fit_stencil(P: ObstaclePair, frame: np.ndarray, radius: float, degree: int):
    K = degree + 4
    nodes = np.cos(np.pi * (np.arange(K) + 0.5) / K)
    U, V = np.meshgrid(nodes, nodes, indexing="ij")
    U, V = U.ravel(), V.ravel()
    pts = frame @ np.vstack([U * radius, V * radius])
    s2, xi2, st = billiard_map_batch(P, P.s1 + pts[0], pts[1])
    if np.any(st != OK):
        raise GermExtractionError(f"stencil of radius {radius} leaves the domain of kappa")
    out = np.linalg.solve(frame, np.vstack([_wrap(s2 - P.s1, P.omega1.length), xi2]))
    exps = list(all_exponents(2, degree))
    V_ = np.column_stack([U ** a * V ** b for a, b in exps])
    coef, *_ = np.linalg.lstsq(V_, out.T, rcond=None)
    scale = np.array([radius ** (a + b) for a, b in exps])
    return exps, coef / scale[:, None]


def kappa_germ(P: ObstaclePair, order: int, method: str = "fit",
               radii: Sequence[float] = STENCIL_RADII, rtol: float = 1e-6,
               lin: Linearization | None = None) -> SymplecticMapGerm:
    """Taylor germ of ``kappa`` at the fixed point in aligned symplectic coordinates.

    ``method="fit"`` fits polynomials of degree ``order + 9`` to map samples on
    nested Chebyshev stencils and accepts the finer fit of the first
    consecutive pair agreeing to ``rtol`` (relative, floored at 1) for every
    coefficient through ``order``.  Round-off in a degree-``k`` coefficient
    scales like ``eps / radius^k``, so high orders need ``method="jet"``,
    which propagates truncated Taylor series through the ray tracing.
    """
    if not 1 <= order <= 8:
        raise ValueError("order must be between 1 and 8")
    lin = lin or poincare_linearization(P)
    frame = aligned_frame(lin)
    if method == "jet":
        # exact Jacobian from the degree-1 jet in (ds, xi) coordinates
        lin1 = _germ_by_jets(P, np.eye(2), 1).linear_part().real
        jl = _linearization_from(lin1)
        germ = _germ_by_jets(P, aligned_frame(jl), order)
        return _clean_linear(germ, jl.nu)
    if method != "fit":
        raise ValueError(f"unknown germ method {method!r}")
    degree = order + 9
    fits = [_fit_stencil(P, frame, r, degree) for r in radii]
    exps = fits[0][0]
    keep = [i for i, e in enumerate(exps) if sum(e) <= order]
    report = {}
    for k in range(len(fits) - 1):
        a, b = fits[k][1][keep], fits[k + 1][1][keep]
        rel = np.abs(a - b) / np.maximum(np.abs(b), 1.0)
        report[(radii[k], radii[k + 1])] = float(rel.max())
        if rel.max() <= rtol:
            comps = []
            for c in range(2):
                terms = {exps[i]: b[j, c] for j, i in enumerate(keep)}
                comps.append(FormalSeries.from_terms(2, terms, order))
            return _clean_linear(SymplecticMapGerm(1, tuple(comps), order), lin.nu)
    raise GermExtractionError(
        f"stencil fits disagree beyond {rtol:g} through degree {order}: {report}", report)


def _clean_linear(germ: SymplecticMapGerm, nu: float) -> SymplecticMapGerm:
    """Replace the linear part by the exact ``diag(nu, 1/nu)`` (off-diagonals are round-off)."""
    comps = []
    for i, c in enumerate(germ.components):
        arr = {e: v for (e, _), v in c.terms().items() if sum(e) != 1}
        arr[(1, 0) if i == 0 else (0, 1)] = nu if i == 0 else 1.0 / nu
        comps.append(FormalSeries.from_terms(2, arr, germ.order))
    return SymplecticMapGerm(1, tuple(comps), germ.order)


# -- escape partition ---------------------------------------------------------------

@dataclass
class EscapePartition:
    """Forward/backward return counts on a grid; ``inf`` marks survival of all tries."""

    s: np.ndarray
    xi: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray
    glancing: np.ndarray
    N: int
    shape: tuple = field(default=())

    def omega_plus(self, j: int) -> np.ndarray:
        return (self.jplus == j) & ~self.glancing

    def omega_plus_tilde(self, j: int) -> np.ndarray:
        """Points returning at least ``j`` times."""
        return (self.jplus >= j) & ~self.glancing

    def separation(self, j: int) -> float:
        """Min distance between ``{j+ >= j+1}`` and ``{j+ < j}`` in the ``(s, xi)`` plane."""
        a = self.omega_plus_tilde(j + 1)
        b = (self.jplus < j) & ~self.glancing
        if not a.any() or not b.any():
            return math.inf
        A = np.column_stack([self.s[a], self.xi[a]])
        B = np.column_stack([self.s[b], self.xi[b]])
        d, _ = cKDTree(B).query(A)
        return float(d.min())

    def to_csv(self, path_or_buf) -> None:
        rows = ["s,xi,jplus,jminus,glancing"]
        for s, xi, jp, jm, g in zip(self.s, self.xi, self.jplus, self.jminus, self.glancing):
            rows.append(f"{s:.17g},{xi:.17g},{_count_str(jp, g)},{_count_str(jm, g)},{int(g)}")
        text = "\n".join(rows) + "\n"
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)


def _count_str(j, glancing):
    if glancing:
        return ""
    return "inf" if np.isinf(j) else str(int(j))


def _counts(P, s, xi, N, step):
    n = s.size
    count = np.zeros(n)
    glance = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    cs, cx = s.copy(), xi.copy()
    for _ in range(N + 1):
        if not alive.size:
            break
        s2, x2, st = step(P, cs, cx)
        glance[alive[st == GLANCING]] = True
        ok = st == OK
        count[alive[ok]] += 1
        alive, cs, cx = alive[ok], s2[ok], x2[ok]
    count[alive] = np.inf
    return count, glance


def escape_partition(P: ObstaclePair, s, xi, N: int, shape: tuple = ()) -> EscapePartition:
    """Forward and backward return counts for every point of a phase-space grid.

    ``s`` and ``xi`` are flat arrays of equal length (see :func:`phase_grid`).
    A count is ``j`` if the orbit escapes after exactly ``j`` returns within
    ``N + 1`` tries and ``inf`` otherwise.  Points with a glancing encounter
    are flagged and excluded from both counts.
    """
    s = np.asarray(s, dtype=float).ravel()
    xi = np.asarray(xi, dtype=float).ravel()
    if s.shape != xi.shape:
        raise ValueError("s and xi must have the same length")
    if np.any(np.abs(xi) >= 1):
        raise ValueError("grid must lie in the hyperbolic region |xi| < 1")
    jp, gp = _counts(P, s, xi, N, billiard_map_batch)
    jm, gm = _counts(P, s, xi, N, inverse_map_batch)
    g = gp | gm
    jp = np.where(g, np.nan, jp)
    jm = np.where(g, np.nan, jm)
    return EscapePartition(s, xi, jp, jm, g, N, shape)


def phase_grid(P: ObstaclePair, n_s: int, n_xi: int | None = None):
    """Flattened product grid of ``n_s`` arc-length and ``n_xi`` momentum nodes (cell centres)."""
    n_xi = n_xi or n_s
    L = P.omega1.length
    s = (np.arange(n_s) + 0.5) * L / n_s
    xi = -1 + (np.arange(n_xi) + 0.5) * 2.0 / n_xi
    S, X = np.meshgrid(s, xi, indexing="ij")
    return S.ravel(), X.ravel()


# -- escape function --------------------------------------------------------------------

def g1(x, xi, h: float):
    """Local escape function ``G1 = s/2 ln((s + x^2)/(s + xi^2))`` with ``s = h ln(1/h)``."""
    s = h * math.log(1.0 / h)
    return 0.5 * s * np.log((s + np.asarray(x) ** 2) / (s + np.asarray(xi) ** 2))


@dataclass(frozen=True)
class EscapeFunctionReport:
    h: float
    s: float
    c: float
    inner_min: float
    outer_min: float
    inner_count: int
    outer_count: int

    @property
    def passed(self) -> bool:
        inner_ok = self.inner_count == 0 or self.inner_min > 0
        outer_ok = self.outer_count == 0 or self.outer_min > 0
        return inner_ok and outer_ok


def escape_function_check(germ: SymplecticMapGerm, h: float, samples, c: float = 0.3) -> EscapeFunctionReport:
    """Growth of ``G1`` along the germ on small samples ``(x, xi)``.

    Reports the minimum of the increment divided by ``|rho|^2`` on
    ``|rho| <= c sqrt(s)`` and divided by ``h ln(1/h)`` outside that disc.
    """
    if not 0 < h <= 0.1:
        raise ValueError("h must lie in (0, 0.1]")
    pts = np.asarray(samples, dtype=float).reshape(-1, 2)
    img = np.real(germ(pts))
    s = h * math.log(1.0 / h)
    inc = g1(img[:, 0], img[:, 1], h) - g1(pts[:, 0], pts[:, 1], h)
    r2 = np.sum(pts ** 2, axis=1)
    inner = (r2 <= c * c * s) & (r2 > 0)
    outer = r2 > c * c * s
    inner_min = float(np.min(inc[inner] / r2[inner])) if inner.any() else math.inf
    outer_min = float(np.min(inc[outer] / s)) if outer.any() else math.inf
    return EscapeFunctionReport(h, s, c, inner_min, outer_min, int(inner.sum()), int(outer.sum()))


def polar_samples(r_min: float = 1e-4, r_max: float = 1e-1, n_r: int = 40, n_theta: int = 64) -> np.ndarray:
    r = np.logspace(math.log10(r_min), math.log10(r_max), n_r)
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    R, T = np.meshgrid(r, th, indexing="ij")
    return np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])


# -- obstacle files -------------------------------------------------------------------------

def parse_obstacles(data) -> tuple[BoundaryCurve, BoundaryCurve]:
    if isinstance(data, dict):
        items = data.get("obstacles")
        if items is None:
            raise GeometryError("obstacle file needs an 'obstacles' list of two curves")
    else:
        items = data
    if not isinstance(items, list) or len(items) != 2:
        raise GeometryError("obstacle file must describe exactly two curves")
    return BoundaryCurve.from_dict(items[0]), BoundaryCurve.from_dict(items[1])


def load_obstacles(path: str | os.PathLike) -> tuple[BoundaryCurve, BoundaryCurve]:
    """Read two curves from JSON or TOML (chosen by extension, JSON otherwise)."""
    path = os.fspath(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".toml"):
        data = tomllib.loads(raw.decode("utf-8"))
    else:
        data = json.loads(raw.decode("utf-8"))
    return parse_obstacles(data)


def two_circles(gap: float = 2.0, radius: float = 1.0) -> ObstaclePair:
    """Convenience fixture: equal circles on the x axis separated by ``gap``."""
    c1 = BoundaryCurve.circle((0.0, 0.0), radius)
    c2 = BoundaryCurve.circle((2 * radius + gap, 0.0), radius)
    return trapped_ray(c1, c2)


__all__ = [
    "BoundaryCurve", "ObstaclePair", "PhasePoint", "Linearization", "EscapePartition",
    "EscapeFunctionReport", "GeometryError", "CertificationError", "GlancingError",
    "HyperbolicityError", "GermExtractionError", "ESCAPED_POINT", "OK", "ESCAPED", "GLANCING",
    "ray_hit", "trapped_ray", "billiard_map", "billiard_map_batch", "inverse_billiard_map",
    "inverse_map_batch", "numerical_jacobian", "poincare_linearization", "aligned_frame",
    "reversal_sign", "kappa_germ", "escape_partition", "phase_grid", "g1",
    "escape_function_check", "polar_samples", "parse_obstacles", "load_obstacles", "two_circles",
]
