"""Classical Birkhoff normal form of a hyperbolic symplectic germ.

The pipeline is: a map germ in aligned coordinates, then a Hamiltonian ``p``
with ``exp H_p`` equal to the germ, then a sequence of polynomial canonical
transformations removing every monomial ``x^a xi^b`` with ``a != b``.  What
survives is a function of the actions ``iota_j = x_j xi_j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .series import (
    FormalSeries,
    HamiltonianGerm,
    SymplecticMapGerm,
    hamiltonian_flow_map,
    lie_exp,
    monomials,
)

NEAR_RESONANCE = 1e-10


class ResonanceError(ValueError):
    """Exponents satisfy an integer relation that blocks normalization."""


class NearResonanceError(ResonanceError):
    """A homological divisor is numerically zero; see :func:`diophantine_check`."""


class SolverError(RuntimeError):
    """The degree-by-degree logarithm of a germ could not be solved."""


class AlignmentError(ValueError):
    """The germ's linear part is not ``diag(nu, 1/nu)``."""


@dataclass(frozen=True)
class NormalFormF0:
    """``F0(iota) = mu . iota + H(iota)`` with ``H = O(iota^2)``.

    ``H`` is a plain series in ``n`` variables whose monomial ``iota^a`` has
    weight ``|a|``; ``degree`` is the largest retained weight.
    """

    mu: np.ndarray
    H: FormalSeries
    degree: int

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        object.__setattr__(self, "mu", mu)
        if self.H.nvars != len(mu):
            raise ValueError("H must have one variable per exponent")
        for deg in (0, 1):
            for exp in monomials(len(mu), deg):
                if abs(self.H.coeff(exp)) > 1e-14 * max(1.0, self.H.max_abs()):
                    raise ValueError("H must have no constant or linear part")

    @property
    def n(self) -> int:
        return len(self.mu)

    def series(self) -> FormalSeries:
        """``F0`` itself, linear part included."""
        n = self.n
        lin = {tuple(int(i == j) for i in range(n)): m for j, m in enumerate(self.mu)}
        return FormalSeries.from_terms(n, lin, self.H.max_degree) + self.H

    def h_part(self, j: int) -> FormalSeries:
        """Homogeneous weight-``j`` component ``h_j`` of ``H``."""
        return self.H.degree_part(j)

    def __call__(self, iota):
        return self.series().evaluate(np.asarray(iota, dtype=complex))


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    witness: tuple | None = None
    value: float | None = None
    bound: float | None = None
    detail: dict = field(default_factory=dict)


def _integer_box(n: int, kmax: int) -> np.ndarray:
    grid = np.array(list(itertools.product(range(-kmax, kmax + 1), repeat=n)), dtype=np.int64)
    return grid[np.any(grid != 0, axis=1)]


def _canonical_sign(k: np.ndarray) -> tuple:
    nz = np.flatnonzero(k)
    if nz.size and k[nz[0]] < 0:
        k = -k
    return tuple(int(v) for v in k)


def non_resonance_check(mu, kmax: int) -> CheckResult:
    """Scan integer ``k`` with ``0 < |k|_inf <= kmax`` for ``k . mu ~ 0``.

    The tolerance is ``1e-12 |mu|``.  On failure the witness is the violating
    ``k`` of smallest l1 norm, signed so its first nonzero entry is positive.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise ValueError("exponents must be positive")
    if kmax < 1:
        return CheckResult(True, value=float("inf"))
    ks = _integer_box(len(mu), kmax)
    vals = np.abs(ks @ mu)
    tol = 1e-12 * np.linalg.norm(mu)
    bad = np.flatnonzero(vals <= tol)
    if bad.size:
        l1 = np.abs(ks[bad]).sum(axis=1)
        pick = bad[np.lexsort((-ks[bad][:, 0], l1))[0]]
        return CheckResult(False, witness=_canonical_sign(ks[pick]), value=float(vals[pick]),
                           bound=float(tol))
    i = int(np.argmin(vals))
    return CheckResult(True, witness=_canonical_sign(ks[i]), value=float(vals[i]), bound=float(tol))


def diophantine_check(mu, m: int, D: float, C: float) -> CheckResult:
    """Check ``|mu . (alpha - beta)| >= exp(-D m) / C`` for distinct ``|alpha|, |beta| <= m``.

    A difference ``g = alpha - beta`` is reachable iff its positive and
    negative parts each have l1 norm at most ``m``; the minimizing pair is
    reported as ``(max(g, 0), max(-g, 0))``.
    """
    if D <= 0 or C <= 0:
        raise ValueError("D and C must be positive")
    mu = np.asarray(mu, dtype=float)
    g = _integer_box(len(mu), m)
    pos = np.clip(g, 0, None).sum(axis=1)
    neg = np.clip(-g, 0, None).sum(axis=1)
    g = g[(pos <= m) & (neg <= m)]
    vals = np.abs(g @ mu)
    i = int(np.lexsort((np.abs(g).sum(axis=1), vals))[0])
    best = _canonical_sign(g[i])
    arr = np.array(best)
    alpha = tuple(int(v) for v in np.clip(arr, 0, None))
    beta = tuple(int(v) for v in np.clip(-arr, 0, None))
    bound = float(np.exp(-D * m) / C)
    return CheckResult(bool(vals[i] >= bound), witness=best, value=float(vals[i]), bound=bound,
                       detail={"alpha": alpha, "beta": beta, "margin": float(vals[i] - bound)})


# -- interpolating Hamiltonian ------------------------------------------

def _phi(omega: float, lam: float) -> float:
    """Weight of a degree-raising perturbation in ``exp(L0 + eps L1)``.

    For ``L0`` diagonal, the first-order change of ``exp(L0)`` maps an
    eigenvector of eigenvalue ``lam`` to one of eigenvalue ``omega`` with
    factor ``(e^omega - e^lam)/(omega - lam)``.
    """
    if abs(omega - lam) < 1e-12:
        return np.exp(lam)
    return (np.exp(omega) - np.exp(lam)) / (omega - lam)


def _aligned_mu(germ: SymplecticMapGerm, tol: float = 1e-8) -> np.ndarray:
    lin = germ.linear_part()
    n = germ.n
    nu = np.real(np.diag(lin)[:n])
    target = np.diag(np.concatenate([nu, 1.0 / np.where(nu == 0, np.inf, nu)]))
    scale = max(1.0, float(np.max(np.abs(lin))))
    if np.any(nu <= 1.0) or np.max(np.abs(lin - target)) > tol * scale:
        raise AlignmentError("germ linear part is not diag(nu, 1/nu) with nu > 1")
    return np.log(nu)


def interpolating_hamiltonian(germ: SymplecticMapGerm, order: int | None = None) -> HamiltonianGerm:
    """Hamiltonian ``p`` with ``exp H_p`` matching ``germ`` through degree ``order``.

    ``p`` is built one homogeneous degree at a time.  Adding ``p_m`` changes
    the time-one map first at degree ``m - 1``, linearly in ``p_m``; each
    monomial of ``p_m`` is fitted by least squares to the residual between
    the germ and the current flow at that degree.
    """
    order = germ.order if order is None else order
    if order > germ.order:
        raise ValueError(f"germ is only known to degree {germ.order}")
    n = germ.n
    dim = 2 * n
    mu = _aligned_mu(germ)
    cap = order + 1
    terms = {}
    for j in range(n):
        exp = [0] * dim
        exp[j] = exp[n + j] = 1
        terms[tuple(exp)] = mu[j]
    p = FormalSeries.from_terms(dim, terms, cap)
    target = [c.with_cap(order) for c in germ.components]
    for m in range(3, cap + 1):
        flow = hamiltonian_flow_map(HamiltonianGerm(p), order)
        resid = [(t - f).degree_part(m - 1) for t, f in zip(target, flow.components)]
        new = {}
        for mono in monomials(dim, m):
            a, b = np.array(mono[:n]), np.array(mono[n:])
            rows, rhs = [], []
            for i in range(n):
                # x_i image picks up d(p)/d(xi_i); xi_i image picks up -d(p)/d(x_i)
                if b[i] > 0:
                    out = tuple(a) + tuple(b - np.eye(n, dtype=int)[i])
                    w = _phi(float(mu @ (a - b)) + mu[i], mu[i]) * b[i]
                    rows.append(w)
                    rhs.append(resid[i].coeff(out))
                if a[i] > 0:
                    out = tuple(a - np.eye(n, dtype=int)[i]) + tuple(b)
                    w = -_phi(float(mu @ (a - b)) - mu[i], -mu[i]) * a[i]
                    rows.append(w)
                    rhs.append(resid[n + i].coeff(out))
            rows = np.array(rows, dtype=complex)
            norm = float(np.vdot(rows, rows).real)
            if norm < 1e-24:
                raise SolverError(f"homological operator is singular at monomial {mono}")
            c = np.vdot(rows, np.array(rhs, dtype=complex)) / norm
            if c != 0:
                new[mono] = c
        if new:
            p = p + FormalSeries.from_terms(dim, new, cap)
    return HamiltonianGerm(p)


def flow_residual(p: HamiltonianGerm, germ: SymplecticMapGerm, order: int | None = None) -> float:
    """Largest coefficient of ``exp H_p - germ`` through degree ``order``."""
    order = germ.order if order is None else order
    flow = hamiltonian_flow_map(p, order)
    return max((f - g.with_cap(order)).max_abs() for f, g in zip(flow.components, germ.components))


# -- normal form -------------------------------------------------------

@dataclass(frozen=True)
class BirkhoffResult:
    """Output of :func:`classical_bnf`.

    ``B`` is the normalizing transform (``p o B^{-1} = F0(x xi)``); it and its
    inverse are compositions of the time-one maps of ``generators``.
    """

    F0: NormalFormF0
    B: SymplecticMapGerm
    B_inv: SymplecticMapGerm
    generators: tuple
    normal_series: FormalSeries


def _split_degree(q: FormalSeries, m: int, mu: np.ndarray):
    """Generator removing the non-resonant part of ``q``'s degree-``m`` component."""
    n = len(mu)
    chi = {}
    for mono in monomials(2 * n, m):
        c = q.coeff(mono)
        if c == 0:
            continue
        a, b = np.array(mono[:n]), np.array(mono[n:])
        if np.array_equal(a, b):
            continue
        div = float(mu @ (a - b))
        if abs(div) < NEAR_RESONANCE:
            raise NearResonanceError(
                f"divisor mu.(a-b) = {div:.3e} at monomial {mono}; run diophantine_check")
        chi[mono] = c / div
    return chi


def classical_bnf(p: HamiltonianGerm | FormalSeries, order: int) -> BirkhoffResult:
    """Birkhoff normal form of ``p`` through weight ``order`` in the actions.

    Each degree ``m = 3 .. 2 order`` is normalized by the time-one flow of a
    homogeneous generator ``chi_m`` solving ``{p_2, chi_m} = q_m - resonant``.
    Resonant monomials (equal ``x`` and ``xi`` exponents) are kept and read
    off as ``F0``; the generators carry no resonant terms.
    """
    germ = p if isinstance(p, HamiltonianGerm) else HamiltonianGerm(p)
    mu = np.real(germ.mu).astype(float)
    n = germ.n
    dim = 2 * n
    cap = 2 * order
    if germ.p.max_degree < cap:
        raise ValueError(f"Hamiltonian known to degree {germ.p.max_degree}, need {cap}")
    check = non_resonance_check(mu, order)
    if not check.passed:
        raise ResonanceError(f"exponents resonant with k = {check.witness}")
    q = germ.p.with_cap(cap)
    gens = []
    for m in range(3, cap + 1):
        chi_terms = _split_degree(q, m, mu)
        if not chi_terms:
            continue
        chi = FormalSeries.from_terms(dim, chi_terms, cap)
        gens.append(chi)
        q = lie_exp(chi, q)
    # read off the resonant part
    H_terms = {}
    for deg in range(2, order + 1):
        for a in monomials(n, deg):
            c = q.coeff(tuple(a) + tuple(a))
            if c != 0:
                H_terms[a] = c
    H = FormalSeries.from_terms(n, H_terms, order)
    coeffs = germ.p.coeffs
    real = np.max(np.abs(np.imag(coeffs)), initial=0.0) <= 1e-12 * max(1.0, germ.p.max_abs())
    if real:
        H = FormalSeries.from_terms(n, {e: complex(v).real for (e, _), v in H.terms().items()}, order)
    F0 = NormalFormF0(mu, H, order)
    ident = [FormalSeries.variable(i, dim, cap) for i in range(dim)]
    inv_comps = list(ident)
    for chi in gens:
        inv_comps = [lie_exp(chi, c) for c in inv_comps]
    fwd = list(ident)
    for chi in reversed(gens):
        fwd = [lie_exp(chi, c, sign=-1.0) for c in fwd]
    B = SymplecticMapGerm(n, tuple(fwd), cap)
    B_inv = SymplecticMapGerm(n, tuple(inv_comps), cap)
    return BirkhoffResult(F0, B, B_inv, tuple(gens), q)


def iota_to_phase(F: FormalSeries, degree: int | None = None) -> FormalSeries:
    """Substitute ``iota_j = x_j xi_j`` into a series in the actions."""
    n = F.nvars
    cap = 2 * (F.max_degree if degree is None else degree)
    terms = {}
    for (a, hp), c in F.terms().items():
        if hp == 0 and 2 * sum(a) <= cap:
            terms[tuple(a) + tuple(a)] = c
    return FormalSeries.from_terms(2 * n, terms, cap)


__all__ = [
    "NormalFormF0", "CheckResult", "BirkhoffResult", "ResonanceError", "NearResonanceError",
    "SolverError", "AlignmentError", "non_resonance_check", "diophantine_check",
    "interpolating_hamiltonian", "flow_residual", "classical_bnf", "iota_to_phase",
]
