"""End-to-end exit criteria of the build.

Every test prints one ``PASS/FAIL criterion N: ...`` line; the lines are
repeated in the terminal summary under "acceptance criteria".
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest

import resforge.cli as cli
from conftest import (
    ACCEPTANCE_LINES,
    case_b,
    normal_form_germ,
    random_symplectomorphism,
    residual_fixture,
    separation_fixture,
)
from resforge.birkhoff import classical_bnf, diophantine_check, interpolating_hamiltonian
from resforge.geometry import (
    OK,
    billiard_map_batch,
    escape_function_check,
    escape_partition,
    inverse_map_batch,
    kappa_germ,
    phase_grid,
    poincare_linearization,
    polar_samples,
    two_circles,
)
from resforge.lattice import enumerate_strings, separation_report
from resforge.model import (
    LatticeWindow,
    NormalFormData,
    evaluate_strings,
    loglog_slope,
    multi_indices,
    newton_root,
    residual_certificate,
    solve_string,
)

pytestmark = pytest.mark.acceptance

SWEEP = [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6]


def verdict(n: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


# 1 ------------------------------------------------------------------------------------

def test_criterion_1_pseudopole_reduction():
    t0 = time.perf_counter()
    d = 2.0
    worst, count = 0.0, 0
    for mu in ([math.log(2)], [math.log(2), math.log(3)], [math.log(2), math.log(3), math.log(5)]):
        nf = NormalFormData.case_a(d, mu, 3)
        alphas = multi_indices(len(mu), 10)
        strings = [solve_string(nf, a) for a in alphas]
        shift = np.array([sum(m * (2 * ai + 1) for m, ai in zip(mu, a)) / (4 * d) for a in alphas])
        for start in range(1, 10 ** 6 + 1, 20000):
            ks = np.arange(start, min(start + 20000, 10 ** 6 + 1), dtype=float)
            got = evaluate_strings(strings, ks)
            # |err| / |exact| <= (|d Re| + |d Im|) / Re exact, column by column
            re = ks * math.pi / d
            d_re = np.max(np.abs(got.real - re), axis=0)
            d_im = np.max(np.abs(got.imag - shift[:, None]), axis=0)
            worst = max(worst, float(np.max((d_re + d_im) / re)))
        count += len(alphas)
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-13 and elapsed < 10,
            f"{count} strings, k <= 1e6, max rel err {worst:.2e} (<= 1e-13), {elapsed:.1f} s (< 10 s)")


# 2 ------------------------------------------------------------------------------------

def test_criterion_2_residual_decay():
    t0 = time.perf_counter()
    nf = residual_fixture()
    ok, parts, raw = True, [], []
    for r in (1, 2, 3):
        for alpha in (0, 1, 2):
            res = [residual_certificate(nf, alpha, k, r, dps=60) for k in SWEEP]
            scaled = loglog_slope(SWEEP, [v / math.log(k) ** (r + 2) for v, k in zip(res, SWEEP)])
            ok &= abs(scaled + (r + 1)) <= 0.2
            parts.append(f"r={r},a={alpha}:{scaled:+.2f}")
            raw.append(loglog_slope(SWEEP, res) + (r + 1))
    elapsed = time.perf_counter() - t0
    verdict(2, ok and elapsed < 30,
            f"scaled slopes {' '.join(parts)} (target -(r+1) +- 0.2); raw slopes deviate from "
            f"-(r+1) by at most {max(map(abs, raw)):.3f}; {elapsed:.1f} s")


# 3 ------------------------------------------------------------------------------------

def test_criterion_3_oracle_agreement():
    nf = residual_fixture()
    worst_growth, max_iter, parts = 0.0, 0, []
    for alpha in (0, 1, 2):
        s = solve_string(nf, alpha, dps=60)
        ratios = []
        for k in SWEEP:
            res = newton_root(nf, alpha, k, dps=60)
            max_iter = max(max_iter, res.iterations)
            diff = abs(s.evaluate_mp(k, 60) - res.lam_mp)
            ratios.append(float(diff * mp.mpf(k) ** 3 / mp.log(k) ** 5))
        worst_growth = max(worst_growth, max(ratios) / ratios[0])
        parts.append(f"a={alpha}:[{', '.join(f'{x:.1e}' for x in ratios)}]")
    ok = worst_growth < 10 and max_iter <= 8
    verdict(3, ok, f"ratio over k=1e3..1e6 {' '.join(parts)}; max/first {worst_growth:.2f} (< 10); "
                   f"Newton iterations <= {max_iter} (<= 8)")


# 4 ------------------------------------------------------------------------------------

def test_criterion_4_closed_form_coefficients():
    worst2 = worst3 = 0.0
    d = math.pi
    for c in (1.0, 0.45):
        nf = case_b(c, 0.0, d=d, r=3)
        for alpha in range(6):
            s = solve_string(nf, alpha)
            y = (2 * alpha + 1) / 2j
            a1, a2, a3 = (complex(v) for v in s.a[1:4])
            a2_closed = -(1 / (2 * math.pi)) * c * y ** 2
            h3 = 0.0
            a3_closed = -(d / math.pi) * a1 * a2 - h3 / math.pi ** 2
            worst2 = max(worst2, abs(a2 - a2_closed) / abs(a2_closed))
            worst3 = max(worst3, abs(a3 - a3_closed) / abs(a3_closed))
    unit = complex(solve_string(case_b(1.0, 0.0, r=2), 0).a[2])
    ok = worst2 <= 1e-12 and worst3 <= 1e-12 and abs(unit - 1 / (8 * math.pi)) <= 1e-12 / (8 * math.pi)
    verdict(4, ok, f"a2 rel err {worst2:.1e}, a3 rel err {worst3:.1e} (<= 1e-12); "
                   f"a2(c=1, alpha=0) = {unit.real:.15f} vs 1/(8 pi)")


# 5 ------------------------------------------------------------------------------------

def test_criterion_5_stability_and_polynomiality():
    full = residual_fixture()
    stab = 0.0
    for r in (1, 2, 3):
        nf = full.weight_filter(r) if r < full.r else full
        for alpha in range(4):
            lo = solve_string(nf, alpha, r=r).coefficients()
            hi = solve_string(nf, alpha, r=r + 2).coefficients()[: r + 2]
            stab = max(stab, float(np.max(np.abs(lo - hi) / np.maximum(1.0, np.abs(lo)))))
    held = 0.0
    for j in range(1, 5):
        alphas = np.arange(j + 3)
        vals = np.array([complex(solve_string(full, int(a)).a[j]) for a in alphas])
        coef = np.polyfit(alphas[: j + 1].astype(float), vals[: j + 1], j)
        for a, v in zip(alphas[j + 1:], vals[j + 1:]):
            held = max(held, abs(np.polyval(coef, float(a)) - v) / max(1.0, abs(v)))
    verdict(5, stab <= 1e-12 and held < 1e-9,
            f"a_j change between r and r+2 {stab:.1e} (<= 1e-12); held-out interpolation residual "
            f"{held:.1e} (< 1e-9) for j <= 4")


# 6 ------------------------------------------------------------------------------------

def _recovery_cases(rng):
    for _ in range(15):
        mu = [float(rng.uniform(0.5, 1.5))]
        H = {(2,): float(rng.uniform(-0.4, 0.4)), (3,): float(rng.uniform(-0.2, 0.2))}
        yield mu, H, 3
    for i in range(10):
        mu = [math.log(2), math.log(3)] if i % 2 else [math.log(3), math.log(5)]
        H = {e: float(rng.uniform(-0.2, 0.2)) for e in ((2, 0), (1, 1), (0, 2))}
        order = 3 if i >= 8 else 2
        if order == 3:
            H[(3, 0)] = float(rng.uniform(-0.1, 0.1))
            H[(1, 2)] = float(rng.uniform(-0.1, 0.1))
        yield mu, H, order


def test_criterion_6_bnf_conjugation_recovery():
    rng = np.random.default_rng(2024)
    worst, n_cases = 0.0, 0
    for mu, H, order in _recovery_cases(rng):
        if len(mu) > 1:
            assert diophantine_check(mu, 2 * order, 1.0, 1.0).passed
        germ = normal_form_germ(mu, H, 2 * order)
        phi = random_symplectomorphism(rng, len(mu), 2 * order, scale=0.4)
        conj = phi.inverse().compose(germ.compose(phi))
        got = classical_bnf(interpolating_hamiltonian(conj), order).F0.H
        expected = dict(H)
        for (a, _), v in got.terms().items():
            worst = max(worst, abs(complex(v) - expected.get(a, 0.0)))
        for a, v in H.items():
            worst = max(worst, abs(complex(got.coeff(a)) - v))
        n_cases += 1
    # h_j from the same germ at two orders
    germ = normal_form_germ([0.8], {(2,): 0.25, (3,): 0.1, (4,): -0.05}, 8)
    phi = random_symplectomorphism(rng, 1, 8)
    p = interpolating_hamiltonian(phi.inverse().compose(germ.compose(phi)))
    F3, F4 = classical_bnf(p, 3).F0, classical_bnf(p, 4).F0
    indep = max((F3.h_part(j) - F4.h_part(j).with_cap(3)).max_abs() for j in (2, 3))
    verdict(6, worst <= 1e-8 and indep <= 1e-10 and n_cases == 25,
            f"{n_cases} conjugations (n <= 2, degree <= 6), max coefficient error {worst:.1e} (<= 1e-8); "
            f"h_2, h_3 change between orders 3 and 4: {indep:.1e}")


# 7 ------------------------------------------------------------------------------------

def test_criterion_7_geometry():
    t0 = time.perf_counter()
    P = two_circles(2.0)
    lin = poincare_linearization(P)
    rng = np.random.default_rng(7)
    s = P.s1 + rng.uniform(-0.6, 0.6, 20000)
    xi = rng.uniform(-0.9, 0.9, 20000)
    s2, xi2, st = billiard_map_batch(P, s, xi)
    ok_idx = np.flatnonzero(st == OK)[:1000]
    s3, xi3, st3 = inverse_map_batch(P, s2[ok_idx], xi2[ok_idx])
    L = P.omega1.length
    ds = (s3 - s[ok_idx] + L / 2) % L - L / 2
    trip = float(max(np.abs(ds).max(), np.abs(xi3 - xi[ok_idx]).max())) if np.all(st3 == OK) else math.inf
    elapsed = time.perf_counter() - t0
    ok = (abs(P.d - 2.0) <= 1e-12 and abs(lin.det - 1) <= 1e-6 and np.isreal(lin.nu) and lin.nu > 1
          and lin.step_agreement <= 1e-7 and ok_idx.size == 1000 and trip < 1e-9 and elapsed < 5)
    verdict(7, ok, f"d - 2 = {P.d - 2:.1e}, det - 1 = {lin.det - 1:.1e}, nu = {lin.nu:.10g}, "
                   f"step agreement {lin.step_agreement:.1e}, round trip {trip:.1e} on {ok_idx.size} points, "
                   f"{elapsed:.1f} s")


# 8 ------------------------------------------------------------------------------------

def test_criterion_8_escape_structure():
    t0 = time.perf_counter()
    P = two_circles(0.3)
    s, xi = phase_grid(P, 400)
    part = escape_partition(P, s, xi, 5, shape=(400, 400))
    sizes = [int(part.omega_plus(j).sum()) for j in range(5)]
    seps = [part.separation(j) for j in range(1, 5)]
    germ = kappa_germ(P, 5, method="jet")
    samples = polar_samples(1e-4, 1e-1, 40, 64)
    reps = [escape_function_check(germ, h, samples) for h in (1e-2, 1e-3, 1e-4)]
    g_ok = all(r.inner_count and r.outer_count and r.inner_min > 0 and r.outer_min > 0 for r in reps)
    elapsed = time.perf_counter() - t0
    ok = all(sizes) and all(0 < v < math.inf for v in seps) and g_ok and elapsed < 60
    consts = ", ".join(f"h={r.h:g}: {r.inner_min:.2e}/{r.outer_min:.2e}" for r in reps)
    verdict(8, ok, f"|Omega+(j)| j=0..4 {sizes}, separations {[round(v, 4) for v in seps]}, "
                   f"G1 lower constants {consts}, {elapsed:.1f} s (< 60 s)")


# 9 ------------------------------------------------------------------------------------

def test_criterion_9_separation():
    nf = separation_fixture()
    base = np.unique(np.logspace(2, 5, 13).astype(int))
    ks = sorted(set(base) | set(base + 1))
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), int(max(ks)), ks=ks)
    rep = separation_report(recs, nf)
    re_by_k: dict[int, float] = {}
    for _, k, dev in rep.re_rows:
        re_by_k[k] = max(re_by_k.get(k, 0.0), abs(dev) * k)
    re_vals = [re_by_k[k] for k in sorted(re_by_k)]
    im_vals = [v for _, v in rep.im_scaled()]
    re_growth = max(re_vals) / re_vals[0]
    im_growth = max(im_vals) / im_vals[0]
    sep = rep.separated(10 ** 4)
    ok = re_growth < 10 and im_growth < 10 and sep
    verdict(9, ok, f"|Re gap - pi/d| k in [{min(re_vals):.1e}, {max(re_vals):.1e}], "
                   f"Im remainder k/ln^2 k in [{min(im_vals):.1e}, {max(im_vals):.1e}] (both bounded, "
                   f"Im log slope {rep.im_slope():+.2f}), "
                   f"Diophantine bound exceeds remainder for k >= 1e4: {sep}")


# 10 -----------------------------------------------------------------------------------

def _run_strings(tmp, nf_path, tag, extra=()):
    out = {}
    for fmt in ("csv", "json"):
        path = tmp / f"{tag}.{fmt}"
        argv = ["strings", str(nf_path), "--kmax", "300", "--oracle", "--format", fmt, "-o", str(path)]
        if fmt == "csv":
            argv += ["--coefficients", str(tmp / f"{tag}.coef.csv"), "--svg", str(tmp / f"{tag}.svg")]
        assert cli.main(argv + list(extra)) == 0
        out[fmt] = path.read_bytes()
    out["coef"] = (tmp / f"{tag}.coef.csv").read_bytes()
    out["svg"] = (tmp / f"{tag}.svg").read_bytes()
    return out


def test_criterion_10_determinism(tmp_path, monkeypatch, capsys):
    nf_path = tmp_path / "nf.json"
    nf_path.write_text(separation_fixture().dumps())
    first = _run_strings(tmp_path, nf_path, "a")
    second = _run_strings(tmp_path, nf_path, "b")
    monkeypatch.setenv("RESFORGE_THREADS", "4")
    threaded = _run_strings(tmp_path, nf_path, "c")
    capsys.readouterr()
    same = all(first[key] == second[key] == threaded[key] for key in first)
    verdict(10, same, f"repeated and threaded runs byte-identical for csv, json, coefficients and svg "
                      f"({', '.join(f'{k} {len(v)} B' for k, v in first.items())})")
