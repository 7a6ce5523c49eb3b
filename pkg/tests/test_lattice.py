import math

import numpy as np
import pytest

from conftest import residual_fixture, separation_fixture
from resforge.lattice import (
    alpha_cap,
    assign_clusters,
    cluster,
    enumerate_strings,
    records_from_csv,
    records_from_json,
    records_to_csv,
    records_to_json,
    separation_report,
)
from resforge.model import LatticeWindow, NormalFormData, pseudopole


def brute_force_count(d, mu, window, kmax):
    count = 0
    for k in range(1, kmax + 1):
        for a in range(alpha_cap(k, 1.0) + 1):
            lam = pseudopole(k, a, d, mu)
            if lam.real > window.B and lam.imag < window.A * math.log(lam.real):
                count += 1
    return count


def test_case_a_matches_double_loop():
    nf = NormalFormData.case_a(math.pi, [1.0], 1)
    w = LatticeWindow(1.0, 10.0)
    recs = enumerate_strings(nf, w, 100)
    assert len(recs) == brute_force_count(math.pi, [1.0], w, 100)
    for rec in recs:
        assert rec.lam_series == pytest.approx(pseudopole(rec.k, rec.alpha, math.pi, 1.0), rel=1e-15)
        assert rec.residual < 1e-12 * rec.k


def test_membership_replay_and_order():
    nf = residual_fixture()
    w = LatticeWindow(0.4, 20.0)
    recs = enumerate_strings(nf, w, 400)
    assert recs
    for rec in recs:
        lam = rec.lam_series
        assert lam.real > w.B and lam.imag < w.A * math.log(lam.real)
        assert sum(rec.alpha) <= math.log(rec.k) + 1e-12
    keys = [(r.k, r.alpha) for r in recs]
    assert keys == sorted(keys)


def test_shrinking_window_is_monotone():
    nf = NormalFormData.case_a(2.0, [1.0], 1)
    counts = []
    for A in (1.0, 0.3, 0.1, 0.03, 0.01):
        recs = enumerate_strings(nf, LatticeWindow(A, 1.0), 300)
        counts.append(len(recs))
        if A <= 0.03:
            assert all(rec.alpha == (0,) for rec in recs)
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[-1] == 0 or counts[-1] < counts[0]


def test_kmax_precondition():
    nf = NormalFormData.case_a(math.pi, [1.0], 1)
    with pytest.raises(ValueError):
        enumerate_strings(nf, LatticeWindow(1.0, 10.0), 5)


def test_threads_give_same_result(monkeypatch):
    nf = separation_fixture()
    w = LatticeWindow(2.0, 1.0)
    one = enumerate_strings(nf, w, 300, workers=1)
    monkeypatch.setenv("RESFORGE_THREADS", "3")
    many = enumerate_strings(nf, w, 300)
    assert one == many


def test_oracle_attached_inline():
    nf = residual_fixture()
    recs = enumerate_strings(nf, LatticeWindow(1.0, 10.0), 200, with_oracle=True)
    assert all(rec.lam_oracle is not None or rec.oracle_error for rec in recs)
    ratios = [rec.ratio(3) for rec in recs if rec.lam_oracle is not None and rec.k > 1]
    assert ratios and np.all(np.isfinite(ratios))


# -- clusters ------------------------------------------------------------------------

def test_near_degenerate_pair_clusters():
    mu = [math.log(2), math.log(2) + 1e-12]
    nf = NormalFormData.case_a(1.0, mu, 1)
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), 30)
    reports = cluster(nf, recs)
    pair = [rep for rep in reports if (1, 0) in rep.members]
    assert pair and (0, 1) in pair[0].members


def test_one_dimensional_singletons():
    nf = residual_fixture()
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), 3000)
    reports = cluster(nf, recs)
    assert all(rep.a == 1 for rep in reports)


def test_zero_tolerance_is_exact_equality():
    nf = NormalFormData.case_a(1.0, [1.0, 1.0], 1)
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), 30)
    reports = cluster(nf, recs, tol=0.0)
    # equal exponents: K depends on |alpha| only
    for rep in reports:
        assert len({sum(a) for a in rep.members}) == 1
    assert len(reports) == len({sum(r.alpha) for r in recs})


def test_cluster_partition():
    nf = separation_fixture()
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), 200)
    reports = cluster(nf, recs)
    members = [a for rep in reports for a in rep.members]
    assert sorted(members) == sorted({r.alpha for r in recs})
    assert all(rep.reference in rep.members and rep.a >= 1 for rep in reports)
    tagged = assign_clusters(recs, reports)
    assert all(rec.cluster_id is not None for rec in tagged)


# -- separation ------------------------------------------------------------------------

def test_separation_case_a_exact():
    nf = NormalFormData.case_a(2.0, [math.log(2), math.log(3)], 1)
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), 200)
    rep = separation_report(recs, nf)
    assert rep.re_max_dev < 1e-12
    assert max(row["max_remainder"] for row in rep.im_rows) < 1e-13


def test_separation_generic_slope():
    nf = separation_fixture()
    base = np.unique(np.logspace(2, 5, 10).astype(int))
    ks = sorted(set(base) | set(base + 1))
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), int(max(ks)), ks=ks)
    rep = separation_report(recs, nf)
    scaled = [abs(dev) * k for _, k, dev in rep.re_rows]
    assert max(scaled) < 1.0
    assert rep.im_slope() == pytest.approx(-1.0, abs=0.3)
    assert rep.separated(10 ** 4)


# -- export ------------------------------------------------------------------------------

def test_csv_json_roundtrip():
    nf = separation_fixture()
    recs = enumerate_strings(nf, LatticeWindow(2.0, 1.0), 60, with_oracle=True)
    recs = assign_clusters(recs, cluster(nf, recs))
    text = records_to_csv(recs)
    assert text.splitlines()[0] == "alpha,k,re_series,im_series,re_oracle,im_oracle,residual,cluster_id"
    back = records_from_csv(text)
    assert [(r.alpha, r.k, r.lam_series, r.lam_oracle, r.residual, r.cluster_id) for r in back] == \
        [(r.alpha, r.k, r.lam_series, r.lam_oracle, r.residual, r.cluster_id) for r in recs]
    back_json = records_from_json(records_to_json(recs))
    assert [r.lam_series for r in back_json] == [r.lam_series for r in recs]
    assert records_to_csv(recs) == text
