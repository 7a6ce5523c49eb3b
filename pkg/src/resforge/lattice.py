"""Enumeration of resonance strings in a logarithmic window, clustering and separation."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .model import (
    DomainWarning,
    LatticeWindow,
    NormalFormData,
    OracleError,
    K_alpha,
    laurent_coefficients,
    multi_indices,
    newton_root,
    pseudopole,
    solve_string,
)

CSV_FIELDS = ["alpha", "k", "re_series", "im_series", "re_oracle", "im_oracle", "residual", "cluster_id"]


@dataclass(frozen=True)
class ResonanceRecord:
    alpha: tuple
    k: int
    lam_series: complex
    residual: float
    lam_oracle: complex | None = None
    cluster_id: int | None = None
    oracle_error: str | None = None
    iterations: int | None = None

    def ratio(self, r: int) -> float | None:
        """``|lam_series - lam_oracle| k^r / (ln k)^(r+2)``."""
        if self.lam_oracle is None or self.k < 2:
            return None
        return abs(self.lam_series - self.lam_oracle) * self.k ** r / math.log(self.k) ** (r + 2)


@dataclass(frozen=True)
class ClusterReport:
    reference: tuple
    members: tuple
    lam0: complex
    tol: float
    cluster_id: int

    @property
    def a(self) -> int:
        return len(self.members)


def thread_count(default: int = 1) -> int:
    raw = os.environ.get("RESFORGE_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def alpha_cap(k, C_alpha: float) -> int:
    """Largest admissible ``|alpha|`` at ``k``: ``floor(C_alpha ln k)``."""
    return int(math.floor(C_alpha * math.log(k) + 1e-12)) if k > 1 else 0


def _residuals(b: Sequence[complex], d: float, lam: np.ndarray, ks: np.ndarray) -> np.ndarray:
    total = 2 * d * lam + b[1] - 2 * math.pi * ks
    for m in range(2, len(b)):
        total = total + b[m] * lam ** (1 - m)
    return np.abs(total)


def _records_for_alpha(nf, alpha, ks, window, with_oracle, tol_newton, r):
    s = solve_string(nf, alpha, r=r)
    lam = s(ks)
    inside = window.contains(lam)
    ks_in = ks[inside]
    lam_in = np.atleast_1d(lam)[inside]
    b = laurent_coefficients(nf, alpha)
    res = _residuals(b, nf.d, lam_in, ks_in)
    out = []
    for k, lm, rr in zip(ks_in, lam_in, res):
        rec = ResonanceRecord(alpha, int(k), complex(lm), float(rr))
        if with_oracle:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", DomainWarning)
                    nr = newton_root(nf, alpha, int(k), tol=tol_newton)
                rec = replace(rec, lam_oracle=nr.lam, iterations=nr.iterations)
                if not window.contains(nr.lam):
                    rec = replace(rec, oracle_error="oracle root outside window")
            except OracleError as exc:
                rec = replace(rec, oracle_error=str(exc))
        out.append(rec)
    return out


def enumerate_strings(nf: NormalFormData, window: LatticeWindow, kmax: int, C_alpha: float = 1.0,
                      with_oracle: bool = False, *, ks: Iterable[int] | None = None,
                      tol_newton: float = 1e-12, r: int | None = None,
                      workers: int | None = None) -> list[ResonanceRecord]:
    """All ``(alpha, k)`` with ``k <= kmax``, ``|alpha| <= C_alpha ln k`` and ``lam_series`` in the window.

    ``ks`` restricts the sweep to given values of ``k``; ``r`` is the string
    order (default the order of ``nf``).  Work is split by
    multi-index over ``workers`` threads (default ``RESFORGE_THREADS`` or 1);
    the result is sorted by ``(k, alpha)`` regardless of scheduling.
    """
    kmin_needed = math.ceil(window.B * nf.d / math.pi)
    if kmax < kmin_needed:
        raise ValueError(f"kmax = {kmax} is below ceil(B d / pi) = {kmin_needed}")
    ks = np.arange(1, kmax + 1) if ks is None else np.array(sorted(set(int(k) for k in ks if 1 <= k <= kmax)))
    if not ks.size:
        return []
    cap = alpha_cap(int(ks.max()), C_alpha)
    tasks = []
    for alpha in multi_indices(nf.n, cap):
        norm = sum(alpha)
        # |alpha| <= C ln k  <=>  k >= exp(|alpha| / C)
        admissible = ks[np.array([alpha_cap(int(k), C_alpha) >= norm for k in ks])]
        if admissible.size:
            tasks.append((alpha, admissible))
    workers = workers or thread_count()

    def run(task):
        alpha, kk = task
        return _records_for_alpha(nf, alpha, kk, window, with_oracle, tol_newton, r)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, tasks))
    else:
        chunks = [run(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda rec: (rec.k, rec.alpha))
    return records


def cluster(nf: NormalFormData, records: Sequence[ResonanceRecord], lam0: complex | None = None,
            tol: float | None = None, rel_tol: float = 1e-9) -> list[ClusterReport]:
    """Group multi-indices whose ``K_alpha(lam0)`` coincide.

    Two indices are linked when ``|K_a - K_b| <= tol``; groups are the
    connected components.  ``tol`` defaults to ``rel_tol |K_ref|`` with the
    reference the smallest index present, and ``lam0`` to that reference's
    pseudopole at the largest ``k`` in ``records``.
    """
    alphas = sorted({rec.alpha for rec in records})
    if not alphas:
        return []
    ref = alphas[0]
    if lam0 is None:
        kmax = max(rec.k for rec in records)
        lam0 = pseudopole(kmax, ref, nf.d, nf.mu)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DomainWarning)
        K = np.array([complex(K_alpha(nf, a, lam0)) for a in alphas])
    if tol is None:
        tol = rel_tol * abs(K[0])
    parent = list(range(len(alphas)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.argsort(K.real, kind="stable")
    for pos, i in enumerate(order):
        for j in order[pos + 1:]:
            if K[j].real - K[i].real > tol:
                break
            if abs(K[i] - K[j]) <= tol:
                parent[find(j)] = find(i)
    groups: dict[int, list] = {}
    for i in range(len(alphas)):
        groups.setdefault(find(i), []).append(alphas[i])
    reports = []
    for cid, members in enumerate(sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])):
        reports.append(ClusterReport(members[0], tuple(members), complex(lam0), float(tol), cid))
    return reports


def assign_clusters(records: Sequence[ResonanceRecord], reports: Sequence[ClusterReport]) -> list[ResonanceRecord]:
    ids = {a: rep.cluster_id for rep in reports for a in rep.members}
    return [replace(rec, cluster_id=ids.get(rec.alpha)) for rec in records]


# -- separation ----------------------------------------------------------------------

@dataclass
class SeparationReport:
    """Spacing statistics of the enumerated strings.

    ``re`` rows: ``(alpha, k, Re lam(k+1) - Re lam(k) - pi/d)``.
    ``im`` rows per ``k``: largest remainder of cross-string ``Im`` gaps after
    removing ``mu.(alpha - beta)/(2d)``, the smallest such model gap among
    the indices present, and the Diophantine bound ``exp(-D m)/(2 d C)``.
    """

    d: float
    re_rows: list = field(default_factory=list)
    im_rows: list = field(default_factory=list)

    @property
    def re_max_scaled(self) -> float:
        """``max |Re spacing - pi/d| k``."""
        return max((abs(dev) * k for _, k, dev in self.re_rows), default=0.0)

    @property
    def re_max_dev(self) -> float:
        return max((abs(dev) for _, _, dev in self.re_rows), default=0.0)

    def im_scaled(self) -> list[tuple[int, float]]:
        """``(k, max remainder k / ln^2 k)``."""
        return [(row["k"], row["max_remainder"] * row["k"] / math.log(row["k"]) ** 2)
                for row in self.im_rows if row["k"] > 1]

    def im_slope(self) -> float | None:
        """Log-log slope of ``max remainder / ln^2 k`` against ``k``."""
        pts = [(row["k"], row["max_remainder"] / math.log(row["k"]) ** 2)
               for row in self.im_rows if row["k"] > 1 and row["max_remainder"] > 0]
        if len(pts) < 2:
            return None
        x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
        return float(np.polyfit(x, y, 1)[0])

    def separated(self, kmin: int = 1, *, use_bound: bool = True) -> bool:
        """Whether the gap lower bound beats the remainder at every ``k >= kmin``.

        The bound is ``exp(-D m)/(2 d C)``, or with ``use_bound=False`` the
        smallest model gap actually realised among the indices present.
        """
        key = "dioph_bound" if use_bound else "min_gap"
        rows = [row for row in self.im_rows if row["k"] >= kmin and row["pairs"]]
        return bool(rows) and all(row[key] > row["max_remainder"] for row in rows)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "re": [{"alpha": list(a), "k": k, "deviation": dev} for a, k, dev in self.re_rows],
            "im": self.im_rows,
            "re_max_scaled": self.re_max_scaled,
            "im_slope": self.im_slope(),
        }


def separation_report(records: Sequence[ResonanceRecord], nf: NormalFormData, *,
                      D: float = 1.0, C: float = 1.0, use_oracle: bool = False) -> SeparationReport:
    """Real spacing along strings and imaginary gaps across strings.

    With ``use_oracle`` the Newton roots are used where present.
    """
    d = nf.d
    mu = nf.mu
    rep = SeparationReport(d)
    table: dict[tuple, dict[int, complex]] = {}
    for rec in records:
        lam = rec.lam_oracle if use_oracle and rec.lam_oracle is not None else rec.lam_series
        table.setdefault(rec.alpha, {})[rec.k] = lam
    for alpha in sorted(table):
        row = table[alpha]
        for k in sorted(row):
            if k + 1 in row:
                rep.re_rows.append((alpha, k, (row[k + 1] - row[k]).real - math.pi / d))
    by_k: dict[int, list] = {}
    for alpha, row in table.items():
        for k, lam in row.items():
            by_k.setdefault(k, []).append((alpha, lam))
    for k in sorted(by_k):
        entries = sorted(by_k[k])
        if len(entries) < 2:
            rep.im_rows.append({"k": k, "pairs": 0, "max_remainder": 0.0, "min_gap": math.inf,
                                "dioph_bound": math.nan, "m": 0})
            continue
        A = np.array([e[0] for e in entries], dtype=float)
        im = np.array([e[1].imag for e in entries])
        model = (A @ mu) / (2 * d)
        gaps = im[:, None] - im[None, :]
        pred = model[:, None] - model[None, :]
        iu = np.triu_indices(len(entries), 1)
        rem = np.abs(gaps - pred)[iu]
        m = int(A.sum(axis=1).max())
        rep.im_rows.append({
            "k": k,
            "pairs": int(rem.size),
            "max_remainder": float(rem.max()),
            "min_gap": float(np.abs(pred[iu]).min()),
            "dioph_bound": float(math.exp(-D * m) / (2 * d * C)),
            "m": m,
        })
    return rep


# -- export ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def record_row(rec: ResonanceRecord, with_ratio: int | None = None) -> dict:
    row = {
        "alpha": ";".join(str(a) for a in rec.alpha),
        "k": rec.k,
        "re_series": rec.lam_series.real,
        "im_series": rec.lam_series.imag,
        "re_oracle": None if rec.lam_oracle is None else rec.lam_oracle.real,
        "im_oracle": None if rec.lam_oracle is None else rec.lam_oracle.imag,
        "residual": rec.residual,
        "cluster_id": rec.cluster_id,
    }
    if with_ratio is not None:
        row["ratio"] = rec.ratio(with_ratio)
    return row


def records_to_csv(records: Sequence[ResonanceRecord], with_ratio: int | None = None) -> str:
    fields = CSV_FIELDS + (["ratio"] if with_ratio is not None else [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for rec in records:
        row = record_row(rec, with_ratio)
        out = []
        for f in fields:
            v = row[f]
            if f in ("alpha",):
                out.append(v)
            elif f in ("k", "cluster_id"):
                out.append("" if v is None else str(v))
            else:
                out.append(_fmt(v))
        writer.writerow(out)
    return buf.getvalue()


def records_to_json(records: Sequence[ResonanceRecord], with_ratio: int | None = None, **extra) -> str:
    payload = dict(extra)
    payload["records"] = [record_row(rec, with_ratio) for rec in records]
    return json.dumps(payload, indent=1, sort_keys=False)


def _parse_alpha(text: str) -> tuple:
    return tuple(int(a) for a in text.split(";")) if text else ()


def _opt_complex(re, im):
    if re in (None, "") or im in (None, ""):
        return None
    return complex(float(re), float(im))


def records_from_rows(rows: Iterable[dict]) -> list[ResonanceRecord]:
    out = []
    for row in rows:
        alpha = row["alpha"]
        alpha = _parse_alpha(alpha) if isinstance(alpha, str) else tuple(alpha)
        cid = row.get("cluster_id")
        out.append(ResonanceRecord(
            alpha=alpha,
            k=int(row["k"]),
            lam_series=complex(float(row["re_series"]), float(row["im_series"])),
            residual=float(row["residual"]),
            lam_oracle=_opt_complex(row.get("re_oracle"), row.get("im_oracle")),
            cluster_id=None if cid in (None, "") else int(cid),
        ))
    return out


def records_from_csv(text: str) -> list[ResonanceRecord]:
    return records_from_rows(csv.DictReader(io.StringIO(text)))


def records_from_json(text: str) -> list[ResonanceRecord]:
    return records_from_rows(json.loads(text)["records"])


__all__ = [
    "ResonanceRecord", "ClusterReport", "SeparationReport", "CSV_FIELDS", "enumerate_strings",
    "cluster", "assign_clusters", "separation_report", "records_to_csv", "records_to_json",
    "records_from_csv", "records_from_json", "thread_count", "alpha_cap",
]
