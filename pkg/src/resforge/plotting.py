"""Static SVG figures: resonance lattice scatter and escape-partition map.

Output is byte-reproducible: the SVG id salt and the date metadata are
pinned, and text is emitted as paths so no font lookup varies between runs.
"""

from __future__ import annotations

import io
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "resforge",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "axes.linewidth": 0.6,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "lines.markersize": 3,
    "figure.figsize": (6.0, 3.8),
    "path.simplify": False,
}


def _save(fig, path=None) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def lattice_svg(records: Sequence, path=None, title: str | None = None, max_legend: int = 12) -> str:
    """Scatter of ``(Re lam, Im lam)`` for each record, one colour per multi-index."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        alphas = sorted({rec.alpha for rec in records})
        cmap = plt.get_cmap("viridis", max(len(alphas), 2))
        for i, alpha in enumerate(alphas):
            lam = np.array([rec.lam_series for rec in records if rec.alpha == alpha])
            label = "α=" + ",".join(map(str, alpha)) if i < max_legend else None
            ax.plot(lam.real, lam.imag, ".", color=cmap(i), label=label, linestyle="none")
        ax.set_xlabel("Re λ")
        ax.set_ylabel("Im λ")
        if len(alphas) > 1 and any(a > 0 for alpha in alphas for a in alpha):
            ax.set_xscale("log")
        if title:
            ax.set_title(title)
        if alphas:
            ax.legend(loc="upper left", ncol=2)
        fig.tight_layout()
        return _save(fig, path)


def escape_svg(partition, path=None, title: str | None = None) -> str:
    """Forward return counts ``j_+`` on the ``(s, xi)`` grid; survivors drawn darkest."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        jp = np.array(partition.jplus, dtype=float)
        top = partition.N + 1
        val = np.where(np.isinf(jp), top, jp)
        if partition.shape:
            n_s, n_xi = partition.shape
            s = partition.s.reshape(n_s, n_xi)
            xi = partition.xi.reshape(n_s, n_xi)
            mesh = ax.pcolormesh(s, xi, val.reshape(n_s, n_xi), cmap="magma_r", vmin=0, vmax=top,
                                 shading="nearest", rasterized=False)
        else:
            mesh = ax.scatter(partition.s, partition.xi, c=val, s=2, cmap="magma_r", vmin=0, vmax=top)
        cb = fig.colorbar(mesh, ax=ax)
        cb.set_label("forward returns (top = survives)")
        ax.set_xlabel("s")
        ax.set_ylabel("ξ")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
