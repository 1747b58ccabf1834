"""Figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ReportIOError  # noqa: E402


def _save(fig, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=150, bbox_inches="tight")
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_rate(rows: list[dict], path, title: str = "") -> Path:
    """Median gap with interquartile band against n, plus the fitted curve."""
    n = np.array([r["n"] for r in rows], dtype=float)
    med = np.array([r["median_gap"] for r in rows])
    lo = np.array([r["q25"] for r in rows])
    hi = np.array([r["q75"] for r in rows])
    pred = np.array([r["predicted_gap_from_fit"] for r in rows])
    fig, ax = plt.subplots(figsize=(5, 3.6))
    pos = med > 0
    ax.fill_between(n[pos], np.maximum(lo[pos], 1e-300), hi[pos], color="C0", alpha=0.2, lw=0, label="IQR")
    ax.plot(n[pos], med[pos], "o-", color="C0", label="median gap")
    ok = np.isfinite(pred)
    if ok.any():
        ax.plot(n[ok], pred[ok], "--", color="C1", label=r"fit $\propto (\log n / n)^{s/2}$")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("gap")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, Path(path))


def plot_dyadic(rows: list[dict], path) -> Path:
    """Per-block maxima of gap * sqrt(n / log n)."""
    k = [r["k"] for r in rows]
    v = [r["max_normalized_gap"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(k, v, "s-", color="C2")
    ax.set_xlabel(r"block $k$: $n \in (2^{k-1}, 2^k]$")
    ax.set_ylabel(r"max gap $\sqrt{n / \log n}$")
    ax.set_ylim(bottom=0)
    return _save(fig, Path(path))
