"""Figure rendering for emitted reports.

Consumes the JSONL/CSV files the verifiers write and renders PNG figures
next to them: empirical-constant distributions, lhs-vs-rhs scatter on
log axes, ratio histograms for experiments, growth curves over r, and
weight concentration profiles.  Rendering is read-only with respect to
the reports; the delimited files remain the primary output.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "render_report_figures",
    "render_summary_figures",
    "render_profile_figure",
]


def _save(fig, out_dir: Path, stem: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_report_figures(records: list[dict], out_dir) -> list[Path]:
    """Figures for verification report lines, grouped by report name."""
    out_dir = Path(out_dir)
    produced = []
    groups: dict[str, list[dict]] = defaultdict(list)
    for rec in records:
        if "lhs" in rec:
            groups[rec["name"]].append(rec)
    for name, group in sorted(groups.items()):
        stem = name.replace("/", "_")
        lhs = np.array([g["lhs"] for g in group])
        rhs = np.array([g["rhs"] for g in group])
        ok = np.array([bool(g["pass"]) for g in group])
        fig, ax = plt.subplots(figsize=(5.5, 4.5))
        pos = (lhs > 0) & (rhs > 0) & np.isfinite(rhs)
        if pos.any():
            ax.loglog(rhs[pos][ok[pos]], lhs[pos][ok[pos]], ".", color="tab:blue", label="pass")
            if (~ok[pos]).any():
                ax.loglog(rhs[pos][~ok[pos]], lhs[pos][~ok[pos]], "x", color="tab:red", label="fail")
            lo = min(rhs[pos].min(), lhs[pos].min())
            hi = max(rhs[pos].max(), lhs[pos].max())
            ax.loglog([lo, hi], [lo, hi], "--", color="gray", linewidth=0.8, label="lhs = rhs")
            ax.legend(fontsize=8)
        else:
            ax.text(0.5, 0.5, "no nonzero events", ha="center", va="center", transform=ax.transAxes)
        ax.set_xlabel("rhs")
        ax.set_ylabel("lhs")
        ax.set_title(f"{name}: {len(group)} checks, {int((~ok).sum())} violations")
        produced.append(_save(fig, out_dir, f"{stem}_scatter"))

        consts = np.array([g["empirical_constant"] for g in group])
        consts = consts[np.isfinite(consts) & (consts > 0)]
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        if consts.size:
            ax.hist(np.log10(consts), bins=40, color="tab:blue", alpha=0.8)
            ax.set_xlabel("log10 empirical constant")
        else:
            ax.text(0.5, 0.5, "all constants zero", ha="center", va="center", transform=ax.transAxes)
        ax.set_ylabel("checks")
        ax.set_title(f"{name}: needed-budget distribution")
        produced.append(_save(fig, out_dir, f"{stem}_constants"))
    return produced


def render_summary_figures(summaries: list[dict], out_dir, growth: dict | None = None) -> list[Path]:
    """Histograms for experiment ratio distributions and the growth curve."""
    out_dir = Path(out_dir)
    produced = []
    for i, summary in enumerate(summaries):
        ratios = np.asarray(summary.get("ratios", []), dtype=float)
        name = summary.get("name", f"experiment_{i}")
        params = summary.get("params", {})
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        if ratios.size:
            ax.hist(ratios, bins=40, color="tab:green", alpha=0.8)
            ax.axvline(ratios.max(), color="tab:red", linewidth=0.8, label=f"max {ratios.max():.4g}")
            ax.legend(fontsize=8)
        ax.set_xlabel("ratio")
        ax.set_ylabel("trials")
        label = ", ".join(f"{k}={v}" for k, v in params.items() if not isinstance(v, (list, dict)))
        ax.set_title(f"{name} ({label})")
        produced.append(_save(fig, out_dir, f"{name}_{i}_ratios"))
    if growth:
        rs = np.asarray(growth["r_grid"], dtype=float)
        maxima = np.asarray(growth["max_ratios"], dtype=float)
        coeff = growth.get("fitted_coefficient", 0.0)
        fig, ax = plt.subplots(figsize=(5.5, 4.0))
        ax.plot(rs, maxima, "o-", label="observed sup ratio")
        ax.plot(rs, coeff * rs / (rs - 2.0), "--", label=f"{coeff:.3g} * r/(r-2)")
        ax.set_xlabel("r")
        ax.set_ylabel("sup ratio")
        ax.legend(fontsize=8)
        ax.set_title("variation norm growth toward r = 2")
        produced.append(_save(fig, out_dir, "growth_curve"))
    return produced


def render_profile_figure(gammas, epsilons, out_dir, stem: str = "concentration_profile") -> Path:
    """Weight concentration profile epsilon(gamma) with the Lebesgue line."""
    out_dir = Path(out_dir)
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    g = np.asarray(gammas, dtype=float)
    ax.plot(g, np.asarray(epsilons, dtype=float), "o-", label="profile")
    ax.plot(g, g, "--", color="gray", linewidth=0.8, label="Lebesgue")
    ax.set_xlabel("gamma (Lebesgue share)")
    ax.set_ylabel("epsilon (weight share)")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    return _save(fig, out_dir, stem)
