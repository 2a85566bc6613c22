"""Matplotlib figures for sweep reports and frequency-response profiles.

Figures are written as SVG (and optionally PNG) with fixed metadata so that
reruns produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.5,
    "lines.markersize": 4,
    "svg.hashsalt": "lipgnn",
    "svg.fonttype": "none",
}

METHOD_LABELS = {
    "unconstrained": "Unconstrained",
    "lipschitz": "Lipschitz",
    "awgn_augment": "AWGN augmentation",
    "pgd_adversarial": r"$\ell^\infty$-PGD training",
}


def _save(fig, path, png: bool) -> list:
    path = Path(path)
    out = [path.with_suffix(".svg")]
    fig.savefig(out[0], metadata={"Date": None, "Creator": None})
    if png:
        out.append(path.with_suffix(".png"))
        fig.savefig(out[-1], dpi=150, metadata={"Software": None})
    plt.close(fig)
    return out


def plot_sweep(report, path, png: bool = False) -> list:
    """One panel per perturbation type, metric versus magnitude per method."""
    kinds = sorted({r.perturbation for r in report.rows})
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(kinds), figsize=(4.2 * len(kinds), 3.2), squeeze=False)
        for ax, kind in zip(axes[0], kinds):
            for method in dict.fromkeys(r.method for r in report.rows if r.perturbation == kind):
                rows = [r for r in report.rows if r.method == method and r.perturbation == kind]
                mags = [r.magnitude for r in rows]
                means = [r.metric_mean for r in rows]
                errs = [r.metric_stderr for r in rows]
                ax.errorbar(mags, means, yerr=errs, marker="o", capsize=2,
                            label=METHOD_LABELS.get(method, method))
            ax.set_xlabel(r"noise $\sigma$" if kind == "awgn" else r"attack $\epsilon$")
            ax.set_ylabel(report.metric)
            ax.set_title("AWGN" if kind == "awgn" else r"$\ell^\infty$ adversary")
            ax.grid(alpha=0.3)
            ax.legend()
        fig.tight_layout()
        return _save(fig, path, png)


def plot_profile(profile, path, png: bool = False) -> list:
    """``H*(lambda)`` per model with the constraint bounds as dashed lines."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for name, vals in profile.h_star.items():
            ax.plot(profile.lambdas, vals, label=METHOD_LABELS.get(name, name))
        for c in sorted(set(profile.bounds.values())):
            ax.axhline(c, color="k", linestyle="--", linewidth=1)
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$H^*(\lambda)$")
        ax.grid(alpha=0.3)
        ax.legend()
        fig.tight_layout()
        return _save(fig, path, png)
