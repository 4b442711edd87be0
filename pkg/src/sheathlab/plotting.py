"""Static SVG figures: sheath profiles and perturbation-decay curves.

Output is byte-reproducible: the SVG hash salt is fixed and no date is stamped.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "sheathlab",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "figure.dpi": 100,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "sheathlab"})
    plt.close(fig)


def plot_profile(profile, path, title: str | None = None):
    """Four stacked panels: phi, n, u, T against x."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(4, 1, figsize=(5.5, 7.0), sharex=True)
        x = profile.grid.x
        for ax, y, label in zip(axes, (profile.phi, profile.n, profile.u, profile.T),
                                (r"$\tilde\phi$", r"$\tilde n$", r"$\tilde u$", r"$\tilde T$")):
            ax.plot(x, y, color="k")
            ax.set_ylabel(label)
        axes[-1].set_xlabel("x")
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        _save(fig, path)


def plot_decay(records, path, fit=None, key: str = "E_weighted", title: str | None = None):
    """Weighted energy (or any record column) on log axes, with the fitted law if given."""
    t = np.array([r.t for r in records])
    y = np.array([r.value(key) for r in records])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        pos = y > 0.0
        ax.semilogy(t[pos], y[pos], "k.-", markersize=2, label=key)
        if fit is not None:
            sel = (t >= fit.window[0]) & (t <= fit.window[1])
            ts = t[sel]
            abscissa = ts if fit.model == "exponential" else np.log1p(fit.beta * ts)
            ax.semilogy(ts, np.exp(fit.intercept + fit.exponent * abscissa), "--", color="tab:red",
                        label=f"{fit.model} fit, exponent {fit.exponent:.4g}")
        ax.set_xlabel("t")
        ax.set_ylabel(key)
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        _save(fig, path)
