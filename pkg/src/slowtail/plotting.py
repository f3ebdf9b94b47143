"""SVG figures for tail curves. Only the Agg backend is used."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "slowtail",  # stable ids so reruns give identical files
    "svg.fonttype": "none",
}


def _finish(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def tail_curve_svg(curve, title: str = "") -> str:
    """Empirical tail with Wilson band and theory overlay, log-log axes."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        u = curve.grid
        ok = curve.p_hat > 0
        ax.fill_between(u, np.maximum(curve.ci_lo, 1e-300), curve.ci_hi, color="0.85", lw=0, label="95% interval")
        ax.plot(u[ok], curve.p_hat[ok], "o-", color="k", ms=3, lw=1, label="empirical")
        if curve.theory is not None:
            if np.any(np.isfinite(curve.theory_lo)) and np.any(curve.theory_lo != curve.theory_hi):
                ax.fill_between(u, curve.theory_lo, curve.theory_hi, color="tab:blue", alpha=0.25, lw=0,
                                label="theory band")
            ref = curve.reference
            ax.plot(u, ref, "--", color="tab:blue", lw=1, label="theory")
        if np.all(u > 0):
            ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("u  (threshold e^u)")
        ax.set_ylabel("P[R > e^u]")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _finish(fig)


def factor_svg(fc, target: float = 2.0, title: str = "") -> str:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.errorbar(fc.grid, fc.factor, yerr=[fc.factor - fc.lo, fc.hi - fc.factor], fmt="o", color="k",
                    ms=3, capsize=2)
        ax.axhline(target, color="tab:red", ls="--", lw=1)
        ax.set_xscale("log")
        ax.set_xlabel("u")
        ax.set_ylabel("tail ratio")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _finish(fig)


def ratio_svg(grid, ratios, lo, hi, ylabel: str = "empirical / theory", title: str = "") -> str:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ratios, lo, hi = map(np.asarray, (ratios, lo, hi))
        ax.errorbar(grid, ratios, yerr=[ratios - lo, hi - ratios], fmt="o-", color="k", ms=3, lw=1, capsize=2)
        ax.axhline(1.0, color="0.5", lw=0.8)
        ax.set_xscale("log")
        ax.set_xlabel("u")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _finish(fig)
