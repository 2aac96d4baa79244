"""Static SVG line charts of bound curves."""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from fisherbound.errors import EmptyCurveError  # noqa: E402

AXIS_LABELS = {
    "loss_db": "information loss [dB]",
    "nrmse": "pessimistic NRMSE",
    "bound": "Fisher information bound",
    "crlb": "pessimistic CRLB",
}

# y-limits of the case-study charts, keyed by model name
FIGURE_YLIM = {"saleh": (-10.0, 0.0), "rician": (-25.0, 0.0), "cubic": (0.0, 15.0)}

_STYLES = [("k", "-", "D"), ("k", "--", "o"), ("b", "-", "s"), ("b", "--", "^")]

_RC = {
    "svg.fonttype": "path",
    "svg.hashsalt": "fisherbound",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.4,
    "lines.linewidth": 1.0,
}


def plot_curves(
    curves: Sequence,
    path,
    y_column: str,
    labels: Optional[Sequence[str]] = None,
    ylim: Optional[tuple] = None,
    title: Optional[str] = None,
) -> None:
    if not curves or any(not c.rows for c in curves):
        raise EmptyCurveError("cannot plot an empty curve")
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(5.0, 3.4))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        for i, curve in enumerate(curves):
            color, ls, marker = _STYLES[i % len(_STYLES)]
            label = labels[i] if labels else None
            ax.plot(
                curve.column("theta"), curve.column(y_column),
                color=color, linestyle=ls, marker=marker, markersize=3, markevery=2, label=label,
            )
        ax.set_xlabel(r"$\theta$")
        ax.set_ylabel(AXIS_LABELS.get(y_column, y_column))
        if ylim is not None:
            ax.set_ylim(*ylim)
        if title:
            ax.set_title(title)
        if labels:
            ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write SVG to {path}: {exc}") from exc


def emit_svg(curve, path, y_column: str = "loss_db") -> None:
    """Single polyline chart of ``y_column`` against theta."""
    if not curve.rows:
        raise EmptyCurveError("cannot plot an empty curve")
    plot_curves([curve], path, y_column, title=curve.label or None)
