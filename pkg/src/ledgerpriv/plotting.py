"""Matplotlib helpers for sweep figures (accuracy against one defense parameter)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

AXIS_LABELS = {
    "max_delay_s": "maximum delay (s)",
    "devices_per_ledger": "devices per ledger",
    "packets_per_transaction": "packets per transaction",
}

SERIES_LABELS = {
    "max_delay_s": "delay {:g} s",
    "devices_per_ledger": "k = {:g}",
    "packets_per_transaction": "n = {:g}",
}


def accuracy_figure(panels, x_name, series_name=None, title=None):
    """One subplot per scenario.

    ``panels`` maps a scenario name to ``{series_value: [(x, mean, max), ...]}``.
    Solid lines are trial means; dotted lines of the same colour are trial maxima.
    """
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(panels), figsize=(3.4 * len(panels), 2.8),
                                 squeeze=False, sharey=True)
        for ax, (scenario, series) in zip(axes[0], panels.items()):
            for i, (value, points) in enumerate(series.items()):
                points = sorted(points)
                xs = [p[0] for p in points]
                color = f"C{i}"
                label = None if series_name is None else \
                    SERIES_LABELS.get(series_name, series_name + "={}").format(value)
                ax.plot(xs, [p[1] for p in points], "o-", color=color, label=label)
                ax.plot(xs, [p[2] for p in points], ":", color=color)
            ax.set_title(scenario)
            ax.set_xlabel(AXIS_LABELS.get(x_name, x_name))
            ax.set_ylim(0, 1.02)
            ax.grid(alpha=0.3)
            if series_name is not None:
                ax.legend(frameon=False)
        axes[0][0].set_ylabel("classification accuracy")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
    return fig


def save(fig, path):
    with plt.rc_context(RC):
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
