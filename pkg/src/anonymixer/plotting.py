"""Matplotlib figure writers for the report directory.

Figures are saved as SVG with a fixed hash salt and no date stamp, so reruns give
identical files.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "anonymixer",
    "svg.fonttype": "none",
}

NOISE_COLOR = "#9e9e9e"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def scatter_2d(path, xy, labels, title="", width=5.0):
    """One panel: 2-D projection coloured by cluster label, noise (-1) in grey."""
    xy = np.asarray(xy, dtype=float)
    labels = np.asarray(labels)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, width * 0.8))
        cmap = plt.get_cmap("tab10")
        for lab in np.unique(labels):
            sel = labels == lab
            if lab < 0:
                ax.scatter(xy[sel, 0], xy[sel, 1], s=6, c=NOISE_COLOR, marker="x", linewidths=0.6, label="noise")
            else:
                ax.scatter(xy[sel, 0], xy[sel, 1], s=6, color=cmap(int(lab) % 10), label=f"cluster {lab}")
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2" if xy.shape[1] > 1 else "")
        ax.set_title(title)
        ax.legend(loc="best", markerscale=2, frameon=False)
        return _save(fig, path)


def loss_curves(path, steps, gen_loss, disc_loss, title=""):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.5))
        ax.plot(steps, gen_loss, lw=0.8, label="generator")
        ax.plot(steps, disc_loss, lw=0.8, label="discriminator")
        ax.set_xlabel("training step")
        ax.set_ylabel("loss")
        ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def silhouette_sweep(path, sweep, title=""):
    ks = [k for k, _ in sweep]
    vals = [v for _, v in sweep]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.plot(ks, vals, marker="o", lw=1)
        ax.set_xlabel("k")
        ax.set_ylabel("silhouette")
        ax.set_title(title)
        return _save(fig, path)
