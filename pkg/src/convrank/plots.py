"""Report figures written next to the TSV outputs (PNG, Agg backend)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _figure(width=5.0, height=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    return plt.subplots(figsize=(width, height or width * golden))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_loss_curve(history, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        epochs = [e.epoch for e in history]
        ax.plot(epochs, [e.mean_loss for e in history], marker="o", label="mean loss")
        ax.axhline(np.log(2), color="grey", lw=0.8, ls="--", label="ln 2")
        ax.set_xlabel("epoch")
        ax.set_ylabel("cross-entropy")
        ax2 = ax.twinx()
        ax2.plot(epochs, [e.train_accuracy for e in history], color="C1", marker="s", label="train accuracy")
        ax2.set_ylabel("accuracy")
        ax2.set_ylim(0, 1.02)
        lines = ax.get_lines() + ax2.get_lines()
        ax.legend(lines, [ln.get_label() for ln in lines], loc="center right", frameon=False)
        return _save(fig, path)


def plot_reason_errors(rows, path):
    """Bar per reason code: relative error decrease of the model over the baseline (%)."""
    rows = [r for r in rows if r.relative_decrease is not None]
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        values = [r.relative_decrease for r in rows]
        colors = ["C0" if v >= 0 else "C3" for v in values]
        ax.bar([r.code for r in rows], values, color=colors)
        ax.axhline(0, color="black", lw=0.8)
        ax.set_ylabel("relative error decrease (%)")
        ax.set_xlabel("reason code")
        return _save(fig, path)


def plot_word_differences(diff, path):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8, 4))
        for ax, items, title in ((axes[0], diff.convincing, "convincing - non-convincing"),
                                 (axes[1], diff.non_convincing, "non-convincing - convincing")):
            words = [w for w, _ in items][::-1]
            ax.barh(words, [v for _, v in items][::-1])
            ax.set_title(title)
            ax.set_xlabel("frequency difference")
        return _save(fig, path)


def plot_stance_grid(grid, labels, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure(4.0, 3.4)
        im = ax.imshow(grid, vmin=0, vmax=1, cmap="viridis")
        ax.set_xticks(range(len(labels)), [s.lower() for s in labels])
        ax.set_yticks(range(len(labels)), [s.lower() for s in labels])
        ax.set_xlabel("test")
        ax.set_ylabel("train")
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                ax.text(j, i, f"{grid[i, j]:.2f}", ha="center", va="center", color="white")
        fig.colorbar(im, ax=ax, label="accuracy")
        return _save(fig, path)


def plot_score_scatter(predicted, gold, path):
    keys = sorted(gold)
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.scatter([gold[k] for k in keys], [predicted[k] for k in keys], s=8)
        ax.set_xlabel("gold score")
        ax.set_ylabel("model score")
        return _save(fig, path)
