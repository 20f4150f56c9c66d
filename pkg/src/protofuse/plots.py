"""Figure rendering for the report paths (Agg backend, files only)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_loss_history(history, path):
    """Training loss curve."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(np.arange(1, len(history) + 1), history, marker="o", ms=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy loss")
    ax.set_title("training loss")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_lambda_sweep(lambdas, reports, path):
    """Accuracy vs fusion weight with a +-1 std band."""
    means = np.array([r.mean for r in reports])
    stds = np.array([r.std for r in reports])
    x = np.asarray(lambdas, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(x, means, marker="o")
    ax.fill_between(x, means - stds, means + stds, alpha=0.2)
    ax.set_xlabel("fusion weight $\\lambda$")
    ax.set_ylabel("accuracy")
    ax.set_title(f"{reports[0].shots}-shot accuracy vs $\\lambda$")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_ablation(reports, path):
    """Bar chart of the ablation rows with std error bars."""
    labels = [r.label for r in reports]
    means = [r.mean for r in reports]
    stds = [r.std for r in reports]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(labels, means, yerr=stds, capsize=4, color="tab:blue", alpha=0.8)
    ax.set_ylabel("accuracy")
    ax.set_title(f"{reports[0].shots}-shot ablations")
    ax.set_ylim(0, 1)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
