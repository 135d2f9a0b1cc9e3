"""Figure rendering for the CLI report path.

Every function takes a metrics log (or trace arrays) and a file stem, writes
PNG files next to the delimited output, and returns the paths written.
matplotlib is imported lazily so data-only runs never touch it.
"""

from __future__ import annotations

import numpy as np

__all__ = ["render_selfplay_plots", "render_kernel_plots"]


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_selfplay_plots(log, stem) -> list[str]:
    """Regret, rate, and path-length figures for a self-play or adversarial log."""
    plt = _mpl()
    stem = str(stem)
    written = []
    t = np.arange(1, log.T + 1)

    fig, ax = plt.subplots(figsize=(7, 4.2))
    for i in range(log.n):
        ax.plot(t, log.regret[:, i], lw=1.0, label=f"player {i}")
    ax.set_xscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("external regret")
    ax.set_title(f"{log.algo} regret ({log.game_name or 'game'})")
    for i, sw in enumerate(log.switch_rounds):
        if sw is not None:
            ax.axvline(sw, color="red", ls="--", lw=0.8)
            ax.annotate(f"safeguard p{i}", (sw, ax.get_ylim()[1]), fontsize=8, color="red")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = stem + "_regret.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.2))
    for i in range(log.n):
        ax.plot(t, log.lam[:, i], lw=1.0, label=f"player {i}")
    ax.axhline(log.eta, color="gray", ls=":", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("learning rate")
    ax.set_title("rate trace (dotted: eta)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = stem + "_lambda.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)

    if log.T > 1:
        fig, ax = plt.subplots(figsize=(7, 4.2))
        cum = np.cumsum(log.path_len_sq.sum(axis=1))
        tt = np.arange(2, log.T + 1)
        ax.plot(tt, cum, lw=1.2, label="total squared path length")
        alphas = [log.params_for(i) for i in range(log.n)]
        bound = 144.0 * log.n * log.eta + 48.0 * sum(
            p.alpha * np.log(tt) + p.log_d for p in alphas
        )
        ax.plot(tt, bound, lw=1.0, ls="--", label="theorem budget")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("round")
        ax.legend(fontsize=8)
        ax.set_title("path length vs budget")
        fig.tight_layout()
        path = stem + "_pathlen.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_kernel_plots(rounds, lam_trace, deviation, stem) -> list[str]:
    """Rate trace and reference-deviation figure for a kernelized run."""
    plt = _mpl()
    stem = str(stem)
    written = []
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    axes[0].plot(rounds, lam_trace, lw=1.0)
    axes[0].set_xlabel("round")
    axes[0].set_ylabel("learning rate")
    axes[0].set_title("kernelized rate trace")
    if deviation is not None:
        dev = np.maximum(np.asarray(deviation), 1e-18)
        axes[1].semilogy(rounds, dev, lw=1.0)
        axes[1].set_xlabel("round")
        axes[1].set_ylabel("max |x - reference|")
        axes[1].set_title("deviation from reference")
    else:
        axes[1].axis("off")
    fig.tight_layout()
    path = stem + "_kernel.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written
