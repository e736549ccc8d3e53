"""Static SVG charts for a finished run: coefficient track, weight
trajectories, loss channels, and the squared-error field."""

import json
import os

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_lambda_track(report, path, true_segments=None):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    ts = np.array(report["knot_times"])
    vals = np.array(report["lambda_values"])
    ax.step(np.append(ts, report["config"]["grid"]["horizon"]),
            np.append(vals, vals[-1]), where="post", label="estimated track")
    for seg in report.get("segments", []):
        if seg["lambda_hat"] is not None:
            ax.hlines(seg["lambda_hat"], seg["t_lo"], seg["t_hi"],
                      colors="tab:green", linestyles="--", label="segment refit")
    if true_segments:
        tt = [s for s, _ in true_segments] + [report["config"]["grid"]["horizon"]]
        vv = [v for _, v in true_segments]
        ax.step(tt, vv + [vv[-1]], where="post", color="k", alpha=0.5, label="truth")
    for cp in report.get("changepoints", []):
        ax.axvline(cp[0], color="tab:red", alpha=0.4)
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    ax.legend(seen.values(), seen.keys(), fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("coefficient")
    ax.set_title("piecewise-constant coefficient estimate")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_weights(report, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    w = np.array(report["weight_history"])
    if len(w):
        for i, name in enumerate(["w1 (fitting)", "w2 (structure)", "w3 (tv)"]):
            ax.plot(np.arange(1, len(w) + 1), w[:, i], marker="o", ms=3, label=name)
    ax.set_xlabel("weight update")
    ax.set_ylabel("weight")
    ax.set_title("loss-weight trajectory")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_losses(report, path):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    hist = np.array(report["loss_history"])
    if len(hist):
        ks = np.arange(1, len(hist) + 1)
        for i, name in enumerate(["fitting", "structure", "tv channel"]):
            ax.semilogy(ks, np.maximum(hist[:, i], 1e-16), marker="o", ms=3, label=name)
    ax.set_xlabel("weight update")
    ax.set_ylabel("loss")
    ax.set_title("loss channels per batch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_error_heatmap(err_rows, path):
    """err_rows: (t, x, squared error) rows on a full grid."""
    plt = _plt()
    ts = np.unique(err_rows[:, 0])
    xs = np.unique(err_rows[:, 1])
    grid = err_rows[:, 2].reshape(len(ts), len(xs))
    fig, ax = plt.subplots(figsize=(7, 4))
    im = ax.pcolormesh(ts, xs, grid.T, shading="auto", cmap="magma")
    fig.colorbar(im, ax=ax, label="|u_nn - u|^2")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.set_title("squared error against the reference")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_run(run_dir, out_dir=None):
    """Emit all charts for a saved run directory; returns the written paths."""
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(run_dir, "report.json")) as fh:
        report = json.load(fh)
    true_segments = [tuple(s) for s in report["config"]["grid"]["lambda_segments"]]
    written = []

    def out(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    plot_lambda_track(report, out("lambda_track.svg"), true_segments)
    plot_weights(report, out("weights.svg"))
    plot_losses(report, out("losses.svg"))
    mse_path = os.path.join(run_dir, "mse_grid.csv")
    if os.path.exists(mse_path):
        rows = np.loadtxt(mse_path, delimiter=",", skiprows=1)
        plot_error_heatmap(rows, out("error_heatmap.svg"))
    return written
