"""Figure rendering for the CLI report paths.

Each renderer takes the in-memory report next to which the delimited
output is written and saves a PNG alongside it.  Rendering is pinned to
the Agg backend with fixed metadata so reruns produce byte-identical
files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVEFIG_KW = {"dpi": 150, "metadata": {"Software": "relcomp"}}


def _save(fig, path):
    fig.savefig(path, **_SAVEFIG_KW)
    plt.close(fig)


def render_correlation_histogram(report, path, title="Cross-dimensional correlations"):
    """Bar chart of the off-diagonal correlation histogram with the
    mean |corr| and sd annotated."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    lowers = [b[0] for b in report.histogram]
    uppers = [b[1] for b in report.histogram]
    counts = [b[2] for b in report.histogram]
    widths = [u - l for l, u in zip(lowers, uppers)]
    ax.bar(lowers, counts, width=widths, align="edge", color="#4878cf", edgecolor="none")
    ax.set_xlim(-1.0, 1.0)
    ax.set_xlabel("Pearson correlation (off-diagonal)")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.text(
        0.02,
        0.95,
        f"mean |corr| = {report.mean_abs_offdiag:.4f}\nsd = {report.sd_offdiag:.4f}",
        transform=ax.transAxes,
        va="top",
        fontsize=9,
        bbox={"boxstyle": "round", "facecolor": "white", "alpha": 0.8},
    )
    fig.tight_layout()
    _save(fig, path)


def render_training_curves(trace, path):
    """Two panels: tensor norm with p/q on a twin axis, and the loss curve
    (plus benchmark accuracies when the trace has them)."""
    if not trace.records:
        return False
    epochs = [r.epoch for r in trace.records]
    fig, (ax_params, ax_loss) = plt.subplots(1, 2, figsize=(10.0, 4.0))

    ax_params.plot(epochs, trace.frobenius_norms(), color="#d65f5f", label="||A||_F")
    ax_params.set_xlabel("epoch")
    ax_params.set_ylabel("||A||_F", color="#d65f5f")
    twin = ax_params.twinx()
    twin.plot(epochs, [r.p for r in trace.records], color="#4878cf", label="p")
    twin.plot(epochs, [r.q for r in trace.records], color="#6acc65", label="q")
    twin.set_ylabel("p, q")
    lines, labels = ax_params.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax_params.legend(lines + lines2, labels + labels2, loc="center right", fontsize=8)
    ax_params.set_title("operator parameters")

    ax_loss.plot(epochs, trace.losses(), color="#333333", label="mean loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean training loss")
    sat = [(r.epoch, r.sat_acc) for r in trace.records if r.sat_acc is not None]
    maxdiff = [
        (r.epoch, r.maxdiff_acc) for r in trace.records if r.maxdiff_acc is not None
    ]
    if sat or maxdiff:
        twin_acc = ax_loss.twinx()
        if sat:
            twin_acc.plot(*zip(*sat), color="#4878cf", label="SAT acc")
        if maxdiff:
            twin_acc.plot(*zip(*maxdiff), color="#6acc65", label="MaxDiff acc")
        twin_acc.set_ylabel("accuracy")
        twin_acc.set_ylim(0.0, 1.0)
        lines, labels = ax_loss.get_legend_handles_labels()
        lines2, labels2 = twin_acc.get_legend_handles_labels()
        ax_loss.legend(lines + lines2, labels + labels2, loc="center right", fontsize=8)
    else:
        ax_loss.legend(loc="upper right", fontsize=8)
    ax_loss.set_title("training loss")

    fig.tight_layout()
    _save(fig, path)
    return True


def render_eval_scores(reports, path):
    """Bar chart of the aggregate score per benchmark."""
    if not reports:
        return False
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    names = [r.metric for r in reports]
    scores = [r.score for r in reports]
    ax.bar(range(len(names)), scores, color="#4878cf")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=15, ha="right", fontsize=9)
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("score")
    ax.set_title("benchmark scores")
    for i, score in enumerate(scores):
        ax.text(i, score, f"{score:.3f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    _save(fig, path)
    return True


def render_verification(manifest, path):
    """Error-bar plot of every check estimate with its 3-sigma interval."""
    checks = manifest.get("checks", [])
    if not checks:
        return False
    fig, ax = plt.subplots(figsize=(8.0, 0.6 + 0.42 * len(checks)))
    ys = range(len(checks))
    for y, entry in zip(ys, checks):
        color = "#6acc65" if entry["pass"] else "#d65f5f"
        ax.errorbar(
            entry["estimate"],
            y,
            xerr=3.0 * entry["std_error"],
            fmt="o",
            color=color,
            ecolor=color,
            capsize=3,
        )
        if "analytic" in entry:
            ax.plot(entry["analytic"], y, marker="x", color="#333333")
    ax.axvline(0.0, color="#999999", linewidth=0.8)
    ax.set_yticks(list(ys))
    ax.set_yticklabels([entry["check"] for entry in checks], fontsize=8)
    ax.set_xlabel("estimate (3-sigma bars; x = analytic value)")
    ax.set_title("verification checks" + ("" if manifest["pass"] else " (FAILED)"))
    fig.tight_layout()
    _save(fig, path)
    return True
