"""The four figure builders and the deterministic render entry point.

Builders return live Figure objects so tests can inspect the plotted data;
render() writes the image and closes the figure.  Sizes, DPI, and styles are
fixed so identical inputs produce identical image bytes.
"""

import dataclasses

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .reader import load_columns, split_ood_rows

__all__ = ["FigureJob", "KINDS", "build", "render"]

KINDS = ("tradeoff", "soc", "retail", "ood")

_FIGSIZE = (6.4, 4.0)
_DPI = 150


@dataclasses.dataclass(frozen=True)
class FigureJob:
    """One rendering task: input CSV, figure kind, output image, style."""

    input_path: str
    kind: str
    output_path: str
    title: str | None = None
    log_x: bool = False
    log_y: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


def _new_axes():
    fig, ax = plt.subplots(figsize=_FIGSIZE, dpi=_DPI)
    return fig, ax


def _build_tradeoff(columns, path):
    fig, ax = _new_axes()
    # Rows arrive grouped by sample count with radii in sweep order, so each
    # group traces one profit-versus-risk frontier.
    series: dict[float, list] = {}
    for n, violation, profit in zip(columns["N"], columns["violation"],
                                    columns["profit"]):
        series.setdefault(n, []).append((violation, profit))
    for n, points in series.items():
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker="o", label=f"N={int(n)}")
    ax.set_xlabel("empirical violation rate")
    ax.set_ylabel("profit")
    if series:
        ax.legend()
    return fig


def _build_soc(columns, path):
    fig, ax = _new_axes()
    ax.plot(columns["k"], columns["b"], marker="o")
    ax.axhline(0.0, color="0.6", linewidth=0.8)
    ax.set_xlabel("step k")
    ax.set_ylabel("planned state of charge")
    return fig


def _build_retail(columns, path):
    fig, ax = _new_axes()
    ax.bar(columns["k"], columns["r"], width=0.7)
    ax.axhline(0.0, color="0.3", linewidth=0.8)
    ax.set_xlabel("step k")
    ax.set_ylabel("energy exchanged with retailer (buy > 0, sell < 0)")
    return fig


def _build_ood(columns, path):
    fig, ax = _new_axes()
    labels, rates, bound = split_ood_rows(columns, path)
    ax.bar(range(len(labels)), rates, width=0.7)
    ax.set_xticks(range(len(labels)), labels, rotation=90, fontsize=6)
    if bound is not None:
        ax.axhline(bound, color="C3", linestyle="--", label="certified bound")
        ax.legend()
    ax.set_xlabel("shifted test distribution")
    ax.set_ylabel("violation rate")
    return fig


_BUILDERS = {
    "tradeoff": _build_tradeoff,
    "soc": _build_soc,
    "retail": _build_retail,
    "ood": _build_ood,
}


def build(job: FigureJob):
    """The figure for a job, without writing it anywhere."""
    columns = load_columns(job.kind, job.input_path)
    fig = _BUILDERS[job.kind](columns, job.input_path)
    ax = fig.axes[0]
    if job.title:
        ax.set_title(job.title)
    if job.log_x:
        ax.set_xscale("log")
    if job.log_y:
        ax.set_yscale("log")
    fig.tight_layout()
    return fig


def render(job: FigureJob) -> None:
    """Write the job's figure to its output path."""
    fig = build(job)
    try:
        fig.savefig(job.output_path, dpi=_DPI)
    finally:
        plt.close(fig)
