"""SVG figures of compatibility-region boundaries."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

from matplotlib import rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

STYLES = {
    "uniform": dict(color="tab:blue", linestyle="-"),
    "depolarizing": dict(color="tab:orange", linestyle="--"),
    "physical": dict(color="tab:green", linestyle="-."),
}


def _draw(ax, regions, lo: float, hi: float):
    for name, reg in regions.items():
        ax.plot(reg.levels, reg.boundary, label=name, linewidth=1.4, **STYLES.get(name, {}))
    ax.set_xlim(lo, hi)
    ax.set_ylim(lo, hi)
    ax.set_xlabel("p")
    ax.set_ylabel("q")
    ax.set_aspect("equal")
    ax.grid(True, linewidth=0.3)


def plot_regions(regions: dict, path, zoom: bool = False, title: str | None = None) -> None:
    """Overlay the boundaries ``q*(p)`` of several regions and save as SVG.

    Points below a curve are compatible under that model. ``zoom`` adds a
    second panel restricted to ``[0.7, 1]^2``.
    """
    # fixed hash salt and no date keep the SVG byte-identical across runs
    with rc_context({"svg.hashsalt": "probenoise", "svg.fonttype": "none"}):
        fig = Figure(figsize=(10, 5) if zoom else (5.5, 5))
        axes = fig.subplots(1, 2) if zoom else [fig.subplots()]
        _draw(axes[0], regions, 0.0, 1.0)
        axes[0].legend(loc="lower left")
        if zoom:
            _draw(axes[1], regions, 0.7, 1.0)
            axes[1].set_title("zoom [0.7, 1]")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
