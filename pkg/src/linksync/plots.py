"""Figure rendering for run artifacts.

Figures are a pure view of the recorded trajectory: positions per agent
and link distances against the broadcast radius.  They are written to
files (format chosen by the file suffix, SVG by default from the CLI) and
never influence the numeric outputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["save_position_figure", "save_distance_figure"]

_COMPONENT_STYLES = ("-", "--", ":", "-.")


def save_position_figure(record, path) -> None:
    """Agent state components versus time."""
    cfg = record.config
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i in range(cfg.n_agents):
        color = f"C{i % 10}"
        for d in range(cfg.dim):
            label = f"agent {i + 1}" if d == 0 else None
            ax.plot(
                record.times,
                record.positions[:, i, d],
                _COMPONENT_STYLES[d % len(_COMPONENT_STYLES)],
                color=color,
                linewidth=1.2,
                label=label,
            )
    unit = "m" if cfg.kind == "single-integrator" else "rad"
    ax.set_xlabel("time (s)")
    ax.set_ylabel(f"position ({unit})")
    ax.set_title(f"{cfg.name}: agent states")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_distance_figure(record, path) -> None:
    """Initial-link distances versus time, with the broadcast radius."""
    cfg = record.config
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for k, (a, b) in enumerate(record.graph.edges):
        ax.plot(
            record.times,
            record.edge_distances[:, k],
            linewidth=1.2,
            label=f"|x{a + 1} - x{b + 1}|",
        )
    ax.axhline(cfg.radius, color="k", linestyle="--", linewidth=1.5, label="radius")
    unit = "m" if cfg.kind == "single-integrator" else "rad"
    ax.set_xlabel("time (s)")
    ax.set_ylabel(f"link distance ({unit})")
    ax.set_title(f"{cfg.name}: link distances")
    ax.grid(True, alpha=0.3)
    if record.graph.n_edges <= 12:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
