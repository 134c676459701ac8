"""Schedule rendering: one row per core and interconnect, wrapped
segments drawn as split boxes inside [0, P)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .caps_hms import Schedule, f_wrap
from .fileio import task_label

EXEC_COLOR = "#f2a6a6"
READ_COLOR = "#cdebc4"
WRITE_COLOR = "#7fbf6f"


def render_gantt(schedule: Schedule, path: str | Path, title: str | None = None) -> None:
    tasks = schedule.tasks
    resources = [r for r in sorted(tasks.by_resource) if tasks.by_resource[r]]
    fig, ax = plt.subplots(figsize=(max(6.0, schedule.period * 0.5), 0.6 * len(resources) + 1.5))
    ylabels = []
    for row, resource in enumerate(resources):
        ylabels.append(resource)
        for task in tasks.by_resource[resource]:
            duration = tasks.durations[task]
            if duration == 0:
                continue
            if isinstance(task, str):
                color = EXEC_COLOR
            elif task[0] in schedule.actor_binding:
                color = WRITE_COLOR
            else:
                color = READ_COLOR
            for lo, hi in f_wrap(schedule.period, schedule.start_times[task], duration):
                ax.add_patch(
                    Rectangle(
                        (lo, row + 0.1),
                        hi - lo,
                        0.8,
                        facecolor=color,
                        edgecolor="black",
                        linewidth=0.6,
                    )
                )
                if hi - lo >= 1:
                    ax.text(
                        (lo + hi) / 2,
                        row + 0.5,
                        task_label(task),
                        ha="center",
                        va="center",
                        fontsize=7,
                    )
    ax.set_xlim(0, schedule.period)
    ax.set_ylim(0, len(resources))
    ax.set_yticks([r + 0.5 for r in range(len(resources))])
    ax.set_yticklabels(ylabels)
    ax.set_xticks(range(schedule.period + 1))
    ax.set_xlabel("tick within period")
    ax.grid(axis="x", linestyle=":", linewidth=0.5, alpha=0.6)
    ax.set_title(title or f"period P = {schedule.period}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
