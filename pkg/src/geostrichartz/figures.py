"""PNG figures for run reports (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# sweeps whose values span decades; already-logged columns are left linear
_LOG_X = {"residual", "dilation", "froude"}
_LOG_Y = {"residual", "refinement", "energy"}


def _style(ax, sweep) -> None:
    if sweep.name in _LOG_X:
        ax.set_xscale("log")
    if sweep.name in _LOG_Y:
        ax.set_yscale("symlog", linthresh=1e-16) if sweep.name == "energy" else ax.set_yscale("log")
    ax.grid(True, alpha=0.3)


def render_figures(report, out_dir) -> list[Path]:
    """One figure per sweep: every column against the first one."""
    out_dir = Path(out_dir)
    paths = []
    for sw in report.sweeps:
        data = np.asarray(sw.rows, dtype=float)
        if data.size == 0:
            continue
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for j, name in enumerate(sw.columns[1:], start=1):
            ax.plot(data[:, 0], data[:, j], marker="o", lw=1.2, label=name)
        ax.set_xlabel(sw.columns[0])
        ax.set_title(f"{report.config.experiment}: {sw.name}", fontsize=10)
        if len(sw.columns) > 2:
            ax.legend(fontsize=8)
        _style(ax, sw)
        fig.tight_layout()
        path = out_dir / f"{report.config.experiment}_{sw.name}.png"
        fig.savefig(path, dpi=110, metadata={"Description": f"config_hash={report.config_hash}", "Software": None})
        plt.close(fig)
        paths.append(path)
    return paths
