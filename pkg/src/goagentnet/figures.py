"""Render comparison figures next to the delimited report output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _format_bandwidth(hz: float) -> str:
    if hz >= 1e9:
        return f"{hz / 1e9:g} GHz"
    if hz >= 1e6:
        return f"{hz / 1e6:g} MHz"
    if hz >= 1e3:
        return f"{hz / 1e3:g} kHz"
    return f"{hz:g} Hz"


def render_sweep_figure(rows: Sequence[Sequence], out_path: str | Path) -> Path:
    """Two-panel bar chart (communication energy, success rate) per bandwidth.

    ``rows`` use the sweep CSV column order: bandwidth_hz, arch,
    representation, t_e2e, E_c, E_x, S, U.
    """
    out_path = Path(out_path)
    bandwidths = sorted({row[0] for row in rows})
    archs = sorted({row[1] for row in rows})
    by_key = {(row[0], row[1]): row for row in rows}

    fig, (ax_energy, ax_success) = plt.subplots(1, 2, figsize=(9, 3.6))
    width = 0.8 / max(len(archs), 1)
    for idx, arch in enumerate(archs):
        offsets = [i + (idx - (len(archs) - 1) / 2) * width for i in range(len(bandwidths))]
        energy = [by_key[(b, arch)][4] if (b, arch) in by_key else 0.0 for b in bandwidths]
        success = [by_key[(b, arch)][6] if (b, arch) in by_key else 0.0 for b in bandwidths]
        ax_energy.bar(offsets, energy, width=width, label=arch)
        ax_success.bar(offsets, success, width=width, label=arch)

    labels = [_format_bandwidth(b) for b in bandwidths]
    for ax, title, ylabel in (
        (ax_energy, "Communication energy", "energy (J)"),
        (ax_success, "Task success rate", "success probability"),
    ):
        ax.set_xticks(range(len(bandwidths)))
        ax.set_xticklabels(labels)
        ax.set_xlabel("bandwidth")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend()
    ax_energy.set_yscale("log")
    ax_success.set_ylim(0.0, 1.05)

    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
