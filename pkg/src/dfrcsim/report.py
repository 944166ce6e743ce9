# Figure rendering for experiment outputs: sweep summaries and beampatterns
# are drawn to image files next to the delimited results.

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SWEEP_LABELS = {
    "gamma_db": "sensing requirement (dB)",
    "pt_dbm": "transmit power (dBm)",
    "num_users": "number of users",
    "num_tx_antennas": "transmit antennas",
}

_ARCH_STYLE = {
    "RS": dict(color="tab:blue", marker="o"),
    "PC": dict(color="tab:orange", marker="s"),
    "FD": dict(color="tab:green", marker="^"),
}


def render_sweep_figure(summary: list[dict], path: str | Path) -> Path:
    """Mean sum-rate and per-user energy efficiency vs the sweep variable,
    one errorbar curve per architecture."""
    if not summary:
        raise ValueError("empty summary")
    sweep_var = summary[0]["sweep_variable"]
    archs = sorted({row["architecture"] for row in summary},
                   key=lambda a: ("RS", "PC", "FD").index(a) if a in ("RS", "PC", "FD") else 9)

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for arch in archs:
        rows = sorted((r for r in summary if r["architecture"] == arch),
                      key=lambda r: r["sweep_value"])
        x = np.array([r["sweep_value"] for r in rows])
        style = _ARCH_STYLE.get(arch, {})
        axes[0].errorbar(x, [r["sum_rate_bps_hz_mean"] for r in rows],
                         yerr=[r["sum_rate_bps_hz_std"] for r in rows],
                         label=arch, capsize=3, **style)
        axes[1].errorbar(x, [r["ee_bps_hz_per_w_mean"] for r in rows],
                         yerr=[r["ee_bps_hz_per_w_std"] for r in rows],
                         label=arch, capsize=3, **style)
    axes[0].set_ylabel("sum-rate (bits/s/Hz)")
    axes[1].set_ylabel("energy efficiency (bits/s/Hz per W per user)")
    for ax in axes:
        ax.set_xlabel(_SWEEP_LABELS.get(sweep_var, sweep_var))
        ax.grid(True, alpha=0.4)
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_beampattern_figure(angles_deg: np.ndarray, curves: dict[str, np.ndarray],
                              path: str | Path, target_deg: float | None = None,
                              clutter_deg: np.ndarray | None = None) -> Path:
    """Peak-normalized beampatterns in dB, with target/clutter markers."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for arch, p_db in curves.items():
        ax.plot(angles_deg, p_db, label=arch, **{k: v for k, v in
                _ARCH_STYLE.get(arch, {}).items() if k == "color"})
    if target_deg is not None:
        ax.axvline(target_deg, color="k", linestyle="--", alpha=0.6, label="target")
    if clutter_deg is not None:
        for i, c in enumerate(np.atleast_1d(clutter_deg)):
            ax.axvline(c, color="r", linestyle=":", alpha=0.6,
                       label="clutter" if i == 0 else None)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalized beampattern (dB)")
    ax.set_xlim(angles_deg.min(), angles_deg.max())
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
