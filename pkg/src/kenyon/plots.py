from __future__ import annotations

from pathlib import Path
from typing import Dict, Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

COLORS = {
    "gd_w": "#4C78A8",
    "gd_theta": "#F58518",
    "metropolis": "#54A24B",
    "composed": "#E45756",
}


def _save(fig: plt.Figure, out: Path) -> None:
    plt.subplots_adjust(bottom=0.25, top=0.9)
    fig.savefig(out, dpi=150, bbox_inches="tight", pad_inches=0.1)
    plt.close(fig)


def plot_bars(
    metric_by_algorithm: Mapping[str, float],
    title: str,
    out: Path,
    errors: Mapping[str, float] | None = None,
    ylabel: str = "acurácia",
) -> None:
    names = list(metric_by_algorithm.keys())
    values = [metric_by_algorithm[k] for k in names]
    yerr = [errors.get(k, 0.0) for k in names] if errors else None
    x = list(range(len(names)))
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.bar(x, values, yerr=yerr, capsize=4, color=[COLORS.get(n, "#72B7B2") for n in names])
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.3f}", ha="center", va="bottom", fontsize=8)
    _save(fig, out)


def plot_learning_curves(
    series: pd.DataFrame, title: str, out: Path, column: str = "accuracy"
) -> None:
    """Uma curva média por algoritmo, faixa de ± desvio entre réplicas."""
    fig, ax = plt.subplots(figsize=(9, 5))
    for algorithm, frame in series.groupby("algorithm"):
        frame = frame.sort_values("episode")
        mean = frame[f"{column}_mean"].to_numpy(dtype=float)
        std = frame[f"{column}_std"].fillna(0.0).to_numpy(dtype=float)
        color = COLORS.get(str(algorithm))
        ax.plot(frame["episode"], mean, label=str(algorithm), color=color)
        ax.fill_between(frame["episode"], mean - std, mean + std, alpha=0.2, color=color)
    ax.set_xlabel("episódio")
    ax.set_ylabel(column)
    ax.set_title(title)
    ax.legend()
    _save(fig, out)


def plot_theta(summary: pd.DataFrame, title: str, out: Path) -> None:
    """Média e desvio do limiar efetivo por algoritmo (barras de erro)."""
    names = summary["algorithm"].astype(str).tolist()
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.errorbar(
        x,
        summary["theta_mean_mean"],
        yerr=summary["theta_std_mean"],
        fmt="o",
        capsize=5,
        color="#B279A2",
    )
    ax.set_title(title)
    ax.set_ylabel("θ efetivo")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    plt.setp(ax.get_xticklabels(), rotation=20, ha="right")
    _save(fig, out)


def plot_specificity(
    sp_by_phase: Dict[str, np.ndarray], title: str, out: Path, bins: int = 30
) -> None:
    fig, ax = plt.subplots(figsize=(8, 5))
    hi = max((float(v.max(initial=0.0)) for v in sp_by_phase.values()), default=0.0)
    edges = np.linspace(0.0, max(hi, 1e-12), bins + 1)
    for phase, values in sp_by_phase.items():
        ax.hist(values, bins=edges, alpha=0.5, label=phase)
    ax.set_xlabel("Sp_i")
    ax.set_ylabel("nós")
    ax.set_title(title)
    ax.legend()
    _save(fig, out)


def plot_line(values_by_x: Mapping[float, float], title: str, out: Path, ylabel: str) -> None:
    xs = list(values_by_x.keys())
    ys = [values_by_x[k] for k in xs]
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(xs, ys, marker="o", color="#F58518")
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    for xi, v in zip(xs, ys):
        ax.text(xi, v, f"{v:.3f}", ha="center", va="bottom", fontsize=8)
    _save(fig, out)
