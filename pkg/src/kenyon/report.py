from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .errors import UndefinedMeasureError
from .plots import plot_bars, plot_learning_curves, plot_specificity, plot_theta
from .sim.engine import RunRecord
from .sim.metrics import specificity_histogram

logger = logging.getLogger(__name__)

SUMMARY_METRICS = [
    "final_accuracy",
    "final_greedy_accuracy",
    "final_loss",
    "coding_level",
    "theta_mean",
    "theta_std",
    "theta_g",
    "acceptance_rate",
    "final_reward",
    "eval_accuracy",
    "specificity_before",
    "specificity_after",
]
SERIES_METRICS = ["accuracy", "greedy_accuracy", "loss", "coding_level", "theta_mean", "theta_g", "reward"]
PAIRED_COLUMNS = ["task", "metric", "a", "b", "n", "mean_diff", "statistic", "p_value"]
HIST_COLUMNS = ["task", "algorithm", "phase", "bin_left", "bin_right", "count"]
HIST_BINS = 20
REFERENCE = "composed"


@dataclass(slots=True, eq=False)
class ReportTables:
    summary: pd.DataFrame  # média ± desvio por (tarefa, algoritmo)
    series: pd.DataFrame  # curva média por (tarefa, algoritmo, episódio)
    paired: pd.DataFrame  # testes t pareados entre réplicas
    specificity_hist: pd.DataFrame  # Sp_i antes/depois somado entre réplicas


def _stack(records: Sequence[RunRecord], attr: str) -> pd.DataFrame:
    frames = []
    for run, rec in enumerate(records):
        frame = getattr(rec, attr)
        if frame is None or frame.empty:
            continue
        frames.append(frame.assign(run=run))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def _mean_std(frame: pd.DataFrame, keys: List[str], metrics: Sequence[str]) -> pd.DataFrame:
    present = [m for m in metrics if m in frame.columns]
    numeric = frame[keys + present].copy()
    for m in present:
        numeric[m] = pd.to_numeric(numeric[m], errors="coerce")
    grouped = numeric.groupby(keys, sort=True)
    mean = grouped[present].mean().add_suffix("_mean")
    # desvio populacional: uma réplica só tem desvio zero
    std = grouped[present].std(ddof=0).add_suffix("_std")
    out = pd.concat([mean, std], axis=1)
    ordered = [c for m in present for c in (f"{m}_mean", f"{m}_std")]
    return out[ordered].reset_index()


def _paired(summaries: pd.DataFrame) -> pd.DataFrame:
    rows: List[Dict[str, object]] = []
    if summaries.empty:
        return pd.DataFrame(columns=PAIRED_COLUMNS)
    for task, frame in summaries.groupby("task"):
        wide = frame.pivot_table(
            index=["run", "replica"], columns="algorithm", values="final_accuracy"
        )
        if REFERENCE in wide.columns:
            for other in wide.columns:
                if other == REFERENCE:
                    continue
                pair = wide[[REFERENCE, other]].dropna()
                rows.append(_ttest(task, "final_accuracy", REFERENCE, str(other), pair[REFERENCE], pair[other]))
        for algorithm, arm in frame.groupby("algorithm"):
            pair = arm[["specificity_after", "specificity_before"]].astype(float).dropna()
            if pair.empty:
                continue
            rows.append(
                _ttest(
                    task, "specificity_shift", str(algorithm), str(algorithm),
                    pair["specificity_after"], pair["specificity_before"],
                )
            )
    return pd.DataFrame(rows, columns=PAIRED_COLUMNS)


def _ttest(
    task: object, metric: str, a: str, b: str, xa: pd.Series, xb: pd.Series
) -> Dict[str, object]:
    n = len(xa)
    diff = float(np.mean(np.asarray(xa) - np.asarray(xb))) if n else float("nan")
    statistic = p_value = float("nan")
    if n >= 2:
        res = stats.ttest_rel(np.asarray(xa, dtype=float), np.asarray(xb, dtype=float))
        statistic, p_value = float(res.statistic), float(res.pvalue)
    return {
        "task": task, "metric": metric, "a": a, "b": b, "n": n,
        "mean_diff": diff, "statistic": statistic, "p_value": p_value,
    }


def _specificity_hist(records: Sequence[RunRecord], bins: int = HIST_BINS) -> pd.DataFrame:
    frames = [
        rec.specificity.assign(task=rec.config.get("task", ""))
        for rec in records
        if rec.specificity is not None and not rec.specificity.empty
    ]
    if not frames:
        return pd.DataFrame(columns=HIST_COLUMNS)
    spec = pd.concat(frames, ignore_index=True)
    out: List[pd.DataFrame] = []
    for (task, algorithm), frame in spec.groupby(["task", "algorithm"], sort=True):
        before = frame["sp_before"].to_numpy(dtype=float)
        after = frame["sp_after"].to_numpy(dtype=float)
        # faixa comum para que antes e depois sejam comparáveis bin a bin
        upper = float(max(before.max(initial=0.0), after.max(initial=0.0)))
        for phase, values in (("before", before), ("after", after)):
            out.append(
                specificity_histogram(values, bins=bins, upper=upper).assign(
                    task=task, algorithm=algorithm, phase=phase
                )
            )
    return pd.concat(out, ignore_index=True)[HIST_COLUMNS]


def report(records: Sequence[RunRecord]) -> ReportTables:
    """Agrega vários RunRecords; réplicas de registros diferentes contam como réplicas extras."""
    if not records:
        raise UndefinedMeasureError("nenhum registro para o relatório")
    summaries = _stack(records, "summaries")
    metrics = _stack(records, "metrics")
    summary = (
        _mean_std(summaries, ["task", "algorithm"], SUMMARY_METRICS)
        if not summaries.empty
        else pd.DataFrame()
    )
    if not summary.empty:
        counts = summaries.groupby(["task", "algorithm"]).size().rename("n_replicas")
        summary = summary.merge(counts, left_on=["task", "algorithm"], right_index=True)
    series = (
        _mean_std(metrics, ["task", "algorithm", "episode"], SERIES_METRICS)
        if not metrics.empty
        else pd.DataFrame()
    )
    return ReportTables(
        summary=summary,
        series=series,
        paired=_paired(summaries),
        specificity_hist=_specificity_hist(records),
    )


def write_report(records: Sequence[RunRecord], out_dir: Path | str) -> ReportTables:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tables = report(records)
    tables.summary.to_csv(out_dir / "report_summary.csv", index=False)
    tables.series.to_csv(out_dir / "report_series.csv", index=False)
    tables.paired.to_csv(out_dir / "report_paired.csv", index=False)
    tables.specificity_hist.to_csv(out_dir / "report_specificity_hist.csv", index=False)

    if not tables.summary.empty:
        for task, frame in tables.summary.groupby("task"):
            plot_bars(
                dict(zip(frame["algorithm"], frame["final_accuracy_mean"])),
                f"Acurácia final: {task}",
                out_dir / f"{task}_accuracy_bars.png",
                errors=dict(zip(frame["algorithm"], frame["final_accuracy_std"])),
            )
            plot_theta(frame, f"θ efetivo: {task}", out_dir / f"{task}_theta.png")
    if not tables.series.empty:
        for task, frame in tables.series.groupby("task"):
            plot_learning_curves(
                frame, f"Curvas de aprendizado: {task}", out_dir / f"{task}_curves.png"
            )

    spec = _stack(records, "specificity")
    if not spec.empty:
        for algorithm, frame in spec.groupby("algorithm"):
            plot_specificity(
                {
                    "antes": frame["sp_before"].to_numpy(dtype=float),
                    "depois": frame["sp_after"].to_numpy(dtype=float),
                },
                f"Especificidade: {algorithm}",
                out_dir / f"specificity_{algorithm}.png",
            )
    logger.info("relatório gravado em %s", out_dir)
    return tables
