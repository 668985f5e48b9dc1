from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass
from math import factorial
from typing import Deque, Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from ..errors import ContractViolation, UndefinedMeasureError
from ..models import MetricPoint, SparseActivation, SparseReadout


@dataclass(slots=True, eq=False)
class ActivityCounts:
    n_active: np.ndarray  # n_nodes × n_class: vezes que o nó i ficou ativo na classe j
    class_totals: np.ndarray  # episódios por classe
    n_total: int = 0

    @classmethod
    def empty(cls, n_nodes: int, n_class: int) -> "ActivityCounts":
        return cls(
            n_active=np.zeros((n_nodes, n_class), dtype=np.int64),
            class_totals=np.zeros(n_class, dtype=np.int64),
        )

    def merge(self, other: "ActivityCounts") -> "ActivityCounts":
        if self.n_active.shape != other.n_active.shape:
            raise ContractViolation("contagens com formas diferentes não podem ser somadas")
        return ActivityCounts(
            n_active=self.n_active + other.n_active,
            class_totals=self.class_totals + other.class_totals,
            n_total=self.n_total + other.n_total,
        )


@dataclass(frozen=True, slots=True, eq=False)
class SpecificityReport:
    spec_tensor: np.ndarray  # n_nodes × n_class × n_class
    sp_per_neuron: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.sp_per_neuron.mean()) if self.sp_per_neuron.size else 0.0


@dataclass(frozen=True, slots=True)
class ThetaStats:
    mean: float
    std: float


def tally_activity(counts: ActivityCounts, x: SparseActivation, label: int) -> ActivityCounts:
    """Conta os nós ativos no instante da decisão (in-place; devolve o próprio acumulador)."""
    counts.n_active[x.x > 0, label] += 1
    counts.class_totals[label] += 1
    counts.n_total += 1
    return counts


def specificity(counts: ActivityCounts) -> SpecificityReport:
    if counts.n_total == 0:
        raise UndefinedMeasureError("especificidade indefinida com N = 0 episódios")
    n = counts.n_active.astype(float)
    spec = np.abs(n[:, :, None] - n[:, None, :]) / counts.n_total
    n_class = n.shape[1]
    upper = np.triu(np.ones((n_class, n_class), dtype=bool), k=1)
    # normalização (N_class - 1)!; para duas classes coincide com o número de pares
    sp = spec[:, upper].sum(axis=1) / factorial(max(n_class - 1, 0))
    return SpecificityReport(spec_tensor=spec, sp_per_neuron=sp)


def specificity_histogram(
    sp: np.ndarray | SpecificityReport, bins: int = 20, upper: float | None = None
) -> pd.DataFrame:
    """Histograma de Sp_i em `bins` faixas de [0, upper]; `upper` padrão é o maior Sp_i."""
    values = sp.sp_per_neuron if isinstance(sp, SpecificityReport) else np.asarray(sp, dtype=float)
    hi = upper if upper is not None else float(values.max(initial=0.0))
    hi = max(hi, 1e-12)
    counts, edges = np.histogram(values, bins=bins, range=(0.0, hi))
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def theta_stats(readout: SparseReadout) -> ThetaStats:
    theta = readout.effective_threshold()
    return ThetaStats(mean=float(theta.mean()), std=float(theta.std()))


def running_accuracy(history: Sequence[bool] | Iterable[bool], window: int) -> float:
    if window < 1:
        raise ContractViolation("a janela deve ser >= 1")
    recent = list(history)[-window:]
    if not recent:
        return float("nan")
    return float(np.mean(recent))


class RunningWindow:
    """Média das últimas `window` observações."""

    def __init__(self, window: int) -> None:
        if window < 1:
            raise ContractViolation("a janela deve ser >= 1")
        self._values: Deque[float] = deque(maxlen=window)

    def push(self, value: float) -> None:
        self._values.append(float(value))

    @property
    def value(self) -> float:
        if not self._values:
            return float("nan")
        return float(np.mean(self._values))

    def __len__(self) -> int:
        return len(self._values)


@dataclass(slots=True)
class MetricsSummary:
    algorithm: str
    episodes: int
    final_accuracy: float
    final_greedy_accuracy: float
    final_loss: float
    coding_level: float
    theta_mean: float
    theta_std: float
    theta_g: float
    acceptance_rate: float
    final_reward: float | None = None


def points_to_dataframe(points: Sequence[MetricPoint]) -> pd.DataFrame:
    return pd.DataFrame([asdict(p) for p in points])


def summarize(points: Sequence[MetricPoint]) -> MetricsSummary:
    if not points:
        raise UndefinedMeasureError("série de métricas vazia")
    last = points[-1]
    return MetricsSummary(
        algorithm=last.algorithm,
        episodes=last.episode,
        final_accuracy=last.accuracy,
        final_greedy_accuracy=last.greedy_accuracy,
        final_loss=last.loss,
        coding_level=last.coding_level,
        theta_mean=last.theta_mean,
        theta_std=last.theta_std,
        theta_g=last.theta_g,
        acceptance_rate=last.acceptance_rate,
        final_reward=last.reward,
    )


def summary_row(summary: MetricsSummary, **extra: object) -> Dict[str, object]:
    return {**extra, **asdict(summary)}


def merge_counts(all_counts: List[ActivityCounts]) -> ActivityCounts:
    if not all_counts:
        raise UndefinedMeasureError("nenhuma contagem para somar")
    total = all_counts[0]
    for c in all_counts[1:]:
        total = total.merge(c)
    return total
