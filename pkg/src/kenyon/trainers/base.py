from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Protocol, Tuple

import numpy as np

from ..errors import ConfigurationError, TrainingError
from ..generators import Episode, Task
from ..models import MetricPoint, Reservoir, ReservoirState, SparseActivation, SparseReadout
from ..sim.metrics import ActivityCounts, RunningWindow, tally_activity, theta_stats
from ..sim.readout import (
    choose,
    coding_level,
    dense_activation,
    greedy,
    output,
    softmax_probabilities,
    sparse_activation,
)
from ..sim.reservoir import run_episode

logger = logging.getLogger(__name__)

# theta_g candidatos quando não há calibração pelo coding level
DEFAULT_PRELEARN_CANDIDATES: Tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4)


@dataclass(frozen=True, slots=True)
class TrainerConfig:
    eta_w: float = 0.0018
    eta_theta: float = 0.00018
    n_batch: int = 1
    sigma_m: float = 0.05
    m_steps: int = 100
    beta: float = 4.0
    alpha_m: float | None = None  # None -> 1 / m_steps
    temperature: float = 1.0
    window: int = 1000
    log_interval: int = 1000
    theta_g_init: float = 0.0
    prelearn_candidates: Tuple[float, ...] = DEFAULT_PRELEARN_CANDIDATES
    prelearn_steps: int = 10000

    def validate(self) -> None:
        if self.eta_w < 0 or self.eta_theta < 0:
            raise ConfigurationError("taxas de aprendizado não podem ser negativas", key="eta")
        if self.n_batch < 1:
            raise ConfigurationError("n_batch deve ser >= 1", key="n_batch")
        if self.sigma_m < 0:
            raise ConfigurationError("sigma_m não pode ser negativo", key="sigma_m")
        if self.m_steps < 1:
            raise ConfigurationError("m_steps deve ser >= 1", key="m_steps")
        if self.beta < 0:
            raise ConfigurationError("beta não pode ser negativo", key="beta")
        if not 0.0 < self.running_rate <= 1.0:
            raise ConfigurationError("alpha_m deve estar em (0, 1]", key="alpha_m")
        if self.temperature <= 0:
            raise ConfigurationError("a temperatura deve ser positiva", key="temperature")
        if self.window < 1 or self.log_interval < 1:
            raise ConfigurationError("window e log_interval devem ser >= 1", key="window")
        if self.prelearn_steps < 0:
            raise ConfigurationError("prelearn_steps não pode ser negativo", key="prelearn_steps")

    def validate_rounds(self) -> None:
        """Cada rodada de Metropolis tem de conter lotes inteiros."""
        self.validate()
        if self.m_steps % self.n_batch:
            raise ConfigurationError(
                f"m_steps={self.m_steps} não é múltiplo de n_batch={self.n_batch}", key="m_steps"
            )

    @property
    def running_rate(self) -> float:
        return self.alpha_m if self.alpha_m is not None else 1.0 / self.m_steps


@dataclass(slots=True)
class Outcome:
    """O que um episódio produziu para uma rede."""

    cost: float
    correct: bool
    greedy_correct: bool
    coding_level: float
    activation: SparseActivation
    reward: float | None = None


class BatchAccumulator:
    """Acumula passos de gradiente com parâmetros congelados até o fim do lote.

    `average=True` aplica a média do lote (supervisionado); `False` aplica a soma
    (versão em lote da regra de RL).
    """

    def __init__(self, n_class: int, n_nodes: int, average: bool = True) -> None:
        self.d_w = np.zeros((n_class, n_nodes))
        self.d_theta = np.zeros(n_nodes)
        self.count = 0
        self.average = average

    def add(self, d_w: np.ndarray, d_theta: np.ndarray | None = None) -> None:
        self.d_w += d_w
        if d_theta is not None:
            self.d_theta += d_theta
        self.count += 1

    def apply(self, readout: SparseReadout) -> None:
        if self.count == 0:
            return
        scale = 1.0 / self.count if self.average else 1.0
        readout.w_out += scale * self.d_w
        readout.theta_local += scale * self.d_theta
        self.d_w[:] = 0.0
        self.d_theta[:] = 0.0
        self.count = 0


class Learner(Protocol):
    """Transforma o estado no instante da decisão em custo, decisão e gradientes."""

    use_thresholds: bool

    def respond(
        self,
        readout: SparseReadout,
        acc: BatchAccumulator,
        state: ReservoirState,
        label: int,
        u: float,
    ) -> Outcome: ...

    def new_accumulator(self, readout: SparseReadout) -> BatchAccumulator: ...


@dataclass(slots=True)
class AcceptanceRecord:
    round: int
    episode: int
    theta_minus: float
    theta_plus: float
    cost_minus: float
    cost_plus: float
    probability: float
    accepted: bool


@dataclass(slots=True)
class TrainResult:
    readout: SparseReadout
    points: List[MetricPoint] = field(default_factory=list)
    acceptances: List[AcceptanceRecord] = field(default_factory=list)
    theta_g_initial: float = 0.0


@dataclass(slots=True)
class Evaluation:
    accuracy: float
    greedy_accuracy: float
    coding_level: float
    counts: ActivityCounts


def activate(state: ReservoirState, readout: SparseReadout, use_thresholds: bool) -> SparseActivation:
    return sparse_activation(state, readout) if use_thresholds else dense_activation(state)


def present(
    reservoir: Reservoir, task: Task, rng: np.random.Generator
) -> Tuple[Episode, ReservoirState]:
    """Sorteia um item da tarefa, gera o episódio ruidoso e integra o reservatório."""
    item = int(rng.integers(task.n_items))
    episode = task.make_episode(item, rng)
    return episode, run_episode(reservoir, episode.inputs)


def check_finite(value: float, episode: int, algorithm: str, what: str = "custo") -> None:
    if not np.isfinite(value):
        raise TrainingError(
            f"{what} não finito no episódio {episode} ({algorithm})",
            episode=episode,
            algorithm=algorithm,
        )


class TrainingMonitor:
    """Janelas móveis das métricas e emissão de pontos a cada intervalo."""

    def __init__(self, algorithm: str, config: TrainerConfig, track_reward: bool = False) -> None:
        self.algorithm = algorithm
        self.log_interval = config.log_interval
        self.correct = RunningWindow(config.window)
        self.greedy = RunningWindow(config.window)
        self.loss = RunningWindow(config.window)
        self.coding = RunningWindow(config.window)
        self.reward = RunningWindow(config.window) if track_reward else None
        self.decisions = 0
        self.accepted = 0
        self.points: List[MetricPoint] = []
        self._last_emitted = -1

    def observe(self, episode: int, outcome: Outcome, readout: SparseReadout) -> None:
        self.correct.push(outcome.correct)
        self.greedy.push(outcome.greedy_correct)
        self.loss.push(outcome.cost)
        self.coding.push(outcome.coding_level)
        if self.reward is not None and outcome.reward is not None:
            self.reward.push(outcome.reward)
        if episode % self.log_interval == 0:
            self.emit(episode, readout)

    def record_decision(self, accepted: bool) -> None:
        self.decisions += 1
        self.accepted += int(accepted)

    def emit(self, episode: int, readout: SparseReadout) -> MetricPoint:
        stats = theta_stats(readout)
        point = MetricPoint(
            episode=episode,
            algorithm=self.algorithm,
            accuracy=self.correct.value,
            greedy_accuracy=self.greedy.value,
            loss=self.loss.value,
            coding_level=self.coding.value,
            theta_mean=stats.mean,
            theta_std=stats.std,
            theta_g=readout.theta_global,
            acceptance_rate=(self.accepted / self.decisions) if self.decisions else float("nan"),
            reward=self.reward.value if self.reward is not None else None,
        )
        self.points.append(point)
        self._last_emitted = episode
        logger.info(
            "%s ep=%d acc=%.3f loss=%.4f coding=%.3f theta_g=%.4f",
            self.algorithm, episode, point.accuracy, point.loss, point.coding_level, point.theta_g,
        )
        return point

    def finish(self, episode: int, readout: SparseReadout) -> List[MetricPoint]:
        if episode != self._last_emitted:
            self.emit(episode, readout)
        return self.points


def run_single_network(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    learner: Learner,
    config: TrainerConfig,
    rng: np.random.Generator,
    algorithm: str,
    episode_rng: np.random.Generator | None = None,
    track_reward: bool = False,
) -> TrainResult:
    """Laço de treino de uma só rede (GD_W, GD_theta e o braço GD_W do bandit)."""
    config.validate()
    episode_rng = rng if episode_rng is None else episode_rng
    readout = readout.copy()
    monitor = TrainingMonitor(algorithm, config, track_reward=track_reward)
    monitor.emit(0, readout)
    acc = learner.new_accumulator(readout)

    for episode in range(1, n_episodes + 1):
        ep, state = present(reservoir, task, episode_rng)
        outcome = learner.respond(readout, acc, state, ep.label, float(rng.random()))
        check_finite(outcome.cost, episode, algorithm)
        if episode % config.n_batch == 0:
            acc.apply(readout)
            logger.debug("%s: lote aplicado no episódio %d", algorithm, episode)
        monitor.observe(episode, outcome, readout)

    if not readout.is_finite():
        raise TrainingError(
            f"parâmetros não finitos após o treino ({algorithm})",
            episode=n_episodes,
            algorithm=algorithm,
        )
    points = monitor.finish(n_episodes, readout) if n_episodes else monitor.points
    return TrainResult(readout=readout, points=points, theta_g_initial=readout.theta_global)


def evaluate(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    rng: np.random.Generator,
    use_thresholds: bool = True,
    temperature: float = 1.0,
) -> Evaluation:
    """Passe com parâmetros congelados; conta atividade para a especificidade."""
    counts = ActivityCounts.empty(reservoir.n_nodes, readout.n_class)
    correct = greedy_correct = 0
    coding = 0.0
    for _ in range(n_episodes):
        ep, state = present(reservoir, task, rng)
        x = activate(state, readout, use_thresholds)
        y = output(x, readout)
        choice = choose(softmax_probabilities(y, temperature), float(rng.random()))
        correct += int(choice == ep.label)
        greedy_correct += int(greedy(y) == ep.label)
        coding += coding_level(x)
        tally_activity(counts, x, ep.label)
    n = max(n_episodes, 1)
    return Evaluation(
        accuracy=correct / n if n_episodes else float("nan"),
        greedy_accuracy=greedy_correct / n if n_episodes else float("nan"),
        coding_level=coding / n if n_episodes else float("nan"),
        counts=counts,
    )


def sample_potentials(
    reservoir: Reservoir, task: Task, n_episodes: int, rng: np.random.Generator
) -> np.ndarray:
    """V no instante da decisão, uma linha por episódio sorteado."""
    if n_episodes < 1:
        raise ConfigurationError(
            "são necessários episódios de calibração", key="calibration_episodes"
        )
    return np.stack([present(reservoir, task, rng)[1].v for _ in range(n_episodes)])


def threshold_for_coding(potentials: np.ndarray, coding: float) -> float:
    """Limiar global cujo coding level médio sobre `potentials` vale `coding` (nunca negativo)."""
    if not 0.0 < coding <= 1.0:
        raise ConfigurationError(f"coding level {coding} fora de (0, 1]", key="coding")
    return max(0.0, float(np.quantile(potentials, 1.0 - coding)))
