from __future__ import annotations

import numpy as np

from ..generators import Task
from ..models import Reservoir, ReservoirState, SparseActivation, SparseReadout, TargetVector
from ..sim.readout import choose, coding_level, greedy, output, softmax_probabilities
from .base import (
    BatchAccumulator,
    Outcome,
    TrainerConfig,
    TrainResult,
    activate,
    run_single_network,
)


def loss(y_true: TargetVector, y: np.ndarray) -> float:
    """E = sum_j (y_true_j - y_j)^2."""
    r = y_true.y_true - np.asarray(y, dtype=float)
    return float(r @ r)


def weight_step(x: np.ndarray, residual: np.ndarray, eta_w: float) -> np.ndarray:
    # descida em E: dE/dW_ji = -2 (y_true_j - y_j) x_i
    return 2.0 * eta_w * np.outer(residual, x)


def threshold_step(
    x: np.ndarray, residual: np.ndarray, w_out: np.ndarray, eta_theta: float
) -> np.ndarray:
    """-eta * sum_j r_j W_ji H(x_i), com H(0) = 0 (o fator 2 fica absorvido em eta)."""
    return -eta_theta * (residual @ w_out) * (x > 0)


def grad_w_update(
    readout: SparseReadout,
    x: SparseActivation,
    y_true: TargetVector,
    y: np.ndarray,
    eta_w: float,
) -> SparseReadout:
    updated = readout.copy()
    updated.w_out += weight_step(x.x, y_true.y_true - y, eta_w)
    return updated


def grad_theta_update(
    readout: SparseReadout,
    x: SparseActivation,
    y_true: TargetVector,
    y: np.ndarray,
    eta_theta: float,
) -> SparseReadout:
    updated = readout.copy()
    updated.theta_local += threshold_step(x.x, y_true.y_true - y, readout.w_out, eta_theta)
    return updated


class SupervisedLearner:
    """Custo quadrático contra o alvo one-hot; GD em W_out e, opcionalmente, em theta_local."""

    def __init__(
        self, config: TrainerConfig, learn_local: bool, use_thresholds: bool = True
    ) -> None:
        self.eta_w = config.eta_w
        self.eta_theta = config.eta_theta if learn_local else 0.0
        self.learn_local = learn_local
        self.use_thresholds = use_thresholds
        self.temperature = config.temperature

    def new_accumulator(self, readout: SparseReadout) -> BatchAccumulator:
        return BatchAccumulator(readout.n_class, readout.n_nodes, average=True)

    def respond(
        self,
        readout: SparseReadout,
        acc: BatchAccumulator,
        state: ReservoirState,
        label: int,
        u: float,
    ) -> Outcome:
        x = activate(state, readout, self.use_thresholds)
        y = output(x, readout)
        target = TargetVector.one_hot(label, readout.n_class)
        residual = target.y_true - y
        d_theta = (
            threshold_step(x.x, residual, readout.w_out, self.eta_theta)
            if self.learn_local
            else None
        )
        acc.add(weight_step(x.x, residual, self.eta_w), d_theta)
        choice = choose(softmax_probabilities(y, self.temperature), u)
        return Outcome(
            cost=float(residual @ residual),
            correct=choice == label,
            greedy_correct=greedy(y) == label,
            coding_level=coding_level(x),
            activation=x,
        )


def train_gd_w(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    episode_rng: np.random.Generator | None = None,
) -> TrainResult:
    """Benchmark: GD só nos pesos de saída, lendo V diretamente (sem limiares)."""
    learner = SupervisedLearner(config, learn_local=False, use_thresholds=False)
    return run_single_network(
        reservoir, readout, task, n_episodes, learner, config, rng, "gd_w", episode_rng
    )


def train_gd_theta(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    episode_rng: np.random.Generator | None = None,
) -> TrainResult:
    """GD conjunto em W_out e nos limiares locais; theta_g fica no valor inicial."""
    learner = SupervisedLearner(config, learn_local=True, use_thresholds=True)
    return run_single_network(
        reservoir, readout, task, n_episodes, learner, config, rng, "gd_theta", episode_rng
    )
