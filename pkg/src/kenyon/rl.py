from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigurationError
from .generators import Task
from .models import Reservoir, ReservoirState, SparseActivation, SparseReadout, Transition
from .sim.readout import choose, coding_level, greedy, softmax_probabilities
from .trainers.base import (
    BatchAccumulator,
    Outcome,
    TrainerConfig,
    TrainResult,
    activate,
    run_single_network,
)
from .trainers.metropolis import train_composed

BANDIT_ALGORITHMS = ("gd_w", "composed")


@dataclass(frozen=True, slots=True, eq=False)
class BanditEnv:
    """N-bandit sobre uma tarefa de classificação: só a ação escolhida é recompensada."""

    task: Task
    reward_correct: float = 1.0
    reward_wrong: float = 0.0

    @property
    def n_actions(self) -> int:
        return self.task.n_class

    def reward(self, label: int, action: int) -> float:
        return self.reward_correct if action == label else self.reward_wrong


def q_values(x: SparseActivation, readout: SparseReadout) -> np.ndarray:
    """Q(a) = sum_i W_ai x_i."""
    return np.asarray(readout.w_out @ x.x, dtype=float)


def rl_steps(
    readout: SparseReadout, transition: Transition, eta_w: float, eta_theta: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Passos de W_out (só a linha da ação) e de theta_local para uma transição."""
    a = transition.action
    if not 0 <= a < readout.n_class:
        raise ConfigurationError(f"ação {a} fora de [0, {readout.n_class})", key="action")
    x = transition.x.x
    td = transition.reward - float(readout.w_out[a] @ x)
    d_w = np.zeros_like(readout.w_out)
    d_w[a] = eta_w * td * x
    d_theta = -eta_theta * td * readout.w_out[a] * (x > 0)
    return d_w, d_theta


def rl_update(
    readout: SparseReadout, transition: Transition, eta_w: float, eta_theta: float
) -> SparseReadout:
    d_w, d_theta = rl_steps(readout, transition, eta_w, eta_theta)
    updated = readout.copy()
    updated.w_out += d_w
    updated.theta_local += d_theta
    return updated


def rl_batch_update(
    readout: SparseReadout,
    transitions: Sequence[Transition],
    eta_w: float,
    eta_theta: float,
) -> SparseReadout:
    """Soma dos passos de cada transição, todos com os parâmetros congelados."""
    acc = BatchAccumulator(readout.n_class, readout.n_nodes, average=False)
    for t in transitions:
        acc.add(*rl_steps(readout, t, eta_w, eta_theta))
    updated = readout.copy()
    acc.apply(updated)
    return updated


class BanditLearner:
    """Q-learning com política softmax e recompensa imediata (sem desconto)."""

    def __init__(
        self,
        env: BanditEnv,
        config: TrainerConfig,
        learn_local: bool,
        use_thresholds: bool = True,
    ) -> None:
        self.env = env
        self.eta_w = config.eta_w
        self.eta_theta = config.eta_theta if learn_local else 0.0
        self.use_thresholds = use_thresholds
        self.temperature = config.temperature

    def new_accumulator(self, readout: SparseReadout) -> BatchAccumulator:
        return BatchAccumulator(readout.n_class, readout.n_nodes, average=False)

    def respond(
        self,
        readout: SparseReadout,
        acc: BatchAccumulator,
        state: ReservoirState,
        label: int,
        u: float,
    ) -> Outcome:
        x = activate(state, readout, self.use_thresholds)
        q = q_values(x, readout)
        action = choose(softmax_probabilities(q, self.temperature), u)
        reward = self.env.reward(label, action)
        transition = Transition(x=x, action=action, reward=reward)
        acc.add(*rl_steps(readout, transition, self.eta_w, self.eta_theta))
        td = reward - q[action]
        return Outcome(
            cost=float(td * td),
            correct=action == label,
            greedy_correct=greedy(q) == label,
            coding_level=coding_level(x),
            activation=x,
            reward=reward,
        )


def run_bandit(
    reservoir: Reservoir,
    readout: SparseReadout,
    env: BanditEnv,
    algorithm: str,
    n_episodes: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    episode_rng: np.random.Generator | None = None,
    prelearn_rng: np.random.Generator | None = None,
) -> TrainResult:
    if algorithm == "gd_w":
        learner = BanditLearner(env, config, learn_local=False, use_thresholds=False)
        return run_single_network(
            reservoir, readout, env.task, n_episodes, learner, config, rng, "gd_w",
            episode_rng, track_reward=True,
        )
    if algorithm == "composed":
        learner_c = BanditLearner(env, config, learn_local=True)
        return train_composed(
            reservoir, readout, env.task, n_episodes, config, rng,
            episode_rng=episode_rng, prelearn_rng=prelearn_rng, learner=learner_c,
            track_reward=True,
        )
    raise ConfigurationError(
        f"algoritmo {algorithm!r} não disponível no bandit (use {BANDIT_ALGORITHMS})",
        key="algorithms",
    )
