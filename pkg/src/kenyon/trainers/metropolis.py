from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import ConfigurationError
from ..generators import Task
from ..models import Reservoir, SparseReadout
from .base import (
    AcceptanceRecord,
    BatchAccumulator,
    Learner,
    Outcome,
    TrainerConfig,
    TrainingMonitor,
    TrainResult,
    check_finite,
    present,
)
from .gradient import SupervisedLearner

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class RunningCost:
    """Média exponencial do custo; inicializada com o primeiro valor observado."""

    value: float = 0.0
    initialized: bool = False

    def update(self, cost: float, rate: float) -> float:
        if not self.initialized:
            self.value = float(cost)
            self.initialized = True
        else:
            self.value = (1.0 - rate) * self.value + rate * float(cost)
        return self.value


@dataclass(slots=True, eq=False)
class Candidate:
    readout: SparseReadout
    acc: BatchAccumulator
    cost: RunningCost = field(default_factory=RunningCost)


@dataclass(slots=True, eq=False)
class DualCandidate:
    minus: Candidate
    plus: Candidate
    nu: float  # N(0, 1) usado na proposta: theta_plus = |theta_minus + sigma_m * nu|


def propose(
    readout: SparseReadout, sigma_m: float, rng: np.random.Generator, learner: Learner
) -> DualCandidate:
    """Passo gaussiano em theta_g refletido em zero; theta_g nunca fica negativo."""
    nu = float(rng.standard_normal())
    plus = readout.copy()
    plus.theta_global = abs(readout.theta_global + sigma_m * nu)
    return DualCandidate(
        minus=Candidate(readout=readout, acc=learner.new_accumulator(readout)),
        plus=Candidate(readout=plus, acc=learner.new_accumulator(plus)),
        nu=nu,
    )


def acceptance_probability(delta: float, beta: float) -> float:
    """min{1, exp(-beta * (E_plus - E_minus))}."""
    if beta == 0 or delta <= 0:
        return 1.0
    return math.exp(-beta * delta)


def metropolis_accept(delta: float, beta: float, rng: np.random.Generator) -> Tuple[float, bool]:
    p = acceptance_probability(delta, beta)
    return p, bool(rng.random() < p)


def metropolis_round(
    dual: DualCandidate,
    reservoir: Reservoir,
    task: Task,
    config: TrainerConfig,
    rng: np.random.Generator,
    learn_local: bool,
    *,
    learner: Learner | None = None,
    episode_rng: np.random.Generator | None = None,
    n_steps: int | None = None,
    monitor: TrainingMonitor | None = None,
    episode_offset: int = 0,
    round_index: int = 0,
    algorithm: str = "metropolis",
) -> Tuple[DualCandidate, AcceptanceRecord]:
    """M episódios com as duas redes sobre o mesmo estado do reservatório, depois a decisão.

    A rede aceita vira a nova `minus` e uma nova `plus` é proposta a partir dela.
    """
    learner = learner or SupervisedLearner(config, learn_local=learn_local)
    episode_rng = rng if episode_rng is None else episode_rng
    m = config.m_steps if n_steps is None else n_steps
    rate = config.running_rate

    for i in range(1, m + 1):
        episode = episode_offset + i
        ep, state = present(reservoir, task, episode_rng)
        u = float(rng.random())
        shown: Outcome | None = None
        for cand in (dual.minus, dual.plus):
            outcome = learner.respond(cand.readout, cand.acc, state, ep.label, u)
            check_finite(outcome.cost, episode, algorithm)
            cand.cost.update(outcome.cost, rate)
            if episode % config.n_batch == 0:
                cand.acc.apply(cand.readout)
            shown = shown or outcome
        if monitor is not None and shown is not None:
            monitor.observe(episode, shown, dual.minus.readout)

    e_minus, e_plus = dual.minus.cost.value, dual.plus.cost.value
    check_finite(e_minus, episode_offset + m, algorithm, what="custo médio")
    check_finite(e_plus, episode_offset + m, algorithm, what="custo médio")
    p, accepted = metropolis_accept(e_plus - e_minus, config.beta, rng)

    record = AcceptanceRecord(
        round=round_index,
        episode=episode_offset + m,
        theta_minus=dual.minus.readout.theta_global,
        theta_plus=dual.plus.readout.theta_global,
        cost_minus=e_minus,
        cost_plus=e_plus,
        probability=p,
        accepted=accepted,
    )
    logger.debug(
        "%s rodada %d: E-=%.4f E+=%.4f p=%.3f aceito=%s",
        algorithm, round_index, e_minus, e_plus, p, accepted,
    )
    kept = dual.plus.readout if accepted else dual.minus.readout
    return propose(kept, config.sigma_m, rng, learner), record


def run_metropolis(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    learner: Learner,
    learn_local: bool,
    algorithm: str,
    episode_rng: np.random.Generator | None = None,
    track_reward: bool = False,
) -> TrainResult:
    config.validate_rounds()
    start = readout.copy()
    monitor = TrainingMonitor(algorithm, config, track_reward=track_reward)
    monitor.emit(0, start)

    dual = propose(start, config.sigma_m, rng, learner)
    records: List[AcceptanceRecord] = []
    done = 0
    while done < n_episodes:
        m = min(config.m_steps, n_episodes - done)
        dual, record = metropolis_round(
            dual, reservoir, task, config, rng, learn_local,
            learner=learner, episode_rng=episode_rng, n_steps=m, monitor=monitor,
            episode_offset=done, round_index=len(records), algorithm=algorithm,
        )
        monitor.record_decision(record.accepted)
        records.append(record)
        done += m

    final = dual.minus.readout
    points = monitor.finish(n_episodes, final) if n_episodes else monitor.points
    return TrainResult(
        readout=final, points=points, acceptances=records, theta_g_initial=start.theta_global
    )


def train_metropolis(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    episode_rng: np.random.Generator | None = None,
) -> TrainResult:
    """Busca estocástica de um limiar global único; W_out por GD o tempo todo."""
    start = readout.copy()
    start.theta_local[:] = 0.0
    learner = SupervisedLearner(config, learn_local=False)
    return run_metropolis(
        reservoir, start, task, n_episodes, config, rng, learner,
        learn_local=False, algorithm="metropolis", episode_rng=episode_rng,
    )


def prelearn_theta_g(
    reservoir: Reservoir,
    task: Task,
    config: TrainerConfig,
    candidate_values: Sequence[float],
    n_steps: int,
    rng: np.random.Generator,
    learner: Learner | None = None,
) -> float:
    """Escolhe o theta_g inicial: roda o esquema composto por `n_steps` episódios
    para cada candidato, voltando W_out e theta_g ao valor inicial após cada
    decisão de Metropolis, e fica com o menor custo médio.
    """
    config.validate_rounds()
    values = [float(c) for c in candidate_values]
    if not values:
        raise ConfigurationError("lista de candidatos vazia", key="prelearn_candidates")
    if len(values) == 1 or n_steps <= 0:
        return values[0]
    learner = learner or SupervisedLearner(config, learn_local=True)

    # mesma subsequência aleatória para todos os candidatos
    seed = int(rng.integers(np.iinfo(np.int64).max))
    scores: List[float] = []
    for theta0 in values:
        sub = np.random.default_rng(seed)
        initial = SparseReadout.zeros(task.n_class, reservoir.n_nodes, theta_global=theta0)
        dual = propose(initial.copy(), config.sigma_m, sub, learner)
        costs: List[float] = []
        done = 0
        while done < n_steps:
            m = min(config.m_steps, n_steps - done)
            dual, record = metropolis_round(
                dual, reservoir, task, config, sub, learn_local=True,
                learner=learner, n_steps=m, episode_offset=done, algorithm="prelearn",
            )
            costs.append(record.cost_plus if record.accepted else record.cost_minus)
            kept = dual.minus.readout
            reset = SparseReadout(
                theta_global=theta0,
                theta_local=kept.theta_local.copy(),
                w_out=initial.w_out.copy(),
            )
            dual = propose(reset, config.sigma_m, sub, learner)
            done += m
        scores.append(float(np.mean(costs)))
        logger.debug("pré-aprendizado theta_g=%.4f custo=%.4f", theta0, scores[-1])

    best = int(np.argmin(scores))
    if scores.count(scores[best]) > 1:
        logger.warning("empate no pré-aprendizado; ficando com o primeiro candidato")
    logger.info("pré-aprendizado escolheu theta_g=%.4f", values[best])
    return values[best]


def train_composed(
    reservoir: Reservoir,
    readout: SparseReadout,
    task: Task,
    n_episodes: int,
    config: TrainerConfig,
    rng: np.random.Generator,
    episode_rng: np.random.Generator | None = None,
    prelearn_rng: np.random.Generator | None = None,
    learner: Learner | None = None,
    algorithm: str = "composed",
    track_reward: bool = False,
) -> TrainResult:
    """Metropolis no limiar global + GD nos limiares locais e em W_out, após o pré-aprendizado."""
    learner = learner or SupervisedLearner(config, learn_local=True)
    start = readout.copy()
    if config.prelearn_steps > 0 and config.prelearn_candidates:
        prelearn_rng = prelearn_rng or np.random.default_rng(
            int(rng.integers(np.iinfo(np.int64).max))
        )
        start.theta_global = prelearn_theta_g(
            reservoir, task, config, config.prelearn_candidates, config.prelearn_steps,
            prelearn_rng, learner=learner,
        )
    return run_metropolis(
        reservoir, start, task, n_episodes, config, rng, learner,
        learn_local=True, algorithm=algorithm, episode_rng=episode_rng,
        track_reward=track_reward,
    )
