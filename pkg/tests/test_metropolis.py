from __future__ import annotations

import math
from typing import Callable, List, Tuple

import numpy as np
import pytest

from kenyon.errors import ConfigurationError
from kenyon.generators import StaticTask
from kenyon.models import Reservoir, ReservoirState, SparseActivation, SparseReadout
from kenyon.trainers.base import BatchAccumulator, Outcome, TrainerConfig
from kenyon.trainers.metropolis import (
    RunningCost,
    acceptance_probability,
    metropolis_accept,
    metropolis_round,
    prelearn_theta_g,
    propose,
    run_metropolis,
    train_composed,
    train_metropolis,
)


class ThetaCostLearner:
    """Custo que só depende do limiar global; registra cada chamada."""

    use_thresholds = True

    def __init__(self, cost: Callable[[float], float]) -> None:
        self.cost = cost
        self.calls: List[Tuple[int, float, float, float]] = []

    def new_accumulator(self, readout: SparseReadout) -> BatchAccumulator:
        return BatchAccumulator(readout.n_class, readout.n_nodes)

    def respond(
        self, readout: SparseReadout, acc: BatchAccumulator, state: ReservoirState,
        label: int, u: float,
    ) -> Outcome:
        self.calls.append((id(readout), u, float(state.v.sum()), readout.theta_global))
        acc.add(np.zeros_like(readout.w_out))
        return Outcome(
            cost=self.cost(readout.theta_global),
            correct=True,
            greedy_correct=True,
            coding_level=0.5,
            activation=SparseActivation.from_values(state.v),
        )


@pytest.mark.parametrize(
    "delta,beta,expected",
    [(-0.5, 4.0, 1.0), (0.0, 4.0, 1.0), (0.25, 4.0, math.exp(-1.0)), (0.5, 4.0, math.exp(-2.0)),
     (0.5, 0.0, 1.0), (3.0, 0.0, 1.0)],
)
def test_acceptance_probability(delta: float, beta: float, expected: float) -> None:
    assert acceptance_probability(delta, beta) == pytest.approx(expected)


@pytest.mark.parametrize("beta", [0.0, 4.0])
@pytest.mark.parametrize("delta", [-0.5, 0.0, 0.25, 0.5])
def test_empirical_acceptance_follows_the_law(delta: float, beta: float) -> None:
    rng = np.random.default_rng(17)
    n = 20000
    accepted = sum(metropolis_accept(delta, beta, rng)[1] for _ in range(n))
    p = min(1.0, math.exp(-beta * delta))
    sigma = math.sqrt(max(p * (1 - p), 1e-12) / n)
    assert abs(accepted / n - p) <= 4 * sigma + 1e-12


def test_running_cost_starts_at_first_value() -> None:
    rc = RunningCost()
    assert rc.update(2.0, 0.1) == 2.0
    assert rc.update(1.0, 0.1) == pytest.approx(1.9)
    assert rc.update(1.0, 1.0) == 1.0


def test_proposal_moves_only_the_global_threshold() -> None:
    base = SparseReadout.zeros(2, 5, theta_global=0.1)
    base.w_out[:] = 1.0
    learner = ThetaCostLearner(lambda t: 0.0)
    dual = propose(base, 0.05, np.random.default_rng(0), learner)
    assert dual.plus.readout.theta_global == pytest.approx(abs(0.1 + 0.05 * dual.nu))
    np.testing.assert_array_equal(dual.plus.readout.w_out, base.w_out)
    dual.plus.readout.w_out[0, 0] = 7.0
    assert base.w_out[0, 0] == 1.0
    assert dual.minus.readout is base


def test_proposals_are_reflected_at_zero() -> None:
    learner = ThetaCostLearner(lambda t: 0.0)
    rng = np.random.default_rng(4)
    base = SparseReadout.zeros(2, 3, theta_global=0.02)
    duals = [propose(base, 0.5, rng, learner) for _ in range(500)]
    assert all(d.plus.readout.theta_global >= 0.0 for d in duals)
    for d in duals:
        assert d.plus.readout.theta_global == pytest.approx(abs(0.02 + 0.5 * d.nu))
    assert any(0.02 + 0.5 * d.nu < 0 for d in duals)


def test_both_candidates_see_the_same_state_and_uniform(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: t * t)
    cfg = TrainerConfig(m_steps=6, sigma_m=0.1)
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    rng = np.random.default_rng(2)
    dual = propose(start, cfg.sigma_m, rng, learner)
    metropolis_round(dual, small_reservoir, static_task, cfg, rng, False, learner=learner)
    assert len(learner.calls) == 12
    for minus, plus in zip(learner.calls[::2], learner.calls[1::2]):
        assert minus[0] != plus[0]
        assert minus[1] == plus[1]
        assert minus[2] == plus[2]


def test_round_records_shortened_last_round(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: 1.0)
    cfg = TrainerConfig(m_steps=10, log_interval=100, window=10)
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    result = run_metropolis(
        small_reservoir, start, static_task, 25, cfg, np.random.default_rng(0), learner,
        learn_local=False, algorithm="metropolis",
    )
    assert [r.episode for r in result.acceptances] == [10, 20, 25]
    assert len(learner.calls) == 50
    assert result.points[-1].episode == 25


class UnitStepLearner(ThetaCostLearner):
    """Soma um passo unitário em W_out a cada episódio."""

    def new_accumulator(self, readout: SparseReadout) -> BatchAccumulator:
        return BatchAccumulator(readout.n_class, readout.n_nodes, average=False)

    def respond(
        self, readout: SparseReadout, acc: BatchAccumulator, state: ReservoirState,
        label: int, u: float,
    ) -> Outcome:
        outcome = super().respond(readout, acc, state, label, u)
        acc.add(np.ones_like(readout.w_out))
        return outcome


@pytest.mark.parametrize(
    "m_steps,n_batch,n_episodes,applied",
    [(10, 10, 30, 30), (10, 5, 25, 25), (10, 5, 23, 20), (4, 2, 9, 8)],
)
def test_rounds_apply_whole_batches_only(
    small_reservoir: Reservoir, static_task: StaticTask,
    m_steps: int, n_batch: int, n_episodes: int, applied: int,
) -> None:
    learner = UnitStepLearner(lambda t: 1.0)
    cfg = TrainerConfig(
        m_steps=m_steps, n_batch=n_batch, sigma_m=0.0, log_interval=100, window=10
    )
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    result = run_metropolis(
        small_reservoir, start, static_task, n_episodes, cfg, np.random.default_rng(0), learner,
        learn_local=False, algorithm="metropolis",
    )
    np.testing.assert_allclose(result.readout.w_out, float(applied))


@pytest.mark.parametrize("m_steps,n_batch", [(15, 10), (5, 10)])
def test_rounds_must_hold_whole_batches(
    small_reservoir: Reservoir, static_task: StaticTask, m_steps: int, n_batch: int
) -> None:
    learner = UnitStepLearner(lambda t: 1.0)
    cfg = TrainerConfig(m_steps=m_steps, n_batch=n_batch)
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    with pytest.raises(ConfigurationError) as info:
        run_metropolis(
            small_reservoir, start, static_task, 30, cfg, np.random.default_rng(0), learner,
            learn_local=False, algorithm="metropolis",
        )
    assert info.value.key == "m_steps"
    with pytest.raises(ConfigurationError):
        prelearn_theta_g(
            small_reservoir, static_task, cfg, [0.1, 0.2], 30, np.random.default_rng(0),
            learner=learner,
        )

def test_zero_temperature_search_accepts_everything(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: 10.0 * t)
    cfg = TrainerConfig(m_steps=5, beta=0.0, log_interval=100, window=10)
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    result = run_metropolis(
        small_reservoir, start, static_task, 50, cfg, np.random.default_rng(1), learner,
        learn_local=False, algorithm="metropolis",
    )
    assert all(r.accepted for r in result.acceptances)
    assert result.points[-1].acceptance_rate == 1.0
    assert result.readout.theta_global == pytest.approx(result.acceptances[-1].theta_plus)


def test_search_descends_toward_the_cost_minimum(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: (t - 0.3) ** 2)
    cfg = TrainerConfig(m_steps=10, beta=1e4, sigma_m=0.05, log_interval=1000, window=10)
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    result = run_metropolis(
        small_reservoir, start, static_task, 2000, cfg, np.random.default_rng(3), learner,
        learn_local=False, algorithm="metropolis",
    )
    assert abs(result.readout.theta_global - 0.3) < 0.05


def test_zero_episodes_give_no_decisions(
    small_reservoir: Reservoir, static_task: StaticTask, fast_trainer: TrainerConfig
) -> None:
    start = SparseReadout.zeros(2, small_reservoir.n_nodes, theta_global=0.2)
    result = train_metropolis(
        small_reservoir, start, static_task, 0, fast_trainer, np.random.default_rng(0)
    )
    assert result.acceptances == []
    assert len(result.points) == 1
    assert result.readout.theta_global == 0.2


def test_metropolis_keeps_local_thresholds_at_zero(
    small_reservoir: Reservoir, static_task: StaticTask, fast_trainer: TrainerConfig
) -> None:
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    start.theta_local[:] = 1.0
    result = train_metropolis(
        small_reservoir, start, static_task, 100, fast_trainer, np.random.default_rng(0)
    )
    assert not result.readout.theta_local.any()
    assert len(result.acceptances) == 5


def test_prelearning_picks_the_cheapest_candidate(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: (t - 0.2) ** 2)
    cfg = TrainerConfig(m_steps=10, sigma_m=0.0)
    best = prelearn_theta_g(
        small_reservoir, static_task, cfg, [0.0, 0.1, 0.2, 0.3, 0.4], 30,
        np.random.default_rng(0), learner=learner,
    )
    assert best == 0.2


def test_prelearning_ties_go_to_the_first_candidate(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: 1.0)
    cfg = TrainerConfig(m_steps=10, sigma_m=0.05)
    best = prelearn_theta_g(
        small_reservoir, static_task, cfg, [0.3, 0.1, 0.2], 20,
        np.random.default_rng(0), learner=learner,
    )
    assert best == 0.3


def test_single_candidate_skips_prelearning(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: 1.0)
    best = prelearn_theta_g(
        small_reservoir, static_task, TrainerConfig(), [0.7], 100,
        np.random.default_rng(0), learner=learner,
    )
    assert best == 0.7
    assert learner.calls == []


def test_composed_starts_from_the_prelearned_threshold(
    small_reservoir: Reservoir, static_task: StaticTask
) -> None:
    learner = ThetaCostLearner(lambda t: (t - 0.2) ** 2)
    cfg = TrainerConfig(m_steps=10, sigma_m=0.0, prelearn_steps=30, log_interval=100, window=10)
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    result = train_composed(
        small_reservoir, start, static_task, 40, cfg, np.random.default_rng(0), learner=learner
    )
    assert result.theta_g_initial == 0.2
    # os episódios de pré-aprendizado não contam no orçamento
    assert result.points[-1].episode == 40
    assert len(result.acceptances) == 4


def test_composed_runs_on_a_real_task(
    small_reservoir: Reservoir, static_task: StaticTask, fast_trainer: TrainerConfig
) -> None:
    start = SparseReadout.zeros(2, small_reservoir.n_nodes)
    result = train_composed(
        small_reservoir, start, static_task, 200, fast_trainer, np.random.default_rng(4)
    )
    assert result.readout.is_finite()
    assert len(result.acceptances) == 10
    assert 0.0 <= result.points[-1].acceptance_rate <= 1.0
    assert result.points[-1].algorithm == "composed"
