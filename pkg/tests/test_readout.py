from __future__ import annotations

import numpy as np
import pytest

from kenyon.errors import ContractViolation
from kenyon.models import ReservoirState, SparseReadout
from kenyon.sim.readout import (
    choose,
    coding_level,
    decide,
    dense_activation,
    greedy,
    output,
    softmax_probabilities,
    sparse_activation,
)


def test_sparse_activation_subtracts_effective_threshold() -> None:
    readout = SparseReadout.zeros(2, 4, theta_global=0.5)
    readout.theta_local[:] = [0.0, 0.2, -0.1, 1.0]
    x = sparse_activation(ReservoirState(v=np.array([1.0, 0.6, 0.3, 1.2])), readout)
    np.testing.assert_allclose(x.x, [0.5, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(x.active_mask, [True, False, False, False])
    assert coding_level(x) == pytest.approx(0.25)


def test_negative_threshold_keeps_all_positive_nodes_active() -> None:
    readout = SparseReadout.zeros(2, 3, theta_global=-1.0)
    x = sparse_activation(ReservoirState(v=np.array([0.0, 0.1, 2.0])), readout)
    assert coding_level(x) == 1.0


def test_dense_activation_reads_state_directly() -> None:
    v = np.array([0.0, 0.3, 1.5])
    x = dense_activation(ReservoirState(v=v))
    np.testing.assert_array_equal(x.x, v)


def test_shape_mismatch_is_a_contract_violation() -> None:
    with pytest.raises(ContractViolation):
        sparse_activation(ReservoirState(v=np.zeros(5)), SparseReadout.zeros(2, 4))


def test_output_is_linear_readout() -> None:
    readout = SparseReadout.zeros(2, 3)
    readout.w_out[:] = [[1.0, 0.0, 2.0], [0.0, -1.0, 0.0]]
    x = dense_activation(ReservoirState(v=np.array([1.0, 2.0, 3.0])))
    np.testing.assert_allclose(output(x, readout), [7.0, -2.0])


def test_softmax_is_normalized_and_shift_invariant() -> None:
    y = np.array([1.0, 2.0, 3.0])
    p = softmax_probabilities(y)
    assert p.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(p, softmax_probabilities(y + 1000.0))
    assert np.all(np.diff(p) > 0)


def test_softmax_with_huge_outputs_stays_finite() -> None:
    p = softmax_probabilities(np.array([1e6, 0.0]), temperature=0.01)
    assert np.isfinite(p).all()
    assert p[0] == pytest.approx(1.0)


def test_softmax_rejects_non_positive_temperature() -> None:
    with pytest.raises(ContractViolation):
        softmax_probabilities(np.zeros(2), temperature=0.0)


def test_choose_inverts_the_cdf() -> None:
    probs = np.array([0.2, 0.5, 0.3])
    assert choose(probs, 0.0) == 0
    assert choose(probs, 0.19) == 0
    assert choose(probs, 0.21) == 1
    assert choose(probs, 0.69) == 1
    assert choose(probs, 0.71) == 2
    assert choose(probs, 0.999999) == 2


def test_uniform_outputs_give_uniform_decisions() -> None:
    rng = np.random.default_rng(0)
    n = 20000
    picks = np.array([decide(np.zeros(2), 1.0, rng) for _ in range(n)])
    # 4 sigma binomiais
    assert abs(picks.mean() - 0.5) < 4 * np.sqrt(0.25 / n)


def test_decision_frequencies_follow_softmax() -> None:
    rng = np.random.default_rng(1)
    y = np.array([0.0, 1.0])
    p1 = softmax_probabilities(y)[1]
    n = 20000
    picks = np.array([decide(y, 1.0, rng) for _ in range(n)])
    assert abs(picks.mean() - p1) < 4 * np.sqrt(p1 * (1 - p1) / n)


def test_greedy_is_argmax() -> None:
    assert greedy(np.array([0.1, 0.7, 0.2])) == 1
