from __future__ import annotations

import numpy as np
import pytest
from scipy import sparse

from kenyon.errors import ConfigurationError, ContractViolation
from kenyon.models import Reservoir, ReservoirParams, ReservoirState
from kenyon.sim.reservoir import (
    build_input_matrix,
    build_reservoir,
    drive,
    reset,
    run_episode,
    spectral_radius,
    step,
    trajectory,
)


@pytest.mark.parametrize(
    "n_nodes,density,rho",
    [(40, 0.2, 0.8), (200, 0.05, 0.95), (500, 0.01, 0.8)],
)
def test_recurrent_matrix_has_requested_radius(n_nodes: int, density: float, rho: float) -> None:
    params = ReservoirParams(n_nodes=n_nodes, recurrent_density=density, rho=rho, seed=11)
    res = build_reservoir(params)
    measured = float(np.max(np.abs(np.linalg.eigvals(res.w_rec.weights.toarray()))))
    assert measured == pytest.approx(rho, abs=1e-4)
    assert res.w_rec.spectral_radius == rho


def test_spectral_radius_of_known_matrix() -> None:
    # rotação escalada: autovalores complexos conjugados de módulo 0.5
    rot = 0.5 * np.array([[0.0, -1.0], [1.0, 0.0]])
    assert spectral_radius(sparse.csr_matrix(rot)) == pytest.approx(0.5)
    assert spectral_radius(sparse.csr_matrix((5, 5))) == 0.0


def test_input_in_degree_statistics() -> None:
    params = ReservoirParams(n_nodes=1000, seed=5)
    w_in = build_input_matrix(params, np.random.default_rng(5))
    assert abs(w_in.in_degrees.mean() - 6.0) <= 1.0
    assert w_in.in_degrees.min() >= 1
    assert w_in.in_degrees.max() <= params.n_inputs

    dense = w_in.weights.toarray()
    np.testing.assert_array_equal((dense > 0).sum(axis=1), w_in.in_degrees)
    np.testing.assert_allclose(dense.sum(axis=1), params.input_scale)


def test_echo_state_washout() -> None:
    params = ReservoirParams(n_nodes=500, alpha=0.1, rho=0.8, seed=2)
    res = build_reservoir(params)
    rng = np.random.default_rng(9)
    inputs = rng.lognormal(size=(400, params.n_inputs))
    a = ReservoirState(v=rng.uniform(0.0, 1.0, params.n_nodes))
    b = ReservoirState(v=rng.uniform(0.0, 1.0, params.n_nodes))
    half_a = run_episode(res, inputs[:200], a)
    half_b = run_episode(res, inputs[:200], b)
    # com alpha = 0.1 a distância L2 em 200 passos ainda fica perto de 1e-3; usamos 400
    va = run_episode(res, inputs[200:], half_a).v
    vb = run_episode(res, inputs[200:], half_b).v
    assert np.linalg.norm(va - vb) < np.linalg.norm(half_a.v - half_b.v)
    assert np.linalg.norm(va - vb) <= 1e-3


def test_run_episode_matches_stepping(small_reservoir: Reservoir) -> None:
    rng = np.random.default_rng(4)
    inputs = rng.random((15, small_reservoir.n_inputs))
    state = ReservoirState.zeros(small_reservoir.n_nodes)
    for s in inputs:
        state = step(state, s, small_reservoir)
    np.testing.assert_allclose(run_episode(small_reservoir, inputs).v, state.v)
    np.testing.assert_allclose(trajectory(small_reservoir, inputs)[-1], state.v)


def test_state_stays_non_negative(small_reservoir: Reservoir) -> None:
    inputs = np.random.default_rng(1).random((50, small_reservoir.n_inputs))
    traj = trajectory(small_reservoir, inputs)
    assert (traj >= 0).all()


def test_zero_rho_gives_pure_input_drive() -> None:
    params = ReservoirParams(n_nodes=30, alpha=1.0, rho=0.0, seed=1)
    res = build_reservoir(params)
    assert res.w_rec.weights.nnz == 0
    s = np.linspace(0.0, 1.0, params.n_inputs)
    out = step(ReservoirState.zeros(30), s, res)
    np.testing.assert_allclose(out.v, np.maximum(res.w_in.weights @ s, 0.0))


def test_zero_input_from_rest_stays_at_rest(small_reservoir: Reservoir) -> None:
    inputs = np.zeros((10, small_reservoir.n_inputs))
    assert not run_episode(small_reservoir, inputs).v.any()


def test_build_is_deterministic(small_params: ReservoirParams) -> None:
    a = build_reservoir(small_params)
    b = build_reservoir(small_params)
    assert (a.w_rec.weights != b.w_rec.weights).nnz == 0
    assert (a.w_in.weights != b.w_in.weights).nnz == 0


def test_step_rejects_wrong_shapes(small_reservoir: Reservoir) -> None:
    state = ReservoirState.zeros(small_reservoir.n_nodes)
    with pytest.raises(ContractViolation):
        step(state, np.zeros(small_reservoir.n_inputs + 1), small_reservoir)
    with pytest.raises(ContractViolation):
        step(ReservoirState.zeros(3), np.zeros(small_reservoir.n_inputs), small_reservoir)
    with pytest.raises(ContractViolation):
        drive(small_reservoir, np.zeros((4, 2)))


def test_reset_zeroes_state() -> None:
    assert not reset(ReservoirState(v=np.ones(5))).v.any()


@pytest.mark.parametrize(
    "kwargs",
    [{"rho": 1.2}, {"rho": 1.0}, {"alpha": 0.0}, {"n_nodes": 0}, {"recurrent_density": 0.0}],
)
def test_invalid_params_are_rejected(kwargs: dict) -> None:
    with pytest.raises(ConfigurationError):
        build_reservoir(ReservoirParams(**kwargs))
