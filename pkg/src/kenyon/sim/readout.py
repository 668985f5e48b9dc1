from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from ..models import ReservoirState, SparseActivation, SparseReadout


def sparse_activation(state: ReservoirState, readout: SparseReadout) -> SparseActivation:
    """x = relu(V - theta_g - theta_local)."""
    v = np.asarray(state.v, dtype=float)
    if v.shape != readout.theta_local.shape:
        raise ContractViolation(
            f"estado com {v.shape[0]} nós, leitura com {readout.n_nodes}"
        )
    x = np.maximum(v - readout.effective_threshold(), 0.0)
    return SparseActivation(x=x, active_mask=x > 0)


def dense_activation(state: ReservoirState) -> SparseActivation:
    # GD_W: a saída lê V diretamente, sem limiares
    v = np.asarray(state.v, dtype=float)
    return SparseActivation(x=v, active_mask=v > 0)


def output(x: SparseActivation, readout: SparseReadout) -> np.ndarray:
    return np.asarray(readout.w_out @ x.x, dtype=float)


def softmax_probabilities(y: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    if temperature <= 0:
        raise ContractViolation("a temperatura do softmax deve ser positiva")
    z = np.asarray(y, dtype=float) / temperature
    z = z - np.max(z)
    e = np.exp(z)
    return np.asarray(e / e.sum())


def choose(probs: np.ndarray, u: float) -> int:
    """Inverte a CDF discreta; `u` uniforme em [0, 1)."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def decide(y: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    return choose(softmax_probabilities(y, temperature), float(rng.random()))


def greedy(y: np.ndarray) -> int:
    return int(np.argmax(y))


def coding_level(x: SparseActivation) -> float:
    n = x.x.size
    if n == 0:
        return 0.0
    return float(np.count_nonzero(x.x > 0)) / n
