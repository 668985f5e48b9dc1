from __future__ import annotations

import logging

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..errors import ContractViolation, ReservoirConstructionError
from ..models import InputMatrix, RecurrentMatrix, Reservoir, ReservoirParams, ReservoirState

logger = logging.getLogger(__name__)

# Abaixo disso o autovalor dominante sai de eigvals denso (ARPACK exige k < n - 1).
_DENSE_EIG_LIMIT = 64
_ZERO_RADIUS = 1e-12


def build_input_matrix(params: ReservoirParams, rng: np.random.Generator) -> InputMatrix:
    """Matriz de entrada com grau de entrada lognormal e pesos c / k_i."""
    params.validate()
    n, m = params.n_nodes, params.n_inputs

    if params.in_degree_sigma == 0:
        raw = np.full(n, params.mean_in_degree)
    else:
        sigma = params.in_degree_sigma
        # media da lognormal = exp(mu + sigma^2 / 2) = mean_in_degree
        mu = np.log(params.mean_in_degree) - 0.5 * sigma**2
        raw = rng.lognormal(mean=mu, sigma=sigma, size=n)
    degrees = np.clip(np.rint(raw), 1, m).astype(np.int64)

    # k_i canais distintos por nó: os k_i menores postos de uma chave aleatória
    ranks = np.argsort(np.argsort(rng.random((n, m)), axis=1), axis=1)
    mask = ranks < degrees[:, None]
    dense = np.where(mask, params.input_scale / degrees[:, None], 0.0)

    return InputMatrix(weights=sparse.csr_matrix(dense), in_degrees=degrees)


def spectral_radius(matrix: sparse.spmatrix | np.ndarray) -> float:
    mat = sparse.csr_matrix(matrix)
    n = mat.shape[0]
    if mat.nnz == 0:
        return 0.0
    if n <= _DENSE_EIG_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvals(mat.toarray()))))
    try:
        values = splinalg.eigs(
            mat,
            k=1,
            which="LM",
            return_eigenvectors=False,
            v0=np.ones(n),
            tol=1e-12,
            maxiter=max(1000, 10 * n),
        )
    except splinalg.ArpackNoConvergence:
        logger.warning("ARPACK não convergiu; usando autovalores densos (n=%d)", n)
        return float(np.max(np.abs(np.linalg.eigvals(mat.toarray()))))
    return float(np.max(np.abs(values)))


def build_recurrent_matrix(params: ReservoirParams, rng: np.random.Generator) -> RecurrentMatrix:
    """Matriz recorrente esparsa, armazenada já escalada para raio espectral rho."""
    params.validate()
    n = params.n_nodes
    nnz = int(round(params.recurrent_density * n * n))

    if params.rho == 0 or nnz == 0:
        return RecurrentMatrix(weights=sparse.csr_matrix((n, n)), spectral_radius=0.0)

    flat = rng.choice(n * n, size=nnz, replace=False)
    data = rng.standard_normal(nnz)
    if not params.signed_recurrent:
        data = np.abs(data)
    rows, cols = np.divmod(flat, n)
    base = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    radius = spectral_radius(base)
    if radius < _ZERO_RADIUS:
        raise ReservoirConstructionError(
            f"raio espectral numericamente nulo ({radius:.3e}); sorteie outra matriz"
        )
    scaled = (base * (params.rho / radius)).tocsr()
    return RecurrentMatrix(weights=scaled, spectral_radius=float(params.rho))


def build_reservoir(params: ReservoirParams, max_attempts: int = 5) -> Reservoir:
    params.validate()
    rng = np.random.default_rng(params.seed)
    w_in = build_input_matrix(params, rng)
    for attempt in range(1, max_attempts + 1):
        try:
            w_rec = build_recurrent_matrix(params, rng)
        except ReservoirConstructionError:
            logger.warning("sorteio patológico da matriz recorrente (tentativa %d)", attempt)
            continue
        return Reservoir(params=params, w_in=w_in, w_rec=w_rec)
    raise ReservoirConstructionError(
        f"nenhuma matriz recorrente válida em {max_attempts} tentativas"
    )


def step(state: ReservoirState, signal: np.ndarray, reservoir: Reservoir) -> ReservoirState:
    """Um passo dos integradores com vazamento; devolve um estado novo."""
    v = np.asarray(state.v, dtype=float)
    s = np.asarray(signal, dtype=float)
    if v.shape != (reservoir.n_nodes,):
        raise ContractViolation(
            f"estado com forma {v.shape}, esperado ({reservoir.n_nodes},)"
        )
    if s.shape != (reservoir.n_inputs,):
        raise ContractViolation(
            f"entrada com forma {s.shape}, esperado ({reservoir.n_inputs},)"
        )
    return ReservoirState(v=_advance(v, reservoir.w_in.weights @ s, reservoir))


def reset(state: ReservoirState) -> ReservoirState:
    return ReservoirState(v=np.zeros_like(np.asarray(state.v, dtype=float)))


def drive(reservoir: Reservoir, inputs: np.ndarray) -> np.ndarray:
    """W_in · s(t) para um bloco de passos (T × n_inputs -> T × n_nodes)."""
    block = np.atleast_2d(np.asarray(inputs, dtype=float))
    if block.shape[1] != reservoir.n_inputs:
        raise ContractViolation(
            f"bloco de entrada com {block.shape[1]} canais, esperado {reservoir.n_inputs}"
        )
    return np.asarray((reservoir.w_in.weights @ block.T).T)


def run_episode(
    reservoir: Reservoir, inputs: np.ndarray, state: ReservoirState | None = None
) -> ReservoirState:
    """Integra um episódio inteiro e devolve o estado no instante da decisão."""
    v = np.zeros(reservoir.n_nodes) if state is None else np.asarray(state.v, dtype=float)
    for u in drive(reservoir, inputs):
        v = _advance(v, u, reservoir)
    return ReservoirState(v=v)


def trajectory(
    reservoir: Reservoir, inputs: np.ndarray, state: ReservoirState | None = None
) -> np.ndarray:
    v = np.zeros(reservoir.n_nodes) if state is None else np.asarray(state.v, dtype=float)
    u_block = drive(reservoir, inputs)
    out = np.empty_like(u_block)
    for t, u in enumerate(u_block):
        v = _advance(v, u, reservoir)
        out[t] = v
    return out


def _advance(v: np.ndarray, input_drive: np.ndarray, reservoir: Reservoir) -> np.ndarray:
    alpha = reservoir.params.alpha
    pre = input_drive + reservoir.w_rec.weights @ v
    return (1.0 - alpha) * v + alpha * np.maximum(pre, 0.0)
