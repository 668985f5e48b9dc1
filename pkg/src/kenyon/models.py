from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict

import numpy as np
from scipy import sparse

from .errors import ConfigurationError


@dataclass(frozen=True, slots=True)
class ReservoirParams:
    n_nodes: int = 1000
    n_inputs: int = 24
    alpha: float = 0.025  # δt/τ
    rho: float = 0.8
    recurrent_density: float = 0.01
    mean_in_degree: float = 6.0
    in_degree_sigma: float = 0.5  # σ da normal subjacente à lognormal
    input_scale: float = 0.6  # c: soma dos pesos de entrada de cada nó
    signed_recurrent: bool = True
    dt: float = 0.01  # segundos por passo
    seed: int = 0

    def validate(self) -> None:
        if self.n_nodes < 1:
            raise ConfigurationError("n_nodes deve ser positivo", key="n_nodes")
        if self.n_inputs < 1:
            raise ConfigurationError("n_inputs deve ser >= 1", key="n_inputs")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError("alpha deve estar em (0, 1]", key="alpha")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigurationError("rho deve estar em [0, 1)", key="rho")
        if not 0.0 < self.recurrent_density <= 1.0:
            raise ConfigurationError(
                "recurrent_density deve estar em (0, 1]", key="recurrent_density"
            )
        if self.mean_in_degree <= 0:
            raise ConfigurationError("mean_in_degree deve ser positivo", key="mean_in_degree")
        if self.in_degree_sigma < 0:
            raise ConfigurationError("in_degree_sigma não pode ser negativo", key="in_degree_sigma")
        if self.input_scale <= 0:
            raise ConfigurationError("input_scale deve ser positivo", key="input_scale")
        if self.dt <= 0:
            raise ConfigurationError("dt deve ser positivo", key="dt")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, slots=True, eq=False)
class InputMatrix:
    weights: sparse.csr_matrix  # n_nodes × n_inputs
    in_degrees: np.ndarray


@dataclass(frozen=True, slots=True, eq=False)
class RecurrentMatrix:
    weights: sparse.csr_matrix  # já escalada para o raio espectral rho
    spectral_radius: float


@dataclass(frozen=True, slots=True, eq=False)
class Reservoir:
    params: ReservoirParams
    w_in: InputMatrix
    w_rec: RecurrentMatrix

    @property
    def n_nodes(self) -> int:
        return self.params.n_nodes

    @property
    def n_inputs(self) -> int:
        return self.params.n_inputs


@dataclass(frozen=True, slots=True, eq=False)
class ReservoirState:
    v: np.ndarray

    @classmethod
    def zeros(cls, n_nodes: int) -> "ReservoirState":
        return cls(v=np.zeros(n_nodes))


@dataclass(slots=True, eq=False)
class SparseReadout:
    """Camada aprendível: limiar global, limiares locais e pesos de saída.

    O limiar efetivo do nó i é theta_global + theta_local[i].
    """

    theta_global: float
    theta_local: np.ndarray
    w_out: np.ndarray  # n_class × n_nodes

    @classmethod
    def zeros(cls, n_class: int, n_nodes: int, theta_global: float = 0.0) -> "SparseReadout":
        return cls(
            theta_global=float(theta_global),
            theta_local=np.zeros(n_nodes),
            w_out=np.zeros((n_class, n_nodes)),
        )

    @property
    def n_class(self) -> int:
        return int(self.w_out.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.w_out.shape[1])

    def effective_threshold(self) -> np.ndarray:
        return self.theta_global + self.theta_local

    def copy(self) -> "SparseReadout":
        return SparseReadout(
            theta_global=self.theta_global,
            theta_local=self.theta_local.copy(),
            w_out=self.w_out.copy(),
        )

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.theta_global)
            and np.all(np.isfinite(self.theta_local))
            and np.all(np.isfinite(self.w_out))
        )


@dataclass(frozen=True, slots=True, eq=False)
class SparseActivation:
    x: np.ndarray
    active_mask: np.ndarray

    @classmethod
    def from_values(cls, x: np.ndarray) -> "SparseActivation":
        return cls(x=x, active_mask=x > 0)


@dataclass(frozen=True, slots=True, eq=False)
class TargetVector:
    y_true: np.ndarray

    @classmethod
    def one_hot(cls, label: int, n_class: int) -> "TargetVector":
        if not 0 <= label < n_class:
            raise ConfigurationError(f"rótulo {label} fora de [0, {n_class})", key="label")
        y = np.zeros(n_class)
        y[label] = 1.0
        return cls(y_true=y)

    @property
    def label(self) -> int:
        return int(np.argmax(self.y_true))


@dataclass(frozen=True, slots=True, eq=False)
class Transition:
    x: SparseActivation
    action: int
    reward: float


@dataclass(slots=True)
class MetricPoint:
    episode: int
    algorithm: str
    accuracy: float
    greedy_accuracy: float
    loss: float
    coding_level: float
    theta_mean: float
    theta_std: float
    theta_g: float
    acceptance_rate: float
    reward: float | None = None
    replica: int = 0
    task: str = field(default="")
