from __future__ import annotations

import os
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigurationError
from .models import ReservoirParams
from .rl import BANDIT_ALGORITHMS
from .trainers import ALGORITHMS
from .trainers.base import DEFAULT_PRELEARN_CANDIDATES, TrainerConfig

OUTPUT_ROOT_ENV = "KENYON_OUTPUT_ROOT"

TaskName = Literal["static", "sequence", "bandit-static", "bandit-sequence"]
AlgorithmName = Literal["gd_w", "gd_theta", "metropolis", "composed"]

# Colunas "estímulos / sequências" da tabela de parâmetros
TASK_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "static": {
        "reservoir": {"alpha": 0.025, "rho": 0.8},
        "task_params": {"sigma": 0.3, "duration": 0.5},
        "trainer": {"n_batch": 1},
    },
    "sequence": {
        "reservoir": {"alpha": 0.1, "rho": 0.95},
        "task_params": {"sigma": 0.2, "duration": 0.3},
        "trainer": {"n_batch": 10},
    },
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "full": {},
    "desk": {
        "n_episodes": 20000,
        "n_replicas": 5,
        "log_interval": 500,
        "reservoir": {"n_nodes": 500},
        "trainer": {"prelearn_steps": 2000},
    },
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ReservoirSection(_Section):
    n_nodes: int = Field(1000, ge=1)
    n_inputs: int = Field(24, ge=1)
    alpha: float = Field(0.025, gt=0, le=1)
    rho: float = Field(0.8, ge=0, lt=1)
    recurrent_density: float = Field(0.01, gt=0, le=1)
    mean_in_degree: float = Field(6.0, gt=0)
    in_degree_sigma: float = Field(0.5, ge=0)
    input_scale: float = Field(0.6, gt=0)
    signed_recurrent: bool = True
    dt: float = Field(0.01, gt=0)

    def to_params(self, seed: int) -> ReservoirParams:
        return ReservoirParams(**self.model_dump(), seed=seed)


class TaskSection(_Section):
    n_class: int = Field(2, ge=1)
    sigma: float = Field(0.3, ge=0)
    duration: float = Field(0.5, gt=0)  # Δt até a decisão, em segundos
    element_duration: float = Field(0.1, gt=0)
    n_stimuli: int = Field(140, ge=1)
    n_base: int = Field(5, ge=1)
    pool_size: int = Field(200, ge=1)
    stimulus_file: Path | None = None
    include_bases: bool = False
    reward_correct: float = 1.0
    reward_wrong: float = 0.0
    n_eval: int = Field(500, ge=0)


class TrainerSection(_Section):
    eta_w: float = Field(0.0018, ge=0)
    eta_theta: float = Field(0.00018, ge=0)
    n_batch: int = Field(1, ge=1)
    benchmark_batch: int = Field(100, ge=1)
    sigma_m: float = Field(0.05, ge=0)
    m_steps: int = Field(100, ge=1)
    beta: float = Field(4.0, ge=0)
    alpha_m: float | None = Field(None, gt=0, le=1)
    temperature: float = Field(1.0, gt=0)
    window: int = Field(1000, ge=1)
    theta_g_init: float = 0.0
    # limiar inicial de gd_theta e metropolis dado como coding level; None usa theta_g_init
    initial_coding: float | None = Field(0.8, gt=0, le=1)
    prelearn_codings: List[float] = Field(
        default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7, 0.8], min_length=1
    )
    # valores explícitos de theta_g substituem prelearn_codings
    prelearn_candidates: List[float] | None = None
    prelearn_steps: int = Field(10000, ge=0)
    calibration_episodes: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _check_codings(self) -> "TrainerSection":
        bad = [c for c in self.prelearn_codings if not 0.0 < c <= 1.0]
        if bad:
            raise ValueError(f"prelearn_codings fora de (0, 1]: {bad}")
        return self


class ExperimentConfig(_Section):
    task: TaskName = "static"
    preset: Literal["full", "desk"] = "full"
    algorithms: List[AlgorithmName] = Field(default_factory=lambda: list(ALGORITHMS))
    n_episodes: int = Field(60000, ge=0)
    n_replicas: int = Field(1, ge=1)
    log_interval: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)
    output_dir: Path = Path("outputs")
    workers: int = Field(1, ge=1)
    reservoir: ReservoirSection = Field(default_factory=ReservoirSection)
    task_params: TaskSection = Field(default_factory=TaskSection)
    trainer: TrainerSection = Field(default_factory=TrainerSection)

    @model_validator(mode="after")
    def _check_combinations(self) -> "ExperimentConfig":
        if not self.algorithms:
            raise ValueError("algorithms não pode ser vazio")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError("algorithms com repetição")
        if self.is_bandit:
            extra = [a for a in self.algorithms if a not in BANDIT_ALGORITHMS]
            if extra:
                raise ValueError(f"o bandit só aceita {BANDIT_ALGORITHMS}, recebido {extra}")
        if self.base_task == "static" and self.task_params.n_class < 2:
            raise ValueError("a tarefa estática exige n_class >= 2")
        if self.base_task == "sequence" and self.duration_steps != 3 * self.element_steps:
            raise ValueError("duration deve valer 3 × element_duration na tarefa de sequências")
        searches = {"metropolis", "composed"} & set(self.algorithms)
        if searches and self.trainer.m_steps % self.trainer.n_batch:
            raise ValueError(
                f"{sorted(searches)} exigem m_steps múltiplo de n_batch "
                f"({self.trainer.m_steps} / {self.trainer.n_batch})"
            )
        return self

    @property
    def is_bandit(self) -> bool:
        return self.task.startswith("bandit-")

    @property
    def base_task(self) -> str:
        return self.task.removeprefix("bandit-")

    @property
    def duration_steps(self) -> int:
        return max(1, int(round(self.task_params.duration / self.reservoir.dt)))

    @property
    def element_steps(self) -> int:
        return max(1, int(round(self.task_params.element_duration / self.reservoir.dt)))

    def reservoir_params(self, seed: int) -> ReservoirParams:
        return self.reservoir.to_params(seed)

    def trainer_config(
        self,
        algorithm: str | None = None,
        *,
        theta_g_init: float | None = None,
        prelearn_candidates: Tuple[float, ...] | None = None,
    ) -> TrainerConfig:
        """Parâmetros de treino de um algoritmo; o motor passa os limiares calibrados."""
        t = self.trainer
        if prelearn_candidates is None and t.prelearn_candidates is not None:
            prelearn_candidates = tuple(t.prelearn_candidates)
        n_batch = t.n_batch
        # o benchmark supervisionado usa o próprio tamanho de lote
        if algorithm == "gd_w" and not self.is_bandit:
            n_batch = t.benchmark_batch
        return TrainerConfig(
            eta_w=t.eta_w,
            eta_theta=t.eta_theta,
            n_batch=n_batch,
            sigma_m=t.sigma_m,
            m_steps=t.m_steps,
            beta=t.beta,
            alpha_m=t.alpha_m,
            temperature=t.temperature,
            window=t.window,
            log_interval=self.log_interval,
            theta_g_init=t.theta_g_init if theta_g_init is None else theta_g_init,
            prelearn_candidates=(
                DEFAULT_PRELEARN_CANDIDATES
                if prelearn_candidates is None
                else prelearn_candidates
            ),
            prelearn_steps=t.prelearn_steps,
        )

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def parse_config(
    path: Path | str | None = None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> ExperimentConfig:
    """Lê o TOML (opcional), aplica as sobrescritas pontuadas e completa os padrões.

    Precedência: padrões da tarefa < preset < arquivo < sobrescritas.
    """
    environ = os.environ if environ is None else environ
    user: Dict[str, Any] = {}
    if path is not None:
        try:
            user = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigurationError(f"arquivo de configuração inexistente: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"TOML inválido em {path}: {exc}") from exc

    for key, value in (overrides or {}).items():
        _set_dotted(user, key, _coerce(value))

    task = str(user.get("task", "static"))
    base = task.removeprefix("bandit-")
    preset = str(user.get("preset", "full"))
    defaults = _deep_merge(TASK_DEFAULTS.get(base, {}), PRESETS.get(preset, {}))
    if task.startswith("bandit-"):
        defaults["algorithms"] = list(BANDIT_ALGORITHMS)
    if OUTPUT_ROOT_ENV in environ:
        defaults["output_dir"] = environ[OUTPUT_ROOT_ENV]

    data = _deep_merge(defaults, user)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(p) for p in err["loc"]) or "<raiz>"
        raise ConfigurationError(f"{key}: {err['msg']}", key=key) from exc


def _coerce(value: Any) -> Any:
    # valores vindos do CLI chegam como texto; interpretamos como literal TOML
    if not isinstance(value, str):
        return value
    try:
        return tomllib.loads(f"v = {value}")["v"]
    except tomllib.TOMLDecodeError:
        return value


def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    parts: Tuple[str, ...] = tuple(dotted.split("."))
    node = target
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigurationError(f"{dotted}: {part} não é uma seção", key=dotted)
        node = child
    node[parts[-1]] = value


def _deep_merge(base: Mapping[str, Any], extra: Mapping[str, Any]) -> Dict[str, Any]:
    out: Dict[str, Any] = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in base.items()}
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out
