from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from kenyon.config import ExperimentConfig, parse_config
from kenyon.generators import StaticTask, StimulusSet, make_static_task, synth_stimulus_set
from kenyon.models import Reservoir, ReservoirParams
from kenyon.sim.reservoir import build_reservoir
from kenyon.trainers.base import TrainerConfig


@pytest.fixture
def small_params() -> ReservoirParams:
    return ReservoirParams(n_nodes=60, recurrent_density=0.2, alpha=0.1, rho=0.8, seed=3)


@pytest.fixture
def small_reservoir(small_params: ReservoirParams) -> Reservoir:
    return build_reservoir(small_params)


@pytest.fixture
def stimuli() -> StimulusSet:
    return synth_stimulus_set(40, np.random.default_rng(0))


@pytest.fixture
def static_task(stimuli: StimulusSet) -> StaticTask:
    return make_static_task(stimuli, 10, 2, 0.1, np.random.default_rng(1), duration_steps=20)


@pytest.fixture
def fast_trainer() -> TrainerConfig:
    return TrainerConfig(
        eta_w=0.01,
        eta_theta=0.001,
        m_steps=20,
        window=50,
        log_interval=50,
        prelearn_steps=0,
    )


def tiny_overrides(out_dir: Path, **extra: Any) -> Dict[str, Any]:
    base: Dict[str, Any] = {
        "n_episodes": 60,
        "log_interval": 30,
        "output_dir": str(out_dir),
        "reservoir.n_nodes": 40,
        "reservoir.recurrent_density": 0.2,
        "task_params.n_stimuli": 8,
        "task_params.pool_size": 30,
        "task_params.n_eval": 20,
        "trainer.m_steps": 10,
        "trainer.window": 30,
        "trainer.prelearn_steps": 20,
        "trainer.calibration_episodes": 20,
        "trainer.benchmark_batch": 5,
    }
    base.update(extra)
    return base


@pytest.fixture
def tiny_config(tmp_path: Path) -> ExperimentConfig:
    return parse_config(overrides=tiny_overrides(tmp_path / "run"), environ={})


@pytest.fixture
def make_config(tmp_path: Path) -> Callable[..., ExperimentConfig]:
    def build(name: str, **extra: Any) -> ExperimentConfig:
        return parse_config(overrides=tiny_overrides(tmp_path / name, **extra), environ={})

    return build
