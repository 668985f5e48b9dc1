from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config import ExperimentConfig
from ..errors import ConfigurationError, TrainingError
from ..generators import (
    StimulusSet,
    Task,
    load_stimulus_set,
    make_sequence_task,
    make_static_task,
    synth_stimulus_set,
    task_manifest,
)
from ..models import MetricPoint, Reservoir, SparseReadout
from ..rl import BanditEnv, run_bandit
from ..storage import MetricsSink, read_frame, read_json, read_metrics, save_checkpoint, write_frame, write_json
from ..trainers import ALGORITHMS, TRAINERS
from ..trainers.base import (
    AcceptanceRecord,
    Evaluation,
    TrainResult,
    evaluate,
    sample_potentials,
    threshold_for_coding,
)
from ..trainers.metropolis import train_composed
from .metrics import points_to_dataframe, specificity, specificity_histogram, summarize, summary_row
from .reservoir import build_reservoir

logger = logging.getLogger(__name__)

# Fluxos de aleatoriedade de cada réplica
STREAM_RESERVOIR = 0
STREAM_TASK = 1
STREAM_EPISODES = 2
STREAM_EVAL = 3
STREAM_PRELEARN = 4
STREAM_CALIBRATION = 5
POLICY_STREAM_BASE = 16

SUMMARY_COLUMNS = [
    "replica", "algorithm", "task", "episodes", "final_accuracy", "final_greedy_accuracy",
    "final_loss", "coding_level", "theta_mean", "theta_std", "theta_g", "acceptance_rate",
    "final_reward", "theta_g_initial", "eval_accuracy", "eval_greedy_accuracy",
    "eval_coding_level", "specificity_before", "specificity_after",
]
SPECIFICITY_COLUMNS = ["replica", "algorithm", "node", "sp_before", "sp_after"]
SPECIFICITY_HIST_COLUMNS = ["replica", "algorithm", "phase", "bin_left", "bin_right", "count"]
SPECIFICITY_BINS = 20
ACCEPTANCE_COLUMNS = ["replica", "algorithm"] + list(AcceptanceRecord.__dataclass_fields__)


def derive_seed_sequence(master: int, replica: int, stream: int) -> np.random.SeedSequence:
    """Semente de contador: (mestre, réplica, fluxo) -> SeedSequence; pares distintos não colidem."""
    return np.random.SeedSequence([int(master), int(replica), int(stream)])


def policy_stream(algorithm: str) -> int:
    return POLICY_STREAM_BASE + ALGORITHMS.index(algorithm)


def stream_rng(config: ExperimentConfig, replica: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed_sequence(config.seed, replica, stream))


@dataclass(frozen=True, slots=True, eq=False)
class ReplicaSetup:
    replica: int
    reservoir: Reservoir
    stimuli: StimulusSet
    task: Task
    theta_start: float = 0.0  # theta_g inicial de gd_theta e metropolis
    theta_candidates: Tuple[float, ...] = ()  # candidatos do pré-aprendizado


@dataclass(slots=True, eq=False)
class ArmResult:
    replica: int
    algorithm: str
    task: str
    readout: SparseReadout
    points: List[MetricPoint]
    acceptances: List[AcceptanceRecord]
    theta_g_initial: float
    before: Evaluation | None = None
    after: Evaluation | None = None
    sp_before: np.ndarray | None = None
    sp_after: np.ndarray | None = None
    rng_states: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    elapsed: float = 0.0

    def summary(self) -> Dict[str, object]:
        row = summary_row(
            summarize(self.points), replica=self.replica, task=self.task,
            theta_g_initial=self.theta_g_initial,
        )
        row["eval_accuracy"] = self.after.accuracy if self.after else float("nan")
        row["eval_greedy_accuracy"] = self.after.greedy_accuracy if self.after else float("nan")
        row["eval_coding_level"] = self.after.coding_level if self.after else float("nan")
        row["specificity_before"] = (
            float(self.sp_before.mean()) if self.sp_before is not None else float("nan")
        )
        row["specificity_after"] = (
            float(self.sp_after.mean()) if self.sp_after is not None else float("nan")
        )
        return row

    def specificity_hist(self, bins: int = SPECIFICITY_BINS) -> pd.DataFrame:
        """Histogramas antes/depois na mesma faixa [0, max Sp_i] para serem comparáveis."""
        if self.sp_before is None or self.sp_after is None:
            return pd.DataFrame(columns=SPECIFICITY_HIST_COLUMNS)
        upper = float(max(self.sp_before.max(initial=0.0), self.sp_after.max(initial=0.0)))
        frames = [
            specificity_histogram(sp, bins=bins, upper=upper).assign(
                replica=self.replica, algorithm=self.algorithm, phase=phase
            )
            for phase, sp in (("before", self.sp_before), ("after", self.sp_after))
        ]
        return pd.concat(frames, ignore_index=True)[SPECIFICITY_HIST_COLUMNS]


@dataclass(slots=True, eq=False)
class RunRecord:
    """Tudo o que uma execução produziu; reproduzível a partir de `config` (semente mestre incluída)."""

    config: Dict[str, Any]
    metrics: pd.DataFrame
    summaries: pd.DataFrame
    specificity: pd.DataFrame
    acceptances: pd.DataFrame
    arms: List[ArmResult] = field(default_factory=list)
    specificity_hist: pd.DataFrame = field(
        default_factory=lambda: pd.DataFrame(columns=SPECIFICITY_HIST_COLUMNS)
    )

    @classmethod
    def from_arms(cls, config: Dict[str, Any], arms: Sequence[ArmResult]) -> "RunRecord":
        metrics = points_to_dataframe([p for arm in arms for p in arm.points])
        summaries = pd.DataFrame([arm.summary() for arm in arms], columns=SUMMARY_COLUMNS)
        spec_frames = [
            pd.DataFrame(
                {
                    "replica": arm.replica,
                    "algorithm": arm.algorithm,
                    "node": np.arange(arm.sp_after.size),
                    "sp_before": arm.sp_before,
                    "sp_after": arm.sp_after,
                }
            )
            for arm in arms
            if arm.sp_before is not None and arm.sp_after is not None
        ]
        hists = [h for h in (arm.specificity_hist() for arm in arms) if not h.empty]
        acc_rows = [
            {"replica": arm.replica, "algorithm": arm.algorithm, **asdict(rec)}
            for arm in arms
            for rec in arm.acceptances
        ]
        return cls(
            config=config,
            metrics=metrics,
            summaries=summaries,
            specificity=(
                pd.concat(spec_frames, ignore_index=True)
                if spec_frames
                else pd.DataFrame(columns=SPECIFICITY_COLUMNS)
            ),
            acceptances=pd.DataFrame(acc_rows, columns=ACCEPTANCE_COLUMNS),
            arms=list(arms),
            specificity_hist=(
                pd.concat(hists, ignore_index=True)
                if hists
                else pd.DataFrame(columns=SPECIFICITY_HIST_COLUMNS)
            ),
        )


# --- preparação de cada réplica -------------------------------------------


def build_replica(config: ExperimentConfig, replica: int) -> ReplicaSetup:
    """Reservatório e tarefa de uma réplica; compartilhados por todos os algoritmos."""
    res_seed = int(derive_seed_sequence(config.seed, replica, STREAM_RESERVOIR).generate_state(1)[0])
    reservoir = build_reservoir(config.reservoir_params(res_seed))
    task_rng = stream_rng(config, replica, STREAM_TASK)
    tp = config.task_params
    if tp.stimulus_file is not None:
        stimuli = load_stimulus_set(tp.stimulus_file, n_inputs=config.reservoir.n_inputs)
    else:
        stimuli = synth_stimulus_set(tp.pool_size, task_rng, n_inputs=config.reservoir.n_inputs)

    task: Task
    if config.base_task == "static":
        task = make_static_task(
            stimuli, tp.n_stimuli, tp.n_class, tp.sigma, task_rng,
            duration_steps=config.duration_steps,
        )
    else:
        task = make_sequence_task(
            stimuli, tp.n_base, tp.n_class, task_rng,
            element_steps=config.element_steps, sigma=tp.sigma, include_bases=tp.include_bases,
        )
    theta_start, candidates = calibrate_thresholds(config, reservoir, task, replica)
    return ReplicaSetup(
        replica=replica,
        reservoir=reservoir,
        stimuli=stimuli,
        task=task,
        theta_start=theta_start,
        theta_candidates=candidates,
    )


def calibrate_thresholds(
    config: ExperimentConfig, reservoir: Reservoir, task: Task, replica: int
) -> Tuple[float, Tuple[float, ...]]:
    """Converte os coding levels da configuração em theta_g para esta réplica.

    Os quantis vêm de V no instante da decisão, medido num fluxo próprio; valores
    explícitos (`theta_g_init` com `initial_coding = None`, `prelearn_candidates`)
    passam direto.
    """
    t = config.trainer
    needs_start = t.initial_coding is not None
    needs_candidates = t.prelearn_candidates is None
    if not (needs_start or needs_candidates):
        return t.theta_g_init, tuple(t.prelearn_candidates or ())

    potentials = sample_potentials(
        reservoir, task, t.calibration_episodes, stream_rng(config, replica, STREAM_CALIBRATION)
    )
    start = (
        threshold_for_coding(potentials, t.initial_coding)
        if t.initial_coding is not None
        else t.theta_g_init
    )
    candidates = (
        tuple(threshold_for_coding(potentials, c) for c in t.prelearn_codings)
        if t.prelearn_candidates is None
        else tuple(t.prelearn_candidates)
    )
    logger.debug(
        "réplica %d: V médio %.4f, theta_g inicial %.4f, candidatos %s",
        replica, float(potentials.mean()), start, ", ".join(f"{c:.4f}" for c in candidates),
    )
    return start, candidates


def _train(
    config: ExperimentConfig, setup: ReplicaSetup, algorithm: str, readout: SparseReadout
) -> Tuple[TrainResult, Dict[str, np.random.Generator]]:
    replica = setup.replica
    trainer_cfg = config.trainer_config(
        algorithm, theta_g_init=setup.theta_start, prelearn_candidates=setup.theta_candidates
    )
    policy_rng = stream_rng(config, replica, policy_stream(algorithm))
    episode_rng = stream_rng(config, replica, STREAM_EPISODES)
    prelearn_rng = stream_rng(config, replica, STREAM_PRELEARN)

    if config.is_bandit:
        env = BanditEnv(
            setup.task,
            reward_correct=config.task_params.reward_correct,
            reward_wrong=config.task_params.reward_wrong,
        )
        result = run_bandit(
            setup.reservoir, readout, env, algorithm, config.n_episodes, trainer_cfg,
            policy_rng, episode_rng=episode_rng, prelearn_rng=prelearn_rng,
        )
    elif algorithm == "composed":
        result = train_composed(
            setup.reservoir, readout, setup.task, config.n_episodes, trainer_cfg, policy_rng,
            episode_rng=episode_rng, prelearn_rng=prelearn_rng,
        )
    else:
        result = TRAINERS[algorithm](
            setup.reservoir, readout, setup.task, config.n_episodes, trainer_cfg, policy_rng,
            episode_rng,
        )
    return result, {"policy": policy_rng, "episodes": episode_rng, "prelearn": prelearn_rng}


def run_arm(
    config: ExperimentConfig, replica: int, algorithm: str, setup: ReplicaSetup | None = None
) -> ArmResult:
    """Treina um algoritmo numa réplica e mede a especificidade antes/depois."""
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"algoritmo desconhecido: {algorithm}", key="algorithms")
    setup = setup or build_replica(config, replica)
    start = time.perf_counter()
    logger.info("início: réplica %d, %s (%s)", replica, algorithm, config.task)

    t = config.trainer
    readout = SparseReadout.zeros(
        setup.task.n_class, setup.reservoir.n_nodes, theta_global=setup.theta_start
    )
    try:
        result, streams = _train(config, setup, algorithm, readout)
    except TrainingError as exc:
        exc.context["replica"] = replica
        raise

    for p in result.points:
        p.replica = replica
        p.task = config.task

    # GD_W lê V sem limiares; os demais leem a atividade esparsa
    use_thresholds = algorithm != "gd_w"
    n_eval = config.task_params.n_eval
    before = after = None
    sp_before = sp_after = None
    if n_eval > 0:
        initial = SparseReadout.zeros(
            setup.task.n_class, setup.reservoir.n_nodes, theta_global=result.theta_g_initial
        )
        before = evaluate(
            setup.reservoir, initial, setup.task, n_eval,
            stream_rng(config, replica, STREAM_EVAL), use_thresholds, t.temperature,
        )
        # mesmos episódios de avaliação antes e depois
        streams["eval"] = stream_rng(config, replica, STREAM_EVAL)
        after = evaluate(
            setup.reservoir, result.readout, setup.task, n_eval,
            streams["eval"], use_thresholds, t.temperature,
        )
        sp_before = specificity(before.counts).sp_per_neuron
        sp_after = specificity(after.counts).sp_per_neuron

    elapsed = time.perf_counter() - start
    logger.info(
        "fim: réplica %d, %s em %.1fs (acurácia final %.3f)",
        replica, algorithm, elapsed, result.points[-1].accuracy,
    )
    return ArmResult(
        replica=replica,
        algorithm=algorithm,
        task=config.task,
        readout=result.readout,
        points=result.points,
        acceptances=result.acceptances,
        theta_g_initial=result.theta_g_initial,
        before=before,
        after=after,
        sp_before=sp_before,
        sp_after=sp_after,
        rng_states={name: rng.bit_generator.state for name, rng in streams.items()},
        elapsed=elapsed,
    )


def run_experiment(
    config: ExperimentConfig,
    sink: MetricsSink | None = None,
    workers: int | None = None,
    write: bool = True,
) -> RunRecord:
    """Roda algoritmos × réplicas; a saída não depende de `workers`."""
    workers = config.workers if workers is None else workers
    out_dir = Path(config.output_dir)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(config.snapshot(), out_dir / "config.json")
        if sink is None:
            sink = MetricsSink(out_dir / "metrics.jsonl", truncate=True)

    setups = {k: build_replica(config, k) for k in range(config.n_replicas)}
    jobs = [(k, alg) for k in range(config.n_replicas) for alg in config.algorithms]
    logger.info(
        "experimento %s: %d algoritmos × %d réplicas, %d episódios",
        config.task, len(config.algorithms), config.n_replicas, config.n_episodes,
    )

    arms: List[ArmResult] = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_arm, config, k, alg) for k, alg in jobs]
            for fut in futures:
                arm = fut.result()
                if sink is not None:
                    sink.write(arm.points)
                arms.append(arm)
    else:
        for k, alg in jobs:
            arm = run_arm(config, k, alg, setups[k])
            if sink is not None:
                sink.write(arm.points)
            arms.append(arm)

    record = RunRecord.from_arms(config.snapshot(), arms)
    if write:
        for k, setup in setups.items():
            write_frame(task_manifest(setup.task), out_dir / f"task_manifest_r{k}.csv")
        for arm in arms:
            save_checkpoint(
                out_dir / "checkpoints" / f"{arm.algorithm}_r{arm.replica}.npz",
                setups[arm.replica].reservoir,
                arm.readout,
                rng_state=arm.rng_states,
                meta={
                    "algorithm": arm.algorithm,
                    "replica": arm.replica,
                    "task": arm.task,
                    "episodes": config.n_episodes,
                    "master_seed": config.seed,
                },
            )
        write_record(record, out_dir, include_metrics=False)
    return record


# --- persistência do RunRecord ---------------------------------------------


def write_record(record: RunRecord, out_dir: Path | str, include_metrics: bool = True) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(record.config, out_dir / "config.json")
    if include_metrics:
        MetricsSink(out_dir / "metrics.jsonl", truncate=True).write_frame(record.metrics)
    write_frame(record.summaries, out_dir / "summaries.csv")
    (out_dir / "summaries.json").write_text(
        record.summaries.to_json(orient="records", indent=2), encoding="utf-8"
    )
    write_frame(record.specificity, out_dir / "specificity.csv")
    write_frame(record.specificity_hist, out_dir / "specificity_hist.csv")
    write_frame(record.acceptances, out_dir / "acceptances.csv")
    return out_dir


def load_record(run_dir: Path | str) -> RunRecord:
    run_dir = Path(run_dir)
    config_path = run_dir / "config.json"
    if not config_path.exists():
        raise ConfigurationError(f"{run_dir} não contém config.json", key="record")
    return RunRecord(
        config=read_json(config_path),
        metrics=read_metrics(run_dir / "metrics.jsonl"),
        summaries=read_frame(run_dir / "summaries.csv"),
        specificity=read_frame(run_dir / "specificity.csv"),
        acceptances=read_frame(run_dir / "acceptances.csv"),
        specificity_hist=read_frame(run_dir / "specificity_hist.csv"),
    )


# --- varredura de dificuldade ----------------------------------------------


def run_sweep(
    config: ExperimentConfig,
    n_stimuli_values: Sequence[int],
    workers: int | None = None,
    write: bool = True,
) -> pd.DataFrame:
    """Tarefa estática com n_stimuli variável: acurácia, theta médio e a diferença composed - gd_w."""
    if config.base_task != "static":
        raise ConfigurationError("a varredura só vale para a tarefa estática", key="task")
    if not n_stimuli_values:
        raise ConfigurationError("lista de n_stimuli vazia", key="n_stimuli")

    base_dir = Path(config.output_dir)
    rows: List[Dict[str, Any]] = []
    for n in n_stimuli_values:
        cfg = config.model_copy(
            update={
                "task_params": config.task_params.model_copy(update={"n_stimuli": int(n)}),
                "output_dir": base_dir / f"n_stimuli_{n}",
            }
        )
        record = run_experiment(cfg, workers=workers, write=write)
        grouped = record.summaries.groupby("algorithm")
        for algorithm, frame in grouped:
            rows.append(
                {
                    "n_stimuli": int(n),
                    "algorithm": algorithm,
                    "final_accuracy": float(frame["final_accuracy"].mean()),
                    "final_accuracy_std": float(frame["final_accuracy"].std(ddof=0)),
                    "theta_mean": float(frame["theta_mean"].mean()),
                    "coding_level": float(frame["coding_level"].mean()),
                }
            )

    table = pd.DataFrame(rows)
    acc = table.pivot(index="n_stimuli", columns="algorithm", values="final_accuracy")
    if {"composed", "gd_w"} <= set(acc.columns):
        gap = (acc["composed"] - acc["gd_w"]).rename("gap_composed_gd_w")
        table = table.merge(gap, left_on="n_stimuli", right_index=True, how="left")
    if write:
        base_dir.mkdir(parents=True, exist_ok=True)
        write_frame(table, base_dir / "sweep.csv")
    return table
