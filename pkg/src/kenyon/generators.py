from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConfigurationError, ContractViolation, StimulusFileError

logger = logging.getLogger(__name__)

DEFAULT_INPUTS = 24


@dataclass(frozen=True, slots=True, eq=False)
class StimulusSet:
    rates: np.ndarray  # n_stimuli × n_inputs, taxas não negativas
    source: Literal["file", "synthetic"]

    @property
    def n_stimuli(self) -> int:
        return int(self.rates.shape[0])

    @property
    def n_inputs(self) -> int:
        return int(self.rates.shape[1])


@dataclass(frozen=True, slots=True, eq=False)
class Episode:
    """Uma apresentação de estímulo que termina na decisão."""

    inputs: np.ndarray  # total_steps × n_inputs, já com ruído
    label: int
    item: int

    @property
    def total_steps(self) -> int:
        return int(self.inputs.shape[0])


@dataclass(frozen=True, slots=True, eq=False)
class StaticTask:
    stimuli: StimulusSet
    stimulus_ids: np.ndarray
    labels: np.ndarray
    noise_sigma: float
    duration_steps: int
    n_class: int

    @property
    def n_items(self) -> int:
        return int(self.stimulus_ids.size)

    @property
    def total_steps(self) -> int:
        return self.duration_steps

    def make_episode(self, item: int, rng: np.random.Generator) -> Episode:
        base = self.stimuli.rates[self.stimulus_ids[item]]
        xi = rng.standard_normal((self.duration_steps, base.size))
        return Episode(
            inputs=base * (1.0 + self.noise_sigma * xi),
            label=int(self.labels[item]),
            item=item,
        )


@dataclass(frozen=True, slots=True)
class SequenceProvenance:
    base_id: int
    perturbed_position: int  # -1 para a sequência base sem perturbação
    context_variant: int  # 0 = contexto original


@dataclass(frozen=True, slots=True, eq=False)
class SequenceTask:
    stimuli: StimulusSet
    sequences: np.ndarray  # n × 3 ids de estímulo
    labels: np.ndarray
    element_steps: int
    provenance: List[SequenceProvenance]
    noise_sigma: float
    n_class: int
    bases: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    @property
    def n_items(self) -> int:
        return int(self.sequences.shape[0])

    @property
    def total_steps(self) -> int:
        return 3 * self.element_steps

    def make_episode(self, item: int, rng: np.random.Generator) -> Episode:
        rows = self.stimuli.rates[self.sequences[item]]
        element = np.arange(self.total_steps) // self.element_steps
        xi = rng.standard_normal((self.total_steps, rows.shape[1]))
        return Episode(
            inputs=rows[element] * (1.0 + self.noise_sigma * xi),
            label=int(self.labels[item]),
            item=item,
        )


Task = Union[StaticTask, SequenceTask]


# --- conjuntos de estímulos -------------------------------------------------


def synth_stimulus_set(
    n_stimuli: int, rng: np.random.Generator, n_inputs: int = DEFAULT_INPUTS
) -> StimulusSet:
    """Substituto sintético da tabela fisiológica: lognormal(0, 1), média 1 por canal."""
    if n_stimuli < 1:
        raise ConfigurationError("n_stimuli deve ser >= 1", key="n_stimuli")
    rates = rng.lognormal(mean=0.0, sigma=1.0, size=(n_stimuli, n_inputs))
    rates = rates / rates.mean(axis=0, keepdims=True)
    return StimulusSet(rates=rates, source="synthetic")


def load_stimulus_set(path: Path | str, n_inputs: int = DEFAULT_INPUTS) -> StimulusSet:
    path = Path(path)
    numbered = [
        (no, ln) for no, ln in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not numbered:
        raise StimulusFileError(f"arquivo de estímulos vazio: {path}")

    sep = _detect_separator(numbered[0][1])
    _check_row_widths(numbered, sep)
    try:
        df = pd.read_csv(
            path, sep=sep, header=None, dtype=str, comment="#", engine="python",
            skip_blank_lines=True,
        )
    except pd.errors.ParserError as exc:
        raise StimulusFileError(f"arquivo de estímulos malformado: {exc}") from exc
    # primeira linha inteiramente não numérica = cabeçalho
    first = pd.to_numeric(df.iloc[0].str.strip(), errors="coerce")
    row_offset = 1
    if first.isna().all():
        df = df.iloc[1:].reset_index(drop=True)
        row_offset = 2
    if df.empty:
        raise StimulusFileError(f"arquivo de estímulos sem linhas de dados: {path}")

    if df.shape[1] != n_inputs:
        raise StimulusFileError(
            f"esperadas {n_inputs} colunas, encontradas {df.shape[1]}",
            row=row_offset,
            column=df.shape[1],
        )

    values = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = values.isna().to_numpy()
    if bad.any():
        r, c = (int(i) for i in np.argwhere(bad)[0])
        raise StimulusFileError(
            f"célula não numérica: {df.iat[r, c]!r}", row=r + row_offset, column=c + 1
        )
    rates = values.to_numpy(dtype=float)
    if not np.all(np.isfinite(rates)):
        r, c = (int(i) for i in np.argwhere(~np.isfinite(rates))[0])
        raise StimulusFileError("taxa não finita", row=r + row_offset, column=c + 1)
    if (rates < 0).any():
        r, c = (int(i) for i in np.argwhere(rates < 0)[0])
        raise StimulusFileError(
            f"taxa negativa: {rates[r, c]}", row=r + row_offset, column=c + 1
        )

    logger.info("estímulos carregados de %s: %d × %d", path, *rates.shape)
    return StimulusSet(rates=rates, source="file")


def save_stimulus_set(stimuli: StimulusSet, path: Path | str) -> None:
    cols = [f"ch{i}" for i in range(stimuli.n_inputs)]
    pd.DataFrame(stimuli.rates, columns=cols).to_csv(path, index=False)


def _detect_separator(line: str) -> str:
    for sep in (",", "\t", ";"):
        if sep in line:
            return sep
    return r"\s+"


def _check_row_widths(numbered: List[Tuple[int, str]], sep: str) -> None:
    """Linhas com número de campos diferente da primeira; `row` é a linha física."""

    def width(line: str) -> int:
        return len(line.split()) if sep == r"\s+" else len(line.split(sep))

    expected = width(numbered[0][1])
    for no, line in numbered[1:]:
        n = width(line)
        if n != expected:
            raise StimulusFileError(
                f"linha com {n} campos, esperados {expected}",
                row=no,
                column=min(n, expected) + 1,
            )


# --- tarefa estática -------------------------------------------------------


def make_static_task(
    stimuli: StimulusSet,
    n_stimuli: int,
    n_class: int,
    sigma: float,
    rng: np.random.Generator,
    duration_steps: int = 50,
) -> StaticTask:
    if n_class < 2:
        raise ConfigurationError("a tarefa estática exige n_class >= 2", key="n_class")
    if n_stimuli < 1:
        raise ConfigurationError("n_stimuli deve ser >= 1", key="n_stimuli")
    if n_stimuli > stimuli.n_stimuli:
        raise ConfigurationError(
            f"n_stimuli={n_stimuli} excede os {stimuli.n_stimuli} estímulos disponíveis",
            key="n_stimuli",
        )
    if sigma < 0:
        raise ConfigurationError("sigma não pode ser negativo", key="sigma")
    if duration_steps < 1:
        raise ConfigurationError("duration_steps deve ser positivo", key="duration_steps")

    ids = rng.choice(stimuli.n_stimuli, size=n_stimuli, replace=False)
    labels = rng.integers(0, n_class, size=n_stimuli)
    return StaticTask(
        stimuli=stimuli,
        stimulus_ids=ids,
        labels=labels,
        noise_sigma=float(sigma),
        duration_steps=int(duration_steps),
        n_class=n_class,
    )


def sample_static_input(
    task: StaticTask, stimulus_id: int, step: int, rng: np.random.Generator
) -> np.ndarray:
    """s_i = s_i^HO * (1 + sigma * xi), xi ~ N(0, 1) novo a cada passo e canal."""
    if not 0 <= stimulus_id < task.stimuli.n_stimuli:
        raise ContractViolation(f"estímulo {stimulus_id} inexistente")
    if not 0 <= step < task.duration_steps:
        raise ContractViolation(f"passo {step} fora de [0, {task.duration_steps})")
    base = task.stimuli.rates[stimulus_id]
    return np.asarray(base * (1.0 + task.noise_sigma * rng.standard_normal(base.size)))


# --- tarefa de sequências --------------------------------------------------


def family_size(n_class: int) -> int:
    """Estímulos distintos consumidos por uma família (base + perturbações + contextos)."""
    per_position = n_class + 2 * n_class * (n_class - 1)
    return 3 + 3 * per_position


def make_sequence_task(
    stimuli: StimulusSet,
    n_base: int,
    n_class: int,
    rng: np.random.Generator,
    element_steps: int = 10,
    sigma: float = 0.2,
    include_bases: bool = False,
) -> SequenceTask:
    """Gera 3 * n_class^2 * n_base sequências a partir de n_base bases aleatórias.

    Para cada base e posição: n_class perturbações com rótulos distintos e, para
    cada perturbação, n_class - 1 trocas de contexto com rótulo diferente do da
    perturbação. Estímulos não se repetem dentro de uma família.
    """
    if n_base < 1:
        raise ConfigurationError("n_base deve ser >= 1", key="n_base")
    if n_class < 1:
        raise ConfigurationError("n_class deve ser >= 1", key="n_class")
    if element_steps < 1:
        raise ConfigurationError("element_steps deve ser positivo", key="element_steps")
    needed = family_size(n_class)
    if needed > stimuli.n_stimuli:
        raise ConfigurationError(
            f"cada família precisa de {needed} estímulos distintos, há {stimuli.n_stimuli}",
            key="n_stimuli",
        )

    sequences: List[np.ndarray] = []
    labels: List[int] = []
    provenance: List[SequenceProvenance] = []
    bases: List[np.ndarray] = []

    for b in range(n_base):
        pool = iter(rng.choice(stimuli.n_stimuli, size=needed, replace=False).tolist())
        base = np.array([next(pool) for _ in range(3)], dtype=np.int64)
        bases.append(base)

        for pos in range(3):
            context = [p for p in range(3) if p != pos]
            for variant_label in rng.permutation(n_class).tolist():
                perturbed = base.copy()
                perturbed[pos] = next(pool)
                sequences.append(perturbed)
                labels.append(int(variant_label))
                provenance.append(SequenceProvenance(b, pos, 0))

                others = [c for c in range(n_class) if c != variant_label]
                for k in range(1, n_class):
                    swapped = perturbed.copy()
                    for p in context:
                        swapped[p] = next(pool)
                    sequences.append(swapped)
                    labels.append(int(others[rng.integers(len(others))]))
                    provenance.append(SequenceProvenance(b, pos, k))

        if include_bases:
            sequences.append(base.copy())
            labels.append(int(rng.integers(n_class)))
            provenance.append(SequenceProvenance(b, -1, 0))

    return SequenceTask(
        stimuli=stimuli,
        sequences=np.vstack(sequences),
        labels=np.asarray(labels, dtype=np.int64),
        element_steps=int(element_steps),
        provenance=provenance,
        noise_sigma=float(sigma),
        n_class=n_class,
        bases=np.vstack(bases),
    )


def sample_sequence_input(
    task: SequenceTask, sequence_id: int, step: int, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    if not 0 <= step < task.total_steps:
        raise ContractViolation(f"passo {step} fora de [0, {task.total_steps})")
    if not 0 <= sequence_id < task.n_items:
        raise ContractViolation(f"sequência {sequence_id} inexistente")
    stim = task.sequences[sequence_id, step // task.element_steps]
    base = task.stimuli.rates[stim]
    return np.asarray(base * (1.0 + sigma * rng.standard_normal(base.size)))


def task_manifest(task: Task) -> pd.DataFrame:
    if isinstance(task, StaticTask):
        return pd.DataFrame(
            {
                "item": np.arange(task.n_items),
                "stimulus_id": task.stimulus_ids,
                "label": task.labels,
            }
        )
    return pd.DataFrame(
        {
            "item": np.arange(task.n_items),
            "element_0": task.sequences[:, 0],
            "element_1": task.sequences[:, 1],
            "element_2": task.sequences[:, 2],
            "label": task.labels,
            "base_id": [p.base_id for p in task.provenance],
            "perturbed_position": [p.perturbed_position for p in task.provenance],
            "context_variant": [p.context_variant for p in task.provenance],
        }
    )
