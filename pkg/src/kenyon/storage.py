from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from .errors import ContractViolation
from .models import InputMatrix, MetricPoint, RecurrentMatrix, Reservoir, ReservoirParams, SparseReadout
from .sim.metrics import points_to_dataframe, theta_stats

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(slots=True, eq=False)
class Checkpoint:
    reservoir: Reservoir
    readout: SparseReadout | None
    rng_state: Dict[str, Any] | None = None
    meta: Dict[str, Any] = field(default_factory=dict)


def _csr_arrays(prefix: str, matrix: sparse.csr_matrix) -> Dict[str, np.ndarray]:
    m = sparse.csr_matrix(matrix)
    return {
        f"{prefix}_data": m.data,
        f"{prefix}_indices": m.indices,
        f"{prefix}_indptr": m.indptr,
        f"{prefix}_shape": np.asarray(m.shape),
    }


def _csr_from(arrays: Any, prefix: str) -> sparse.csr_matrix:
    shape = tuple(int(s) for s in arrays[f"{prefix}_shape"])
    return sparse.csr_matrix(
        (arrays[f"{prefix}_data"], arrays[f"{prefix}_indices"], arrays[f"{prefix}_indptr"]),
        shape=shape,
    )


def save_checkpoint(
    path: Path | str,
    reservoir: Reservoir,
    readout: SparseReadout | None = None,
    rng_state: Dict[str, Any] | None = None,
    meta: Dict[str, Any] | None = None,
) -> Path:
    """Grava reservatório, leitura e estado do RNG num `.npz` com cabeçalho JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": FORMAT_VERSION,
        "n_nodes": reservoir.n_nodes,
        "n_inputs": reservoir.n_inputs,
        "seed": reservoir.params.seed,
        "spectral_radius": reservoir.w_rec.spectral_radius,
        "params": reservoir.params.to_dict(),
        "rng_state": rng_state,
        "meta": meta or {},
    }
    arrays: Dict[str, np.ndarray] = {
        "header": np.asarray(json.dumps(header, default=_json_default)),
        "in_degrees": reservoir.w_in.in_degrees,
        **_csr_arrays("w_in", reservoir.w_in.weights),
        **_csr_arrays("w_rec", reservoir.w_rec.weights),
    }
    if readout is not None:
        arrays["theta_global"] = np.asarray(readout.theta_global)
        arrays["theta_local"] = readout.theta_local
        arrays["w_out"] = readout.w_out
    with path.open("wb") as fh:
        np.savez_compressed(fh, **arrays)
    logger.debug("checkpoint gravado em %s", path)
    return path


def load_checkpoint(path: Path | str) -> Checkpoint:
    with np.load(Path(path), allow_pickle=False) as arrays:
        header = json.loads(str(arrays["header"]))
        if header.get("format") != FORMAT_VERSION:
            raise ContractViolation(f"formato de checkpoint desconhecido: {header.get('format')}")
        params = ReservoirParams(**header["params"])
        reservoir = Reservoir(
            params=params,
            w_in=InputMatrix(
                weights=_csr_from(arrays, "w_in"), in_degrees=np.asarray(arrays["in_degrees"])
            ),
            w_rec=RecurrentMatrix(
                weights=_csr_from(arrays, "w_rec"),
                spectral_radius=float(header["spectral_radius"]),
            ),
        )
        readout = None
        if "w_out" in arrays.files:
            readout = SparseReadout(
                theta_global=float(arrays["theta_global"]),
                theta_local=np.array(arrays["theta_local"]),
                w_out=np.array(arrays["w_out"]),
            )
    return Checkpoint(
        reservoir=reservoir, readout=readout, rng_state=header.get("rng_state"), meta=header["meta"]
    )


def save_reservoir(path: Path | str, reservoir: Reservoir) -> Path:
    return save_checkpoint(path, reservoir)


def load_reservoir(path: Path | str) -> Reservoir:
    return load_checkpoint(path).reservoir


def inspect_checkpoint(path: Path | str) -> Dict[str, Any]:
    ck = load_checkpoint(path)
    res = ck.reservoir
    info: Dict[str, Any] = {
        "path": str(path),
        "n_nodes": res.n_nodes,
        "n_inputs": res.n_inputs,
        "seed": res.params.seed,
        "spectral_radius": res.w_rec.spectral_radius,
        "recurrent_nnz": int(res.w_rec.weights.nnz),
        "mean_in_degree": float(np.mean(res.w_in.in_degrees)),
        "meta": ck.meta,
    }
    if ck.readout is not None:
        stats = theta_stats(ck.readout)
        info.update(
            n_class=ck.readout.n_class,
            theta_global=ck.readout.theta_global,
            theta_mean=stats.mean,
            theta_std=stats.std,
            w_out_norm=float(np.linalg.norm(ck.readout.w_out)),
        )
    return info


class MetricsSink:
    """Arquivo JSON-lines só de acréscimo; cada escrita segura o lock."""

    def __init__(self, path: Path | str, truncate: bool = False) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        if truncate:
            self.path.write_text("", encoding="utf-8")

    def write(self, points: Sequence[MetricPoint]) -> int:
        if not points:
            return 0
        return self.write_frame(points_to_dataframe(points))

    def write_frame(self, frame: pd.DataFrame) -> int:
        if frame.empty:
            return 0
        text = frame.to_json(orient="records", lines=True)
        if not text.endswith("\n"):
            text += "\n"
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(text)
        return len(frame)


def read_metrics(path: Path | str) -> pd.DataFrame:
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return pd.DataFrame()
    return pd.read_json(path, orient="records", lines=True)


def write_frame(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False)


def read_frame(path: Path) -> pd.DataFrame:
    if not path.exists() or path.stat().st_size == 0:
        return pd.DataFrame()
    try:
        return pd.read_csv(path)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"objeto não serializável: {type(obj).__name__}")


def write_json(data: Any, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, default=_json_default), encoding="utf-8")


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))
