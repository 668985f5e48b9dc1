from __future__ import annotations

from pathlib import Path
from threading import Thread

import numpy as np
import pytest

from kenyon.models import MetricPoint, Reservoir, SparseReadout
from kenyon.sim.reservoir import run_episode
from kenyon.storage import (
    MetricsSink,
    inspect_checkpoint,
    load_checkpoint,
    load_reservoir,
    read_metrics,
    save_checkpoint,
    save_reservoir,
)


def test_checkpoint_restores_reservoir_and_readout(
    tmp_path: Path, small_reservoir: Reservoir
) -> None:
    readout = SparseReadout.zeros(2, small_reservoir.n_nodes, theta_global=0.15)
    readout.theta_local[:] = np.linspace(-0.1, 0.1, small_reservoir.n_nodes)
    readout.w_out[:] = 0.5
    rng = np.random.default_rng(8)
    rng.random(3)
    path = save_checkpoint(
        tmp_path / "ck" / "a.npz", small_reservoir, readout,
        rng_state=rng.bit_generator.state, meta={"algorithm": "composed"},
    )
    ck = load_checkpoint(path)

    assert ck.meta == {"algorithm": "composed"}
    assert ck.readout is not None
    assert ck.readout.theta_global == 0.15
    np.testing.assert_array_equal(ck.readout.theta_local, readout.theta_local)
    np.testing.assert_array_equal(ck.readout.w_out, readout.w_out)
    assert ck.reservoir.params == small_reservoir.params

    inputs = np.random.default_rng(0).random((10, small_reservoir.n_inputs))
    np.testing.assert_array_equal(
        run_episode(ck.reservoir, inputs).v, run_episode(small_reservoir, inputs).v
    )

    restored = np.random.default_rng()
    restored.bit_generator.state = ck.rng_state
    assert restored.random() == rng.random()


def test_reservoir_only_container(tmp_path: Path, small_reservoir: Reservoir) -> None:
    path = save_reservoir(tmp_path / "res.npz", small_reservoir)
    loaded = load_reservoir(path)
    assert (loaded.w_rec.weights != small_reservoir.w_rec.weights).nnz == 0
    np.testing.assert_array_equal(loaded.w_in.in_degrees, small_reservoir.w_in.in_degrees)
    assert load_checkpoint(path).readout is None


def test_inspect_summarizes_a_checkpoint(tmp_path: Path, small_reservoir: Reservoir) -> None:
    readout = SparseReadout.zeros(3, small_reservoir.n_nodes, theta_global=0.2)
    path = save_checkpoint(tmp_path / "b.npz", small_reservoir, readout)
    info = inspect_checkpoint(path)
    assert info["n_nodes"] == small_reservoir.n_nodes
    assert info["n_class"] == 3
    assert info["theta_mean"] == pytest.approx(0.2)
    assert info["spectral_radius"] == pytest.approx(small_reservoir.params.rho)


def _point(episode: int, algorithm: str) -> MetricPoint:
    return MetricPoint(
        episode=episode, algorithm=algorithm, accuracy=0.5, greedy_accuracy=0.5, loss=0.5,
        coding_level=0.5, theta_mean=0.0, theta_std=0.0, theta_g=0.0,
        acceptance_rate=float("nan"),
    )


def test_sink_appends_lines_from_many_writers(tmp_path: Path) -> None:
    sink = MetricsSink(tmp_path / "metrics.jsonl", truncate=True)

    def writer(name: str) -> None:
        for e in range(20):
            sink.write([_point(e, name)])

    threads = [Thread(target=writer, args=(f"alg{i}",)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    df = read_metrics(sink.path)
    assert len(df) == 80
    assert sorted(df["algorithm"].unique()) == ["alg0", "alg1", "alg2", "alg3"]
    assert (df.groupby("algorithm").size() == 20).all()


def test_empty_sink_reads_as_empty_frame(tmp_path: Path) -> None:
    sink = MetricsSink(tmp_path / "m.jsonl", truncate=True)
    assert sink.write([]) == 0
    assert read_metrics(sink.path).empty
