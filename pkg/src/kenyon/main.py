from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np

from .config import ExperimentConfig, parse_config
from .errors import ConfigurationError, KenyonError, StimulusFileError
from .generators import save_stimulus_set, synth_stimulus_set
from .plots import plot_line
from .report import write_report
from .sim.engine import load_record, run_experiment, run_sweep
from .storage import inspect_checkpoint

logger = logging.getLogger("kenyon")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", nargs="?", default=None, help="Arquivo TOML de configuração")
    p.add_argument("--episodes", type=int, help="Episódios de treino por algoritmo")
    p.add_argument("--replicas", type=int, help="Número de réplicas (sementes derivadas)")
    p.add_argument("--seed", type=int, help="Semente mestre")
    p.add_argument("--outputs", type=str, help="Diretório de saída")
    p.add_argument("--preset", choices=["full", "desk"], help="Perfil de escala")
    p.add_argument(
        "--task",
        choices=["static", "sequence", "bandit-static", "bandit-sequence"],
        help="Tarefa",
    )
    p.add_argument("--algorithms", type=str, help="Lista separada por vírgulas")
    p.add_argument("--workers", type=int, help="Processos para os braços do experimento")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECAO.CHAVE=VALOR",
        help="Sobrescreve um campo qualquer (repetível)",
    )


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"sobrescrita malformada: {item!r}", key=item)
        out[key.strip()] = value.strip()
    flags = {
        "n_episodes": args.episodes,
        "n_replicas": args.replicas,
        "seed": args.seed,
        "output_dir": args.outputs,
        "preset": args.preset,
        "task": args.task,
        "workers": args.workers,
    }
    out.update({k: v for k, v in flags.items() if v is not None})
    if args.algorithms:
        out["algorithms"] = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    return out


def _load(args: argparse.Namespace) -> ExperimentConfig:
    return parse_config(args.config, _overrides(args))


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    record = run_experiment(cfg)
    write_report([record], Path(cfg.output_dir) / "report")
    print(record.summaries[["replica", "algorithm", "final_accuracy", "coding_level"]].to_string())
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    records = [load_record(p) for p in args.records]
    tables = write_report(records, Path(args.outputs))
    print(tables.summary.to_string())
    return 0


def cmd_gen_data(args: argparse.Namespace) -> int:
    if args.n_stimuli < 1 or args.n_inputs < 1:
        raise ConfigurationError("n_stimuli e n_inputs devem ser >= 1", key="gen-data")
    rng = np.random.default_rng(args.seed)
    stimuli = synth_stimulus_set(args.n_stimuli, rng, n_inputs=args.n_inputs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_stimulus_set(stimuli, out)
    logger.info("%d estímulos × %d canais gravados em %s", stimuli.n_stimuli, stimuli.n_inputs, out)
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    info = inspect_checkpoint(args.checkpoint)
    print(json.dumps(info, indent=2, default=str))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    values: List[int] = []
    for v in args.values.split(","):
        try:
            values.append(int(v))
        except ValueError as exc:
            raise ConfigurationError(f"valor de n_stimuli inválido: {v!r}", key="values") from exc
    table = run_sweep(cfg, values)
    if "gap_composed_gd_w" in table.columns:
        gap = table.drop_duplicates("n_stimuli").set_index("n_stimuli")["gap_composed_gd_w"]
        plot_line(
            gap.to_dict(),
            "Diferença composed − gd_w por n_stimuli",
            Path(cfg.output_dir) / "sweep_gap.png",
            ylabel="Δ acurácia",
        )
    print(table.to_string())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Kenyon: limiares de esparsidade aprendíveis em reservatórios"
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Nível de log",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Treina os algoritmos e grava o RunRecord")
    _add_experiment_flags(run)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="Agrega RunRecords em tabelas e gráficos")
    rep.add_argument("records", nargs="+", help="Diretórios de execução")
    rep.add_argument("--outputs", default="report", help="Diretório do relatório")
    rep.set_defaults(func=cmd_report)

    gen = sub.add_parser("gen-data", help="Gera um arquivo de estímulos sintéticos")
    gen.add_argument("--out", default="stimuli.csv", help="Arquivo de saída")
    gen.add_argument("--n-stimuli", type=int, default=200, help="Número de estímulos")
    gen.add_argument("--n-inputs", type=int, default=24, help="Canais de entrada")
    gen.add_argument("--seed", type=int, default=0, help="Semente")
    gen.set_defaults(func=cmd_gen_data)

    ins = sub.add_parser("inspect", help="Resumo de um checkpoint")
    ins.add_argument("checkpoint", help="Arquivo .npz")
    ins.set_defaults(func=cmd_inspect)

    sw = sub.add_parser("sweep", help="Varre n_stimuli na tarefa estática")
    _add_experiment_flags(sw)
    sw.add_argument("--values", default="20,60,100,140", help="Valores de n_stimuli")
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, force=True)
    try:
        return int(args.func(args))
    except KenyonError as exc:
        logger.error("%s", exc.message)
        print(json.dumps(exc.to_record(), default=str), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigurationError, StimulusFileError)) else 1


if __name__ == "__main__":
    sys.exit(main())
