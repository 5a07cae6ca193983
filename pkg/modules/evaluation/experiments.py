"""
Varreduras de um hiperparâmetro × sementes: λ, número de camadas L,
dimensão d e razão de treino (cold-start). Cada execução treina do zero e
registra as métricas da melhor época na validação e no teste.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from modules.data.interactions import Split
from modules.evaluation.metrics import evaluate
from modules.kg.store import KnowledgeGraph
from modules.training.config import HyperParams
from modules.training.trainer import train
from tools.logger import get_logger
from tools.tsv import write_csv

log = get_logger(__name__)

SWEEP_HEADER = ["parameter", "value", "seed", "val_auc", "val_r10", "test_auc", "test_r10"]
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class SweepRun:
    value: float
    seed: int
    val_auc: float
    val_r10: float
    test_auc: float
    test_r10: float


@dataclass
class SweepResult:
    parameter: str
    runs: List[SweepRun] = field(default_factory=list)

    def values(self) -> List[float]:
        return sorted({run.value for run in self.runs})

    def mean(self, value: float, metric: str = "val_r10") -> float:
        return float(np.mean([getattr(run, metric) for run in self.runs if run.value == value]))

    def means(self, metric: str = "val_r10") -> Dict[float, float]:
        return {value: self.mean(value, metric) for value in self.values()}

    def paired_difference(self, value: float, baseline: float, metric: str = "val_r10") -> float:
        """Média, por semente, de metric(value) - metric(baseline)."""
        by_seed = {(run.value, run.seed): getattr(run, metric) for run in self.runs}
        seeds = sorted({seed for (v, seed) in by_seed if v == value} & {seed for (v, seed) in by_seed if v == baseline})
        return float(np.mean([by_seed[(value, s)] - by_seed[(baseline, s)] for s in seeds]))

    def rows(self) -> List[tuple]:
        return [
            (self.parameter, run.value, run.seed, run.val_auc, run.val_r10, run.test_auc, run.test_r10)
            for run in self.runs
        ]

    def save(self, path: str) -> None:
        write_csv(path, SWEEP_HEADER, self.rows())


def sweep(
    data: Split,
    kg: KnowledgeGraph,
    hp: HyperParams,
    parameter: str,
    values: Sequence,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    out_path: str = "",
) -> SweepResult:
    result = SweepResult(parameter=parameter)
    for value in values:
        for seed in seeds:
            run_hp = hp.override(**{parameter: value, "seed": seed})
            trained = train(data, kg, run_hp)
            best = trained.history[trained.best_epoch - 1] if trained.best_epoch else None
            test = evaluate(trained.params, kg, run_hp, data, part="test", ks=(10,))
            result.runs.append(
                SweepRun(
                    value=float(value),
                    seed=int(seed),
                    val_auc=best.val_auc if best else float("nan"),
                    val_r10=best.val_r10 if best else float("nan"),
                    test_auc=test.auc,
                    test_r10=test.recall_at.get(10, 0.0),
                )
            )
        log.info(f"{parameter}={value}: R@10 médio na validação {result.mean(float(value)):.4f}")

    if out_path:
        result.save(out_path)
    return result


def lambda_sweep(data, kg, hp, lambdas: Sequence[float] = (0.0, 0.5), seeds=DEFAULT_SEEDS, out_path="") -> SweepResult:
    result = sweep(data, kg, hp, "ls_weight", lambdas, seeds, out_path)
    if len(lambdas) > 1:
        baseline = float(lambdas[0])
        for value in lambdas[1:]:
            log.info(
                f"🎯 λ={value} vs λ={baseline}: diferença pareada de R@10 = "
                f"{result.paired_difference(float(value), baseline):+.4f}"
            )
    return result


def layer_sweep(data, kg, hp, layers: Sequence[int] = (1, 2, 3, 4), seeds=DEFAULT_SEEDS, out_path="") -> SweepResult:
    return sweep(data, kg, hp, "layers", layers, seeds, out_path)


def dimension_sweep(data, kg, hp, dims: Sequence[int] = (4, 8, 16, 32, 64), seeds=DEFAULT_SEEDS, out_path="") -> SweepResult:
    return sweep(data, kg, hp, "dim", dims, seeds, out_path)


def train_ratio_sweep(
    data, kg, hp, ratios: Sequence[float] = (0.2, 0.4, 0.6, 0.8, 1.0), seeds=DEFAULT_SEEDS, out_path=""
) -> SweepResult:
    """Cenário de cold-start: a métrica de interesse é test_auc."""
    return sweep(data, kg, hp, "train_ratio", ratios, seeds, out_path)
