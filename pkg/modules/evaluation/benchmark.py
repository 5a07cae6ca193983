import time
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from modules.data.interactions import Split
from modules.errors import ContractViolation
from modules.kg.store import KnowledgeGraph
from modules.model.params import ModelParams
from modules.training.adam import AdamState, adam_step
from modules.training.config import HyperParams
from modules.training.loss import unified_loss
from tools.logger import get_logger
from tools.tsv import write_csv

log = get_logger(__name__)

BENCHMARK_HEADER = ["multiplier", "seconds_per_epoch"]


@dataclass(frozen=True)
class BenchmarkPoint:
    multiplier: int
    seconds_per_epoch: float
    edges: int


def multiply_edges(kg: KnowledgeGraph, multiplier: int, rng: np.random.Generator) -> KnowledgeGraph:
    """Grafo com multiplier x as triplas: novas arestas aleatórias entre entidades existentes."""
    if multiplier < 1:
        raise ContractViolation(f"multiplicador deve ser >= 1 (recebido {multiplier})")
    target = kg.edge_count * multiplier
    n = kg.entity_count
    if target > n * (n - 1) // 2:
        raise ContractViolation(f"o grafo não comporta {target} arestas entre {n} entidades")

    seen = set(map(tuple, np.sort(kg.edges[:, :2], axis=1).tolist()))
    added = []
    while len(seen) < target:
        heads = rng.integers(n, size=target - len(seen))
        tails = rng.integers(n, size=len(heads))
        relations = rng.integers(max(kg.relation_count, 1), size=len(heads))
        for head, tail, relation in zip(heads.tolist(), tails.tolist(), relations.tolist()):
            key = (min(head, tail), max(head, tail))
            if head == tail or key in seen:
                continue
            seen.add(key)
            added.append((head, tail, relation))

    return KnowledgeGraph.from_edges(
        n,
        kg.edges.tolist() + added,
        kg.item_entities,
        relation_count=max(kg.relation_count, 1),
        entity_tokens=kg.entity_tokens,
        relation_tokens=kg.relation_tokens,
        item_tokens=kg.item_tokens,
    )


def time_epoch(kg: KnowledgeGraph, data: Split, hp: HyperParams, steps: int) -> float:
    """Tempo de parede de `steps` minilotes (perda, gradientes e passo do Adam)."""
    rng = np.random.default_rng(hp.seed)
    params = ModelParams.initialize(
        data.train.user_count, kg.relation_count, kg.entity_count, hp.dim, hp.layers, rng
    )
    adam = AdamState.for_params(params)
    known = data.train.labels_by_user()
    order = rng.permutation(len(data.train))

    started = time.perf_counter()
    for step in range(steps):
        begin = (step * hp.batch_size) % max(len(order), 1)
        batch = data.train.select(order[begin : begin + hp.batch_size])
        _, grads, _ = unified_loss(batch, params, hp, kg, known, rng)
        adam_step(params, grads, adam, hp.learning_rate)
    return time.perf_counter() - started


def benchmark_scalability(
    kg: KnowledgeGraph,
    data: Split,
    hp: HyperParams,
    multipliers: Sequence[int] = (1, 2, 3, 4, 5),
    steps: int = 20,
    repeats: int = 3,
    out_path: str = "",
) -> List[BenchmarkPoint]:
    """
    Para cada multiplicador, o mesmo cronograma de lotes sobre o grafo
    ampliado; reporta a mediana de `repeats` medições.
    """
    if steps < 1 or repeats < 1:
        raise ContractViolation("steps e repeats devem ser >= 1")
    points = []
    for multiplier in multipliers:
        scaled = multiply_edges(kg, multiplier, np.random.default_rng([hp.seed, multiplier]))
        seconds = float(np.median([time_epoch(scaled, data, hp, steps) for _ in range(repeats)]))
        points.append(BenchmarkPoint(multiplier, seconds, scaled.edge_count))
        log.info(f"⏱️  {multiplier}x ({scaled.edge_count} arestas): {seconds:.3f}s por época")

    if out_path:
        write_csv(out_path, BENCHMARK_HEADER, [(p.multiplier, p.seconds_per_epoch) for p in points])
    return points
