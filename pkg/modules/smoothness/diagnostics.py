from dataclasses import dataclass
from typing import List, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from modules.errors import ContractViolation
from modules.kg.store import KnowledgeGraph
from modules.model.scoring import UserAdjacency, build_transition, build_user_adjacency
from modules.smoothness.propagation import (
    LabelVector,
    PartitionedTransition,
    convergence_rate,
    harmonic_labels,
    propagate_to_convergence,
    verify_harmonic,
)
from tools.logger import get_logger
from tools.tsv import write_csv

log = get_logger(__name__)


@dataclass(eq=False)
class UserPropagation:
    """l* de um usuário sobre os componentes do grafo que contêm itens rotulados."""

    entities: np.ndarray
    labels: LabelVector
    residual: float
    epsilon: float
    rate: float
    iterations: int

    def rows(self, kg: KnowledgeGraph) -> List[tuple]:
        tokens = kg.entity_tokens
        return [
            (tokens[e] if tokens else e, float(value))
            for e, value in zip(self.entities.tolist(), self.labels.values.tolist())
        ]

    def save(self, path: str, kg: KnowledgeGraph) -> None:
        write_csv(path, ["entity", "label"], self.rows(kg))


def propagate_user(
    kg: KnowledgeGraph,
    user_vector: np.ndarray,
    relation_embeddings: np.ndarray,
    item_labels: Mapping[int, int],
    iterative: bool = False,
    tol: float = 1e-10,
) -> UserPropagation:
    """
    Propaga os rótulos conhecidos do usuário sobre A_u (sem self-loops).
    Componentes sem item rotulado ficam de fora, já que ali l* não é definido.
    """
    if not item_labels:
        raise ContractViolation("usuário sem itens rotulados")
    adjacency = build_user_adjacency(kg, user_vector, relation_embeddings, add_self_loops=False)
    clamped_entities = kg.item_entities[np.asarray(sorted(item_labels), dtype=np.int64)]
    values = np.asarray([item_labels[item] for item in sorted(item_labels)], dtype=float)
    # itens isolados não influenciam ninguém
    connected = adjacency.degrees[clamped_entities] > 0
    if not connected.any():
        raise ContractViolation("nenhum item rotulado do usuário tem arestas no grafo")
    clamped_entities, values = clamped_entities[connected], values[connected]

    _, components = connected_components(adjacency.matrix, directed=False)
    keep = np.flatnonzero(np.isin(components, np.unique(components[clamped_entities])))
    sub = UserAdjacency.from_matrix(sp.csr_matrix(adjacency.matrix)[keep][:, keep], self_loops=False)

    local = np.searchsorted(keep, clamped_entities)
    order = np.argsort(local)
    mask = np.zeros(len(keep), dtype=bool)
    mask[local] = True
    clamp_values = values[order]

    exact = harmonic_labels(sub, mask, clamp_values)
    P = PartitionedTransition.from_transition(build_transition(sub), mask)
    initial = LabelVector.initial(len(keep), local[order], clamp_values)
    report = convergence_rate(initial, P, clamp_values, exact.values)

    labels, iterations = exact, 0
    if iterative:
        result = propagate_to_convergence(initial, P, clamp_values, tol=tol)
        labels, iterations = result.labels, result.iterations

    residual = verify_harmonic(labels, sub)
    log.info(
        f"Propagação: {len(keep)} entidades, {int(mask.sum())} itens fixados, resíduo harmônico {residual:.3e}, "
        f"taxa {report.rate:.4f} (ε={report.epsilon:.4f})"
    )
    return UserPropagation(keep, labels, residual, report.epsilon, report.rate, iterations)
