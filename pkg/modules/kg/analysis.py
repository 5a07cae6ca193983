from dataclasses import dataclass
from typing import Dict, List, Set, Tuple

import numpy as np

from modules.data.interactions import InteractionMatrix
from modules.errors import ContractViolation, DataValidationError
from modules.kg.store import KnowledgeGraph
from tools.tsv import write_csv

UNREACHABLE = -1
DEFAULT_CAP = 8


def shortest_path_distance(kg: KnowledgeGraph, a: int, b: int, cap: int = DEFAULT_CAP) -> int:
    """Distância em saltos (BFS, ignorando tipos de relação); UNREACHABLE além de `cap`."""
    if cap < 1:
        raise ContractViolation(f"cap deve ser >= 1 (recebido {cap})")
    for entity in (a, b):
        if not 0 <= entity < kg.entity_count:
            raise ContractViolation(f"entidade inválida: {entity}")
    if a == b:
        return 0

    visited = {a}
    frontier = [a]
    for depth in range(1, cap + 1):
        next_frontier = []
        for entity in frontier:
            for neighbor in kg.neighbors[kg.indptr[entity] : kg.indptr[entity + 1]].tolist():
                if neighbor == b:
                    return depth
                if neighbor not in visited:
                    visited.add(neighbor)
                    next_frontier.append(neighbor)
        if not next_frontier:
            break
        frontier = next_frontier
    return UNREACHABLE


@dataclass(frozen=True)
class ProximityStudy:
    """Histogramas de distância; o último bucket conta os pares inalcançáveis."""

    cap: int
    common: np.ndarray
    no_common: np.ndarray

    def probabilities(self, group: str) -> np.ndarray:
        counts = self.common if group == "common" else self.no_common
        total = counts.sum()
        return counts / total if total else counts.astype(float)

    def mean_distance(self, group: str) -> float:
        """Distância média, contando inalcançáveis como cap + 1."""
        counts = self.common if group == "common" else self.no_common
        distances = np.arange(len(counts), dtype=float)
        return float((counts * distances).sum() / counts.sum())

    def rows(self) -> List[Tuple[str, str, float]]:
        rows = []
        for group in ("common", "no_common"):
            for distance, probability in enumerate(self.probabilities(group).tolist()):
                label = str(distance) if distance <= self.cap else "inf"
                rows.append((group, label, probability))
        return rows

    def save(self, path: str) -> None:
        write_csv(path, ["group", "distance", "probability"], self.rows())


def proximity_study(
    kg: KnowledgeGraph,
    interactions: InteractionMatrix,
    n_pairs: int,
    rng: np.random.Generator,
    cap: int = DEFAULT_CAP,
    max_attempts_factor: int = 100,
) -> ProximityStudy:
    """
    Compara a distância no grafo entre pares de itens com usuário em comum e
    pares sem nenhum usuário em comum (n_pairs de cada grupo).
    """
    if n_pairs < 1:
        raise ContractViolation(f"n_pairs deve ser >= 1 (recebido {n_pairs})")

    positives = interactions.positives_by_user()
    eligible = [items for items in positives.values() if len(items) >= 2]
    if not eligible:
        raise DataValidationError("nenhum usuário com dois ou mais itens positivos")

    item_users: Dict[int, Set[int]] = {}
    for user, items in positives.items():
        for item in items.tolist():
            item_users.setdefault(item, set()).add(user)
    catalog = np.asarray(sorted(item_users), dtype=np.int64)

    common = np.zeros(cap + 2, dtype=np.int64)
    no_common = np.zeros(cap + 2, dtype=np.int64)

    def record(histogram: np.ndarray, item_a: int, item_b: int) -> None:
        distance = shortest_path_distance(
            kg, int(kg.item_entities[item_a]), int(kg.item_entities[item_b]), cap
        )
        histogram[cap + 1 if distance == UNREACHABLE else distance] += 1

    for _ in range(n_pairs):
        items = eligible[rng.integers(len(eligible))]
        item_a, item_b = rng.choice(items, size=2, replace=False)
        record(common, int(item_a), int(item_b))

    attempts = 0
    while no_common.sum() < n_pairs:
        attempts += 1
        if attempts > max_attempts_factor * n_pairs or len(catalog) < 2:
            raise DataValidationError("não foi possível amostrar pares sem usuário em comum")
        item_a, item_b = rng.choice(catalog, size=2, replace=False)
        if item_users[int(item_a)] & item_users[int(item_b)]:
            continue
        record(no_common, int(item_a), int(item_b))

    return ProximityStudy(cap=cap, common=common, no_common=no_common)
