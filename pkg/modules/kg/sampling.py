from typing import List, Optional, Tuple

import numpy as np

from modules.errors import ContractViolation
from modules.kg.store import KnowledgeGraph

# relação sentinela para entidades isoladas (vizinho = a própria entidade)
SELF_RELATION = -1


def sample_neighbor_arrays(
    kg: KnowledgeGraph,
    entity: int,
    sample_size: Optional[int],
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Amostra vizinhos de `entity` como arrays (neighbors, relations).

    sample_size=None devolve a vizinhança completa (modo exaustivo). Com
    grau < S a amostragem é uniforme com reposição; com grau >= S, sem reposição.
    """
    neighbors, relations = kg.neighbor_arrays(entity)
    if sample_size is None:
        return neighbors.copy(), relations.copy()
    if sample_size < 1:
        raise ContractViolation(f"S deve ser >= 1 (recebido {sample_size})")

    degree = len(neighbors)
    if degree == 0:
        return (
            np.full(sample_size, entity, dtype=np.int64),
            np.full(sample_size, SELF_RELATION, dtype=np.int64),
        )
    if degree < sample_size:
        picks = rng.integers(0, degree, size=sample_size)
    else:
        picks = rng.choice(degree, size=sample_size, replace=False)
    return neighbors[picks], relations[picks]


def sample_neighbors(
    kg: KnowledgeGraph,
    entity: int,
    sample_size: int,
    rng: np.random.Generator,
) -> List[Tuple[int, int]]:
    """Lista de exatamente S pares (vizinho, relação)."""
    neighbors, relations = sample_neighbor_arrays(kg, entity, sample_size, rng)
    return list(zip(neighbors.tolist(), relations.tolist()))
