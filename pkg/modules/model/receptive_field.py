from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.errors import ContractViolation
from modules.kg.sampling import SELF_RELATION, sample_neighbor_arrays
from modules.kg.store import KnowledgeGraph


@dataclass(frozen=True, eq=False)
class ReceptiveField:
    """
    Vizinhança amostrada de profundidade L dos itens de um lote.

    As entidades locais seguem a ordem de descoberta em largura, então o
    conjunto da camada k é o prefixo entities[:layer_sizes[k]]. Arestas de
    agregação saem apenas das entidades expandidas (camadas 0..L-1); toda
    entidade local tem ainda sua lista de graus amostrada (degree_*), usada
    para D_u sem expandir a fronteira.
    """

    entities: np.ndarray
    batch: np.ndarray
    layer_sizes: Tuple[int, ...]
    edge_rows: np.ndarray
    edge_cols: np.ndarray
    edge_relations: np.ndarray
    degree_rows: np.ndarray
    degree_relations: np.ndarray

    @property
    def size(self) -> int:
        return len(self.entities)

    @property
    def depth(self) -> int:
        return len(self.layer_sizes) - 1

    def layer(self, k: int) -> np.ndarray:
        return self.entities[: self.layer_sizes[k]]

    @classmethod
    def build(
        cls,
        kg: KnowledgeGraph,
        batch_entities: Sequence[int],
        depth: int,
        sample_size: Optional[int],
        rng: np.random.Generator,
    ) -> "ReceptiveField":
        if depth < 1:
            raise ContractViolation(f"L deve ser >= 1 (recebido {depth})")

        index: Dict[int, int] = {}
        entities: List[int] = []

        def local(entity: int) -> int:
            if entity not in index:
                index[entity] = len(entities)
                entities.append(entity)
            return index[entity]

        batch = np.asarray([local(int(e)) for e in batch_entities], dtype=np.int64)
        layer_sizes = [len(entities)]

        edge_rows: List[np.ndarray] = []
        edge_cols: List[np.ndarray] = []
        edge_relations: List[np.ndarray] = []
        degree_rows: List[np.ndarray] = []
        degree_relations: List[np.ndarray] = []

        start = 0
        for _ in range(depth):
            end = len(entities)
            for i in range(start, end):
                neighbors, relations = _unique_neighbors(kg, entities[i], sample_size, rng)
                cols = np.asarray([local(n) for n in neighbors.tolist()], dtype=np.int64)
                edge_rows.append(np.full(len(cols), i, dtype=np.int64))
                edge_cols.append(cols)
                edge_relations.append(relations)
                degree_rows.append(np.full(len(cols), i, dtype=np.int64))
                degree_relations.append(relations)
            start = end
            layer_sizes.append(len(entities))

        # fronteira: só a lista de graus
        for i in range(start, len(entities)):
            _, relations = _unique_neighbors(kg, entities[i], sample_size, rng)
            degree_rows.append(np.full(len(relations), i, dtype=np.int64))
            degree_relations.append(relations)

        return cls(
            entities=np.asarray(entities, dtype=np.int64),
            batch=batch,
            layer_sizes=tuple(layer_sizes),
            edge_rows=_concat(edge_rows),
            edge_cols=_concat(edge_cols),
            edge_relations=_concat(edge_relations),
            degree_rows=_concat(degree_rows),
            degree_relations=_concat(degree_relations),
        )


def _unique_neighbors(
    kg: KnowledgeGraph,
    entity: int,
    sample_size: Optional[int],
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    neighbors, relations = sample_neighbor_arrays(kg, entity, sample_size, rng)
    keep = relations != SELF_RELATION
    neighbors, relations = neighbors[keep], relations[keep]
    _, first = np.unique(neighbors, return_index=True)
    first.sort()
    return neighbors[first], relations[first]


def _concat(chunks: List[np.ndarray]) -> np.ndarray:
    if not chunks:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64)
