from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from modules.errors import DataValidationError
from tools.logger import get_logger
from tools.tsv import read_tsv

log = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """
    Grafo de conhecimento imutável, tratado como não direcionado.

    A adjacência é guardada em CSR (indptr/neighbors/relations): cada aresta
    aparece na lista das duas pontas com a mesma relação. Itens são um
    subconjunto das entidades (item_entities[item] -> entidade).
    """

    entity_count: int
    relation_count: int
    indptr: np.ndarray
    neighbors: np.ndarray
    relations: np.ndarray
    edges: np.ndarray  # (m, 3): head, tail, relation, na ordem de ingestão
    item_entities: np.ndarray
    entity_tokens: Tuple[str, ...] = ()
    relation_tokens: Tuple[str, ...] = ()
    item_tokens: Tuple[str, ...] = ()
    entity_items: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entity_items = np.full(self.entity_count, -1, dtype=np.int64)
        entity_items[self.item_entities] = np.arange(len(self.item_entities), dtype=np.int64)
        object.__setattr__(self, "entity_items", entity_items)
        for name in ("indptr", "neighbors", "relations", "edges", "item_entities"):
            getattr(self, name).setflags(write=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.entity_count == other.entity_count
            and self.relation_count == other.relation_count
            and self.entity_tokens == other.entity_tokens
            and self.relation_tokens == other.relation_tokens
            and self.item_tokens == other.item_tokens
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("indptr", "neighbors", "relations", "edges", "item_entities")
            )
        )

    __hash__ = None

    @classmethod
    def from_edges(
        cls,
        entity_count: int,
        edges: Sequence[Tuple[int, int, int]],
        item_entities: Sequence[int],
        relation_count: Optional[int] = None,
        entity_tokens: Sequence[str] = (),
        relation_tokens: Sequence[str] = (),
        item_tokens: Sequence[str] = (),
    ) -> "KnowledgeGraph":
        """Monta o grafo a partir de arestas (head, tail, relation) já deduplicadas ou não."""
        kept: List[Tuple[int, int, int]] = []
        seen = set()
        for head, tail, relation in edges:
            head, tail, relation = int(head), int(tail), int(relation)
            if head == tail:
                continue
            key = (min(head, tail), max(head, tail))
            if key in seen:
                continue
            seen.add(key)
            kept.append((head, tail, relation))

        edge_array = np.asarray(kept, dtype=np.int64).reshape(-1, 3)
        if relation_count is None:
            relation_count = int(edge_array[:, 2].max()) + 1 if len(edge_array) else 0

        items = np.asarray(item_entities, dtype=np.int64)
        if len(items) and (items.min() < 0 or items.max() >= entity_count):
            raise DataValidationError("item mapeado para entidade inexistente")
        if len(np.unique(items)) != len(items):
            raise DataValidationError("duas entradas de item apontam para a mesma entidade")
        if len(edge_array) and (edge_array[:, :2].max() >= entity_count or edge_array.min() < 0):
            raise DataValidationError("aresta referencia entidade fora do intervalo")
        if len(edge_array) and edge_array[:, 2].max() >= relation_count:
            raise DataValidationError("aresta referencia relação fora do intervalo")

        indptr, neighbors, relations = _build_csr(entity_count, edge_array)
        return cls(
            entity_count=int(entity_count),
            relation_count=int(relation_count),
            indptr=indptr,
            neighbors=neighbors,
            relations=relations,
            edges=edge_array,
            item_entities=items,
            entity_tokens=tuple(entity_tokens),
            relation_tokens=tuple(relation_tokens),
            item_tokens=tuple(item_tokens),
        )

    @property
    def item_count(self) -> int:
        return len(self.item_entities)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, entity: int) -> int:
        return int(self.indptr[entity + 1] - self.indptr[entity])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors_of(self, entity: int) -> List[Tuple[int, int]]:
        start, end = self.indptr[entity], self.indptr[entity + 1]
        return list(zip(self.neighbors[start:end].tolist(), self.relations[start:end].tolist()))

    def neighbor_arrays(self, entity: int) -> Tuple[np.ndarray, np.ndarray]:
        start, end = self.indptr[entity], self.indptr[entity + 1]
        return self.neighbors[start:end], self.relations[start:end]

    def item_index(self) -> Dict[str, int]:
        return {token: i for i, token in enumerate(self.item_tokens)}

    def stats(self) -> Dict[str, int]:
        degrees = self.degrees()
        return {
            "entities": self.entity_count,
            "items": self.item_count,
            "relations": self.relation_count,
            "edges": self.edge_count,
            "isolated_entities": int((degrees == 0).sum()),
            "max_degree": int(degrees.max()) if len(degrees) else 0,
        }


def _build_csr(entity_count: int, edges: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(edges) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return np.zeros(entity_count + 1, dtype=np.int64), empty, empty.copy()

    # cada aresta entra nas duas direções; a ordenação estável preserva a ordem de ingestão
    sources = np.concatenate([edges[:, 0], edges[:, 1]])
    targets = np.concatenate([edges[:, 1], edges[:, 0]])
    relations = np.concatenate([edges[:, 2], edges[:, 2]])
    order = np.concatenate(
        [np.arange(len(edges)) * 2, np.arange(len(edges)) * 2 + 1]
    )
    perm = np.lexsort((order, sources))

    counts = np.bincount(sources, minlength=entity_count)
    indptr = np.zeros(entity_count + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, targets[perm].astype(np.int64), relations[perm].astype(np.int64)


def load_kg(
    triples_path: str,
    item_map_path: str,
    allow_isolated_items: Optional[bool] = None,
) -> KnowledgeGraph:
    """
    Carrega o grafo a partir do TSV de triplas (head, relation, tail) e do
    mapa de itens (item_token, entity_token).

    Tokens são internados em ordem de primeira aparição. Quando (h, r1, t) e
    (t, r2, h) aparecem, vale a primeira relação vista. Itens cujo token
    aparece com mais de uma entidade são excluídos.

    allow_isolated_items=None aceita entidades desconhecidas no mapa de itens
    apenas quando o arquivo de triplas está vazio (catálogo sem grafo).
    """
    entity_ids: Dict[str, int] = {}
    relation_ids: Dict[str, int] = {}
    edges: List[Tuple[int, int, int]] = []
    seen_pairs = set()
    self_edges = 0
    duplicates = 0

    def intern(table: Dict[str, int], token: str) -> int:
        if token not in table:
            table[token] = len(table)
        return table[token]

    for _, (head_token, relation_token, tail_token) in read_tsv(triples_path, 3):
        head = intern(entity_ids, head_token)
        tail = intern(entity_ids, tail_token)
        if head == tail:
            self_edges += 1
            continue
        key = (min(head, tail), max(head, tail))
        if key in seen_pairs:
            duplicates += 1
            continue
        seen_pairs.add(key)
        # relação só existe se alguma tripla mantida a usa
        edges.append((head, tail, intern(relation_ids, relation_token)))

    if allow_isolated_items is None:
        allow_isolated_items = not entity_ids

    mapped: Dict[str, str] = {}
    ambiguous = set()
    for line_no, (item_token, entity_token) in read_tsv(item_map_path, 2):
        if item_token in mapped and mapped[item_token] != entity_token:
            ambiguous.add(item_token)
            continue
        if entity_token not in entity_ids:
            if not allow_isolated_items:
                raise DataValidationError(
                    f"{item_map_path}:{line_no}: item '{item_token}' aponta para entidade desconhecida '{entity_token}'"
                )
            intern(entity_ids, entity_token)
        mapped.setdefault(item_token, entity_token)

    if ambiguous:
        log.warning(f"⚠️  {len(ambiguous)} itens com múltiplas entidades foram excluídos")

    item_tokens = [token for token in mapped if token not in ambiguous]
    item_entities = [entity_ids[mapped[token]] for token in item_tokens]

    if self_edges or duplicates:
        log.info(f"Triplas descartadas: {self_edges} auto-arestas, {duplicates} pares repetidos")

    kg = KnowledgeGraph.from_edges(
        entity_count=len(entity_ids),
        edges=edges,
        item_entities=item_entities,
        relation_count=len(relation_ids),
        entity_tokens=list(entity_ids),
        relation_tokens=list(relation_ids),
        item_tokens=item_tokens,
    )
    log.info(
        f"✅ Grafo carregado: {kg.entity_count} entidades, {kg.edge_count} arestas, "
        f"{kg.relation_count} relações, {kg.item_count} itens"
    )
    return kg
