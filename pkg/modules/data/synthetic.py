"""
Gerador de conjuntos sintéticos com suavidade de rótulos planejada.

O grafo tem três tipos de entidade: itens, hubs (cada hub tem um tipo de
relação) e entidades de fundo. Cada item se liga a alguns hubs pela relação
do hub. Cada usuário prefere um tipo de relação e alguns hubs desse tipo;
com probabilidade `strength`, um positivo vem dos itens ligados a esses hubs,
senão de um item qualquer. strength=0 gera rótulos independentes do grafo.
"""

import os
from dataclasses import dataclass
from typing import List, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from tools.logger import get_logger
from tools.tsv import write_tsv

log = get_logger(__name__)

POSITIVE_RATING = 5
LOW_RATING = 1
POSITIVE_THRESHOLD = 4.0


class SyntheticSpec(BaseModel):
    entities: int = Field(2000, ge=2)
    items: int = Field(300, ge=2)
    relations: int = Field(6, ge=1)
    users: int = Field(100, ge=1)
    strength: float = Field(1.0, ge=0.0, le=1.0)
    seed: int = 0
    hubs: int = Field(60, ge=1)
    hubs_per_item: int = Field(2, ge=1)
    liked_hubs: int = Field(3, ge=1)
    background_edges: int = Field(3000, ge=0)
    positives_per_user: int = Field(20, ge=1)
    low_ratings_per_user: int = Field(3, ge=0)

    @model_validator(mode="after")
    def _feasible(self) -> "SyntheticSpec":
        if self.items + self.hubs > self.entities:
            raise ValueError(f"itens ({self.items}) + hubs ({self.hubs}) excedem as entidades ({self.entities})")
        if self.hubs_per_item > self.hubs:
            raise ValueError("hubs_per_item maior que o número de hubs")
        if self.positives_per_user + self.low_ratings_per_user > self.items:
            raise ValueError("avaliações por usuário excedem o catálogo")
        return self


@dataclass(frozen=True)
class SyntheticFiles:
    triples: str
    item_map: str
    ratings: str


def _graph(spec: SyntheticSpec, rng: np.random.Generator) -> Tuple[List[Tuple[int, int, int]], np.ndarray, List[np.ndarray]]:
    hub_ids = np.arange(spec.items, spec.items + spec.hubs)
    hub_kind = np.arange(spec.hubs) % spec.relations
    edges: List[Tuple[int, int, int]] = []
    item_hubs: List[np.ndarray] = []
    seen: Set[Tuple[int, int]] = set()

    def add(head: int, tail: int, relation: int) -> None:
        key = (min(head, tail), max(head, tail))
        if head != tail and key not in seen:
            seen.add(key)
            edges.append((head, tail, relation))

    for item in range(spec.items):
        chosen = rng.choice(spec.hubs, size=spec.hubs_per_item, replace=False)
        item_hubs.append(np.sort(chosen))
        for hub in chosen.tolist():
            add(item, int(hub_ids[hub]), int(hub_kind[hub]))

    # fundo: entidades não-item ligadas a hubs ou entre si
    non_items = np.arange(spec.items, spec.entities)
    if len(non_items) >= 2:
        for _ in range(spec.background_edges):
            head, tail = rng.choice(non_items, size=2, replace=False).tolist()
            add(int(head), int(tail), int(rng.integers(spec.relations)))
    return edges, hub_kind, item_hubs


def _ratings(
    spec: SyntheticSpec,
    hub_kind: np.ndarray,
    item_hubs: List[np.ndarray],
    rng: np.random.Generator,
) -> List[Tuple[int, int, int]]:
    items_by_hub: List[List[int]] = [[] for _ in range(spec.hubs)]
    for item, hubs in enumerate(item_hubs):
        for hub in hubs.tolist():
            items_by_hub[hub].append(item)

    ratings = []
    for user in range(spec.users):
        kind = int(rng.integers(spec.relations))
        candidates = np.flatnonzero(hub_kind == kind)
        liked = rng.choice(candidates, size=min(spec.liked_hubs, len(candidates)), replace=False)
        pool = sorted({item for hub in liked.tolist() for item in items_by_hub[hub]})

        chosen: List[int] = []
        taken: Set[int] = set()
        for _ in range(spec.positives_per_user):
            available = [item for item in pool if item not in taken]
            # com strength 0 nenhuma escolha consulta o grafo
            if spec.strength > 0 and available and rng.random() < spec.strength:
                item = int(available[rng.integers(len(available))])
            else:
                rest = np.setdiff1d(np.arange(spec.items), np.fromiter(taken, dtype=np.int64, count=len(taken)))
                item = int(rest[rng.integers(len(rest))])
            taken.add(item)
            chosen.append(item)
        ratings.extend((user, item, POSITIVE_RATING) for item in chosen)

        rest = np.setdiff1d(np.arange(spec.items), np.asarray(chosen, dtype=np.int64))
        for item in rng.choice(rest, size=spec.low_ratings_per_user, replace=False).tolist():
            ratings.append((user, int(item), LOW_RATING))
    return ratings


def gen_synthetic(spec: SyntheticSpec, out_dir: str) -> SyntheticFiles:
    """Escreve kg.tsv, item_map.tsv e ratings.tsv em out_dir; mesma seed, mesmos arquivos."""
    rng = np.random.default_rng(spec.seed)
    edges, hub_kind, item_hubs = _graph(spec, rng)
    ratings = _ratings(spec, hub_kind, item_hubs, rng)

    os.makedirs(out_dir, exist_ok=True)
    files = SyntheticFiles(
        triples=os.path.join(out_dir, "kg.tsv"),
        item_map=os.path.join(out_dir, "item_map.tsv"),
        ratings=os.path.join(out_dir, "ratings.tsv"),
    )
    write_tsv(files.triples, ((f"e{h}", f"r{r}", f"e{t}") for h, t, r in edges))
    write_tsv(files.item_map, ((f"i{item}", f"e{item}") for item in range(spec.items)))
    write_tsv(files.ratings, ((f"u{u}", f"i{item}", rating) for u, item, rating in ratings))
    log.info(
        f"✅ Dados sintéticos em {out_dir}: {spec.entities} entidades, {len(edges)} arestas, "
        f"{spec.items} itens, {len(ratings)} avaliações (strength={spec.strength})"
    )
    return files
