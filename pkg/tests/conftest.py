import os
from typing import Iterable, Tuple

import numpy as np
import scipy.sparse as sp
from pytest import fixture

from modules.data.interactions import build_dataset
from modules.data.synthetic import POSITIVE_THRESHOLD, SyntheticSpec, gen_synthetic
from modules.kg.store import KnowledgeGraph, load_kg
from modules.model.scoring import UserAdjacency
from modules.training.config import HyperParams

SMALL_SYNTHETIC = dict(
    entities=300,
    items=60,
    relations=4,
    users=30,
    hubs=16,
    hubs_per_item=2,
    liked_hubs=2,
    background_edges=300,
    positives_per_user=8,
    low_ratings_per_user=2,
)


def adjacency(n: int, edges: Iterable[Tuple[int, int, float]]) -> UserAdjacency:
    """Adjacência simétrica a partir de (i, j, peso)."""
    rows, cols, data = [], [], []
    for i, j, w in edges:
        rows += [i, j]
        cols += [j, i]
        data += [w, w]
    return UserAdjacency.from_matrix(sp.coo_matrix((data, (rows, cols)), shape=(n, n)))


def random_connected_adjacency(rng: np.random.Generator, n: int, extra: int = 0) -> UserAdjacency:
    """Árvore aleatória mais `extra` arestas, pesos em (0.1, 2)."""
    edges = {}
    for node in range(1, n):
        edges[(int(rng.integers(node)), node)] = rng.uniform(0.1, 2.0)
    for _ in range(extra):
        a, b = sorted(rng.choice(n, size=2, replace=False).tolist())
        edges.setdefault((a, b), rng.uniform(0.1, 2.0))
    return adjacency(n, [(a, b, w) for (a, b), w in edges.items()])


def write_lines(path, lines) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write("".join(f"{line}\n" for line in lines))
    return str(path)


@fixture
def path_adjacency():
    "v1(item) - e2 - e3 - v4(item), pesos uniformes."
    return adjacency(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])


@fixture
def toy_kg():
    "Grafo pequeno e conexo: 10 entidades, 4 itens, 3 relações."
    edges = [
        (0, 4, 0), (1, 4, 1), (1, 5, 2), (2, 5, 0), (2, 6, 1),
        (3, 6, 2), (4, 7, 0), (5, 8, 1), (6, 9, 2), (7, 8, 0), (8, 9, 1),
    ]
    return KnowledgeGraph.from_edges(10, edges, item_entities=[0, 1, 2, 3], relation_count=3)


@fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic")
    gen_synthetic(SyntheticSpec(seed=3, strength=1.0, **SMALL_SYNTHETIC), str(out))
    return str(out)


@fixture(scope="session")
def synthetic_data(synthetic_dir):
    kg = load_kg(os.path.join(synthetic_dir, "kg.tsv"), os.path.join(synthetic_dir, "item_map.tsv"))
    _, matrix, data = build_dataset(
        os.path.join(synthetic_dir, "ratings.tsv"), kg.item_index(), POSITIVE_THRESHOLD, seed=0
    )
    return kg, matrix, data


@fixture
def small_hp():
    return HyperParams(sample_size=4, dim=8, layers=1, ls_weight=0.5, l2_weight=1e-5,
                       learning_rate=1e-2, batch_size=64, epochs=2, seed=0)


@fixture(scope="session")
def planted_data(tmp_path_factory):
    "Conjunto padrão de config/synthetic.yaml: 2000 entidades, 300 itens, 100 usuários."
    out = str(tmp_path_factory.mktemp("planted"))
    files = gen_synthetic(SyntheticSpec(), out)
    kg = load_kg(files.triples, files.item_map)
    _, matrix, data = build_dataset(files.ratings, kg.item_index(), POSITIVE_THRESHOLD, seed=0)
    return kg, matrix, data
