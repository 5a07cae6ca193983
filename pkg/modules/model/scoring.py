"""
Pontuação de relações por usuário, s_u(r) = <u, r>, e as matrizes de
adjacência ponderadas derivadas dela.

Os escores brutos podem ser negativos; os pesos das arestas passam por
softplus para que D_u^{-1/2} exista e os graus fiquem positivos.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from modules.errors import ContractViolation, DimensionError
from modules.kg.store import KnowledgeGraph
from modules.model.receptive_field import ReceptiveField

SELF_LOOP_WEIGHT = 1.0


def relation_score(user: np.ndarray, relation: np.ndarray) -> float:
    if user.shape != relation.shape:
        raise DimensionError(f"dimensões diferentes: usuário {user.shape}, relação {relation.shape}")
    return float(np.dot(user, relation))


def relation_scores(user: np.ndarray, relations: np.ndarray) -> np.ndarray:
    """Escores de todas as relações de uma vez (linha i = relação i)."""
    if relations.ndim != 2 or relations.shape[1] != user.shape[0]:
        raise DimensionError(f"dimensões diferentes: usuário {user.shape}, relações {relations.shape}")
    return relations @ user


def edge_weight(raw_score):
    """softplus(x) = ln(1 + e^x), estável para |x| grande."""
    return np.logaddexp(0.0, raw_score)


def edge_weight_grad(raw_score):
    return expit(raw_score)


def score_backward(
    grad_weights: np.ndarray,
    raw_scores: np.ndarray,
    relations: np.ndarray,
    user: np.ndarray,
    relation_embeddings: np.ndarray,
    grad_relations: np.ndarray,
) -> np.ndarray:
    """
    Propaga dL/dw (w = softplus(<u, r>)) para u e para as relações.
    Acumula em grad_relations e devolve dL/du.
    """
    grad_scores = grad_weights * edge_weight_grad(raw_scores)
    np.add.at(grad_relations, relations, np.outer(grad_scores, user))
    return grad_scores @ relation_embeddings[relations]


@dataclass(frozen=True, eq=False)
class UserAdjacency:
    """A_u esparsa e simétrica, com o vetor de graus D_u."""

    matrix: sp.csr_matrix
    degrees: np.ndarray
    self_loops: bool

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix, self_loops: bool = False) -> "UserAdjacency":
        matrix = sp.csr_matrix(matrix, dtype=float)
        if self_loops:
            matrix = (matrix + SELF_LOOP_WEIGHT * sp.identity(matrix.shape[0], format="csr")).tocsr()
        degrees = np.asarray(matrix.sum(axis=1)).ravel()
        return cls(matrix=matrix, degrees=degrees, self_loops=self_loops)

    def with_self_loops(self) -> "UserAdjacency":
        if self.self_loops:
            return self
        return UserAdjacency.from_matrix(self.matrix, self_loops=True)


def build_user_adjacency(
    kg: KnowledgeGraph,
    user: np.ndarray,
    relation_embeddings: np.ndarray,
    add_self_loops: bool = True,
) -> UserAdjacency:
    """A_u sobre todas as entidades; cada aresta não direcionada tem o peso calculado uma única vez."""
    if kg.relation_count and relation_embeddings.shape[0] < kg.relation_count:
        raise ContractViolation("há relações no grafo sem embedding")

    weights = edge_weight(relation_scores(user, relation_embeddings))[kg.edges[:, 2]]
    heads, tails = kg.edges[:, 0], kg.edges[:, 1]
    n = kg.entity_count
    matrix = sp.coo_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([heads, tails]), np.concatenate([tails, heads]))),
        shape=(n, n),
    )
    return UserAdjacency.from_matrix(matrix, self_loops=add_self_loops)


def _require_positive_degrees(adj: UserAdjacency) -> None:
    if np.any(adj.degrees <= 0):
        zero = np.flatnonzero(adj.degrees <= 0)
        raise ContractViolation(f"grau zero nas entidades {zero[:10].tolist()} (faltam self-loops?)")


def normalize_symmetric(adj: UserAdjacency) -> sp.csr_matrix:
    """D^{-1/2} A D^{-1/2}."""
    _require_positive_degrees(adj)
    scale = sp.diags(1.0 / np.sqrt(adj.degrees))
    return (scale @ adj.matrix @ scale).tocsr()


def build_transition(adj: UserAdjacency) -> sp.csr_matrix:
    """P = D^{-1} A, estocástica por linhas."""
    _require_positive_degrees(adj)
    return (sp.diags(1.0 / adj.degrees) @ adj.matrix).tocsr()


@dataclass(frozen=True, eq=False)
class LocalAdjacency:
    """
    Adjacência normalizada de um campo receptivo para um usuário.

    rows/cols/values descrevem Â na ordem: arestas de agregação, depois a
    diagonal (self-loops). Os escores brutos ficam guardados para o backward.
    """

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    edge_scores: np.ndarray
    edge_weights: np.ndarray
    degree_scores: np.ndarray
    degrees: np.ndarray
    normalized: sp.csr_matrix

    @property
    def edge_count(self) -> int:
        return len(self.edge_scores)


def build_local_adjacency(
    rf: ReceptiveField,
    user: np.ndarray,
    relation_embeddings: np.ndarray,
) -> LocalAdjacency:
    n = rf.size
    scores = relation_scores(user, relation_embeddings)
    edge_scores = scores[rf.edge_relations]
    degree_scores = scores[rf.degree_relations]
    edge_weights = edge_weight(edge_scores)

    degrees = np.full(n, SELF_LOOP_WEIGHT)
    np.add.at(degrees, rf.degree_rows, edge_weight(degree_scores))

    inv_sqrt = 1.0 / np.sqrt(degrees)
    diagonal = np.arange(n, dtype=np.int64)
    rows = np.concatenate([rf.edge_rows, diagonal])
    cols = np.concatenate([rf.edge_cols, diagonal])
    raw = np.concatenate([edge_weights, np.full(n, SELF_LOOP_WEIGHT)])
    values = raw * inv_sqrt[rows] * inv_sqrt[cols]

    return LocalAdjacency(
        rows=rows,
        cols=cols,
        values=values,
        edge_scores=edge_scores,
        edge_weights=edge_weights,
        degree_scores=degree_scores,
        degrees=degrees,
        normalized=sp.csr_matrix((values, (rows, cols)), shape=(n, n)),
    )


def local_adjacency_backward(
    rf: ReceptiveField,
    adj: LocalAdjacency,
    grad_values: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    dL/dÂ (na ordem de adj.rows/cols) -> (dL/dw das arestas de agregação,
    dL/dw das listas de grau). D depende de A: Â_ik = A_ik D_i^{-1/2} D_k^{-1/2}.
    """
    n = rf.size
    inv_sqrt = 1.0 / np.sqrt(adj.degrees)
    edge_count = adj.edge_count
    raw = np.concatenate([adj.edge_weights, np.full(n, SELF_LOOP_WEIGHT)])

    grad_raw = grad_values * inv_sqrt[adj.rows] * inv_sqrt[adj.cols]
    # d(inv_sqrt)_i acumulado pelas duas pontas de cada entrada
    grad_inv_sqrt = np.zeros(n)
    contribution = grad_values * raw
    np.add.at(grad_inv_sqrt, adj.rows, contribution * inv_sqrt[adj.cols])
    np.add.at(grad_inv_sqrt, adj.cols, contribution * inv_sqrt[adj.rows])
    grad_degrees = grad_inv_sqrt * (-0.5) * adj.degrees ** -1.5

    return grad_raw[:edge_count], grad_degrees[rf.degree_rows]


@dataclass(frozen=True, eq=False)
class LabelAdjacency:
    """Grafo simétrico do campo receptivo para propagação de rótulos (sem self-loops)."""

    adjacency: UserAdjacency
    pair_heads: np.ndarray
    pair_tails: np.ndarray
    pair_relations: np.ndarray
    pair_scores: np.ndarray


def build_local_label_adjacency(
    rf: ReceptiveField,
    user: np.ndarray,
    relation_embeddings: np.ndarray,
) -> LabelAdjacency:
    n = rf.size
    low = np.minimum(rf.edge_rows, rf.edge_cols)
    high = np.maximum(rf.edge_rows, rf.edge_cols)
    _, first = np.unique(low * n + high, return_index=True)
    first.sort()
    heads, tails, relations = low[first], high[first], rf.edge_relations[first]

    scores = relation_scores(user, relation_embeddings)[relations]
    weights = edge_weight(scores)
    matrix = sp.coo_matrix(
        (np.concatenate([weights, weights]), (np.concatenate([heads, tails]), np.concatenate([tails, heads]))),
        shape=(n, n),
    )
    return LabelAdjacency(
        adjacency=UserAdjacency.from_matrix(matrix, self_loops=False),
        pair_heads=heads,
        pair_tails=tails,
        pair_relations=relations,
        pair_scores=scores,
    )
