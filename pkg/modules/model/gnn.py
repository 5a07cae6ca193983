"""
Propagação de features em L camadas sobre o campo receptivo de um lote,
H_{l+1} = σ_l(Â_u H_l W_l), e a predição ŷ_uv = logistic(<u, v_u>).

O backward é manual: cada forward guarda um ForwardCache com as ativações
e o gradiente atravessa Â_u (incluindo a dependência de D em A), os pesos
softplus das arestas e os escores <u, r> até as embeddings.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from modules.errors import ContractViolation, DimensionError, NonFiniteError
from modules.kg.store import KnowledgeGraph
from modules.model.params import ModelParams
from modules.model.receptive_field import ReceptiveField
from modules.model.scoring import (
    LocalAdjacency,
    build_user_adjacency,
    local_adjacency_backward,
    normalize_symmetric,
    score_backward,
)

LOGIT_CLAMP = 15.0


@dataclass(eq=False)
class ForwardCache:
    rf: ReceptiveField
    adj: LocalAdjacency
    user: int
    inputs: List[np.ndarray]  # H_0 .. H_{L-1}
    mixed: List[np.ndarray]  # X_l = H_l W_l
    outputs: List[np.ndarray]  # H_1 .. H_L
    identity: bool

    @property
    def representations(self) -> np.ndarray:
        return self.outputs[-1][self.rf.batch]


def _activate(z: np.ndarray, last: bool, identity: bool) -> np.ndarray:
    if identity:
        return z
    return np.tanh(z) if last else np.maximum(z, 0.0)


def _activation_grad(z: np.ndarray, h: np.ndarray, last: bool, identity: bool) -> np.ndarray:
    if identity:
        return np.ones_like(z)
    return 1.0 - h * h if last else (z > 0).astype(float)


def forward(
    rf: ReceptiveField,
    adj: LocalAdjacency,
    params: ModelParams,
    user: int,
    identity_activations: bool = False,
) -> Tuple[np.ndarray, ForwardCache]:
    """Representações finais dos itens do lote (uma linha por item) e o cache do backward."""
    if adj.normalized.shape[0] != rf.size:
        raise ContractViolation("adjacência e campo receptivo de tamanhos diferentes")
    if params.layers < 1:
        raise ContractViolation("o modelo precisa de ao menos uma camada")

    H = params.entities[rf.entities]
    inputs, mixed, outputs = [], [], []
    for layer, weight in enumerate(params.weights):
        if H.shape[1] != weight.shape[0]:
            raise DimensionError(f"camada {layer}: entrada {H.shape[1]} x pesos {weight.shape}")
        inputs.append(H)
        X = H @ weight
        mixed.append(X)
        last = layer == params.layers - 1
        H = _activate(adj.normalized @ X, last, identity_activations)
        if not np.all(np.isfinite(H)):
            raise NonFiniteError(f"ativação não finita na camada {layer}", layer=layer)
        outputs.append(H)

    cache = ForwardCache(rf, adj, user, inputs, mixed, outputs, identity_activations)
    return cache.representations, cache


def predict(user_vector: np.ndarray, representations: np.ndarray) -> np.ndarray:
    if representations.shape[-1] != user_vector.shape[0]:
        raise DimensionError(f"dim(u)={user_vector.shape[0]} difere de d_L={representations.shape[-1]}")
    logits = np.clip(representations @ user_vector, -LOGIT_CLAMP, LOGIT_CLAMP)
    return expit(logits)


def predict_grad(user_vector: np.ndarray, representation: np.ndarray) -> np.ndarray:
    """dŷ/du com v fixo: logistic'(z) v (zero quando o logit está no limite)."""
    z = float(representation @ user_vector)
    if abs(z) >= LOGIT_CLAMP:
        return np.zeros_like(representation)
    y = expit(z)
    return y * (1.0 - y) * representation


def prediction_loss(
    user_vector: np.ndarray,
    representations: np.ndarray,
    labels: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Entropia cruzada por linha sobre o logit limitado, com os gradientes em
    relação a u e a cada v_u.
    """
    raw = representations @ user_vector
    logits = np.clip(raw, -LOGIT_CLAMP, LOGIT_CLAMP)
    losses = np.logaddexp(0.0, logits) - labels * logits
    grad_logits = np.where(np.abs(raw) < LOGIT_CLAMP, expit(logits) - labels, 0.0)
    return losses, grad_logits @ representations, np.outer(grad_logits, user_vector)


def backward(
    cache: ForwardCache,
    grad_representations: np.ndarray,
    params: ModelParams,
    grads: ModelParams,
) -> np.ndarray:
    """
    Acumula em `grads` os gradientes de W_l, das features das entidades e das
    relações. Devolve dL/dÂ na ordem de cache.adj.rows/cols; a parte do usuário
    (via <u, r>) fica com adjacency_backward.
    """
    rf, adj = cache.rf, cache.adj
    if grad_representations.shape != (len(rf.batch), params.dim):
        raise ContractViolation(
            f"gradiente {grad_representations.shape} não corresponde ao lote ({len(rf.batch)}, {params.dim})"
        )

    grad_H = np.zeros_like(cache.outputs[-1])
    np.add.at(grad_H, rf.batch, grad_representations)
    grad_values = np.zeros(len(adj.values))
    transposed = adj.normalized.T.tocsr()

    for layer in reversed(range(params.layers)):
        last = layer == params.layers - 1
        X = cache.mixed[layer]
        H_out = cache.outputs[layer]
        Z = adj.normalized @ X
        grad_Z = grad_H * _activation_grad(Z, H_out, last, cache.identity)
        grad_values += np.einsum("ij,ij->i", grad_Z[adj.rows], X[adj.cols])
        grad_X = transposed @ grad_Z
        grads.weights[layer] += cache.inputs[layer].T @ grad_X
        grad_H = grad_X @ params.weights[layer].T

    grads.entities[rf.entities] += grad_H
    return grad_values


def adjacency_backward(
    cache: ForwardCache,
    grad_values: np.ndarray,
    params: ModelParams,
    grads: ModelParams,
) -> None:
    """dL/dÂ -> pesos softplus -> escores <u, r> -> embeddings do usuário e das relações."""
    rf, adj = cache.rf, cache.adj
    user_vector = params.users[cache.user]
    grad_edges, grad_degrees = local_adjacency_backward(rf, adj, grad_values)
    grad_user = score_backward(
        grad_edges, adj.edge_scores, rf.edge_relations, user_vector, params.relations, grads.relations
    )
    grad_user += score_backward(
        grad_degrees, adj.degree_scores, rf.degree_relations, user_vector, params.relations, grads.relations
    )
    grads.users[cache.user] += grad_user


def forward_full(
    kg: KnowledgeGraph,
    params: ModelParams,
    user: int,
    items: Sequence[int],
    identity_activations: bool = False,
) -> np.ndarray:
    """Mesma propagação sobre o grafo inteiro, sem amostragem (referência para testes e diagnóstico)."""
    adjacency = build_user_adjacency(kg, params.users[user], params.relations, add_self_loops=True)
    normalized = normalize_symmetric(adjacency)
    H = params.entities
    for layer, weight in enumerate(params.weights):
        H = _activate(normalized @ (H @ weight), layer == params.layers - 1, identity_activations)
    return H[kg.item_entities[np.asarray(items, dtype=np.int64)]]
