"""
Perda unificada de um lote:

    média_(u,v) J(y_uv, ŷ_uv) + λ · (Σ_v J(y_uv, l̂_u(v)) / linhas) + γ · Σ ||θ||²

As linhas são agrupadas por usuário: cada grupo tem seu campo receptivo e
sua adjacência A_u, já que os pesos das arestas dependem do usuário.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from modules.data.interactions import InteractionMatrix
from modules.errors import ContractViolation, NonFiniteError
from modules.kg.store import KnowledgeGraph
from modules.model.gnn import adjacency_backward, backward, forward, prediction_loss
from modules.model.params import ModelParams
from modules.model.receptive_field import ReceptiveField
from modules.model.scoring import build_local_adjacency, build_local_label_adjacency, score_backward
from modules.smoothness.regularizer import LabelContext, ls_regularizer
from modules.training.config import HyperParams


@dataclass(frozen=True)
class LossTerms:
    prediction: float
    smoothness: float
    l2: float

    @property
    def total(self) -> float:
        return self.prediction + self.smoothness + self.l2


def _check_finite(value: float, term: str) -> None:
    if not np.isfinite(value):
        raise NonFiniteError(f"termo '{term}' da perda não é finito ({value})", term=term)


def _label_context(
    rf: ReceptiveField,
    kg: KnowledgeGraph,
    known: Mapping[int, int],
    params: ModelParams,
    user: int,
):
    """Contexto de rótulos do usuário: itens de rótulo conhecido no campo receptivo ficam fixados."""
    label_adj = build_local_label_adjacency(rf, params.users[user], params.relations)
    local_items = kg.entity_items[rf.entities]
    clamped = np.zeros(rf.size, dtype=bool)
    labels = np.zeros(rf.size)
    for position in np.flatnonzero(local_items >= 0).tolist():
        item = int(local_items[position])
        if item in known:
            clamped[position] = True
            labels[position] = float(known[item])
    ctx = LabelContext(
        adjacency=label_adj.adjacency,
        clamped=clamped,
        labels=labels,
        pair_heads=label_adj.pair_heads,
        pair_tails=label_adj.pair_tails,
    )
    return ctx, label_adj


def unified_loss(
    batch: InteractionMatrix,
    params: ModelParams,
    hp: HyperParams,
    kg: KnowledgeGraph,
    known_labels: Mapping[int, Mapping[int, int]],
    rng: np.random.Generator,
) -> Tuple[float, ModelParams, LossTerms]:
    """
    Perda do lote e gradientes de todos os parâmetros. `known_labels` traz os
    rótulos de treino por usuário (item -> y) usados como fixados na propagação.
    """
    rows = len(batch)
    if rows == 0:
        raise ContractViolation("lote vazio")
    grads = params.zeros_like()
    prediction_total = 0.0
    smoothness_total = 0.0

    for user in np.unique(batch.users).tolist():
        items, labels = batch.rows_of(user)
        labels = labels.astype(float)
        rf = ReceptiveField.build(kg, kg.item_entities[items], hp.layers, hp.sample_size, rng)
        adj = build_local_adjacency(rf, params.users[user], params.relations)
        representations, cache = forward(rf, adj, params, user)

        losses, grad_user, grad_representations = prediction_loss(params.users[user], representations, labels)
        prediction_total += float(losses.sum())
        grads.users[user] += grad_user / rows
        grad_values = backward(cache, grad_representations / rows, params, grads)
        adjacency_backward(cache, grad_values, params, grads)

        positives = np.unique(rf.batch[labels == 1])
        if hp.ls_weight > 0 and len(positives):
            known: Dict[int, int] = dict(known_labels.get(user, {}))
            known.update(zip(items.tolist(), labels.astype(int).tolist()))
            ctx, label_adj = _label_context(rf, kg, known, params, user)
            result = ls_regularizer(ctx, positives, hp.unroll_steps)
            smoothness_total += result.loss
            grads.users[user] += score_backward(
                result.grad_weights * hp.ls_weight / rows,
                label_adj.pair_scores,
                label_adj.pair_relations,
                params.users[user],
                params.relations,
                grads.relations,
            )

    prediction = prediction_total / rows
    smoothness = hp.ls_weight * smoothness_total / rows
    l2 = hp.l2_weight * params.squared_norm()
    for value, term in ((prediction, "prediction"), (smoothness, "smoothness"), (l2, "l2")):
        _check_finite(value, term)

    if hp.l2_weight:
        grad_tensors = grads.tensors()
        for name, tensor in params.tensors().items():
            grad_tensors[name] += 2.0 * hp.l2_weight * tensor

    terms = LossTerms(prediction=prediction, smoothness=smoothness, l2=l2)
    return terms.total, grads, terms
