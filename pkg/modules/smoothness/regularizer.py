"""
Regularização por suavidade de rótulos: cada item positivo do lote é
escondido e seu rótulo é reproduzido por propagação a partir dos demais.
O gradiente atravessa os K passos desenrolados até os pesos das arestas.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from modules.errors import ContractViolation
from modules.model.scoring import UserAdjacency, build_transition
from modules.smoothness.propagation import PartitionedTransition, closed_form_labels
from tools.logger import get_logger

log = get_logger(__name__)

LABEL_CLAMP = 1e-7
NEUTRAL_LABEL = 0.5


@dataclass(frozen=True, eq=False)
class LabelContext:
    """Grafo simétrico sem self-loops de um usuário, com os itens de rótulo conhecido."""

    adjacency: UserAdjacency
    clamped: np.ndarray
    labels: np.ndarray
    pair_heads: np.ndarray
    pair_tails: np.ndarray

    @property
    def size(self) -> int:
        return self.adjacency.size

    @classmethod
    def from_pairs(
        cls,
        size: int,
        heads: np.ndarray,
        tails: np.ndarray,
        weights: np.ndarray,
        clamped: np.ndarray,
        labels: np.ndarray,
    ) -> "LabelContext":
        heads = np.asarray(heads, dtype=np.int64)
        tails = np.asarray(tails, dtype=np.int64)
        weights = np.asarray(weights, dtype=float)
        matrix = sp.coo_matrix(
            (np.concatenate([weights, weights]), (np.concatenate([heads, tails]), np.concatenate([tails, heads]))),
            shape=(size, size),
        )
        return cls(
            adjacency=UserAdjacency.from_matrix(matrix, self_loops=False),
            clamped=np.asarray(clamped, dtype=bool),
            labels=np.asarray(labels, dtype=float),
            pair_heads=heads,
            pair_tails=tails,
        )


@dataclass(frozen=True)
class HeldOutLabel:
    value: float
    informed: bool  # False quando não há outro item fixado alcançável


@dataclass(frozen=True)
class RegularizerResult:
    loss: float
    predictions: np.ndarray
    grad_weights: np.ndarray  # dR/dw por par (pair_heads, pair_tails)


def absorbing_transition(adj: UserAdjacency) -> sp.csr_matrix:
    """P = D^{-1} A com linhas de grau zero absorventes (P_ii = 1)."""
    degrees = adj.degrees
    isolated = degrees <= 0
    inverse = np.where(isolated, 0.0, 1.0 / np.where(isolated, 1.0, degrees))
    P = sp.diags(inverse) @ adj.matrix
    if isolated.any():
        P = P + sp.diags(isolated.astype(float))
    return sp.csr_matrix(P)


def leave_one_out_label(ctx: LabelContext, held_out: int, steps: Optional[int] = None) -> HeldOutLabel:
    """
    Esconde o rótulo de `held_out` e o reproduz com os demais itens fixados.
    steps=None resolve o ponto fixo exato no componente do item; steps=K
    roda K passos a partir do prior neutro 0.5.
    """
    if not ctx.clamped[held_out]:
        raise ContractViolation(f"a entidade {held_out} não é um item rotulado")

    clamped = ctx.clamped.copy()
    clamped[held_out] = False
    _, components = connected_components(ctx.adjacency.matrix, directed=False)
    component = np.flatnonzero(components == components[held_out])
    if not clamped[component].any():
        log.warning(f"⚠️  item {held_out} sem outro item rotulado alcançável; usando prior {NEUTRAL_LABEL}")
        return HeldOutLabel(NEUTRAL_LABEL, informed=False)

    if steps is not None:
        predictions = _unrolled(ctx, np.asarray([held_out]), steps)[0][-1]
        return HeldOutLabel(float(predictions[held_out, 0]), informed=True)

    sub = UserAdjacency.from_matrix(ctx.adjacency.matrix[component][:, component], self_loops=False)
    sub_clamped = clamped[component]
    P = PartitionedTransition.from_transition(build_transition(sub), sub_clamped)
    free_labels = closed_form_labels(P, ctx.labels[component][sub_clamped])
    position = int(np.flatnonzero(P.free == np.searchsorted(component, held_out))[0])
    return HeldOutLabel(float(free_labels[position]), informed=True)


def _unrolled(ctx: LabelContext, held_out: np.ndarray, steps: int):
    """K passos com uma coluna por item escondido; devolve os estados e as máscaras."""
    if steps < 1:
        raise ContractViolation(f"K deve ser >= 1 (recebido {steps})")
    columns = np.arange(len(held_out))
    mask = np.repeat(ctx.clamped[:, None], len(held_out), axis=1)
    mask[held_out, columns] = False
    clamp = np.where(mask, ctx.labels[:, None], 0.0)

    P = absorbing_transition(ctx.adjacency)
    states = [np.where(mask, clamp, NEUTRAL_LABEL)]
    for _ in range(steps):
        states.append(np.where(mask, clamp, P @ states[-1]))
    return states, mask, P


def ls_regularizer(ctx: LabelContext, held_out: Sequence[int], steps: int) -> RegularizerResult:
    """
    Σ_v J(y_v, l̂(v)) sobre os itens escondidos (entropia cruzada binária com
    rótulos limitados a [1e-7, 1 - 1e-7]) e seu gradiente em relação aos pesos.
    """
    held_out = np.asarray(held_out, dtype=np.int64)
    if len(held_out) == 0:
        raise ContractViolation("lote sem itens para esconder")
    if not ctx.clamped[held_out].all():
        raise ContractViolation("todo item escondido precisa ter rótulo conhecido")

    states, mask, P = _unrolled(ctx, held_out, steps)
    columns = np.arange(len(held_out))
    predictions = states[-1][held_out, columns]
    targets = ctx.labels[held_out]

    bounded = np.clip(predictions, LABEL_CLAMP, 1.0 - LABEL_CLAMP)
    losses = -(targets * np.log(bounded) + (1.0 - targets) * np.log(1.0 - bounded))
    inside = (predictions > LABEL_CLAMP) & (predictions < 1.0 - LABEL_CLAMP)
    grad_predictions = np.where(inside, -targets / bounded + (1.0 - targets) / (1.0 - bounded), 0.0)

    coo = P.tocoo()
    grad_P = np.zeros(len(coo.data))
    grad_state = np.zeros_like(states[-1])
    grad_state[held_out, columns] = grad_predictions
    for previous in reversed(states[:-1]):
        grad_step = np.where(mask, 0.0, grad_state)
        grad_P += np.einsum("ij,ij->i", grad_step[coo.row], previous[coo.col])
        grad_state = P.T @ grad_step

    return RegularizerResult(
        loss=float(losses.sum()),
        predictions=predictions,
        grad_weights=_transition_backward(ctx, coo, grad_P),
    )


def _transition_backward(ctx: LabelContext, coo: sp.coo_matrix, grad_P: np.ndarray) -> np.ndarray:
    """dL/dP -> dL/dw por par: P_ik = A_ik / D_i, com D_i = Σ_k A_ik."""
    if len(ctx.pair_heads) == 0:
        return np.zeros(0)
    degrees = ctx.adjacency.degrees
    n = ctx.size
    # c_i = Σ_k dP_ik P_ik (entradas absorventes têm gradiente descartado)
    connected = degrees[coo.row] > 0
    correction = np.zeros(n)
    np.add.at(correction, coo.row[connected], grad_P[connected] * coo.data[connected])
    grad_matrix = sp.csr_matrix((np.where(connected, grad_P, 0.0), (coo.row, coo.col)), shape=(n, n))

    heads, tails = ctx.pair_heads, ctx.pair_tails
    forward = np.asarray(grad_matrix[heads, tails]).ravel()
    backward = np.asarray(grad_matrix[tails, heads]).ravel()
    return (forward - correction[heads]) / degrees[heads] + (backward - correction[tails]) / degrees[tails]
