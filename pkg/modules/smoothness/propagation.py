"""
Propagação de rótulos sobre A_u: energia, passo iterativo, ponto fixo em
forma fechada e verificação da propriedade harmônica.

Convenção: os vetores de rótulos ficam na ordem das entidades; a partição
itens-primeiro só existe dentro de PartitionedTransition.
"""

from dataclasses import dataclass, field
from typing import List, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from modules.errors import ContractViolation, SingularSystemError
from modules.model.scoring import UserAdjacency, build_transition
from tools.logger import get_logger

log = get_logger(__name__)


@dataclass
class LabelVector:
    values: np.ndarray
    clamped: np.ndarray

    @classmethod
    def initial(cls, size: int, clamped_entities, clamp_values, fill: float = 0.0) -> "LabelVector":
        clamped = np.zeros(size, dtype=bool)
        clamped[np.asarray(clamped_entities, dtype=np.int64)] = True
        values = np.full(size, float(fill))
        values[np.asarray(clamped_entities, dtype=np.int64)] = clamp_values
        return cls(values=values, clamped=clamped)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.clamped)

    @property
    def clamp_values(self) -> np.ndarray:
        # sempre na ordem crescente das entidades fixadas
        return self.values[self.clamped]

    def copy(self) -> "LabelVector":
        return LabelVector(self.values.copy(), self.clamped.copy())


@dataclass(frozen=True, eq=False)
class PartitionedTransition:
    """Blocos de P com as entidades fixadas (itens) primeiro."""

    full: sp.csr_matrix
    clamped: np.ndarray
    free: np.ndarray
    P_VV: sp.csr_matrix
    P_VE: sp.csr_matrix
    P_EV: sp.csr_matrix
    P_EE: sp.csr_matrix

    @classmethod
    def from_transition(cls, P: sp.spmatrix, clamped_mask: np.ndarray) -> "PartitionedTransition":
        P = sp.csr_matrix(P)
        clamped = np.flatnonzero(clamped_mask)
        free = np.flatnonzero(~np.asarray(clamped_mask, dtype=bool))
        clamped_rows, free_rows = P[clamped], P[free]
        return cls(
            full=P,
            clamped=clamped,
            free=free,
            P_VV=clamped_rows[:, clamped].tocsr(),
            P_VE=clamped_rows[:, free].tocsr(),
            P_EV=free_rows[:, clamped].tocsr(),
            P_EE=free_rows[:, free].tocsr(),
        )

    def epsilon(self) -> float:
        """Maior soma de linha de P_EE (limite da taxa de contração)."""
        if len(self.free) == 0:
            return 0.0
        return float(np.asarray(self.P_EE.sum(axis=1)).max())


TransitionLike = Union[PartitionedTransition, sp.spmatrix]


def _as_matrix(P: TransitionLike) -> sp.csr_matrix:
    return P.full if isinstance(P, PartitionedTransition) else sp.csr_matrix(P)


def energy(labels: Union[LabelVector, np.ndarray], adj: UserAdjacency) -> float:
    """E = 1/2 Σ_ij A_ij (l_i - l_j)^2 sobre pares ordenados."""
    values = labels.values if isinstance(labels, LabelVector) else np.asarray(labels, dtype=float)
    if len(values) != adj.size:
        raise ContractViolation("o vetor de rótulos não cobre todas as entidades")
    coo = adj.matrix.tocoo()
    return float(0.5 * np.sum(coo.data * (values[coo.row] - values[coo.col]) ** 2))


def propagate_step(labels: LabelVector, P: TransitionLike, clamp_values: np.ndarray) -> LabelVector:
    """Um passo: l <- P l, depois os fixados voltam a clamp_values."""
    values = _as_matrix(P) @ labels.values
    values[labels.clamped] = clamp_values
    return LabelVector(values=values, clamped=labels.clamped)


@dataclass
class PropagationResult:
    labels: LabelVector
    iterations: int
    converged: bool
    deltas: List[float] = field(default_factory=list)


def propagate_to_convergence(
    initial: LabelVector,
    P: TransitionLike,
    clamp_values: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> PropagationResult:
    if tol <= 0:
        raise ContractViolation(f"tol deve ser > 0 (recebido {tol})")
    matrix = _as_matrix(P)
    labels = initial.copy()
    labels.values[labels.clamped] = clamp_values
    deltas: List[float] = []

    for iteration in range(1, max_iter + 1):
        updated = propagate_step(labels, matrix, clamp_values)
        delta = float(np.max(np.abs(updated.values - labels.values))) if len(labels.values) else 0.0
        deltas.append(delta)
        labels = updated
        if delta < tol:
            return PropagationResult(labels, iteration, True, deltas)

    log.warning(f"⚠️  propagação não convergiu em {max_iter} iterações (última variação {deltas[-1]:.3e})")
    return PropagationResult(labels, max_iter, False, deltas)


def disconnected_free_entities(adj: UserAdjacency, clamped_mask: np.ndarray) -> np.ndarray:
    """Entidades livres cujo componente conexo não tem nenhuma entidade fixada."""
    _, components = connected_components(adj.matrix, directed=False)
    anchored = np.unique(components[clamped_mask])
    return np.flatnonzero(~clamped_mask & ~np.isin(components, anchored))


def closed_form_labels(P: PartitionedTransition, clamp_values: np.ndarray) -> np.ndarray:
    """
    Ponto fixo único: l_E = (I - P_EE)^{-1} P_EV y.
    Devolve os rótulos livres na ordem de P.free.
    """
    if len(P.free) == 0:
        return np.zeros(0)

    # linhas de P_EE somando 1 sem saída para os fixados tornam o sistema singular
    _, components = connected_components(P.full, directed=False)
    anchored = np.unique(components[P.clamped]) if len(P.clamped) else np.zeros(0, dtype=np.int64)
    orphans = P.free[~np.isin(components[P.free], anchored)]
    if len(orphans):
        raise SingularSystemError(orphans)

    system = (sp.identity(len(P.free), format="csc") - P.P_EE.tocsc()).tocsc()
    rhs = P.P_EV @ np.asarray(clamp_values, dtype=float)
    solution = spsolve(system, rhs)
    return np.atleast_1d(solution)


def harmonic_labels(adj: UserAdjacency, clamped_mask: np.ndarray, clamp_values: np.ndarray) -> LabelVector:
    """l* completo (fixados + livres) via forma fechada."""
    clamped_mask = np.asarray(clamped_mask, dtype=bool)
    orphans = disconnected_free_entities(adj, clamped_mask)
    if len(orphans):
        raise SingularSystemError(orphans)

    P = PartitionedTransition.from_transition(build_transition(adj), clamped_mask)
    values = np.zeros(adj.size)
    values[P.clamped] = clamp_values
    values[P.free] = closed_form_labels(P, clamp_values)
    return LabelVector(values=values, clamped=np.asarray(clamped_mask, dtype=bool).copy())


def verify_harmonic(labels: LabelVector, adj: UserAdjacency) -> float:
    """max_i | l_i - (1/D_ii) Σ_j A_ij l_j | sobre as entidades livres."""
    free = labels.free
    free = free[adj.degrees[free] > 0]
    if len(free) == 0:
        return 0.0
    averaged = (adj.matrix @ labels.values)[free] / adj.degrees[free]
    return float(np.max(np.abs(labels.values[free] - averaged)))


@dataclass(frozen=True)
class ConvergenceReport:
    epsilon: float
    rate: float
    distances: np.ndarray


def convergence_rate(
    initial: LabelVector,
    P: PartitionedTransition,
    clamp_values: np.ndarray,
    fixed_point: np.ndarray,
    iterations: int = 200,
    floor: float = 1e-9,
) -> ConvergenceReport:
    """
    Mede a contração em norma do máximo da distância até l*, passo a passo,
    enquanto a distância está acima de `floor`.
    """
    labels = initial.copy()
    labels.values[labels.clamped] = clamp_values
    distances = [float(np.max(np.abs(labels.values - fixed_point)))]
    for _ in range(iterations):
        labels = propagate_step(labels, P, clamp_values)
        distances.append(float(np.max(np.abs(labels.values - fixed_point))))

    distances_arr = np.asarray(distances)
    ratios = [
        distances_arr[i + 1] / distances_arr[i]
        for i in range(len(distances_arr) - 1)
        if distances_arr[i] > floor
    ]
    rate = max(ratios) if ratios else 0.0
    return ConvergenceReport(epsilon=P.epsilon(), rate=float(rate), distances=distances_arr)
