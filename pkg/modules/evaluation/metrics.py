from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from modules.data.interactions import InteractionMatrix, Split
from modules.errors import ContractViolation
from modules.kg.store import KnowledgeGraph
from modules.model.gnn import forward, predict
from modules.model.params import ModelParams
from modules.model.receptive_field import ReceptiveField
from modules.model.scoring import build_local_adjacency
from modules.training.config import HyperParams
from tools.logger import get_logger
from tools.tsv import write_csv

log = get_logger(__name__)

RECALL_KS = (1, 2, 5, 10, 20, 50, 100)
_EVAL_STREAM = 0x5EED


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(positivo aleatório supera negativo aleatório), empates valendo 1/2, pela soma de postos."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ContractViolation("scores e labels com tamanhos diferentes")
    positives = labels == 1
    n_pos = int(positives.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractViolation("AUC indefinida: é preciso ao menos um positivo e um negativo")
    ranks = rankdata(scores)
    return float((ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def top_k(items: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """K itens de maior score; empates pelo menor id."""
    order = np.lexsort((items, -scores))
    return items[order[:k]]


def recall_at_k(
    items: np.ndarray,
    scores: np.ndarray,
    positives: np.ndarray,
    k: int,
) -> Optional[float]:
    """|top-K ∩ positivos| / |positivos|; None para usuário sem positivos (fica fora da média)."""
    if k < 1:
        raise ContractViolation(f"K deve ser >= 1 (recebido {k})")
    positives = np.asarray(positives)
    if len(positives) == 0:
        return None
    hits = np.isin(top_k(np.asarray(items), np.asarray(scores, dtype=float), k), positives)
    return float(hits.sum()) / len(positives)


def eval_rng(seed: int, user: int) -> np.random.Generator:
    return np.random.default_rng([seed, _EVAL_STREAM, user])


def score_items(
    kg: KnowledgeGraph,
    params: ModelParams,
    hp: HyperParams,
    user: int,
    items: Sequence[int],
    chunk_size: Optional[int] = None,
) -> np.ndarray:
    """ŷ_uv para uma lista de itens, em blocos; a amostragem usa um gerador fixo por (seed, usuário)."""
    items = np.asarray(items, dtype=np.int64)
    chunk_size = chunk_size or hp.batch_size
    rng = eval_rng(hp.seed, user)
    user_vector = params.users[user]
    scores = np.empty(len(items))
    for start in range(0, len(items), chunk_size):
        chunk = items[start : start + chunk_size]
        rf = ReceptiveField.build(kg, kg.item_entities[chunk], hp.layers, hp.sample_size, rng)
        adj = build_local_adjacency(rf, user_vector, params.relations)
        representations, _ = forward(rf, adj, params, user)
        scores[start : start + len(chunk)] = predict(user_vector, representations)
    return scores


def score_rows(
    kg: KnowledgeGraph,
    params: ModelParams,
    hp: HyperParams,
    rows: InteractionMatrix,
) -> np.ndarray:
    scores = np.empty(len(rows))
    for user in np.unique(rows.users).tolist():
        start, end = np.searchsorted(rows.users, [user, user + 1])
        scores[start:end] = score_items(kg, params, hp, user, rows.items[start:end])
    return scores


@dataclass
class EvalReport:
    auc: float
    recall_at: Dict[int, float] = field(default_factory=dict)
    daily_auc: Dict[int, float] = field(default_factory=dict)
    users: int = 0

    def rows(self) -> List[tuple]:
        rows = [("auc", "", self.auc)]
        rows += [("recall", k, value) for k, value in sorted(self.recall_at.items())]
        rows += [("daily_auc", day, value) for day, value in sorted(self.daily_auc.items())]
        return rows

    def save(self, path: str) -> None:
        write_csv(path, ["metric", "key", "value"], self.rows())

    def __str__(self) -> str:
        recall = " ".join(f"R@{k}={v:.4f}" for k, v in sorted(self.recall_at.items()))
        return f"AUC={self.auc:.4f} {recall} ({self.users} usuários)"


def daily_auc(rows: InteractionMatrix, scores: np.ndarray) -> Dict[int, float]:
    """AUC por dia; dias sem as duas classes ficam de fora."""
    if not rows.has_days:
        return {}
    result = {}
    for day in np.unique(rows.days).tolist():
        mask = rows.days == day
        labels = rows.labels[mask]
        if labels.min() != labels.max():
            result[int(day)] = auc(scores[mask], labels)
    return result


def evaluate(
    params: ModelParams,
    kg: KnowledgeGraph,
    hp: HyperParams,
    data: Split,
    part: str = "test",
    ks: Sequence[int] = RECALL_KS,
    max_users: Optional[int] = None,
) -> EvalReport:
    """
    CTR: AUC sobre as linhas da partição. Top-K: para cada usuário com
    positivos na partição, ranqueia todos os itens fora dos seus positivos de
    treino e mede Recall@K.
    """
    rows: InteractionMatrix = getattr(data, part)
    scores = score_rows(kg, params, hp, rows)
    report = EvalReport(auc=auc(scores, rows.labels), daily_auc=daily_auc(rows, scores))

    train_positives: Mapping[int, np.ndarray] = data.train.positives_by_user()
    held_positives = rows.positives_by_user()
    users = sorted(held_positives)
    if max_users is not None and len(users) > max_users:
        users = users[:max_users]

    catalog = np.arange(kg.item_count, dtype=np.int64)
    recalls: Dict[int, List[float]] = {k: [] for k in ks}
    for user in users:
        candidates = np.setdiff1d(catalog, train_positives.get(user, np.zeros(0, dtype=np.int64)))
        candidate_scores = score_items(kg, params, hp, user, candidates)
        for k in ks:
            value = recall_at_k(candidates, candidate_scores, held_positives[user], k)
            if value is not None:
                recalls[k].append(value)

    report.recall_at = {k: float(np.mean(values)) for k, values in recalls.items() if values}
    report.users = len(users)
    log.debug(f"avaliação ({part}): {report}")
    return report
