import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from modules.data.interactions import Split
from modules.errors import NonFiniteError, TrainingDiverged
from modules.evaluation.metrics import evaluate
from modules.kg.store import KnowledgeGraph
from modules.model.params import ModelParams
from modules.training.adam import AdamState, adam_step
from modules.training.checkpoint import Checkpoint, checkpoint_load, checkpoint_save
from modules.training.config import HyperParams
from modules.training.loss import unified_loss
from tools.logger import get_logger
from tools.tsv import write_csv

log = get_logger(__name__)

METRICS_HEADER = ["epoch", "train_loss", "val_auc", "val_r10"]
LAST_CHECKPOINT = "last.ckpt"
BEST_CHECKPOINT = "best.ckpt"
METRICS_FILE = "metrics.csv"
_RATIO_STREAM = 0xC01D


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_auc: float
    val_r10: float

    def row(self) -> tuple:
        return (self.epoch, self.train_loss, self.val_auc, self.val_r10)


@dataclass(eq=False)
class TrainResult:
    params: ModelParams
    history: List[EpochMetrics] = field(default_factory=list)
    best_epoch: int = 0
    out_dir: Optional[str] = None

    @property
    def metrics_path(self) -> Optional[str]:
        return os.path.join(self.out_dir, METRICS_FILE) if self.out_dir else None


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    """Aleatoriedade da época derivada só de (seed, época): a retomada repete as épocas restantes."""
    return np.random.default_rng([seed, epoch])


def _meta(history: List[EpochMetrics], best_epoch: int, best_r10: float) -> dict:
    return {"history": [asdict(m) for m in history], "best_epoch": best_epoch, "best_r10": best_r10}


def train(
    data: Split,
    kg: KnowledgeGraph,
    hp: HyperParams,
    out_dir: Optional[str] = None,
    resume_from: Optional[str] = None,
    eval_users: Optional[int] = None,
) -> TrainResult:
    """
    Adam em minilotes embaralhados por época. Ao fim de cada época mede AUC e
    Recall@10 na validação; devolve os parâmetros da melhor época por R@10.
    """
    if hp.train_ratio < 1.0:
        data = data.with_train_ratio(hp.train_ratio, np.random.default_rng([hp.seed, _RATIO_STREAM]))
    train_rows = data.train
    known_labels = train_rows.labels_by_user()
    log.info(f"🚀 Treino: {len(train_rows)} linhas, {hp.summary()}")

    if resume_from:
        checkpoint = checkpoint_load(resume_from, expected=hp)
        params, adam, start = checkpoint.params, checkpoint.adam, checkpoint.epoch
        history = [EpochMetrics(**row) for row in checkpoint.meta.get("history", [])]
        best_epoch = int(checkpoint.meta.get("best_epoch", 0))
        best_r10 = float(checkpoint.meta.get("best_r10", -np.inf))
        best_path = os.path.join(os.path.dirname(os.path.abspath(resume_from)), BEST_CHECKPOINT)
        best_params = checkpoint_load(best_path).params if os.path.exists(best_path) else params.copy()
        log.info(f"Retomando da época {start} ({resume_from})")
    else:
        params = ModelParams.initialize(
            train_rows.user_count, kg.relation_count, kg.entity_count, hp.dim, hp.layers,
            np.random.default_rng(hp.seed),
        )
        adam = AdamState.for_params(params)
        start, history, best_epoch, best_r10 = 0, [], 0, -np.inf
        best_params = params.copy()

    last_path = os.path.join(out_dir, LAST_CHECKPOINT) if out_dir else None
    last_good = params.copy()

    for epoch in range(start + 1, hp.epochs + 1):
        rng = epoch_rng(hp.seed, epoch)
        order = rng.permutation(len(train_rows))
        loss_sum = 0.0
        for begin in range(0, len(order), hp.batch_size):
            batch = train_rows.select(order[begin : begin + hp.batch_size])
            try:
                loss, grads, _ = unified_loss(batch, params, hp, kg, known_labels, rng)
                adam_step(params, grads, adam, hp.learning_rate)
                params.check_finite()
            except NonFiniteError as e:
                log.error(f"❌ Divergência na época {epoch}: {e}")
                raise TrainingDiverged(
                    f"treino divergiu na época {epoch}: {e}", last_good=last_good, checkpoint_path=last_path
                ) from e
            loss_sum += loss * len(batch)

        report = evaluate(params, kg, hp, data, part="validation", ks=(10,), max_users=eval_users)
        metrics = EpochMetrics(epoch, loss_sum / len(train_rows), report.auc, report.recall_at.get(10, 0.0))
        history.append(metrics)
        log.info(
            f"Época {epoch}/{hp.epochs}: loss={metrics.train_loss:.5f} "
            f"val_auc={metrics.val_auc:.4f} val_r10={metrics.val_r10:.4f}"
        )

        if metrics.val_r10 > best_r10:
            best_epoch, best_r10, best_params = epoch, metrics.val_r10, params.copy()
            if out_dir:
                checkpoint_save(
                    os.path.join(out_dir, BEST_CHECKPOINT),
                    Checkpoint(best_params, adam.copy(), hp, epoch, _meta(history, best_epoch, best_r10)),
                )
        last_good = params.copy()
        if last_path:
            checkpoint_save(last_path, Checkpoint(params, adam, hp, epoch, _meta(history, best_epoch, best_r10)))

    result = TrainResult(params=best_params, history=history, best_epoch=best_epoch, out_dir=out_dir)
    if out_dir:
        write_csv(result.metrics_path, METRICS_HEADER, [m.row() for m in history])
        log.info(f"✅ Métricas em {result.metrics_path}; melhor época {best_epoch} (R@10={best_r10:.4f})")
    return result
