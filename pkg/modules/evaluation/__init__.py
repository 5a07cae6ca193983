from .metrics import EvalReport, auc, evaluate, recall_at_k
