from typing import Iterable, Optional


class KgnnError(Exception):
    """Erro base de todos os componentes."""


class ParseError(KgnnError):
    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class DataValidationError(KgnnError):
    pass


class ConfigError(KgnnError):
    pass


class DimensionError(KgnnError):
    pass


class ContractViolation(KgnnError):
    pass


class SingularSystemError(KgnnError):
    """Sistema (I - P_EE) singular: entidades livres sem caminho até um item rotulado."""

    def __init__(self, entities: Iterable[int]):
        self.entities = sorted(int(e) for e in entities)
        preview = ", ".join(str(e) for e in self.entities[:20])
        if len(self.entities) > 20:
            preview += ", ..."
        super().__init__(
            f"{len(self.entities)} entidades livres desconectadas de itens rotulados: {preview}"
        )


class NonFiniteError(KgnnError):
    def __init__(self, message: str, layer: Optional[int] = None, term: Optional[str] = None):
        self.layer = layer
        self.term = term
        super().__init__(message)


class TrainingDiverged(KgnnError):
    def __init__(self, message: str, last_good=None, checkpoint_path: Optional[str] = None):
        self.last_good = last_good
        self.checkpoint_path = checkpoint_path
        super().__init__(message)


class CheckpointError(KgnnError):
    pass
