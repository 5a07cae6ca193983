from typing import Optional

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, field_validator, model_validator

EXHAUSTIVE = ("none", "exhaustive", "all")

# símbolos curtos -> nomes dos campos
SYMBOLS = {
    "S": "sample_size",
    "d": "dim",
    "L": "layers",
    "lambda": "ls_weight",
    "gamma": "l2_weight",
    "eta": "learning_rate",
    "K": "unroll_steps",
}
_LOWER_SYMBOLS = {symbol.lower(): name for symbol, name in SYMBOLS.items()}


def canonical_key(key: str) -> str:
    """'S', 's', 'batch-size' -> nome do campo; chaves desconhecidas voltam normalizadas."""
    key = key.strip().replace("-", "_")
    if key in SYMBOLS:
        return SYMBOLS[key]
    return _LOWER_SYMBOLS.get(key.lower(), key.lower())


class HyperParams(BaseModel):
    """
    Hiperparâmetros de treino. As chaves aceitam também os símbolos curtos
    (S, d, L, lambda, gamma, eta, K).
    """

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    sample_size: Optional[int] = Field(8, ge=1, validation_alias=AliasChoices("sample_size", "S"))
    dim: int = Field(16, ge=1, validation_alias=AliasChoices("dim", "d"))
    layers: int = Field(1, ge=1, le=4, validation_alias=AliasChoices("layers", "L"))
    ls_weight: float = Field(0.5, ge=0.0, validation_alias=AliasChoices("ls_weight", "lambda"))
    l2_weight: float = Field(1e-4, ge=0.0, validation_alias=AliasChoices("l2_weight", "gamma"))
    # η = 0 é aceito para o modo "sem atualização"
    learning_rate: float = Field(5e-3, ge=0.0, validation_alias=AliasChoices("learning_rate", "eta"))
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(10, ge=0)
    seed: int = 0
    unroll_steps: Optional[int] = Field(None, ge=1, validation_alias=AliasChoices("unroll_steps", "K"))
    train_ratio: float = Field(1.0, gt=0.0, le=1.0)

    @field_validator("sample_size", mode="before")
    @classmethod
    def _exhaustive(cls, value):
        if isinstance(value, str) and value.strip().lower() in EXHAUSTIVE:
            return None
        return value

    @model_validator(mode="after")
    def _default_unroll(self) -> "HyperParams":
        if self.unroll_steps is None:
            self.unroll_steps = self.layers + 2
        return self

    def override(self, **changes) -> "HyperParams":
        """Nova instância revalidada (chaves pelo nome do campo); mudar layers sem unroll_steps recalcula K."""
        values = self.model_dump()
        if "layers" in changes and "unroll_steps" not in changes:
            values["unroll_steps"] = None
        values.update(changes)
        return HyperParams.model_validate(values)

    @property
    def exhaustive(self) -> bool:
        return self.sample_size is None

    def summary(self) -> str:
        S = "exaustivo" if self.exhaustive else self.sample_size
        return (
            f"S={S} d={self.dim} L={self.layers} λ={self.ls_weight} γ={self.l2_weight} "
            f"η={self.learning_rate} batch={self.batch_size} epochs={self.epochs} K={self.unroll_steps} "
            f"seed={self.seed}"
        )
