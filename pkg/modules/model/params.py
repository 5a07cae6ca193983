from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from modules.errors import DimensionError, NonFiniteError

EMBEDDING_SCALE = 0.05


@dataclass(eq=False)
class ModelParams:
    """Embeddings de usuários/relações, features brutas das entidades (H_0) e pesos W_0..W_{L-1}."""

    users: np.ndarray
    relations: np.ndarray
    entities: np.ndarray
    weights: List[np.ndarray] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def layers(self) -> int:
        return len(self.weights)

    @classmethod
    def initialize(
        cls,
        n_users: int,
        n_relations: int,
        n_entities: int,
        dim: int,
        layers: int,
        rng: np.random.Generator,
    ) -> "ModelParams":
        def embedding(rows: int) -> np.ndarray:
            return rng.uniform(-EMBEDDING_SCALE, EMBEDDING_SCALE, size=(rows, dim))

        users = embedding(n_users)
        relations = embedding(n_relations)
        entities = embedding(n_entities)
        bound = 1.0 / np.sqrt(dim)
        weights = [rng.uniform(-bound, bound, size=(dim, dim)) for _ in range(layers)]
        return cls(users=users, relations=relations, entities=entities, weights=weights)

    def tensors(self) -> Dict[str, np.ndarray]:
        named = {"users": self.users, "relations": self.relations, "entities": self.entities}
        for layer, weight in enumerate(self.weights):
            named[f"W{layer}"] = weight
        return named

    @classmethod
    def from_tensors(cls, tensors: Dict[str, np.ndarray]) -> "ModelParams":
        layers = sorted(int(name[1:]) for name in tensors if name.startswith("W"))
        if layers != list(range(len(layers))):
            raise DimensionError(f"camadas fora de sequência: {layers}")
        params = cls(
            users=tensors["users"],
            relations=tensors["relations"],
            entities=tensors["entities"],
            weights=[tensors[f"W{layer}"] for layer in layers],
        )
        params.validate()
        return params

    def zeros_like(self) -> "ModelParams":
        return ModelParams.from_tensors({name: np.zeros_like(t) for name, t in self.tensors().items()})

    def copy(self) -> "ModelParams":
        return ModelParams.from_tensors({name: t.copy() for name, t in self.tensors().items()})

    def squared_norm(self) -> float:
        return float(sum(np.sum(t * t) for t in self.tensors().values()))

    def validate(self) -> None:
        d = self.entities.shape[1]
        for name, tensor in (("users", self.users), ("relations", self.relations)):
            if tensor.ndim != 2 or tensor.shape[1] != d:
                raise DimensionError(f"{name} com dimensão {tensor.shape}, esperado (*, {d})")
        for layer, weight in enumerate(self.weights):
            if weight.shape != (d, d):
                raise DimensionError(f"W{layer} com forma {weight.shape}, esperado ({d}, {d})")

    def check_finite(self) -> None:
        for name, tensor in self.tensors().items():
            if not np.all(np.isfinite(tensor)):
                raise NonFiniteError(f"parâmetro {name} com valores não finitos", term=name)

    def equals(self, other: "ModelParams") -> bool:
        mine, theirs = self.tensors(), other.tensors()
        return mine.keys() == theirs.keys() and all(np.array_equal(mine[k], theirs[k]) for k in mine)
