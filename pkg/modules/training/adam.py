from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from modules.errors import DimensionError
from modules.model.params import ModelParams

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass(eq=False)
class AdamState:
    """Momentos de primeira e segunda ordem por tensor, no formato de ModelParams.tensors()."""

    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        tensors = params.tensors()
        return cls(
            first={name: np.zeros_like(t) for name, t in tensors.items()},
            second={name: np.zeros_like(t) for name, t in tensors.items()},
        )

    def copy(self) -> "AdamState":
        return AdamState(
            first={name: t.copy() for name, t in self.first.items()},
            second={name: t.copy() for name, t in self.second.items()},
            step=self.step,
        )


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, learning_rate: float) -> None:
    """Atualização Adam com correção de viés, in-place em params e state."""
    tensors, gradients = params.tensors(), grads.tensors()
    if tensors.keys() != state.first.keys():
        raise DimensionError("estado do Adam não corresponde aos parâmetros")

    state.step += 1
    bias1 = 1.0 - BETA1 ** state.step
    bias2 = 1.0 - BETA2 ** state.step
    step_size = learning_rate / bias1

    for name, tensor in tensors.items():
        g = gradients[name]
        if g.shape != tensor.shape:
            raise DimensionError(f"gradiente de {name} com forma {g.shape}, esperado {tensor.shape}")
        m, v = state.first[name], state.second[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * (g * g)
        tensor -= step_size * m / (np.sqrt(v / bias2) + EPSILON)
