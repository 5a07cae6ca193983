"""
Contêiner binário de checkpoint:

    magic (8 bytes) | versão (uint32) | tamanho do cabeçalho (uint32) |
    cabeçalho JSON (hiperparâmetros, época, manifesto dos tensores) |
    tensores float64 little-endian na ordem do manifesto
"""

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from modules.errors import CheckpointError, DimensionError
from modules.model.params import ModelParams
from modules.training.adam import AdamState
from modules.training.config import HyperParams
from tools.logger import get_logger

log = get_logger(__name__)

MAGIC = b"KGNNLS\x00\x01"
VERSION = 1
_PREFIX = struct.Struct("<8sII")
_DTYPE = np.dtype("<f8")


@dataclass(eq=False)
class Checkpoint:
    params: ModelParams
    adam: AdamState
    hp: HyperParams
    epoch: int
    meta: Dict[str, Any] = field(default_factory=dict)


def _manifest(params: ModelParams, adam: AdamState) -> List[Dict[str, Any]]:
    entries = []
    for group, tensors in (("params", params.tensors()), ("first", adam.first), ("second", adam.second)):
        for name, tensor in tensors.items():
            entries.append({"group": group, "name": name, "shape": list(tensor.shape)})
    return entries


def checkpoint_save(path: str, checkpoint: Checkpoint) -> None:
    params, adam = checkpoint.params, checkpoint.adam
    header = {
        "hp": checkpoint.hp.model_dump(),
        "epoch": checkpoint.epoch,
        "adam_step": adam.step,
        "meta": checkpoint.meta,
        "tensors": _manifest(params, adam),
    }
    encoded = json.dumps(header).encode("utf-8")
    groups = {"params": params.tensors(), "first": adam.first, "second": adam.second}

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(encoded)))
        f.write(encoded)
        for entry in header["tensors"]:
            f.write(np.ascontiguousarray(groups[entry["group"]][entry["name"]], dtype=_DTYPE).tobytes())
    os.replace(tmp, path)
    log.debug(f"checkpoint salvo em {path} (época {checkpoint.epoch})")


def checkpoint_load(path: str, expected: Optional[HyperParams] = None) -> Checkpoint:
    """Lê um checkpoint; com `expected`, a dimensão d precisa coincidir."""
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint não encontrado: {path}")
    with open(path, "rb") as f:
        blob = f.read()

    if len(blob) < _PREFIX.size:
        raise CheckpointError(f"checkpoint truncado: {path}")
    magic, version, header_size = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"arquivo não é um checkpoint: {path}")
    if version != VERSION:
        raise CheckpointError(f"versão de checkpoint {version} não suportada (esperada {VERSION})")

    offset = _PREFIX.size
    if len(blob) < offset + header_size:
        raise CheckpointError(f"checkpoint truncado no cabeçalho: {path}")
    try:
        header = json.loads(blob[offset : offset + header_size].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cabeçalho inválido em {path}: {e}") from e
    offset += header_size

    groups: Dict[str, Dict[str, np.ndarray]] = {"params": {}, "first": {}, "second": {}}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * _DTYPE.itemsize
        if len(blob) < offset + size:
            raise CheckpointError(f"checkpoint truncado no tensor {entry['group']}/{entry['name']}: {path}")
        groups[entry["group"]][entry["name"]] = (
            np.frombuffer(blob, dtype=_DTYPE, count=size // _DTYPE.itemsize, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset += size
    if offset != len(blob):
        raise CheckpointError(f"bytes sobrando após os tensores: {path}")

    hp = HyperParams.model_validate(header["hp"])
    if expected is not None and expected.dim != hp.dim:
        raise DimensionError(f"checkpoint com d={hp.dim}, configuração atual d={expected.dim}")

    return Checkpoint(
        params=ModelParams.from_tensors(groups["params"]),
        adam=AdamState(first=groups["first"], second=groups["second"], step=int(header["adam_step"])),
        hp=hp,
        epoch=int(header["epoch"]),
        meta=header.get("meta", {}),
    )
