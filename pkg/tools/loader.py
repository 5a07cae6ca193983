import os
from typing import Any, Dict, Mapping, Optional

import yaml
from pydantic import ValidationError

from modules.data.synthetic import SyntheticSpec
from modules.errors import ConfigError
from modules.training.config import HyperParams, canonical_key
from tools.envs import load_env_overrides
from tools.logger import get_logger

log = get_logger(__name__)

CONFIG_ROOT = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")
PRESETS_DIR = os.path.join(CONFIG_ROOT, "presets")


def _read_yaml(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"YAML inválido em {path}: {e}") from e
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: esperado um mapeamento chave: valor")
    return raw


def _read_key_values(path: str) -> Dict[str, str]:
    values = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: esperado chave=valor")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def read_config_file(path: str) -> Dict[str, Any]:
    """YAML para .yaml/.yml; qualquer outro sufixo é lido como linhas chave=valor."""
    if not os.path.exists(path):
        raise ConfigError(f"Arquivo de configuração não encontrado: {path}")
    if path.endswith(".yaml") or path.endswith(".yml"):
        return _read_yaml(path)
    return _read_key_values(path)


def list_presets(presets_dir: str = PRESETS_DIR) -> Dict[str, str]:
    """Presets disponíveis (nome -> caminho)"""
    if not os.path.exists(presets_dir):
        raise ConfigError(f"Diretório de presets não encontrado: {presets_dir}")
    presets = {}
    for filename in sorted(os.listdir(presets_dir)):
        if filename.endswith(".yaml") or filename.endswith(".yml"):
            presets[filename.replace(".yaml", "").replace(".yml", "")] = os.path.join(presets_dir, filename)
    return presets


def _canonical(values: Mapping[str, Any]) -> Dict[str, Any]:
    return {canonical_key(str(key)): value for key, value in values.items()}


def load_hyperparams(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
    presets_dir: str = PRESETS_DIR,
) -> HyperParams:
    """
    Resolve os hiperparâmetros em camadas: padrões < preset < arquivo <
    variáveis KGNNLS_* < overrides (flags da CLI).
    """
    merged: Dict[str, Any] = {}
    if preset:
        presets = list_presets(presets_dir)
        if preset not in presets:
            raise ConfigError(f"Preset desconhecido: {preset} (disponíveis: {', '.join(presets)})")
        merged.update(_canonical(_read_yaml(presets[preset])))
    if config_path:
        merged.update(_canonical(read_config_file(config_path)))
    merged.update(_canonical(load_env_overrides(environ)))
    merged.update(_canonical({k: v for k, v in (overrides or {}).items() if v is not None}))

    try:
        hp = HyperParams.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"Configuração inválida: {e}") from e
    log.debug(f"Hiperparâmetros resolvidos: {hp.summary()}")
    return hp


def load_synthetic_spec(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SyntheticSpec:
    path = path or os.path.join(CONFIG_ROOT, "synthetic.yaml")
    raw = read_config_file(path)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return SyntheticSpec(**raw)
    except ValidationError as e:
        raise ConfigError(f"Especificação sintética inválida: {e}") from e


def load_grids(path: Optional[str] = None) -> Dict[str, Any]:
    """Espaços de busca documentados em config/grids.yaml (sem busca automática)."""
    return _read_yaml(path or os.path.join(CONFIG_ROOT, "grids.yaml"))
