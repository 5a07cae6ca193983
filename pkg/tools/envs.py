import os
from typing import Dict, Mapping, Optional

from modules.training.config import HyperParams, canonical_key
from tools.logger import get_logger

log = get_logger(__name__)

ENV_PREFIX = "KGNNLS_"


def load_env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
    """
    Lê KGNNLS_<CAMPO> do ambiente (KGNNLS_LAMBDA, KGNNLS_SAMPLE_SIZE, KGNNLS_S...)
    e devolve {campo: valor}; variáveis com o prefixo que não são campos ficam de fora.
    """
    environ = os.environ if environ is None else environ
    fields = HyperParams.model_fields
    overrides = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = canonical_key(name[len(ENV_PREFIX) :])
        if key not in fields:
            log.debug(f"variável {name} ignorada (não é hiperparâmetro)")
            continue
        overrides[key] = value
    if overrides:
        log.info(f"Overrides do ambiente: {', '.join(sorted(overrides))}")
    return overrides
