import csv
import os
from typing import Iterable, Iterator, List, Sequence, Tuple

from modules.errors import ParseError


def read_tsv(path: str, min_columns: int, max_columns: int = 0) -> Iterator[Tuple[int, List[str]]]:
    """Itera (número da linha, colunas) de um TSV UTF-8, ignorando linhas vazias."""
    max_columns = max_columns or min_columns
    if not os.path.exists(path):
        raise FileNotFoundError(f"Arquivo não encontrado: {path}")

    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            fields = [field.strip() for field in line.rstrip("\n").split("\t")]
            if not min_columns <= len(fields) <= max_columns:
                raise ParseError(
                    path,
                    line_no,
                    f"esperadas {min_columns}..{max_columns} colunas, encontradas {len(fields)}",
                )
            if any(not field for field in fields):
                raise ParseError(path, line_no, "coluna vazia")
            yield line_no, fields


def write_tsv(path: str, rows: Iterable[Sequence]) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for row in rows:
            f.write("\t".join(str(value) for value in row) + "\n")


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
