import os
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from modules.errors import ContractViolation, DataValidationError, ParseError
from tools.logger import get_logger
from tools.tsv import read_tsv, write_tsv

log = get_logger(__name__)

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class RatedPositives:
    """Interações positivas após o limiar, mais os pares descartados (abaixo do limiar)."""

    user_tokens: Tuple[str, ...]
    item_count: int
    users: np.ndarray
    items: np.ndarray
    days: np.ndarray  # -1 quando o arquivo não tem timestamp
    discarded_users: np.ndarray
    discarded_items: np.ndarray

    @property
    def user_count(self) -> int:
        return len(self.user_tokens)

    def __len__(self) -> int:
        return len(self.users)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """
    Rótulos implícitos y_uv ∈ {0,1}, ordenados por (usuário, item), sem pares repetidos.
    """

    users: np.ndarray
    items: np.ndarray
    labels: np.ndarray
    days: np.ndarray
    user_count: int
    item_count: int

    def __post_init__(self):
        keys = self.users.astype(np.int64) * max(self.item_count, 1) + self.items
        if len(keys) > 1 and np.any(np.diff(keys) <= 0):
            raise DataValidationError("linhas fora de ordem ou par (usuário, item) repetido")
        if len(self.items) and (self.items.min() < 0 or self.items.max() >= self.item_count):
            raise DataValidationError("item fora do catálogo")

    @classmethod
    def from_rows(
        cls,
        users,
        items,
        labels,
        user_count: int,
        item_count: int,
        days=None,
    ) -> "InteractionMatrix":
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int8)
        days = np.full(len(users), -1, dtype=np.int64) if days is None else np.asarray(days, dtype=np.int64)
        order = np.lexsort((items, users))
        return cls(users[order], items[order], labels[order], days[order], user_count, item_count)

    def __len__(self) -> int:
        return len(self.users)

    def __eq__(self, other) -> bool:
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (
            self.user_count == other.user_count
            and self.item_count == other.item_count
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("users", "items", "labels", "days")
            )
        )

    __hash__ = None

    @property
    def has_days(self) -> bool:
        return bool(len(self.days)) and bool((self.days >= 0).all())

    def select(self, rows: np.ndarray) -> "InteractionMatrix":
        rows = np.sort(np.asarray(rows, dtype=np.int64))
        return InteractionMatrix(
            self.users[rows],
            self.items[rows],
            self.labels[rows],
            self.days[rows],
            self.user_count,
            self.item_count,
        )

    def rows_of(self, user: int) -> Tuple[np.ndarray, np.ndarray]:
        start, end = np.searchsorted(self.users, [user, user + 1])
        return self.items[start:end], self.labels[start:end]

    def positives_by_user(self) -> Dict[int, np.ndarray]:
        mask = self.labels == 1
        return _group(self.users[mask], self.items[mask])

    def labels_by_user(self) -> Dict[int, Dict[int, int]]:
        result: Dict[int, Dict[int, int]] = {}
        for user, item, label in zip(self.users.tolist(), self.items.tolist(), self.labels.tolist()):
            result.setdefault(user, {})[item] = label
        return result


@dataclass(frozen=True)
class Split:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def with_train_ratio(self, ratio: float, rng: np.random.Generator) -> "Split":
        """Cenário de cold-start: mantém validação e teste, usa só `ratio` do treino."""
        if not 0.0 < ratio <= 1.0:
            raise ContractViolation(f"razão de treino deve estar em (0, 1] (recebido {ratio})")
        if ratio == 1.0:
            return self
        keep = max(1, int(round(len(self.train) * ratio)))
        rows = rng.permutation(len(self.train))[:keep]
        return Split(self.train.select(rows), self.validation, self.test)


def _group(keys: np.ndarray, values: np.ndarray) -> Dict[int, np.ndarray]:
    if len(keys) == 0:
        return {}
    order = np.argsort(keys, kind="stable")
    keys, values = keys[order], values[order]
    bounds = np.flatnonzero(np.diff(keys)) + 1
    return {
        int(chunk_keys[0]): np.sort(chunk_values)
        for chunk_keys, chunk_values in zip(np.split(keys, bounds), np.split(values, bounds))
    }


def load_ratings(
    path: str,
    positive_threshold: Optional[float],
    item_index: Optional[Mapping[str, int]] = None,
) -> RatedPositives:
    """
    Lê o TSV user\\titem\\trating[\\ttimestamp] e converte em feedback implícito.

    rating >= limiar vira positivo; abaixo do limiar o par é descartado (nem
    positivo nem candidato a negativo). Limiar None: tudo é positivo. Itens
    fora de `item_index` são ignorados.
    """
    user_ids: Dict[str, int] = {}
    item_ids: Dict[str, int] = dict(item_index) if item_index is not None else {}
    positives: Dict[Tuple[int, int], int] = {}
    discarded = set()
    unknown_items = 0

    for line_no, fields in read_tsv(path, 3, 4):
        user_token, item_token, rating_token = fields[:3]
        try:
            rating = float(rating_token)
            day = int(fields[3]) // SECONDS_PER_DAY if len(fields) == 4 else -1
        except ValueError:
            raise ParseError(path, line_no, f"valor numérico inválido: {fields[2:]}")

        if item_token not in item_ids:
            if item_index is not None:
                unknown_items += 1
                continue
            item_ids[item_token] = len(item_ids)
        if user_token not in user_ids:
            user_ids[user_token] = len(user_ids)

        key = (user_ids[user_token], item_ids[item_token])
        if key in positives or key in discarded:
            continue
        if positive_threshold is None or rating >= positive_threshold:
            positives[key] = day
        else:
            discarded.add(key)

    if unknown_items:
        log.warning(f"⚠️  {unknown_items} avaliações de itens fora do grafo foram ignoradas")

    pairs = np.asarray(list(positives), dtype=np.int64).reshape(-1, 2)
    dropped = np.asarray(sorted(discarded), dtype=np.int64).reshape(-1, 2)
    log.info(f"Avaliações: {len(pairs)} positivas, {len(dropped)} abaixo do limiar")
    return RatedPositives(
        user_tokens=tuple(user_ids),
        item_count=len(item_ids),
        users=pairs[:, 0],
        items=pairs[:, 1],
        days=np.asarray(list(positives.values()), dtype=np.int64),
        discarded_users=dropped[:, 0],
        discarded_items=dropped[:, 1],
    )


def negative_sample(
    positives: RatedPositives,
    item_universe: np.ndarray,
    rng: np.random.Generator,
) -> InteractionMatrix:
    """
    Para cada usuário, sorteia sem reposição tantos negativos quantos positivos
    entre itens sem positivo e sem avaliação descartada (truncado pelo tamanho do pool).
    Cada negativo herda o dia do positivo com que é pareado.
    """
    universe = np.unique(np.asarray(item_universe, dtype=np.int64))
    if len(positives) and not np.isin(positives.items, universe).all():
        raise ContractViolation("o universo de itens não contém todos os itens positivos")

    order = np.lexsort((positives.items, positives.users))
    pos_users = positives.users[order]
    pos_items = positives.items[order]
    pos_days = positives.days[order]
    discarded = _group(positives.discarded_users, positives.discarded_items)

    users, items, labels, days = [pos_users], [pos_items], [np.ones(len(pos_users), dtype=np.int8)], [pos_days]
    bounds = np.flatnonzero(np.diff(pos_users)) + 1
    for chunk in np.split(np.arange(len(pos_users)), bounds):
        if len(chunk) == 0:
            continue
        user = int(pos_users[chunk[0]])
        excluded = pos_items[chunk]
        if user in discarded:
            excluded = np.union1d(excluded, discarded[user])
        pool = np.setdiff1d(universe, excluded, assume_unique=False)
        count = min(len(chunk), len(pool))
        if count == 0:
            continue
        negatives = rng.choice(pool, size=count, replace=False)
        users.append(np.full(count, user, dtype=np.int64))
        items.append(negatives.astype(np.int64))
        labels.append(np.zeros(count, dtype=np.int8))
        days.append(pos_days[chunk][:count])

    return InteractionMatrix.from_rows(
        np.concatenate(users),
        np.concatenate(items),
        np.concatenate(labels),
        user_count=positives.user_count,
        item_count=max(positives.item_count, int(universe.max()) + 1 if len(universe) else 0),
        days=np.concatenate(days),
    )


def split(matrix: InteractionMatrix, rng: np.random.Generator) -> Split:
    """Embaralha as linhas e particiona 6:2:2; o resto do arredondamento vai para o treino."""
    n = len(matrix)
    if n < 5:
        raise ContractViolation(f"são necessárias ao menos 5 linhas para a divisão (recebidas {n})")
    n_validation = n * 2 // 10
    n_test = n * 2 // 10
    n_train = n - n_validation - n_test

    perm = rng.permutation(n)
    return Split(
        train=matrix.select(perm[:n_train]),
        validation=matrix.select(perm[n_train : n_train + n_validation]),
        test=matrix.select(perm[n_train + n_validation :]),
    )


def save_split(data: Split, directory: str) -> Dict[str, str]:
    paths = {}
    for name in ("train", "validation", "test"):
        part: InteractionMatrix = getattr(data, name)
        path = os.path.join(directory, f"{name}.tsv")
        write_tsv(path, zip(part.users.tolist(), part.items.tolist(), part.labels.tolist()))
        paths[name] = path
    return paths


def build_dataset(
    ratings_path: str,
    item_index: Mapping[str, int],
    positive_threshold: Optional[float],
    seed: int,
) -> Tuple[RatedPositives, InteractionMatrix, Split]:
    """Pipeline completo: limiar, amostragem de negativos e divisão, determinístico por seed."""
    rng = np.random.default_rng(seed)
    rated = load_ratings(ratings_path, positive_threshold, item_index=item_index)
    matrix = negative_sample(rated, np.arange(len(item_index)), rng)
    data = split(matrix, rng)
    log.info(f"🎯 Divisão treino/validação/teste: {data.sizes()}")
    return rated, matrix, data
