"""
Linha de comando.

USO:
python . gen-synthetic --out data/synth
python . train --data-dir data/synth --preset music --seed 7 --out runs/music
python . evaluate --data-dir data/synth --checkpoint runs/music/best.ckpt
python . grad-check
"""

import functools
import os
import sys
from typing import Optional, Tuple

import click
import numpy as np

from modules.data.interactions import Split, build_dataset, save_split
from modules.data.synthetic import POSITIVE_THRESHOLD, gen_synthetic
from modules.errors import KgnnError
from modules.evaluation import experiments
from modules.evaluation.benchmark import benchmark_scalability
from modules.evaluation.metrics import evaluate as evaluate_model
from modules.kg.analysis import DEFAULT_CAP, proximity_study
from modules.kg.store import KnowledgeGraph, load_kg
from modules.model.params import ModelParams
from modules.smoothness.diagnostics import propagate_user
from modules.training.checkpoint import checkpoint_load
from modules.training.config import HyperParams
from modules.training.gradcheck import TOLERANCE, run_grad_check
from modules.training.trainer import train as train_model
from tools.loader import load_hyperparams, load_synthetic_spec
from tools.logger import get_logger, setup_logging

log = get_logger(__name__)


def handle_errors(command):
    """Erros do domínio viram mensagem no stderr e código de saída 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except KgnnError as e:
            log.debug("falha", exc_info=True)
            raise click.ClickException(f"{type(e).__name__}: {e}") from e
        except FileNotFoundError as e:
            raise click.ClickException(str(e)) from e

    return wrapper


def _threshold(value: str) -> Optional[float]:
    return None if value.lower() == "none" else float(value)


def data_options(command):
    """Arquivos de entrada: --data-dir com kg.tsv/item_map.tsv/ratings.tsv, ou cada arquivo."""
    options = [
        click.option("--data-dir", type=click.Path(exists=True, file_okay=False), help="Diretório com kg.tsv, item_map.tsv e ratings.tsv"),
        click.option("--triples", type=click.Path(exists=True, dir_okay=False), help="TSV head\\trelation\\ttail"),
        click.option("--item-map", type=click.Path(exists=True, dir_okay=False), help="TSV item\\tentity"),
        click.option("--ratings", type=click.Path(exists=True, dir_okay=False), help="TSV user\\titem\\trating[\\ttimestamp]"),
        click.option("--threshold", default=str(POSITIVE_THRESHOLD), show_default=True, help="Nota mínima de positivo ('none': tudo é positivo)"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def hyperparam_options(command):
    options = [
        click.option("--preset", help="Preset de config/presets (movie, book, music, restaurant)"),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Arquivo YAML ou chave=valor"),
        click.option("--S", "sample_size", help="Vizinhos amostrados por entidade ('none' = exaustivo)"),
        click.option("--d", "dim", type=int, help="Dimensão das camadas"),
        click.option("--L", "layers", type=int, help="Número de camadas"),
        click.option("--lambda", "ls_weight", type=float, help="Peso da regularização por suavidade"),
        click.option("--gamma", "l2_weight", type=float, help="Peso da regularização L2"),
        click.option("--eta", "learning_rate", type=float, help="Taxa de aprendizado"),
        click.option("--epochs", type=int),
        click.option("--batch-size", type=int),
        click.option("--seed", type=int),
        click.option("--K", "unroll_steps", type=int, help="Passos de propagação desenrolados (padrão L+2)"),
        click.option("--train-ratio", type=float, help="Fração do treino usada (cold-start)"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


_HP_FLAGS = (
    "sample_size", "dim", "layers", "ls_weight", "l2_weight", "learning_rate",
    "epochs", "batch_size", "seed", "unroll_steps", "train_ratio",
)


def _resolve_hp(kwargs) -> HyperParams:
    return load_hyperparams(
        preset=kwargs.pop("preset", None),
        config_path=kwargs.pop("config_path", None),
        overrides={name: kwargs.pop(name, None) for name in _HP_FLAGS},
    )


def _paths(data_dir, triples, item_map, ratings) -> Tuple[str, str, str]:
    if data_dir:
        triples = triples or os.path.join(data_dir, "kg.tsv")
        item_map = item_map or os.path.join(data_dir, "item_map.tsv")
        ratings = ratings or os.path.join(data_dir, "ratings.tsv")
    if not (triples and item_map):
        raise click.UsageError("informe --data-dir ou --triples e --item-map")
    return triples, item_map, ratings


def _load(data_dir, triples, item_map, ratings, threshold, seed) -> Tuple[KnowledgeGraph, Split]:
    triples, item_map, ratings = _paths(data_dir, triples, item_map, ratings)
    if not ratings:
        raise click.UsageError("informe --ratings")
    kg = load_kg(triples, item_map)
    _, _, data = build_dataset(ratings, kg.item_index(), _threshold(threshold), seed)
    return kg, data


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Logs em nível DEBUG")
def cli(verbose: bool):
    """Recomendação com GNN sobre grafo de conhecimento e suavidade de rótulos."""
    setup_logging(verbose)


@cli.command()
@data_options
@hyperparam_options
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs/latest", show_default=True)
@click.option("--resume", type=click.Path(exists=True, dir_okay=False), help="Checkpoint para retomar")
@click.option("--eval-users", type=int, help="Máximo de usuários no Recall@10 de validação")
@handle_errors
def train(data_dir, triples, item_map, ratings, threshold, out_dir, resume, eval_users, **kwargs):
    """Treina o modelo; grava metrics.csv e checkpoints em --out."""
    hp = _resolve_hp(kwargs)
    kg, data = _load(data_dir, triples, item_map, ratings, threshold, hp.seed)
    save_split(data, os.path.join(out_dir, "split"))
    result = train_model(data, kg, hp, out_dir=out_dir, resume_from=resume, eval_users=eval_users)
    click.echo(f"melhor época: {result.best_epoch}")
    click.echo(f"métricas: {result.metrics_path}")


@cli.command()
@data_options
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--part", type=click.Choice(["test", "validation"]), default="test", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="CSV com o relatório")
@handle_errors
def evaluate(data_dir, triples, item_map, ratings, threshold, checkpoint, part, out_path):
    """AUC (e AUC diária quando há timestamps) e Recall@K na partição escolhida."""
    saved = checkpoint_load(checkpoint)
    kg, data = _load(data_dir, triples, item_map, ratings, threshold, saved.hp.seed)
    report = evaluate_model(saved.params, kg, saved.hp, data, part=part)
    click.echo(str(report))
    for day, value in sorted(report.daily_auc.items()):
        click.echo(f"dia {day}: AUC={value:.4f}")
    if out_path:
        report.save(out_path)


@cli.command()
@data_options
@click.option("--user", required=True, type=int, help="Id denso do usuário")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), help="Sem checkpoint, usa parâmetros iniciais")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=16, show_default=True, help="Dimensão quando não há checkpoint")
@click.option("--iterative", is_flag=True, help="Itera até convergir em vez da forma fechada")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="labels.csv", show_default=True)
@handle_errors
def propagate(data_dir, triples, item_map, ratings, threshold, user, checkpoint, seed, dim, iterative, out_path):
    """Propaga os rótulos de treino de um usuário e grava (entidade, l*) em CSV."""
    if checkpoint:
        saved = checkpoint_load(checkpoint)
        params, seed = saved.params, saved.hp.seed
    kg, data = _load(data_dir, triples, item_map, ratings, threshold, seed)
    if not checkpoint:
        params = ModelParams.initialize(
            data.train.user_count, kg.relation_count, kg.entity_count, dim, 1, np.random.default_rng(seed)
        )
    if not 0 <= user < data.train.user_count:
        raise click.BadParameter(f"usuário {user} fora do intervalo [0, {data.train.user_count})", param_hint="--user")

    labels = data.train.labels_by_user().get(user, {})
    result = propagate_user(kg, params.users[user], params.relations, labels, iterative=iterative)
    result.save(out_path, kg)
    click.echo(f"resíduo harmônico: {result.residual:.3e}")
    click.echo(f"taxa de convergência: {result.rate:.6f} (ε={result.epsilon:.6f})")
    click.echo(f"rótulos: {out_path}")


@cli.command("analyze-kg")
@data_options
@click.option("--pairs", type=int, default=10000, show_default=True, help="Pares por grupo no estudo de proximidade")
@click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="CSV group,distance,probability")
@handle_errors
def analyze_kg(data_dir, triples, item_map, ratings, threshold, pairs, cap, seed, out_path):
    """Estatísticas do grafo e, com avaliações, distâncias entre itens com e sem usuário em comum."""
    triples, item_map, ratings = _paths(data_dir, triples, item_map, ratings)
    kg = load_kg(triples, item_map)
    for name, value in kg.stats().items():
        click.echo(f"{name}: {value}")
    if not ratings or not os.path.exists(ratings):
        return

    _, matrix, _ = build_dataset(ratings, kg.item_index(), _threshold(threshold), seed)
    study = proximity_study(kg, matrix, pairs, np.random.default_rng(seed), cap=cap)
    click.echo(f"distância média (usuário em comum): {study.mean_distance('common'):.4f}")
    click.echo(f"distância média (sem usuário em comum): {study.mean_distance('no_common'):.4f}")
    if out_path:
        study.save(out_path)


@cli.command("gen-synthetic")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="YAML com a especificação")
@click.option("--entities", type=int)
@click.option("--items", type=int)
@click.option("--relations", type=int)
@click.option("--users", type=int)
@click.option("--strength", type=float)
@click.option("--seed", type=int)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="data/synthetic", show_default=True)
@handle_errors
def gen_synthetic_command(config_path, out_dir, **overrides):
    """Gera grafo, mapa de itens e avaliações sintéticos com suavidade planejada."""
    spec = load_synthetic_spec(config_path, overrides)
    files = gen_synthetic(spec, out_dir)
    click.echo(f"{files.triples}\n{files.item_map}\n{files.ratings}")


@cli.command()
@data_options
@hyperparam_options
@click.option("--multipliers", default="1,2,3,4,5", show_default=True)
@click.option("--steps", type=int, default=20, show_default=True, help="Minilotes por época medida")
@click.option("--repeats", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="benchmark.csv", show_default=True)
@handle_errors
def benchmark(data_dir, triples, item_map, ratings, threshold, multipliers, steps, repeats, out_path, **kwargs):
    """Tempo por época com as triplas multiplicadas (S e cronograma de lotes fixos)."""
    hp = _resolve_hp(kwargs)
    kg, data = _load(data_dir, triples, item_map, ratings, threshold, hp.seed)
    factors = [int(m) for m in multipliers.split(",") if m.strip()]
    points = benchmark_scalability(kg, data, hp, factors, steps=steps, repeats=repeats, out_path=out_path)
    baseline = points[0].seconds_per_epoch
    for point in points:
        click.echo(f"{point.multiplier}x: {point.seconds_per_epoch:.4f}s (razão {point.seconds_per_epoch / baseline:.3f})")


_SWEEPS = {
    "lambda": experiments.lambda_sweep,
    "layers": experiments.layer_sweep,
    "dim": experiments.dimension_sweep,
    "train_ratio": experiments.train_ratio_sweep,
}


@cli.command()
@data_options
@hyperparam_options
@click.option("--parameter", type=click.Choice(sorted(_SWEEPS)), required=True)
@click.option("--values", required=True, help="Lista separada por vírgulas")
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="sweep.csv", show_default=True)
@handle_errors
def sweep(data_dir, triples, item_map, ratings, threshold, parameter, values, seeds, out_path, **kwargs):
    """Varre um hiperparâmetro sobre várias sementes e grava as métricas por execução."""
    hp = _resolve_hp(kwargs)
    kg, data = _load(data_dir, triples, item_map, ratings, threshold, hp.seed)
    grid = [float(v) for v in values.split(",") if v.strip()]
    if parameter in ("layers", "dim"):
        grid = [int(v) for v in grid]
    result = _SWEEPS[parameter](data, kg, hp, grid, [int(s) for s in seeds.split(",")], out_path=out_path)
    metric = "test_auc" if parameter == "train_ratio" else "val_r10"
    for value, mean in result.means(metric).items():
        click.echo(f"{parameter}={value}: {metric} médio {mean:.4f}")


@cli.command("grad-check")
@click.option("--seed", type=int, default=0, show_default=True)
@handle_errors
def grad_check(seed):
    """Gradiente analítico contra diferenças finitas; sai com 0 se o erro < 1e-4."""
    report = run_grad_check(seed)
    click.echo(f"erro relativo máximo: {report.max_error:.3e} ({report.worst})")
    for name, error in report.per_tensor.items():
        click.echo(f"  {name}: {error:.3e}")
    if not report.passed(TOLERANCE):
        sys.exit(1)
