import numpy as np
from pytest import approx, mark, raises

from modules.errors import ContractViolation
from modules.evaluation.benchmark import BENCHMARK_HEADER, benchmark_scalability, multiply_edges, time_epoch
from modules.evaluation.experiments import SWEEP_HEADER, SweepResult, SweepRun, lambda_sweep, layer_sweep


def test_multiply_edges_keeps_the_original_graph(toy_kg):
    tripled = multiply_edges(toy_kg, 3, np.random.default_rng(0))
    assert tripled.edge_count == 3 * toy_kg.edge_count
    assert tripled.edges[: toy_kg.edge_count].tolist() == toy_kg.edges.tolist()
    assert tripled.item_entities.tolist() == toy_kg.item_entities.tolist()
    assert multiply_edges(toy_kg, 1, np.random.default_rng(0)).edge_count == toy_kg.edge_count


def test_multiply_edges_limits(toy_kg):
    with raises(ContractViolation):
        multiply_edges(toy_kg, 0, np.random.default_rng(0))
    with raises(ContractViolation):
        multiply_edges(toy_kg, 5, np.random.default_rng(0))


def test_benchmark_writes_one_row_per_multiplier(synthetic_data, small_hp, tmp_path):
    kg, _, data = synthetic_data
    out = tmp_path / "benchmark.csv"
    points = benchmark_scalability(kg, data, small_hp, multipliers=(1, 2), steps=1, repeats=1, out_path=str(out))

    assert [p.multiplier for p in points] == [1, 2]
    assert points[1].edges == 2 * points[0].edges
    assert all(p.seconds_per_epoch > 0 for p in points)
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(BENCHMARK_HEADER)
    assert len(lines) == 3
    with raises(ContractViolation):
        benchmark_scalability(kg, data, small_hp, steps=0)


def test_sweep_result_aggregates():
    result = SweepResult("ls_weight", [
        SweepRun(0.0, 0, 0.7, 0.10, 0.7, 0.1),
        SweepRun(0.0, 1, 0.7, 0.20, 0.7, 0.2),
        SweepRun(0.5, 0, 0.8, 0.15, 0.8, 0.2),
        SweepRun(0.5, 1, 0.8, 0.30, 0.8, 0.3),
    ])
    assert result.values() == [0.0, 0.5]
    assert result.means() == approx({0.0: 0.15, 0.5: 0.225})
    assert result.paired_difference(0.5, 0.0) == approx(0.075)
    assert result.rows()[0] == ("ls_weight", 0.0, 0, 0.7, 0.10, 0.7, 0.1)


def test_lambda_sweep_runs_every_seed(synthetic_data, small_hp, tmp_path):
    kg, _, data = synthetic_data
    out = tmp_path / "sweep.csv"
    result = lambda_sweep(data, kg, small_hp.override(epochs=1), (0.0, 0.5), seeds=(0, 1), out_path=str(out))

    assert len(result.runs) == 4
    assert {(run.value, run.seed) for run in result.runs} == {(0.0, 0), (0.0, 1), (0.5, 0), (0.5, 1)}
    assert all(0.0 <= run.test_auc <= 1.0 for run in result.runs)
    assert out.read_text().splitlines()[0] == ",".join(SWEEP_HEADER)


@mark.slow
def test_smoothness_does_not_hurt_on_planted_data(planted_data, small_hp):
    kg, _, data = planted_data
    hp = small_hp.override(epochs=10, learning_rate=2e-2)
    result = lambda_sweep(data, kg, hp, (0.0, 0.5), seeds=(0, 1, 2, 3, 4))
    means = result.means("val_r10")
    assert means[0.5] >= means[0.0], f"{means} (diferença pareada {result.paired_difference(0.5, 0.0):+.4f})"


@mark.slow
def test_four_layers_over_smooth(planted_data, small_hp):
    kg, _, data = planted_data
    result = layer_sweep(data, kg, small_hp.override(epochs=10, learning_rate=2e-2), (1, 2, 4), seeds=(0, 1, 2, 3, 4))
    means = result.means("val_r10")
    assert means[4.0] <= max(means[1.0], means[2.0])


@mark.slow
def test_epoch_time_is_flat_with_fixed_sample_size(planted_data, small_hp):
    kg, _, data = planted_data
    points = benchmark_scalability(kg, data, small_hp, multipliers=(1, 5), steps=10, repeats=3)
    assert points[1].seconds_per_epoch <= 2.0 * points[0].seconds_per_epoch


def test_time_epoch_is_positive(synthetic_data, small_hp):
    kg, _, data = synthetic_data
    assert time_epoch(kg, data, small_hp, steps=1) > 0
