import numpy as np
from pytest import approx, mark, raises

from conftest import adjacency, random_connected_adjacency
from modules.errors import ContractViolation, SingularSystemError
from modules.model.scoring import build_transition
from modules.smoothness.propagation import (
    LabelVector,
    PartitionedTransition,
    closed_form_labels,
    convergence_rate,
    energy,
    harmonic_labels,
    propagate_step,
    propagate_to_convergence,
    verify_harmonic,
)

PATH_MASK = np.array([True, False, False, True])
PATH_CLAMPS = np.array([1.0, 0.0])


def test_path_closed_form(path_adjacency):
    labels = harmonic_labels(path_adjacency, PATH_MASK, PATH_CLAMPS)
    assert labels.values == approx([1.0, 2 / 3, 1 / 3, 0.0])
    assert verify_harmonic(labels, path_adjacency) < 1e-12


def test_path_iterative(path_adjacency):
    initial = LabelVector.initial(4, [0, 3], PATH_CLAMPS)
    result = propagate_to_convergence(initial, build_transition(path_adjacency), PATH_CLAMPS, tol=1e-12)
    assert result.converged
    assert result.labels.values == approx([1.0, 2 / 3, 1 / 3, 0.0], abs=1e-10)
    # a variação entre passos nunca cresce
    assert all(b <= a + 1e-15 for a, b in zip(result.deltas, result.deltas[1:]))


def test_single_step_keeps_clamps(path_adjacency):
    initial = LabelVector.initial(4, [0, 3], PATH_CLAMPS, fill=0.5)
    step = propagate_step(initial, build_transition(path_adjacency), PATH_CLAMPS)
    assert step.values == approx([1.0, 0.75, 0.25, 0.0])


def test_two_steps_from_zero(path_adjacency):
    P = build_transition(path_adjacency)
    first = propagate_step(LabelVector.initial(4, [0, 3], PATH_CLAMPS), P, PATH_CLAMPS)
    assert first.values == approx([1.0, 0.5, 0.0, 0.0])
    second = propagate_step(first, P, PATH_CLAMPS)
    assert second.values == approx([1.0, 0.5, 0.25, 0.0])


def test_invalid_tolerance(path_adjacency):
    with raises(ContractViolation):
        propagate_to_convergence(LabelVector.initial(4, [0], [1.0]), build_transition(path_adjacency), [1.0], tol=0)


def test_component_without_clamps_is_singular():
    adj = adjacency(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)])
    mask = np.array([True, False, True, False, False, False])
    with raises(SingularSystemError) as error:
        harmonic_labels(adj, mask, [1.0, 0.0])
    assert set(error.value.entities) == {3, 4, 5}

    P = PartitionedTransition.from_transition(build_transition(adj.with_self_loops()), mask)
    with raises(SingularSystemError):
        closed_form_labels(P, [1.0, 0.0])


def test_self_loops_do_not_move_the_fixed_point():
    adj = random_connected_adjacency(np.random.default_rng(0), 12, extra=6)
    mask = np.zeros(12, dtype=bool)
    mask[[0, 5, 9]] = True
    clamps = np.array([1.0, 0.0, 1.0])
    plain = harmonic_labels(adj, mask, clamps)
    looped = harmonic_labels(adj.with_self_loops(), mask, clamps)
    assert looped.values == approx(plain.values, abs=1e-10)


@mark.parametrize("seed", range(50))
def test_maximum_principle_and_minimal_energy(seed):
    rng = np.random.default_rng(seed)
    adj = random_connected_adjacency(rng, 20, extra=15)
    mask = np.zeros(20, dtype=bool)
    mask[rng.choice(20, size=4, replace=False)] = True
    clamps = rng.uniform(0.0, 1.0, size=4)
    labels = harmonic_labels(adj, mask, clamps)

    assert labels.values.min() >= clamps.min() - 1e-12
    assert labels.values.max() <= clamps.max() + 1e-12
    assert verify_harmonic(labels, adj) < 1e-10

    best = energy(labels, adj)
    for _ in range(10):
        perturbed = labels.values.copy()
        perturbed[labels.free] += rng.normal(scale=1e-3, size=len(labels.free))
        assert energy(perturbed, adj) >= best


@mark.parametrize("seed", range(10))
def test_contraction_rate_is_bounded_by_epsilon(seed):
    rng = np.random.default_rng(seed)
    adj = random_connected_adjacency(rng, 15, extra=10)
    mask = np.zeros(15, dtype=bool)
    mask[[0, 7]] = True
    clamps = np.array([1.0, 0.0])
    fixed = harmonic_labels(adj, mask, clamps)
    P = PartitionedTransition.from_transition(build_transition(adj), mask)

    report = convergence_rate(LabelVector.initial(15, [0, 7], clamps), P, clamps, fixed.values)
    assert report.epsilon <= 1.0
    assert report.rate <= report.epsilon + 1e-6
    assert report.distances[-1] < report.distances[0]
    steps = np.arange(len(report.distances))
    assert (report.distances <= report.epsilon**steps * report.distances[0] + 1e-12).all()


@mark.parametrize("seed", range(10))
def test_epsilon_below_one_when_every_free_entity_touches_an_item(seed):
    rng = np.random.default_rng(300 + seed)
    n = 15
    items = [0, 7]
    free = [e for e in range(n) if e not in items]
    attached = rng.choice(items, size=len(free))
    attached[:2] = items
    edges = {(min(e, item), max(e, item)): rng.uniform(0.1, 2.0) for e, item in zip(free, attached.tolist())}
    for _ in range(10):
        a, b = sorted(rng.choice(free, size=2, replace=False).tolist())
        edges.setdefault((a, b), rng.uniform(0.1, 2.0))
    adj = adjacency(n, [(a, b, w) for (a, b), w in edges.items()])
    mask = np.zeros(n, dtype=bool)
    mask[items] = True
    clamps = np.array([1.0, 0.0])
    fixed = harmonic_labels(adj, mask, clamps)
    P = PartitionedTransition.from_transition(build_transition(adj), mask)

    report = convergence_rate(LabelVector.initial(n, items, clamps), P, clamps, fixed.values)
    assert report.epsilon < 1.0
    assert report.rate <= report.epsilon + 1e-6
    steps = np.arange(len(report.distances))
    assert (report.distances <= report.epsilon**steps * report.distances[0] + 1e-12).all()


def test_energy_by_hand(path_adjacency):
    assert energy(np.array([1.0, 1.0, 0.0, 0.0]), path_adjacency) == approx(1.0)
    with raises(ContractViolation):
        energy(np.zeros(3), path_adjacency)


@mark.parametrize("seed", range(10))
def test_no_random_labelling_beats_the_fixed_point(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(8, 31))
    adj = random_connected_adjacency(rng, n, extra=n)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=3, replace=False)] = True
    clamps = rng.integers(0, 2, size=3).astype(float)
    best = energy(harmonic_labels(adj, mask, clamps), adj)

    candidates = rng.uniform(0.0, 1.0, size=(1000, n))
    candidates[:, mask] = clamps
    coo = adj.matrix.tocoo()
    energies = 0.5 * ((candidates[:, coo.row] - candidates[:, coo.col]) ** 2 @ coo.data)
    assert (energies >= best - 1e-12).all()


@mark.parametrize("seed", range(50))
def test_iterative_matches_closed_form(seed):
    rng = np.random.default_rng(200 + seed)
    n = int(rng.integers(5, 31))
    adj = random_connected_adjacency(rng, n, extra=n // 2)
    clamped = rng.choice(n, size=2, replace=False)
    clamps = np.array([1.0, 0.0])
    mask = np.zeros(n, dtype=bool)
    mask[clamped] = True
    order = np.argsort(clamped)
    exact = harmonic_labels(adj, mask, clamps[order])

    result = propagate_to_convergence(LabelVector.initial(n, clamped, clamps), build_transition(adj), clamps[order],
                                      tol=1e-12)
    assert result.converged
    assert np.abs(result.labels.values - exact.values).max() < 1e-8
