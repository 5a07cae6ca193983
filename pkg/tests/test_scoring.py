import numpy as np
from pytest import approx, mark, raises

from conftest import adjacency
from modules.errors import ContractViolation, DimensionError
from modules.model.receptive_field import ReceptiveField
from modules.model.scoring import (
    SELF_LOOP_WEIGHT,
    UserAdjacency,
    build_local_adjacency,
    build_local_label_adjacency,
    build_transition,
    build_user_adjacency,
    edge_weight,
    local_adjacency_backward,
    normalize_symmetric,
    relation_score,
    score_backward,
)


def test_relation_score():
    assert relation_score(np.array([1.0, 2.0]), np.array([3.0, -1.0])) == approx(1.0)
    with raises(DimensionError):
        relation_score(np.ones(2), np.ones(3))


def test_edge_weight_is_positive_and_stable():
    assert edge_weight(0.0) == approx(np.log(2.0))
    assert edge_weight(1000.0) == approx(1000.0)
    assert 0.0 < edge_weight(-50.0) < 1e-20
    assert np.isfinite(edge_weight(np.array([-1e4, 1e4]))).all()


def _user_and_relations(seed=0, dim=4, relations=3):
    rng = np.random.default_rng(seed)
    return rng.normal(size=dim), rng.normal(size=(relations, dim))


def test_user_adjacency_is_symmetric(toy_kg):
    user, relations = _user_and_relations()
    adj = build_user_adjacency(toy_kg, user, relations)
    dense = adj.matrix.toarray()

    assert np.allclose(dense, dense.T)
    assert np.allclose(np.diag(dense), SELF_LOOP_WEIGHT)
    assert np.allclose(adj.degrees, dense.sum(axis=1))
    assert (dense >= 0).all()


def test_missing_relation_embedding(toy_kg):
    with raises(ContractViolation):
        build_user_adjacency(toy_kg, np.ones(4), np.ones((2, 4)))


def test_normalized_spectrum_is_bounded(toy_kg):
    user, relations = _user_and_relations(1)
    normalized = normalize_symmetric(build_user_adjacency(toy_kg, user, relations)).toarray()
    eigenvalues = np.linalg.eigvalsh(normalized)
    assert eigenvalues.max() == approx(1.0)
    assert eigenvalues.min() >= -1.0 - 1e-12


@mark.parametrize(
    "matrix, expected",
    [
        ([[1.0, 1.0], [1.0, 1.0]], [[0.5, 0.5], [0.5, 0.5]]),
        ([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]),
        ([[2.0, 0.0, 0.0], [0.0, 0.0, 3.0], [0.0, 3.0, 0.0]], np.eye(3)[[0, 2, 1]]),
    ],
)
def test_normalize_symmetric_by_hand(matrix, expected):
    normalized = normalize_symmetric(UserAdjacency.from_matrix(np.array(matrix)))
    assert normalized.toarray() == approx(np.asarray(expected))


@mark.parametrize(
    "matrix, expected",
    [
        ([[0.0, 1.0], [1.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]]),
        ([[1.0, 3.0], [3.0, 1.0]], [[0.25, 0.75], [0.75, 0.25]]),
    ],
)
def test_transition_by_hand(matrix, expected):
    assert build_transition(UserAdjacency.from_matrix(np.array(matrix))).toarray() == approx(np.asarray(expected))


@mark.parametrize("seed", range(5))
def test_different_users_get_different_adjacencies(toy_kg, seed):
    rng = np.random.default_rng(seed)
    relations = rng.normal(size=(3, 4))
    first = build_user_adjacency(toy_kg, rng.normal(size=4), relations).matrix.toarray()
    second = build_user_adjacency(toy_kg, rng.normal(size=4), relations).matrix.toarray()
    assert not np.allclose(first, second)
    # mesma estrutura, pesos diferentes
    assert ((first > 0) == (second > 0)).all()


def test_user_preference_reweights_relations(toy_kg):
    relations = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    likes_first = build_user_adjacency(toy_kg, np.array([1.0, 0.0]), relations)
    likes_second = build_user_adjacency(toy_kg, np.array([0.0, 1.0]), relations)
    # (0, 4) usa r0, (1, 4) usa r1, (1, 5) usa r2
    assert likes_first.matrix[0, 4] == approx(edge_weight(1.0))
    assert likes_first.matrix[1, 4] == approx(edge_weight(0.0))
    assert likes_second.matrix[0, 4] == approx(edge_weight(0.0))
    assert likes_second.matrix[1, 4] == approx(edge_weight(1.0))
    assert likes_first.matrix[1, 5] == approx(likes_second.matrix[1, 5])


def test_transition_is_row_stochastic(toy_kg):
    user, relations = _user_and_relations(2)
    P = build_transition(build_user_adjacency(toy_kg, user, relations))
    assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0)


def test_zero_degree_is_rejected():
    adj = adjacency(3, [(0, 1, 1.0)])
    with raises(ContractViolation):
        build_transition(adj)
    assert np.allclose(build_transition(adj.with_self_loops()).sum(axis=1), 1.0)


def test_local_adjacency_matches_full_graph(toy_kg):
    user, relations = _user_and_relations(3)
    rf = ReceptiveField.build(toy_kg, [0, 2], 2, None, np.random.default_rng(0))
    local = build_local_adjacency(rf, user, relations)
    full = normalize_symmetric(build_user_adjacency(toy_kg, user, relations)).toarray()
    full_degrees = build_user_adjacency(toy_kg, user, relations).degrees

    assert np.allclose(local.degrees, full_degrees[rf.entities])
    for row, col, value in zip(local.rows, local.cols, local.values):
        assert value == approx(full[rf.entities[row], rf.entities[col]])


def test_local_adjacency_backward_matches_finite_differences(toy_kg):
    user, relations = _user_and_relations(4)
    rf = ReceptiveField.build(toy_kg, [1, 3], 2, 2, np.random.default_rng(5))
    weights = np.random.default_rng(6).normal(size=len(build_local_adjacency(rf, user, relations).values))

    def objective(u, r):
        return float(weights @ build_local_adjacency(rf, u, r).values)

    adj = build_local_adjacency(rf, user, relations)
    grad_edges, grad_degrees = local_adjacency_backward(rf, adj, weights)
    grad_relations = np.zeros_like(relations)
    grad_user = score_backward(grad_edges, adj.edge_scores, rf.edge_relations, user, relations, grad_relations)
    grad_user += score_backward(grad_degrees, adj.degree_scores, rf.degree_relations, user, relations, grad_relations)

    step = 1e-6
    for i in range(len(user)):
        delta = np.zeros_like(user)
        delta[i] = step
        numeric = (objective(user + delta, relations) - objective(user - delta, relations)) / (2 * step)
        assert grad_user[i] == approx(numeric, rel=1e-5, abs=1e-8)
    for index in np.ndindex(relations.shape):
        delta = np.zeros_like(relations)
        delta[index] = step
        numeric = (objective(user, relations + delta) - objective(user, relations - delta)) / (2 * step)
        assert grad_relations[index] == approx(numeric, rel=1e-5, abs=1e-8)


def test_label_adjacency_has_no_self_loops(toy_kg):
    user, relations = _user_and_relations(7)
    rf = ReceptiveField.build(toy_kg, [0, 1, 2, 3], 1, None, np.random.default_rng(0))
    label = build_local_label_adjacency(rf, user, relations)
    dense = label.adjacency.matrix.toarray()

    assert np.allclose(np.diag(dense), 0.0)
    assert np.allclose(dense, dense.T)
    assert (label.pair_heads < label.pair_tails).all()
    assert len(set(zip(label.pair_heads.tolist(), label.pair_tails.tolist()))) == len(label.pair_heads)
