import numpy as np
from pytest import approx, mark, raises

from modules.errors import ContractViolation, DimensionError, NonFiniteError
from modules.kg.store import KnowledgeGraph
from modules.model.gnn import (
    LOGIT_CLAMP,
    adjacency_backward,
    backward,
    forward,
    forward_full,
    predict,
    predict_grad,
    prediction_loss,
)
from modules.model.params import ModelParams
from modules.model.receptive_field import ReceptiveField
from modules.model.scoring import build_local_adjacency
from modules.training.gradcheck import gradient_check, run_grad_check


def _params(kg, dim=4, layers=2, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return ModelParams(
        users=rng.uniform(-scale, scale, size=(2, dim)),
        relations=rng.uniform(-scale, scale, size=(kg.relation_count, dim)),
        entities=rng.uniform(-scale, scale, size=(kg.entity_count, dim)),
        weights=[rng.uniform(-scale, scale, size=(dim, dim)) for _ in range(layers)],
    )


def _run(kg, params, items, sample_size=None, seed=0, identity=False):
    rf = ReceptiveField.build(kg, kg.item_entities[items], params.layers, sample_size, np.random.default_rng(seed))
    adj = build_local_adjacency(rf, params.users[0], params.relations)
    return forward(rf, adj, params, 0, identity_activations=identity)


def test_single_edge_by_hand():
    kg = KnowledgeGraph.from_edges(2, [(0, 1, 0)], item_entities=[0], relation_count=1)
    params = ModelParams(
        users=np.zeros((1, 2)),
        relations=np.ones((1, 2)),
        entities=np.array([[1.0, 0.0], [0.0, 1.0]]),
        weights=[np.eye(2)],
    )
    # <u, r> = 0, peso softplus(0) = ln 2, grau 1 + ln 2 nas duas pontas
    w = np.log(2.0)
    expected = np.array([1.0, w]) / (1.0 + w)

    V, _ = _run(kg, params, [0], identity=True)
    assert V[0] == approx(expected)
    V, _ = _run(kg, params, [0])
    assert V[0] == approx(np.tanh(expected))


def test_identity_adjacency_without_edges():
    kg = KnowledgeGraph.from_edges(3, [], item_entities=[0, 1, 2], relation_count=1)
    params = _params(kg, layers=1)
    V, _ = _run(kg, params, [0, 1, 2], identity=True)
    assert V == approx(params.entities @ params.weights[0])


def test_last_layer_is_bounded(toy_kg):
    params = _params(toy_kg, scale=5.0)
    V, _ = _run(toy_kg, params, [0, 1, 2, 3])
    assert (np.abs(V) <= 1.0).all()


def test_predict():
    v = np.array([[0.3, -0.2]])
    assert predict(np.zeros(2), v)[0] == approx(0.5)
    assert predict(np.array([100.0, 0.0]), np.array([[1.0, 0.0]]))[0] == approx(0.999999694, abs=1e-9)
    with raises(DimensionError):
        predict(np.zeros(3), v)


def test_predict_grad():
    u, v = np.array([0.4, -0.7, 0.1]), np.array([0.5, 0.2, -0.3])
    step = 1e-6
    for i in range(3):
        delta = np.zeros(3)
        delta[i] = step
        numeric = (predict(u + delta, v[None])[0] - predict(u - delta, v[None])[0]) / (2 * step)
        assert predict_grad(u, v)[i] == approx(numeric, rel=1e-6)
    assert not predict_grad(np.array([100.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0])).any()


def test_prediction_loss_at_zero_is_ln2():
    losses, grad_u, grad_v = prediction_loss(np.zeros(3), np.ones((2, 3)), np.array([1, 0]))
    assert losses == approx([np.log(2.0)] * 2)
    assert grad_u == approx(np.zeros(3))
    assert grad_v == approx(np.zeros((2, 3)))


def test_saturated_logit_has_zero_gradient():
    u = np.array([LOGIT_CLAMP * 2, 0.0])
    losses, grad_u, _ = prediction_loss(u, np.array([[1.0, 0.0]]), np.array([0]))
    assert losses[0] == approx(LOGIT_CLAMP, rel=1e-6)
    assert not grad_u.any()


@mark.parametrize("layers", [1, 2, 3])
def test_receptive_field_equals_full_graph(toy_kg, layers):
    params = _params(toy_kg, layers=layers, scale=0.5)
    items = [0, 1, 2, 3]
    V, _ = _run(toy_kg, params, items)
    assert np.abs(V - forward_full(toy_kg, params, 0, items)).max() < 1e-10


def test_entity_relabeling_does_not_change_items(toy_kg):
    params = _params(toy_kg, scale=0.5)
    perm = np.random.default_rng(3).permutation(toy_kg.entity_count)
    relabeled = KnowledgeGraph.from_edges(
        toy_kg.entity_count,
        [(perm[h], perm[t], r) for h, t, r in toy_kg.edges.tolist()],
        item_entities=perm[toy_kg.item_entities],
        relation_count=toy_kg.relation_count,
    )
    moved = params.copy()
    moved.entities[perm] = params.entities

    items = [0, 1, 2, 3]
    assert forward_full(relabeled, moved, 0, items) == approx(forward_full(toy_kg, params, 0, items), abs=1e-12)


def test_zero_upstream_gives_zero_gradients(toy_kg):
    params = _params(toy_kg)
    V, cache = _run(toy_kg, params, [0, 2])
    grads = params.zeros_like()
    grad_values = backward(cache, np.zeros_like(V), params, grads)
    adjacency_backward(cache, grad_values, params, grads)
    assert all(not t.any() for t in grads.tensors().values())


def test_backward_rejects_wrong_shape(toy_kg):
    params = _params(toy_kg)
    _, cache = _run(toy_kg, params, [0, 2])
    with raises(ContractViolation):
        backward(cache, np.zeros((3, 4)), params, params.zeros_like())


def test_non_finite_activation(toy_kg):
    params = _params(toy_kg)
    params.entities[0, 0] = np.inf
    with raises(NonFiniteError) as error:
        _run(toy_kg, params, [0])
    assert error.value.layer == 0


@mark.parametrize("identity", [True, False])
def test_backward_matches_finite_differences(toy_kg, identity):
    weights = np.random.default_rng(9).normal(size=(3, 4))
    layers = 2 if identity else 1

    def loss_fn(current):
        V, cache = _run(toy_kg, current, [0, 1, 3], sample_size=2, seed=4, identity=identity)
        grads = current.zeros_like()
        grad_values = backward(cache, weights, current, grads)
        adjacency_backward(cache, grad_values, current, grads)
        return float(np.sum(weights * V)), grads

    report = gradient_check(loss_fn, _params(toy_kg, layers=layers, seed=2, scale=0.8))
    assert report.passed(), report.worst


def test_unified_loss_gradient_check():
    report = run_grad_check(seed=0)
    assert report.checked > 0
    assert report.passed(), f"{report.max_error} em {report.worst}"
