import itertools

import numpy as np
import pytest

from morlext.distance import hungarian_distance, hungarian_solve, incoming_matrices
from morlext.policy import ActorCritic, default_specs, flatten


def brute_force_assignment_cost(cost):
    n = cost.shape[0]
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def make_theta(seed, hidden=(6, 5)):
    actor_spec, critic_spec = default_specs(4, 2, hidden=hidden)
    return flatten(ActorCritic.init(actor_spec, critic_spec, np.random.default_rng(seed)))


def permute_layer_rows(theta, prefix, layer, perm, propagate=False):
    """Reorder neurons of one layer. propagate=True keeps the function
    identical by permuting the next layer's input coordinates too."""
    out = theta.copy()
    w = out.block(f"{prefix}.W{layer}")
    b = out.block(f"{prefix}.b{layer}")
    w[...] = w[:, perm]
    b[...] = b[perm]
    if propagate:
        w_next = out.block(f"{prefix}.W{layer + 1}")
        w_next[...] = w_next[perm, :]
    return out


# ---------------------------------------------------------------------------
# Solver


def test_solver_zero_diagonal():
    m = hungarian_solve(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert m.total_cost == pytest.approx(0.0)
    assert list(m.assignment) == [0, 1]


def test_solver_two_by_two_enumerated():
    # identity matching costs 4+3=7, swap costs 1+2=3
    m = hungarian_solve(np.array([[4.0, 1.0], [2.0, 3.0]]))
    assert m.total_cost == pytest.approx(3.0)
    assert list(m.assignment) == [1, 0]


def test_solver_matches_brute_force_6x6():
    rng = np.random.default_rng(0)
    for trial in range(20):
        cost = rng.uniform(0, 10, size=(6, 6))
        m = hungarian_solve(cost)
        assert sorted(m.assignment) == list(range(6))  # a permutation
        assert m.total_cost == pytest.approx(brute_force_assignment_cost(cost))


def test_solver_rejects_non_square():
    with pytest.raises(ValueError):
        hungarian_solve(np.zeros((2, 3)))


def test_solver_singleton():
    m = hungarian_solve(np.array([[2.5]]))
    assert m.total_cost == pytest.approx(2.5)


# ---------------------------------------------------------------------------
# Network distance


def test_distance_identical_networks_zero():
    theta = make_theta(1)
    total, breakdown = hungarian_distance(theta, theta)
    assert total == 0.0
    assert all(v == 0.0 for v in breakdown.values())


def test_distance_symmetry():
    a, b = make_theta(2), make_theta(3)
    ab, _ = hungarian_distance(a, b)
    ba, _ = hungarian_distance(b, a)
    assert ab == pytest.approx(ba)
    assert ab > 0


def test_function_preserving_permutation_zeroes_that_layer():
    theta = make_theta(4)
    perm = np.array([2, 0, 4, 1, 3, 5])
    permuted = permute_layer_rows(theta, "actor", 0, perm, propagate=True)
    total_same, breakdown = hungarian_distance(theta, permuted)
    assert breakdown["actor.layer0"] == pytest.approx(0.0, abs=1e-12)
    # The propagated layer-1 input reordering is a real structural change.
    assert breakdown["actor.layer1"] > 0


def test_rowwise_permuted_copy_distance_zero():
    theta = make_theta(5)
    rng = np.random.default_rng(9)
    permuted = theta.copy()
    for prefix in ("actor", "critic"):
        n_hidden = 2
        for layer in range(n_hidden):
            size = permuted.block(f"{prefix}.b{layer}").shape[0]
            permuted = permute_layer_rows(permuted, prefix, layer, rng.permutation(size), propagate=False)
    total, _ = hungarian_distance(theta, permuted)
    assert total == pytest.approx(0.0, abs=1e-12)


def test_single_weight_perturbation_distance():
    theta = make_theta(6)
    eps = 0.37
    other = theta.copy()
    other.block("actor.W1")[2, 3] += eps
    total, breakdown = hungarian_distance(theta, other)
    assert total == pytest.approx(eps, abs=1e-9)
    assert breakdown["actor.layer1"] == pytest.approx(eps, abs=1e-9)


def test_distance_matches_layerwise_brute_force():
    rng = np.random.default_rng(12)
    for trial in range(6):
        a = make_theta(100 + trial, hidden=(5, 4))
        b = make_theta(200 + trial, hidden=(5, 4))
        total, _ = hungarian_distance(a, b)
        expected = 0.0
        for prefix in ("actor", "critic"):
            for la, lb in zip(incoming_matrices(a, prefix), incoming_matrices(b, prefix)):
                cost = np.sqrt(((la[:, None, :] - lb[None, :, :]) ** 2).sum(axis=2))
                expected += brute_force_assignment_cost(cost)
        assert total == pytest.approx(expected, abs=1e-9)


def test_distance_layout_mismatch_rejected():
    a = make_theta(7, hidden=(6, 5))
    b = make_theta(8, hidden=(5, 5))
    with pytest.raises(ValueError):
        hungarian_distance(a, b)


def test_log_std_excluded_from_distance():
    theta = make_theta(9)
    other = theta.copy()
    other.block("actor.log_std")[...] += 1.0
    total, _ = hungarian_distance(theta, other)
    assert total == 0.0
