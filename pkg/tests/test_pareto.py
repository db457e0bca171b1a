import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morlext.pareto import (
    FrontPoint,
    ParetoArchive,
    default_reference_point,
    dominates,
    expected_utility,
    hypervolume,
    load_front_table,
    non_dominated_filter,
    save_front_table,
    sparsity,
)


def archive_of(rows, ids=None):
    rows = np.asarray(rows, dtype=np.float64)
    ids = ids if ids is not None else list(range(len(rows)))
    return [FrontPoint(r, i) for r, i in zip(rows, ids)]


# ---------------------------------------------------------------------------
# Oracles


def brute_force_filter(rows):
    """O(n^2) pairwise dominance oracle."""
    rows = np.asarray(rows, dtype=np.float64)
    keep = []
    for i, r in enumerate(rows):
        if not any(dominates(o, r) for j, o in enumerate(rows) if j != i):
            keep.append(tuple(r))
    return set(keep)


def monte_carlo_hypervolume(front, ref, n=1_000_000, seed=0):
    """Box-sampling volume oracle."""
    front = np.asarray(front, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    top = front.max(axis=0)
    box = np.prod(top - ref)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(ref, top, size=(n, ref.shape[0]))
    covered = np.zeros(n, dtype=bool)
    for p in front:
        covered |= np.all(pts <= p, axis=1)
    return box * covered.mean()


def monte_carlo_eu(front, n=1_000_000, seed=0):
    front = np.asarray(front, dtype=np.float64)
    rng = np.random.default_rng(seed)
    e = rng.standard_exponential((n, front.shape[1]))
    w = e / e.sum(axis=1, keepdims=True)
    return float((w @ front.T).max(axis=1).mean())


# ---------------------------------------------------------------------------
# Dominance and filtering


def test_dominates_examples():
    assert dominates(np.array([2.0, 3.0]), np.array([1.0, 3.0]))
    assert not dominates(np.array([2.0, 3.0]), np.array([2.0, 3.0]))
    assert not dominates(np.array([2.0, 1.0]), np.array([1.0, 2.0]))
    assert not dominates(np.array([1.0, 2.0]), np.array([2.0, 1.0]))


def test_dominates_length_mismatch():
    with pytest.raises(ValueError):
        dominates(np.array([1.0]), np.array([1.0, 2.0]))


def test_filter_simple():
    archive = non_dominated_filter(archive_of([[1, 1], [2, 2], [0, 3]]))
    kept = {tuple(p.returns) for p in archive.points}
    assert kept == {(2.0, 2.0), (0.0, 3.0)}


def test_filter_collapses_duplicates_lowest_id():
    pts = archive_of([[1, 1], [1, 1], [1, 1]], ids=[5, 2, 9])
    archive = non_dominated_filter(pts)
    assert len(archive) == 1
    assert archive.points[0].policy_id == 2


def test_filter_matches_brute_force_200_points():
    rng = np.random.default_rng(42)
    rows = rng.normal(size=(200, 2))
    archive = non_dominated_filter(archive_of(rows))
    assert {tuple(p.returns) for p in archive.points} == brute_force_filter(rows)


def test_filter_matches_brute_force_3d():
    rng = np.random.default_rng(1)
    rows = rng.normal(size=(120, 3))
    archive = non_dominated_filter(archive_of(rows))
    assert {tuple(p.returns) for p in archive.points} == brute_force_filter(rows)


def test_filter_idempotent():
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(80, 2))
    once = non_dominated_filter(archive_of(rows))
    twice = non_dominated_filter(once.points)
    assert {tuple(p.returns) for p in once.points} == {tuple(p.returns) for p in twice.points}


# ---------------------------------------------------------------------------
# Hypervolume


def test_hv_unit_box():
    assert hypervolume(np.array([[1.0, 1.0]]), np.array([0.0, 0.0])) == pytest.approx(1.0)


def test_hv_three_point_staircase():
    front = np.array([[3.0, 1.0], [1.0, 3.0], [2.0, 2.0]])
    assert hypervolume(front, np.array([0.0, 0.0])) == pytest.approx(6.0)


def test_hv_ref_shift_adds_extent():
    front = np.array([[3.0, 1.0], [1.0, 3.0]])
    ref = np.array([0.0, 0.0])
    base = hypervolume(front, ref)
    t = 0.7
    shifted = hypervolume(front, ref - np.array([t, 0.0]))
    # Shifting the ref by -t in one coordinate adds t * extent in the other.
    assert shifted - base == pytest.approx(t * 3.0)


def test_hv_ref_must_be_dominated():
    with pytest.raises(ValueError):
        hypervolume(np.array([[1.0, 1.0]]), np.array([2.0, 0.0]))


def test_hv_monotone_under_added_points():
    rng = np.random.default_rng(0)
    front = rng.uniform(1, 2, size=(6, 2))
    ref = np.zeros(2)
    base = hypervolume(front, ref)
    grown = hypervolume(np.vstack([front, [[2.5, 2.5]]]), ref)
    assert grown >= base
    dominated_added = hypervolume(np.vstack([front, front.min(axis=0)[None, :]]), ref)
    assert dominated_added == pytest.approx(base)


@pytest.mark.parametrize("d", [2, 3])
def test_hv_agrees_with_monte_carlo(d):
    rng = np.random.default_rng(17)
    for trial in range(10):
        front = rng.uniform(0.5, 3.0, size=(rng.integers(2, 9), d))
        ref = np.zeros(d)
        exact = hypervolume(front, ref)
        mc = monte_carlo_hypervolume(front, ref, n=200_000, seed=trial)
        assert exact == pytest.approx(mc, rel=0.02)


def test_hv3d_hand_value():
    # Two boxes: (2,1,1) and (1,1,2) from origin: union = 2 + 2 - 1 = 3.
    front = np.array([[2.0, 1.0, 1.0], [1.0, 1.0, 2.0]])
    assert hypervolume(front, np.zeros(3)) == pytest.approx(3.0)


# ---------------------------------------------------------------------------
# Expected utility


def test_eu_two_vertices_closed_form():
    # E[max(w, 1-w)] over uniform w = 3/4.
    front = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert expected_utility(front, n_weights=1_000_000, seed=0) == pytest.approx(0.75, abs=0.005)


def test_eu_singleton_mean_weight():
    g = np.array([2.0, 5.0, 8.0])
    eu = expected_utility(g[None, :], n_weights=1_000_000, seed=1)
    assert eu == pytest.approx(g.sum() / 3, abs=0.01)


def test_eu_constant_on_diagonal_point():
    assert expected_utility(np.array([[1.0, 1.0]]), n_weights=100, seed=2) == pytest.approx(1.0)


def test_eu_seeded_reproducible():
    front = np.array([[1.0, 0.2], [0.3, 0.9]])
    assert expected_utility(front, 5000, seed=3) == expected_utility(front, 5000, seed=3)


def test_eu_invariant_to_dominated_points():
    front = np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.6]])
    plus = np.vstack([front, [[0.5, 0.5]]])  # dominated by (0.6, 0.6)
    a = expected_utility(front, 20_000, seed=4)
    b = expected_utility(plus, 20_000, seed=4)
    assert a == pytest.approx(b, abs=1e-12)


def test_eu_empty_archive_rejected():
    with pytest.raises(ValueError):
        expected_utility(np.zeros((0, 2)), 10, seed=0)


# ---------------------------------------------------------------------------
# Sparsity


def test_sparsity_hand_value():
    front = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
    assert sparsity(front) == pytest.approx(2.0)


def test_sparsity_identical_points_zero():
    assert sparsity(np.array([[1.0, 1.0], [1.0, 1.0]])) == 0.0


def test_sparsity_uniform_1d_spacing():
    delta = 0.35
    vals = (np.arange(7) * delta)[:, None]
    assert sparsity(vals) == pytest.approx(delta**2)


def test_sparsity_singleton_zero():
    assert sparsity(np.array([[3.0, 4.0]])) == 0.0


@given(st.floats(-50, 50), st.floats(0.1, 10))
@settings(max_examples=25)
def test_sparsity_translation_and_scaling(shift, scale):
    rng = np.random.default_rng(8)
    front = rng.normal(size=(6, 2))
    base = sparsity(front)
    assert sparsity(front + shift) == pytest.approx(base, rel=1e-9)
    assert sparsity(front * scale) == pytest.approx(base * scale**2, rel=1e-9)


# ---------------------------------------------------------------------------
# Table I/O and reference points


def test_front_table_roundtrip(tmp_path):
    pts = [FrontPoint(np.array([1.25, -0.75]), 3, "extended"),
           FrontPoint(np.array([0.2, 0.9]), 7, "fine_tuned")]
    archive = non_dominated_filter(pts)
    path = tmp_path / "front.csv"
    save_front_table(path, archive)
    back = load_front_table(path)
    assert back.d == 2
    assert {tuple(p.returns) for p in back.points} == {tuple(p.returns) for p in archive.points}
    assert {p.stage for p in back.points} == {p.stage for p in archive.points}


def test_front_table_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nope,nope\n1,2\n")
    with pytest.raises(ValueError):
        load_front_table(path)


def test_default_reference_point():
    ref = default_reference_point([np.array([1.0, 5.0]), np.array([3.0, 2.0])])
    assert np.allclose(ref, [0.0, 1.0])
