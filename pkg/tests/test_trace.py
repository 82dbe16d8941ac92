import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from stlmpc.trace import (Dataset, DimensionError, NormStats, Trajectory, Transition,
                          compute_norm_stats, denormalize, load_dataset, normalize, split)


def test_norm_stats_two_point_set():
    s = compute_norm_stats([[0, 0], [2, 2]])
    np.testing.assert_array_equal(s.mean, [1, 1])
    np.testing.assert_array_equal(s.std, [1, 1])


def test_norm_stats_constant_dimension_floored():
    s = compute_norm_stats([[5], [5], [5]])
    assert s.mean.tolist() == [5.0]
    assert s.std.tolist() == [1.0]


def test_norm_stats_gaussian_sample():
    rows = np.random.default_rng(0).standard_normal((1000, 1))
    s = compute_norm_stats(rows)
    assert abs(s.mean[0]) < 0.15
    assert abs(s.std[0] - 1.0) < 0.15


def test_norm_stats_population_std():
    s = compute_norm_stats([[1.0], [2.0], [3.0], [4.0]])
    assert s.std[0] == pytest.approx(np.sqrt(1.25))


@pytest.mark.parametrize("rows", [[], [[1.0]], [[1.0, 2.0], [3.0]]])
def test_norm_stats_rejects_bad_input(rows):
    with pytest.raises(DimensionError):
        compute_norm_stats(rows)


def test_norm_stats_rejects_nonpositive_std():
    with pytest.raises(ValueError):
        NormStats([0.0], [0.0])


def test_normalize_direct_formula():
    stats = NormStats([1.0], [2.0])
    assert normalize([3.0], stats).tolist() == [1.0]
    np.testing.assert_array_equal(normalize(stats.mean, stats), [0.0])


def test_normalize_length_mismatch():
    with pytest.raises(DimensionError):
        normalize([1.0, 2.0], NormStats([0.0], [1.0]))
    with pytest.raises(DimensionError):
        denormalize([1.0, 2.0], NormStats([0.0], [1.0]))


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(float, (20, 3), elements=st.floats(-1e3, 1e3)),
       hnp.arrays(float, 3, elements=st.floats(-1e3, 1e3)))
def test_denormalize_inverts_normalize(rows, v):
    stats = compute_norm_stats(rows)
    assert np.all(stats.std > 0)
    back = denormalize(normalize(v, stats), stats)
    np.testing.assert_allclose(back, v, rtol=1e-12, atol=1e-12 * (1 + np.abs(stats.mean).max()))


def _dataset(n, seed=0, split_fraction=0.9):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((n, 2))
    a = rng.standard_normal((n, 1))
    return Dataset(s, a, s + 0.1 * a, split_fraction)


def test_split_sizes():
    train, val = split(_dataset(10), seed=0)
    assert (len(train), len(val)) == (9, 1)


@pytest.mark.parametrize("n, frac, expected", [(10, 0.7, 7), (10, 0.75, 8), (3, 0.5, 2)])
def test_split_uses_ceiling(n, frac, expected):
    train, val = split(_dataset(n, split_fraction=frac), seed=1)
    assert len(train) == expected
    assert len(train) + len(val) == n


def test_split_is_a_seeded_partition():
    ds = _dataset(1000)
    t1, v1 = split(ds, seed=3)
    t2, v2 = split(ds, seed=3)
    np.testing.assert_array_equal(t1.states, t2.states)
    np.testing.assert_array_equal(v1.states, v2.states)
    rows = {tuple(r) for r in np.vstack([t1.states, v1.states])}
    assert rows == {tuple(r) for r in ds.states}
    t3, _ = split(ds, seed=4)
    assert not np.array_equal(t1.states, t3.states)


def test_dataset_rejects_ragged():
    with pytest.raises(DimensionError):
        Dataset(np.zeros((3, 2)), np.zeros((2, 1)), np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        Dataset(np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((3, 2)), split_fraction=1.0)


def test_dataset_transitions_round_trip():
    ds = _dataset(5)
    again = Dataset.from_transitions(ds.transitions)
    np.testing.assert_array_equal(again.inputs, ds.inputs)
    assert isinstance(ds.transitions[0], Transition)
    np.testing.assert_array_equal(ds.deltas, ds.next_states - ds.states)


@pytest.mark.parametrize("suffix", [".csv", ".npz"])
def test_dataset_persistence_round_trip(tmp_path, suffix):
    ds = _dataset(7)
    path = tmp_path / f"d{suffix}"
    if suffix == ".csv":
        ds.to_csv(path)
        assert path.read_text().splitlines()[0] == "s0,s1,a0,sp0,sp1"
    else:
        ds.save_npz(path)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.states, ds.states)
    np.testing.assert_array_equal(back.actions, ds.actions)
    np.testing.assert_array_equal(back.next_states, ds.next_states)


def test_dataset_csv_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("s0,a0,zz\n1,2,3\n")
    with pytest.raises(DimensionError):
        Dataset.read_csv(path)
    path.write_text("s0,a0,sp0\n1,2\n")
    with pytest.raises(DimensionError):
        Dataset.read_csv(path)


def test_trajectory_invariants():
    with pytest.raises(DimensionError):
        Trajectory(("x", "y"), np.zeros((3, 3)))
    with pytest.raises(DimensionError):
        Trajectory(("x",), np.zeros((0, 1)))
    with pytest.raises(ValueError):
        Trajectory(("x",), np.zeros((2, 1)), dt=0.0)
    with pytest.raises(DimensionError):
        Trajectory(("x", "x"), np.zeros((2, 2)))


def test_trajectory_columns_and_csv(tmp_path):
    traj = Trajectory.from_columns({"x": [1.0, 2.0], "y": [3.0, 4.0]}, dt=0.5)
    assert traj.column("y").tolist() == [3.0, 4.0]
    with pytest.raises(DimensionError, match="zz"):
        traj.column("zz")
    path = tmp_path / "t.csv"
    traj.to_csv(path)
    back = Trajectory.read_csv(path, dt=0.5)
    assert back.names == ("x", "y")
    np.testing.assert_array_equal(back.samples, traj.samples)
