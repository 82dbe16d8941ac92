import numpy as np
import pytest

from gradcheck import linear_dataset, max_relative_error, random_batch, random_model
from stlmpc.dynamics import (DynamicsModel, Mlp, TrainConfig, TrainingDiverged, gradients,
                             load_checkpoint, loss, rollout, rollout_batch, save_checkpoint,
                             train)
from stlmpc.envs import CartPole, collect
from stlmpc.trace import Dataset, DimensionError, NormStats, split

LINEAR_CFG = TrainConfig(hidden_sizes=(64, 64), learning_rate=1e-2, epochs=50)


@pytest.fixture(scope="module")
def linear_model():
    return train(linear_dataset(), LINEAR_CFG)


# forward

def test_zero_model_is_identity():
    model = DynamicsModel.zero(3, 2)
    s = np.array([0.1, -2.0, 5.0])
    np.testing.assert_array_equal(model.forward(s, [1.0, -1.0]), s)


def test_forward_is_deterministic_and_checks_dims():
    model = random_model()
    s, a = np.ones(3), np.ones(2)
    assert np.array_equal(model.forward(s, a), model.forward(s, a))
    with pytest.raises(DimensionError):
        model.predict(np.ones((1, 4)), np.ones((1, 2)))


def test_model_rejects_mismatched_stats():
    model = random_model()
    with pytest.raises(DimensionError):
        DynamicsModel(model.params, NormStats(np.zeros(4), np.ones(4)), model.out_stats, 3, 2)


def test_identity_transitions_learned():
    rng = np.random.default_rng(0)
    s = rng.uniform(-1, 1, (4000, 2))
    a = rng.uniform(-1, 1, (4000, 1))
    model = train(Dataset(s, a, s), TrainConfig(hidden_sizes=(16,), epochs=5))
    held_s, held_a = rng.uniform(-1, 1, (100, 2)), rng.uniform(-1, 1, (100, 1))
    # every delta is zero, so those outputs are pinned to exactly zero
    assert np.max(np.abs(model.predict(held_s, held_a) - held_s)) < 1e-2


def test_linear_system_prediction(linear_model):
    _, val = split(linear_dataset(), LINEAR_CFG.seed)
    pred = linear_model.predict(val.states, val.actions)
    assert np.mean((pred - val.next_states) ** 2) < 1e-4
    assert linear_model.loss_curve[-1][2] < 1e-3


def test_normalized_residual_has_no_drift(linear_model):
    tr, _ = split(linear_dataset(), LINEAR_CFG.seed)
    resid = (linear_model.predict(tr.states, tr.actions) - tr.next_states) / linear_model.out_stats.std
    assert np.all(np.abs(resid.mean(axis=0)) < 0.1)


# loss and gradients

def test_loss_zero_for_perfect_model():
    model = random_model()
    rng = np.random.default_rng(3)
    s, a = rng.normal(size=(16, 3)), rng.normal(size=(16, 2))
    batch = Dataset(s, a, model.predict(s, a))
    assert loss(model, batch) < 1e-20


def test_loss_of_zero_net_is_state_dim():
    rng = np.random.default_rng(4)
    s, a = rng.normal(size=(5000, 3)), rng.normal(size=(5000, 2))
    d = rng.normal(size=(5000, 3)) * [1.0, 5.0, 0.1]
    model = DynamicsModel(Mlp.zeros((5, 8, 3)), NormStats(np.zeros(5), np.ones(5)),
                          NormStats(np.zeros(3), d.std(axis=0)), 3, 2)
    assert loss(model, Dataset(s, a, s + d)) == pytest.approx(3.0, rel=0.1)


def test_loss_invariant_to_order():
    model = random_model()
    batch = random_batch(3, 2, size=20)
    perm = np.random.default_rng(0).permutation(20)
    assert loss(model, batch.subset(perm)) == pytest.approx(loss(model, batch), rel=1e-14)
    with pytest.raises(ValueError):
        loss(model, batch.subset([]))


@pytest.mark.parametrize("sizes", [(5, 7, 3), (4, 6, 5, 3)])
def test_gradients_match_finite_differences(sizes):
    model = random_model(sizes)
    batch = random_batch(sizes[-1], sizes[0] - sizes[-1])
    assert max_relative_error(model, batch) < 1e-4


def test_zero_net_zero_targets_has_zero_output_bias_gradient():
    model = DynamicsModel(Mlp.zeros((3, 4, 2)), NormStats(np.zeros(3), np.ones(3)),
                          NormStats(np.zeros(2), np.ones(2)), 2, 1)
    s = np.random.default_rng(0).normal(size=(6, 2))
    _, gb = gradients(model, Dataset(s, np.ones((6, 1)), s))
    np.testing.assert_array_equal(gb[-1], 0.0)


def test_duplicated_batch_has_same_gradient():
    model = random_model()
    batch = random_batch(3, 2)
    doubled = Dataset.concatenate([batch, batch])
    for g1, g2 in zip(*[sum(gradients(model, b), []) for b in (batch, doubled)]):
        np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-15)


# training

def test_training_is_bit_reproducible():
    ds = linear_dataset(2000)
    cfg = TrainConfig(hidden_sizes=(16, 16), epochs=3, batch_size=128)
    m1, m2 = train(ds, cfg), train(ds, cfg)
    for w1, w2 in zip(m1.params.weights + m1.params.biases, m2.params.weights + m2.params.biases):
        assert np.array_equal(w1, w2)
    assert m1.loss_curve == m2.loss_curve
    assert len(m1.loss_curve) == 3
    m3 = train(ds, TrainConfig(hidden_sizes=(16, 16), epochs=3, batch_size=128, seed=1))
    assert not np.array_equal(m1.params.weights[0], m3.params.weights[0])


def test_stats_come_from_train_split():
    ds = linear_dataset(1000)
    cfg = TrainConfig(hidden_sizes=(4,), epochs=1, batch_size=100)
    model = train(ds, cfg)
    tr, _ = split(ds, cfg.seed)
    np.testing.assert_array_equal(model.in_stats.mean, tr.inputs.mean(axis=0))
    np.testing.assert_array_equal(model.out_stats.mean, tr.deltas.mean(axis=0))


def test_cartpole_validation_loss_decreases():
    ds = collect(CartPole(substeps=5), 300, 50, seed=0)
    model = train(ds, TrainConfig(hidden_sizes=(32, 32), learning_rate=1e-2, epochs=20,
                                  batch_size=128))
    curve = np.array(model.loss_curve)
    assert curve[-1, 2] <= curve[0, 2]


def test_training_rejects_small_dataset_and_reports_divergence():
    with pytest.raises(ValueError, match="batch_size"):
        train(linear_dataset(100), TrainConfig(batch_size=512))
    big = linear_dataset(2000)
    wild = Dataset(big.states, big.actions, big.next_states * 1e3)
    with pytest.raises(TrainingDiverged, match="learning rate"):
        train(wild, TrainConfig(hidden_sizes=(8,), learning_rate=1e3, batch_size=64, epochs=5))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(hidden_sizes=(0,))
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ValueError):
        TrainConfig(split_fraction=0.0)


# rollout

def test_rollout_single_step_equals_forward():
    model = random_model()
    s0, a = np.ones(3), np.full(2, 0.5)
    traj = rollout(model, s0, [a])
    assert len(traj) == 2
    np.testing.assert_array_equal(traj.samples[0], s0)
    np.testing.assert_array_equal(traj.samples[1], model.forward(s0, a))


def test_rollout_of_zero_model_repeats_s0():
    traj = rollout(DynamicsModel.zero(2, 1), [1.0, 2.0], np.zeros((4, 1)), names=("p", "q"))
    assert traj.names == ("p", "q")
    np.testing.assert_array_equal(traj.samples, np.tile([1.0, 2.0], (5, 1)))


def test_rollout_linear_model_final_error(linear_model):
    actions = np.random.default_rng(5).uniform(-1, 1, (10, 1))
    traj = rollout(linear_model, [0.5], actions)
    exact = 0.5
    for a in actions[:, 0]:
        exact = 0.9 * exact + 0.1 * a
    assert abs(traj.samples[-1, 0] - exact) < 0.05


def test_rollout_batch_shape_and_first_sample():
    model = random_model()
    acts = np.zeros((4, 6, 2))
    out = rollout_batch(model, np.ones(3), acts)
    assert out.shape == (4, 7, 3)
    np.testing.assert_array_equal(out[:, 0], 1.0)


def test_rollout_errors():
    model = random_model()
    with pytest.raises(ValueError):
        rollout(model, np.ones(3), np.zeros((0, 2)))
    with pytest.raises(DimensionError):
        rollout(model, np.ones(4), np.zeros((2, 2)))
    blowup = DynamicsModel(Mlp.zeros((3, 2, 2)), NormStats(np.zeros(3), np.ones(3)),
                           NormStats(np.full(2, 1e308), np.ones(2)), 2, 1)
    with pytest.raises(FloatingPointError, match="step"):
        rollout(blowup, np.ones(2), np.zeros((3, 1)))


# checkpoints

def test_checkpoint_round_trip(tmp_path):
    ds = linear_dataset(1000)
    model = train(ds, TrainConfig(hidden_sizes=(8, 8), epochs=2, batch_size=100, seed=4))
    path = tmp_path / "m.json"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    assert back.train_config == model.train_config
    x = np.random.default_rng(0).normal(size=(5, 1))
    np.testing.assert_array_equal(back.predict(x, x), model.predict(x, x))
    path2 = tmp_path / "m2.json"
    save_checkpoint(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_rejects_foreign_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="format"):
        load_checkpoint(path)
