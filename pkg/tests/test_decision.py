import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_controller_instance
from vocbf.assembly import ControllerParams
from vocbf.clf import GoalSpec
from vocbf.dataset import gen_dataset
from vocbf.decision import (
    DEFAULT_WEIGHTS,
    N_CLASSES,
    TRAINABLE,
    DecisionFeatures,
    DecisionNet,
    LabeledSample,
    dataset_accuracy,
    dataset_loss,
    decide_from_probs,
    decision_features,
    load_dataset,
    load_weights,
    loss_and_grads,
    net_forward,
    oracle_label,
    save_dataset,
    save_weights,
    train,
)
from vocbf.geometry import ObstacleState, RobotState
from vocbf.solver import Direction, enumerate_subqps


def random_batch(rng, b=3, m=2):
    X = rng.normal(size=(b, m, 5))
    T = rng.normal(size=(b, 3))
    y = rng.integers(0, N_CLASSES, size=(b, m))
    return X, T, y


def random_net(seed):
    """Non-trivial weights everywhere, including the zero-initialized output layer."""
    net = DecisionNet.initialized(seed)
    rng = np.random.default_rng(seed + 100)
    for k in TRAINABLE:
        net.params[k] = net.params[k] + 0.3 * rng.normal(size=net.params[k].shape)
    net.params["norm.obs_mean"] = rng.normal(size=5) * 0.1
    net.params["norm.obs_std"] = rng.uniform(0.5, 2.0, size=5)
    return net


def fd_gradient(net, X, T, y, name, h=1e-6):
    arr = net.params[name]
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        lp, _ = loss_and_grads(net, X, T, y)
        arr[i] = old - h
        lm, _ = loss_and_grads(net, X, T, y)
        arr[i] = old
        g[i] = (lp - lm) / (2 * h)
    return g


class TestGradients:
    @pytest.mark.parametrize("name", TRAINABLE)
    def test_matches_finite_differences(self, name):
        rng = np.random.default_rng(1)
        net = random_net(3)
        X, T, y = random_batch(rng)
        _, grads = loss_and_grads(net, X, T, y)
        num = fd_gradient(net, X, T, y, name)
        scale = max(np.abs(num).max(), np.abs(grads[name]).max(), 1e-8)
        assert np.abs(grads[name] - num).max() <= 1e-4 * scale

    def test_uniform_start_loss(self):
        rng = np.random.default_rng(2)
        X, T, y = random_batch(rng, 5, 3)
        loss, _ = loss_and_grads(DecisionNet.initialized(0), X, T, y)
        assert loss == pytest.approx(math.log(3))


class TestForward:
    def test_rows_are_distributions(self, rng):
        net = random_net(1)
        p = net_forward(net, DecisionFeatures(rng.normal(size=(4, 5)), rng.normal(size=3)))
        assert p.shape == (4, 3)
        assert np.all(p >= 0)
        assert p.sum(axis=1) == pytest.approx(np.ones(4))

    def test_no_obstacles(self):
        assert net_forward(random_net(0), DecisionFeatures(np.zeros((0, 5)), np.zeros(3))).shape == (0, 3)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            net_forward(random_net(0), DecisionFeatures(np.zeros((2, 4)), np.zeros(3)))

    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_permutation_equivariant(self, seed, m):
        # pooling is symmetric, so reordering obstacles reorders the outputs and nothing else
        rng = np.random.default_rng(seed)
        net = random_net(0)
        obs, tgt = rng.normal(size=(m, 5)), rng.normal(size=3)
        perm = rng.permutation(m)
        p = net_forward(net, DecisionFeatures(obs, tgt))
        q = net_forward(net, DecisionFeatures(obs[perm], tgt))
        assert q == pytest.approx(p[perm], abs=1e-12)

    def test_tie_goes_to_lowest_direction(self):
        probs = np.array([[1 / 3, 1 / 3, 1 / 3], [0.2, 0.4, 0.4], [0.1, 0.2, 0.7]])
        assert decide_from_probs(probs) == (Direction.LEFT, Direction.RIGHT, Direction.BACKWARD)


class TestFeatures:
    def test_robot_frame(self):
        # heading +y: an obstacle straight ahead lands on the +x axis of the robot frame
        s = RobotState(0.0, -0.15, math.pi / 2)
        geom = ControllerParams().geom
        f = decision_features(s, GoalSpec(0.0, 10.0), [ObstacleState(0.0, 3.0, 1.0, 0.0, radius=0.5)], [1.0], geom)
        assert f.obstacles[0] == pytest.approx([3.0, 0.0, 0.0, -1.0, 1.0], abs=1e-12)
        assert f.target == pytest.approx([10.0, 0.0, 10.0], abs=1e-12)

    def test_rotation_invariant(self, rng):
        geom = ControllerParams().geom
        s = RobotState(1.0, 2.0, 0.4, 1.0)
        o = ObstacleState(4.0, 3.0, -0.5, 0.2, radius=0.6)
        g = GoalSpec(9.0, 7.0)
        phi = 1.1

        def rot(x, y):
            return x * math.cos(phi) - y * math.sin(phi), x * math.sin(phi) + y * math.cos(phi)

        s2 = RobotState(*rot(s.x_p, s.y_p), s.theta + phi, s.v)
        o2 = ObstacleState(*rot(o.x_o, o.y_o), *rot(o.v_ox, o.v_oy), radius=o.radius)
        g2 = GoalSpec(*rot(g.x_g, g.y_g))
        a = decision_features(s, g, [o], [1.0], geom)
        b = decision_features(s2, g2, [o2], [1.0], geom)
        assert b.obstacles == pytest.approx(a.obstacles, abs=1e-12)
        assert b.target == pytest.approx(a.target, abs=1e-12)


class TestOracleLabel:
    def test_matches_enumeration(self, rng):
        for _ in range(20):
            asm, s, goal, obstacles, params, u_pre = random_controller_instance(rng, int(rng.integers(1, 4)))
            res = enumerate_subqps(asm.problem, asm.pairs, False, params.subqp_cap)
            lab = oracle_label(s, goal, obstacles, (), params, u_pre)
            assert lab == (res.assignment if res.solution.optimal else None)

    def test_label_count(self, rng):
        asm, s, goal, obstacles, params, u_pre = random_controller_instance(rng, 3)
        lab = oracle_label(s, goal, obstacles, (), params, u_pre)
        if lab is not None:
            assert len(lab) == len(asm.pairs)


def toy_samples(rng, n=60):
    """Label = sign of the lateral offset (left of the robot -> go right), an easily learnable rule."""
    out = []
    for _ in range(n):
        m = int(rng.integers(1, 4))
        obs = rng.normal(size=(m, 5))
        labels = tuple(Direction.RIGHT if y > 0 else Direction.LEFT for y in obs[:, 1])
        out.append(LabeledSample(obs, rng.normal(size=3), labels))
    return out


class TestTraining:
    def test_memorizes_small_set(self, rng):
        samples = toy_samples(rng)
        net, hist = train(samples, epochs=150, lr=0.05, batch_size=16, seed=0)
        assert hist.losses[-1] < 0.3 * hist.baseline
        assert dataset_accuracy(net, samples) >= 0.95
        assert dataset_loss(net, samples) == pytest.approx(dataset_loss(net, samples))

    def test_deterministic(self, rng):
        samples = toy_samples(rng, 30)
        a, ha = train(samples, epochs=5, lr=0.05, seed=4)
        b, hb = train(samples, epochs=5, lr=0.05, seed=4)
        assert ha.losses == hb.losses
        for k in a.params:
            assert np.array_equal(a.params[k], b.params[k])

    def test_needs_an_obstacle(self):
        with pytest.raises(ValueError):
            train([LabeledSample(np.zeros((0, 5)), np.zeros(3), ())], epochs=1)


class TestPersistence:
    def test_weights_round_trip(self, tmp_path):
        net = random_net(5)
        net.meta = {"epochs": 3}
        save_weights(net, tmp_path / "w.bin")
        back = load_weights(tmp_path / "w.bin")
        assert back.meta == net.meta
        for k in net.params:
            assert np.array_equal(back.params[k], net.params[k])

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "w.bin"
        path.write_bytes(b'{"format": "other", "version": 1}\n')
        with pytest.raises(ValueError):
            load_weights(path)

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "w.bin"
        save_weights(random_net(0), path)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ValueError):
            load_weights(path)

    def test_shipped_weights_load(self):
        net = load_weights(DEFAULT_WEIGHTS)
        assert net.meta.get("epochs", 0) > 0

    def test_dataset_round_trip(self, tmp_path, rng):
        samples = toy_samples(rng, 10)
        save_dataset(samples, tmp_path / "d.jsonl")
        back = load_dataset(tmp_path / "d.jsonl")
        assert len(back) == len(samples)
        for a, b in zip(samples, back):
            assert np.array_equal(a.obstacles, b.obstacles)
            assert np.array_equal(a.target, b.target)
            assert a.labels == b.labels


class TestDataset:
    def test_deterministic_and_labeled_by_oracle(self):
        a = gen_dataset(3, seed=11, label_every=7)
        b = gen_dataset(3, seed=11, label_every=7)
        assert len(a) == len(b) > 0
        for x, y in zip(a, b):
            assert x.to_json() == y.to_json()
        assert all(len(smp.labels) == smp.obstacles.shape[0] > 0 for smp in a)

    def test_rejects_bad_stride(self):
        with pytest.raises(ValueError):
            gen_dataset(1, label_every=0)
