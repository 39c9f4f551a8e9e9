"""Direction selection: enumeration oracle labels and a small pooled decision network.

The network sees each sensed disc and the goal in the robot frame:

* obstacle features ``(x, y, vx, vy, r_sum)``: disc center and its velocity
  relative to the robot center, both rotated into the heading-aligned frame;
* target features ``(x, y, dist)``: goal center in the same frame.

Five blocks: a per-obstacle encoder (two tanh layers), average pooling with a
global layer, a target embedding, concatenation, and a two-layer head giving
three logits (Left, Right, Backward) per obstacle. Training is plain
minibatch SGD with momentum on the mean cross-entropy, all in numpy.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .assembly import Assembly, ControllerParams, Neighbor, assemble
from .clf import GoalSpec
from .geometry import ControlInput, ObstacleState, RobotState, center_position, center_velocity, rotate
from .solver import Direction, enumerate_subqps

N_OBS_FEATURES = 5
N_TARGET_FEATURES = 3
N_CLASSES = 3
WIDTH = 64

WEIGHT_FORMAT = "vocbf-decnet"
WEIGHT_VERSION = 1

# (name, shape) in file order; the four normalization tensors are not trained
_LAYOUT = (
    ("enc1.W", (N_OBS_FEATURES, WIDTH)),
    ("enc1.b", (WIDTH,)),
    ("enc2.W", (WIDTH, WIDTH)),
    ("enc2.b", (WIDTH,)),
    ("glob.W", (WIDTH, WIDTH)),
    ("glob.b", (WIDTH,)),
    ("tgt.W", (N_TARGET_FEATURES, WIDTH)),
    ("tgt.b", (WIDTH,)),
    ("head1.W", (3 * WIDTH, WIDTH)),
    ("head1.b", (WIDTH,)),
    ("head2.W", (WIDTH, N_CLASSES)),
    ("head2.b", (N_CLASSES,)),
    ("norm.obs_mean", (N_OBS_FEATURES,)),
    ("norm.obs_std", (N_OBS_FEATURES,)),
    ("norm.tgt_mean", (N_TARGET_FEATURES,)),
    ("norm.tgt_std", (N_TARGET_FEATURES,)),
)
TRAINABLE = tuple(name for name, _ in _LAYOUT if not name.startswith("norm."))

DEFAULT_WEIGHTS = Path(__file__).with_name("data") / "decnet_default.bin"


class DecisionFeatures(NamedTuple):
    obstacles: np.ndarray  # (M, 5)
    target: np.ndarray  # (3,)


def decision_features(
    s: RobotState,
    goal: GoalSpec,
    others: Sequence[ObstacleState],
    r_sums: Sequence[float],
    geom,
) -> DecisionFeatures:
    cx, cy = center_position(s, geom)
    vx, vy = center_velocity(s, geom)
    obs = np.empty((len(others), N_OBS_FEATURES))
    for j, (o, r) in enumerate(zip(others, r_sums)):
        px, py = rotate((o.x_o - cx, o.y_o - cy), -s.theta)
        qx, qy = rotate((o.v_ox - vx, o.v_oy - vy), -s.theta)
        obs[j] = (px, py, qx, qy, r)
    gx, gy = rotate((goal.x_g - cx, goal.y_g - cy), -s.theta)
    tgt = np.array([gx, gy, math.hypot(gx, gy)])
    if not (np.isfinite(obs).all() and np.isfinite(tgt).all()):
        raise ValueError("non-finite decision features")
    return DecisionFeatures(obs, tgt)


def assembly_features(s: RobotState, goal: GoalSpec, asm: Assembly, geom) -> DecisionFeatures:
    return decision_features(s, goal, asm.others, asm.r_sums, geom)


@dataclass
class DecisionNet:
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, shape in _LAYOUT:
            if name not in self.params:
                raise ValueError(f"missing tensor {name}")
            arr = np.asarray(self.params[name], dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"tensor {name} has shape {arr.shape}, expected {shape}")
            self.params[name] = arr

    @classmethod
    def zeros(cls) -> "DecisionNet":
        params = {name: np.zeros(shape) for name, shape in _LAYOUT}
        params["norm.obs_std"][:] = 1.0
        params["norm.tgt_std"][:] = 1.0
        return cls(params)

    @classmethod
    def initialized(cls, seed: int = 0) -> "DecisionNet":
        """Glorot-uniform hidden layers; the output layer starts at zero (uniform predictions)."""
        rng = np.random.default_rng(seed)
        net = cls.zeros()
        for name, shape in _LAYOUT:
            if name.endswith(".W") and name != "head2.W":
                bound = math.sqrt(6.0 / (shape[0] + shape[1]))
                net.params[name] = rng.uniform(-bound, bound, size=shape)
        return net

    def copy(self) -> "DecisionNet":
        return DecisionNet({k: v.copy() for k, v in self.params.items()}, dict(self.meta))

    def set_normalization(self, obs: np.ndarray, tgt: np.ndarray) -> None:
        self.params["norm.obs_mean"] = obs.mean(axis=0)
        self.params["norm.obs_std"] = np.maximum(obs.std(axis=0), 1e-6)
        self.params["norm.tgt_mean"] = tgt.mean(axis=0)
        self.params["norm.tgt_std"] = np.maximum(tgt.std(axis=0), 1e-6)


def _forward(params: dict, X: np.ndarray, T: np.ndarray):
    """Batched forward pass; ``X`` is ``(B, M, 5)``, ``T`` is ``(B, 3)``. Returns logits and cache."""
    Xn = (X - params["norm.obs_mean"]) / params["norm.obs_std"]
    Tn = (T - params["norm.tgt_mean"]) / params["norm.tgt_std"]
    h1 = np.tanh(Xn @ params["enc1.W"] + params["enc1.b"])
    h2 = np.tanh(h1 @ params["enc2.W"] + params["enc2.b"])
    pooled = h2.mean(axis=1)
    gg = np.tanh(pooled @ params["glob.W"] + params["glob.b"])
    tt = np.tanh(Tn @ params["tgt.W"] + params["tgt.b"])
    M = X.shape[1]
    cat = np.concatenate(
        [h2, np.repeat(gg[:, None, :], M, axis=1), np.repeat(tt[:, None, :], M, axis=1)], axis=2
    )
    h3 = np.tanh(cat @ params["head1.W"] + params["head1.b"])
    logits = h3 @ params["head2.W"] + params["head2.b"]
    return logits, (Xn, Tn, h1, h2, pooled, gg, tt, cat, h3)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _backward(params: dict, cache, dlogits: np.ndarray) -> dict:
    Xn, Tn, h1, h2, pooled, gg, tt, cat, h3 = cache
    M = h2.shape[1]
    W = WIDTH
    g = {}
    g["head2.W"] = np.einsum("bmi,bmj->ij", h3, dlogits)
    g["head2.b"] = dlogits.sum(axis=(0, 1))
    da3 = (dlogits @ params["head2.W"].T) * (1.0 - h3 * h3)
    g["head1.W"] = np.einsum("bmi,bmj->ij", cat, da3)
    g["head1.b"] = da3.sum(axis=(0, 1))
    dcat = da3 @ params["head1.W"].T
    dag = dcat[:, :, W : 2 * W].sum(axis=1) * (1.0 - gg * gg)
    g["glob.W"] = pooled.T @ dag
    g["glob.b"] = dag.sum(axis=0)
    dat = dcat[:, :, 2 * W :].sum(axis=1) * (1.0 - tt * tt)
    g["tgt.W"] = Tn.T @ dat
    g["tgt.b"] = dat.sum(axis=0)
    dh2 = dcat[:, :, :W] + (dag @ params["glob.W"].T)[:, None, :] / M
    da2 = dh2 * (1.0 - h2 * h2)
    g["enc2.W"] = np.einsum("bmi,bmj->ij", h1, da2)
    g["enc2.b"] = da2.sum(axis=(0, 1))
    da1 = (da2 @ params["enc2.W"].T) * (1.0 - h1 * h1)
    g["enc1.W"] = np.einsum("bmi,bmj->ij", Xn, da1)
    g["enc1.b"] = da1.sum(axis=(0, 1))
    return g


def net_forward(net: DecisionNet, features: DecisionFeatures) -> np.ndarray:
    """Per-obstacle probabilities ``(M, 3)`` over (Left, Right, Backward)."""
    obs = np.asarray(features.obstacles, dtype=float)
    tgt = np.asarray(features.target, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != N_OBS_FEATURES or tgt.shape != (N_TARGET_FEATURES,):
        raise ValueError(f"feature shapes {obs.shape}, {tgt.shape} do not match the network")
    if obs.shape[0] == 0:
        return np.zeros((0, N_CLASSES))
    logits, _ = _forward(net.params, obs[None], tgt[None])
    return _softmax(logits[0])


def decide_from_probs(probs: np.ndarray) -> tuple:
    # argmax returns the first maximum, so exact ties go to the lowest direction
    return tuple(Direction(int(i)) for i in np.argmax(np.asarray(probs), axis=1))


def net_decide(net: DecisionNet, features: DecisionFeatures) -> tuple:
    return decide_from_probs(net_forward(net, features))


def loss_and_grads(net: DecisionNet, X: np.ndarray, T: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over all obstacles of a same-M batch and its parameter gradients."""
    logits, cache = _forward(net.params, X, T)
    probs = _softmax(logits)
    n = y.size
    picked = np.take_along_axis(probs, y[..., None], axis=2)[..., 0]
    loss = float(-np.log(np.maximum(picked, 1e-300)).sum() / n)
    dlogits = probs.copy()
    np.put_along_axis(dlogits, y[..., None], np.take_along_axis(dlogits, y[..., None], axis=2) - 1.0, axis=2)
    dlogits /= n
    return loss, _backward(net.params, cache, dlogits)


# ---------------------------------------------------------------- samples


class LabeledSample(NamedTuple):
    obstacles: np.ndarray  # (M, 5)
    target: np.ndarray  # (3,)
    labels: tuple  # M directions

    def to_json(self) -> str:
        return json.dumps(
            {
                "obstacles": self.obstacles.tolist(),
                "target": self.target.tolist(),
                "labels": [int(d) for d in self.labels],
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "LabeledSample":
        rec = json.loads(line)
        obs = np.asarray(rec["obstacles"], dtype=float).reshape(-1, N_OBS_FEATURES)
        labels = tuple(Direction(int(v)) for v in rec["labels"])
        if len(labels) != obs.shape[0]:
            raise ValueError("one label per obstacle is required")
        return cls(obs, np.asarray(rec["target"], dtype=float), labels)


def save_dataset(samples: Sequence[LabeledSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for smp in samples:
            fh.write(smp.to_json() + "\n")


def load_dataset(path) -> list[LabeledSample]:
    with open(path, encoding="utf-8") as fh:
        return [LabeledSample.from_json(line) for line in fh if line.strip()]


def oracle_label(
    s: RobotState,
    goal: GoalSpec,
    obstacles: Sequence[ObstacleState],
    neighbors: Sequence[Neighbor] = (),
    params: ControllerParams = ControllerParams(),
    u_pre: ControlInput = ControlInput(),
):
    """Optimal per-obstacle directions from sub-QP enumeration, or ``None`` if every sub-QP is infeasible."""
    asm = assemble(s, goal, obstacles, neighbors, params, u_pre)
    res = enumerate_subqps(asm.problem, asm.pairs, params.lp_prescreen, params.subqp_cap)
    return res.assignment if res.solution.optimal else None


def labeled_sample(s, goal, asm: Assembly, assignment, geom) -> LabeledSample:
    f = assembly_features(s, goal, asm, geom)
    return LabeledSample(f.obstacles, f.target, tuple(assignment))


# ---------------------------------------------------------------- training


class TrainHistory(NamedTuple):
    losses: list  # mean training loss per epoch
    baseline: float  # loss of uniform predictions, log(3)


def _group_by_m(samples: Sequence[LabeledSample]):
    groups: dict[int, list[int]] = {}
    for i, smp in enumerate(samples):
        m = smp.obstacles.shape[0]
        if m:
            groups.setdefault(m, []).append(i)
    packed = {}
    for m, idx in sorted(groups.items()):
        X = np.stack([samples[i].obstacles for i in idx])
        T = np.stack([samples[i].target for i in idx])
        y = np.array([[int(d) for d in samples[i].labels] for i in idx], dtype=np.int64)
        packed[m] = (X, T, y)
    return packed


def dataset_loss(net: DecisionNet, samples: Sequence[LabeledSample]) -> float:
    total, count = 0.0, 0
    for X, T, y in _group_by_m(samples).values():
        loss, _ = loss_and_grads(net, X, T, y)
        total += loss * y.size
        count += y.size
    return total / count if count else float("nan")


def dataset_accuracy(net: DecisionNet, samples: Sequence[LabeledSample]) -> float:
    hit, count = 0, 0
    for X, T, y in _group_by_m(samples).values():
        logits, _ = _forward(net.params, X, T)
        hit += int((logits.argmax(axis=2) == y).sum())
        count += y.size
    return hit / count if count else float("nan")


def train(
    samples: Sequence[LabeledSample],
    epochs: int = 200,
    lr: float = 1e-3,
    momentum: float = 0.9,
    batch_size: int = 64,
    seed: int = 0,
    net: DecisionNet | None = None,
    log=None,
) -> tuple[DecisionNet, TrainHistory]:
    """Fit the network to oracle labels; deterministic for a fixed seed."""
    packed = _group_by_m(samples)
    if not packed:
        raise ValueError("training needs at least one sample with an obstacle")
    rng = np.random.default_rng(seed)
    if net is None:
        net = DecisionNet.initialized(seed)
        obs = np.concatenate([X.reshape(-1, N_OBS_FEATURES) for X, _, _ in packed.values()])
        tgt = np.concatenate([T for _, T, _ in packed.values()])
        net.set_normalization(obs, tgt)
    else:
        net = net.copy()
    velocity = {k: np.zeros_like(net.params[k]) for k in TRAINABLE}
    losses = []
    for epoch in range(epochs):
        batches = []
        for m, (X, T, y) in packed.items():
            order = rng.permutation(len(y))
            for start in range(0, len(order), batch_size):
                batches.append((m, order[start : start + batch_size]))
        rng.shuffle(batches)
        total, count = 0.0, 0
        for m, idx in batches:
            X, T, y = packed[m]
            loss, grads = loss_and_grads(net, X[idx], T[idx], y[idx])
            total += loss * y[idx].size
            count += y[idx].size
            for k in TRAINABLE:
                velocity[k] = momentum * velocity[k] - lr * grads[k]
                net.params[k] = net.params[k] + velocity[k]
        losses.append(total / count)
        if log is not None:
            log(epoch, losses[-1])
    net.meta = {**net.meta, "epochs": epochs, "lr": lr, "momentum": momentum, "seed": seed, "samples": len(samples)}
    return net, TrainHistory(losses, math.log(N_CLASSES))


# ---------------------------------------------------------------- persistence


def save_weights(net: DecisionNet, path) -> None:
    """Header line (JSON) followed by little-endian float64 tensors in layout order."""
    header = {
        "format": WEIGHT_FORMAT,
        "version": WEIGHT_VERSION,
        "dtype": "<f8",
        "tensors": [[name, list(shape)] for name, shape in _LAYOUT],
        "meta": net.meta,
    }
    buf = io.BytesIO()
    buf.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
    for name, _ in _LAYOUT:
        buf.write(np.ascontiguousarray(net.params[name], dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_weights(path=DEFAULT_WEIGHTS) -> DecisionNet:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing weight header")
    header = json.loads(raw[:nl].decode("utf-8"))
    if header.get("format") != WEIGHT_FORMAT or header.get("version") != WEIGHT_VERSION:
        raise ValueError(f"{path}: unsupported weight format")
    if header.get("dtype") != "<f8":
        raise ValueError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    params = {}
    offset = nl + 1
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(raw):
            raise ValueError(f"{path}: truncated at tensor {name}")
        params[name] = np.frombuffer(raw[offset : offset + nbytes], dtype="<f8").reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw):
        raise ValueError(f"{path}: {len(raw) - offset} trailing bytes")
    return DecisionNet(params, header.get("meta", {}))
