"""Frozen encoders and the linear transition probe.

The probe predicts the next embedding from the current one and an action::

    z_next = W @ concat(z, action_table[a]) + b

with ``W`` of shape ``(d, 2d)``.  It is trained with a hand-written Adam on
atomic (one-step) transitions; gradients are analytic.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .scene.actions import NUM_ACTIONS, PoseState
from .scene.raster import FRAME_SIZE

POOL = 8
DOWNSAMPLE_DIM = (FRAME_SIZE // POOL) ** 2
ORACLE_DIM = 15
COSINE_EPS = 1e-12
ENCODER_KINDS = ("downsample", "random-projection", "pca", "oracle")


class EncoderError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, message: str, epoch: int | None = None, step: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


@dataclass(frozen=True, eq=False)
class EncoderSpec:
    kind: str = "downsample"
    d_model: int = DOWNSAMPLE_DIM
    seed: int = 0
    mean: np.ndarray | None = field(default=None, repr=False)
    basis: np.ndarray | None = field(default=None, repr=False)
    explained_variance: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise EncoderError(f"unknown encoder {self.kind!r}; choose from {', '.join(ENCODER_KINDS)}")
        if self.kind == "downsample" and self.d_model != DOWNSAMPLE_DIM:
            raise EncoderError(f"downsample encoder has d_model {DOWNSAMPLE_DIM}")
        if self.kind == "oracle" and self.d_model != ORACLE_DIM:
            raise EncoderError(f"oracle encoder has d_model {ORACLE_DIM}")

    @property
    def needs_state(self) -> bool:
        return self.kind == "oracle"

    @property
    def fitted(self) -> bool:
        return self.kind != "pca" or self.basis is not None

    def describe(self) -> dict:
        return {"kind": self.kind, "d_model": self.d_model, "seed": self.seed}


def make_encoder(kind: str, d_model: int | None = None, seed: int = 0) -> EncoderSpec:
    defaults = {"downsample": DOWNSAMPLE_DIM, "oracle": ORACLE_DIM, "random-projection": 128, "pca": 64}
    if kind not in defaults:
        raise EncoderError(f"unknown encoder {kind!r}; choose from {', '.join(ENCODER_KINDS)}")
    return EncoderSpec(kind, d_model or defaults[kind], seed)


@lru_cache(maxsize=4)
def _projection(seed: int, d_model: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 1013])
    return rng.standard_normal((d_model, FRAME_SIZE * FRAME_SIZE)) / np.sqrt(FRAME_SIZE * FRAME_SIZE)


def oracle_embedding(state: PoseState) -> np.ndarray:
    """Pose coordinates: rotation (9), 3D offset (3), image offset / half-width (2), scale (1).

    Every generator acts on these coordinates linearly or by a constant
    offset, so a linear map with an action-dependent offset can track it.
    """
    half = FRAME_SIZE / 2.0
    return np.concatenate([
        np.ravel(state.rotation),
        state.translation_3d,
        np.asarray(state.translation_2d) / half,
        [state.scale],
    ]).astype(np.float64)


def _check_frames(frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.shape[-2:] != (FRAME_SIZE, FRAME_SIZE):
        raise EncoderError(f"frames must be {FRAME_SIZE}x{FRAME_SIZE}, got {frames.shape[-2:]}")
    return frames


def encode_batch(spec: EncoderSpec, frames=None, states=None) -> np.ndarray:
    """Embed a stack of frames (or poses, for the oracle) into an ``(n, d_model)`` array."""
    if spec.kind == "oracle":
        if states is None:
            raise EncoderError("the oracle encoder needs pose states")
        return np.stack([oracle_embedding(s) for s in states])
    frames = _check_frames(frames).reshape(-1, FRAME_SIZE, FRAME_SIZE).astype(np.float64) / 255.0
    n = frames.shape[0]
    if spec.kind == "downsample":
        k = FRAME_SIZE // POOL
        return frames.reshape(n, k, POOL, k, POOL).mean(axis=(2, 4)).reshape(n, -1)
    flat = frames.reshape(n, -1)
    if spec.kind == "random-projection":
        return flat @ _projection(spec.seed, spec.d_model).T
    if not spec.fitted:
        raise EncoderError("pca encoder used before fit_pca")
    return (flat - spec.mean) @ spec.basis.T


def encode(spec: EncoderSpec, frame=None, state: PoseState | None = None) -> np.ndarray:
    if spec.kind == "oracle":
        return encode_batch(spec, states=[state])[0]
    return encode_batch(spec, np.asarray(frame)[None])[0]


def fit_pca(data, d_model: int, seed: int = 0) -> EncoderSpec:
    """Mean-centered principal basis of the rows of ``data`` (frames are flattened).

    Uses the eigen-decomposition of whichever of the Gram or covariance
    matrix is smaller.  Component signs are fixed so the largest-magnitude
    coordinate is positive, which makes the basis deterministic.
    """
    x = np.asarray(data, dtype=np.float64)
    is_frames = x.ndim == 3 and x.shape[1:] == (FRAME_SIZE, FRAME_SIZE)
    if is_frames:
        x = x / 255.0
    x = x.reshape(x.shape[0], -1)
    n, dim = x.shape
    if n < d_model:
        raise EncoderError(f"fit_pca needs at least {d_model} samples, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    if n <= dim:
        evals, evecs = np.linalg.eigh(xc @ xc.T)
        order = np.argsort(evals)[::-1][:d_model]
        evals = np.clip(evals[order], 0.0, None)
        basis = (xc.T @ evecs[:, order]).T
        norms = np.linalg.norm(basis, axis=1, keepdims=True)
        basis = basis / np.where(norms > 0, norms, 1.0)
    else:
        evals, evecs = np.linalg.eigh(xc.T @ xc)
        order = np.argsort(evals)[::-1][:d_model]
        evals = np.clip(evals[order], 0.0, None)
        basis = evecs[:, order].T
    idx = np.argmax(np.abs(basis), axis=1)
    basis *= np.sign(basis[np.arange(d_model), idx])[:, None]
    return EncoderSpec("pca", d_model, seed, mean, basis, evals / max(n - 1, 1))


def pca_project(spec: EncoderSpec, rows) -> np.ndarray:
    """Project generic (already flattened) rows with a fitted PCA spec."""
    return (np.asarray(rows, dtype=np.float64) - spec.mean) @ spec.basis.T


# Probe

@dataclass
class ProbeParams:
    W: np.ndarray
    b: np.ndarray
    action_table: np.ndarray

    def __post_init__(self):
        d = self.b.shape[0]
        if self.W.shape != (d, 2 * d) or self.action_table.shape[1] != d:
            raise ValueError(
                f"inconsistent probe shapes W{self.W.shape} b{self.b.shape} E{self.action_table.shape}"
            )

    @property
    def d_model(self) -> int:
        return self.b.shape[0]

    def as_dict(self) -> dict:
        return {"W": self.W, "b": self.b, "action_table": self.action_table}

    def copy(self) -> "ProbeParams":
        return ProbeParams(self.W.copy(), self.b.copy(), self.action_table.copy())

    def to_json(self) -> dict:
        def pack(a):
            a = np.ascontiguousarray(a, dtype="<f8")
            return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}

        return {
            "format": "lsa-probe/1",
            "encoding": "base64 of row-major little-endian float64",
            "d_model": self.d_model,
            "n_actions": int(self.action_table.shape[0]),
            "W": pack(self.W),
            "b": pack(self.b),
            "action_table": pack(self.action_table),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ProbeParams":
        def unpack(d):
            return np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").reshape(d["shape"]).astype(np.float64)

        return cls(unpack(data["W"]), unpack(data["b"]), unpack(data["action_table"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ProbeParams":
        return cls.from_json(json.loads(Path(path).read_text()))


def identity_probe(d_model: int, n_actions: int = NUM_ACTIONS) -> ProbeParams:
    return ProbeParams(
        np.hstack([np.eye(d_model), np.zeros((d_model, d_model))]),
        np.zeros(d_model),
        np.zeros((n_actions, d_model)),
    )


def init_probe(d_model: int, seed, n_actions: int = NUM_ACTIONS, noise: float = 1e-3) -> ProbeParams:
    """``W = [I | 0]`` plus small noise, zero bias, action embeddings ~ N(0, 1/d)."""
    rng = np.random.default_rng(seed)
    p = identity_probe(d_model, n_actions)
    p.W += noise * rng.standard_normal(p.W.shape)
    p.action_table = rng.standard_normal((n_actions, d_model)) / np.sqrt(d_model)
    return p


def _check_action(p: ProbeParams, action) -> None:
    a = np.asarray(action)
    if np.any(a < 0) or np.any(a >= p.action_table.shape[0]):
        raise IndexError(f"action index out of range 0..{p.action_table.shape[0] - 1}")


def probe_forward(p: ProbeParams, z, action: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (p.d_model,):
        raise ValueError(f"embedding has shape {z.shape}, probe expects ({p.d_model},)")
    _check_action(p, action)
    return p.W @ np.concatenate([z, p.action_table[action]]) + p.b


def probe_forward_batch(p: ProbeParams, z, actions) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != p.d_model:
        raise ValueError(f"embeddings have shape {z.shape}, probe expects (n, {p.d_model})")
    actions = np.asarray(actions, dtype=np.int64)
    _check_action(p, actions)
    d = p.d_model
    return z @ p.W[:, :d].T + p.action_table[actions] @ p.W[:, d:].T + p.b


def loss(kind: str, predicted, target) -> float:
    """Squared Euclidean distance (``mse``) or one minus cosine similarity (``cosine``)."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise ValueError(f"shape mismatch {predicted.shape} vs {target.shape}")
    if kind == "mse":
        return float(np.sum((predicted - target) ** 2))
    if kind == "cosine":
        npred, ntarget = np.linalg.norm(predicted), np.linalg.norm(target)
        if npred < COSINE_EPS or ntarget < COSINE_EPS:
            raise DegenerateInputError("cosine loss needs nonzero vectors")
        return float(1.0 - predicted @ target / (npred * ntarget))
    raise ValueError(f"unknown loss {kind!r}")


def loss_batch(kind: str, predicted: np.ndarray, target: np.ndarray):
    """Per-sample losses, their gradients w.r.t. ``predicted``, and a validity mask.

    For cosine, rows where either vector has near-zero norm are invalid; their
    loss and gradient are zero.
    """
    if kind == "mse":
        diff = predicted - target
        return np.sum(diff * diff, axis=1), 2.0 * diff, np.ones(len(predicted), dtype=bool)
    if kind == "cosine":
        np_ = np.linalg.norm(predicted, axis=1)
        nt = np.linalg.norm(target, axis=1)
        valid = (np_ >= COSINE_EPS) & (nt >= COSINE_EPS)
        np_s = np.where(valid, np_, 1.0)
        nt_s = np.where(valid, nt, 1.0)
        dot = np.sum(predicted * target, axis=1)
        cos = dot / (np_s * nt_s)
        grad = -(target / (np_s * nt_s)[:, None] - (dot / (np_s**3 * nt_s))[:, None] * predicted)
        values = np.where(valid, 1.0 - cos, 0.0)
        return values, np.where(valid[:, None], grad, 0.0), valid
    raise ValueError(f"unknown loss {kind!r}")


def batch_gradients(p: ProbeParams, z, actions, target, kind: str):
    """Mean loss over valid samples and its gradients w.r.t. ``W``, ``b`` and ``action_table``."""
    actions = np.asarray(actions, dtype=np.int64)
    d = p.d_model
    e = p.action_table[actions]
    pred = z @ p.W[:, :d].T + e @ p.W[:, d:].T + p.b
    values, g, valid = loss_batch(kind, pred, target)
    n = max(int(valid.sum()), 1)
    g = g / n
    x = np.hstack([z, e])
    grads = {
        "W": g.T @ x,
        "b": g.sum(axis=0),
        "action_table": np.zeros_like(p.action_table),
    }
    np.add.at(grads["action_table"], actions, g @ p.W[:, d:])
    return float(values.sum() / n), grads, int(valid.sum())


class Adam:
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 1024
    epochs: int = 50
    seed: int = 42
    loss_kind: str = "mse"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = cls().to_dict()
        return cls(**{k: type(known[k])(v) for k, v in d.items() if k in known})


def train_probe(z0, actions, targets, cfg: TrainConfig, init: ProbeParams | None = None):
    """Fit the probe on atomic transitions ``z0 --action--> targets``.

    Returns ``(params, curve)`` where ``curve[i]`` is the mean training loss
    seen during epoch ``i + 1``.  The shuffle order and initialization derive
    from ``cfg.seed`` only, so repeated runs are bit-identical.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.int64)
    n = len(z0)
    if n == 0:
        raise ValueError("training set is empty")
    if targets.shape != z0.shape or actions.shape != (n,):
        raise ValueError("z0, actions and targets must describe the same samples")
    init_seed, shuffle_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    params = init.copy() if init is not None else init_probe(z0.shape[1], init_seed)
    arrays = params.as_dict()
    opt = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    rng = np.random.default_rng(shuffle_seed)
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                batch_loss, grads, valid = batch_gradients(params, z0[idx], actions[idx], targets[idx], cfg.loss_kind)
            if not np.isfinite(batch_loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise DivergenceError(f"training diverged in epoch {epoch}", epoch=epoch)
            total += batch_loss * valid
            count += valid
            opt.step(arrays, grads)
        curve.append(total / max(count, 1))
    return params, curve


def write_curve(path, curve) -> None:
    lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(curve, 1)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve(path) -> list[float]:
    rows = Path(path).read_text().splitlines()[1:]
    return [float(r.split(",")[1]) for r in rows if r]
