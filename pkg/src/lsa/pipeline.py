"""Glue between datasets, encoders, probe training and recursive evaluation."""

from __future__ import annotations

import numpy as np

from .embed import EncoderSpec, ProbeParams, TrainConfig, encode_batch, fit_pca, train_probe
from .evalrec import MAX_N, EvalReport, evaluate_sequences
from .scene.dataset import Dataset, Trajectory


def encode_trajectory(ds: Dataset, traj: Trajectory, encoder: EncoderSpec) -> np.ndarray:
    if encoder.needs_state:
        return encode_batch(encoder, states=traj.states)
    return encode_batch(encoder, np.stack(ds.frames_of(traj)))


def prepare_encoder(ds: Dataset, encoder: EncoderSpec) -> EncoderSpec:
    """Fit data-dependent encoders (PCA) on the training frames."""
    if encoder.kind != "pca" or encoder.fitted:
        return encoder
    frames = np.stack([f for t in ds.train for f in ds.frames_of(t)])
    return fit_pca(frames, encoder.d_model, encoder.seed)


def training_tuples(ds: Dataset, encoder: EncoderSpec):
    """Atomic transitions ``(z0, action, z1)`` from the training split."""
    z0, actions, z1 = [], [], []
    for t in ds.train:
        if len(t.actions) != 1:
            raise ValueError(f"training trajectory {t.index} is not atomic")
        emb = encode_trajectory(ds, t, encoder)
        z0.append(emb[0])
        z1.append(emb[1])
        actions.append(t.actions[0])
    if not z0:
        raise ValueError("dataset has no training trajectories")
    return np.array(z0), np.array(actions, dtype=np.int64), np.array(z1)


def train_on_dataset(ds: Dataset, encoder: EncoderSpec, cfg: TrainConfig):
    z0, actions, z1 = training_tuples(ds, encoder)
    return train_probe(z0, actions, z1, cfg)


def evaluate_split(ds: Dataset, probe: ProbeParams, encoder: EncoderSpec, loss_kind: str,
                   metadata: dict | None = None, max_n: int = MAX_N) -> EvalReport:
    sequences = [(encode_trajectory(ds, t, encoder), t.actions) for t in ds.test]
    meta = {"level": ds.config.level, "encoder": encoder.describe(), "test_trajectories": len(sequences)}
    meta.update(metadata or {})
    return evaluate_sequences(probe, sequences, loss_kind, max_n, meta)
