"""Experiment configuration shared by all pipeline subcommands."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .embed import ENCODER_KINDS, TrainConfig, make_encoder
from .scene.dataset import DatasetConfig

LOSS_KINDS = ("mse", "cosine")


@dataclass
class ExperimentConfig:
    levels: list = field(default_factory=lambda: [1, 2, 3])
    object_seeds: list = field(default_factory=lambda: list(range(7)))
    train_trajectories: int = 210
    test_trajectories: int = 35
    walk_length: int = 20
    injectivity_pairs: int = 100
    encoder: dict = field(default_factory=lambda: {"kind": "downsample", "d_model": None, "seed": 0})
    train: TrainConfig = field(default_factory=TrainConfig)
    losses: list = field(default_factory=lambda: list(LOSS_KINDS))
    output_dir: str = "lsa_out"
    seed: int = 42

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        bad = [lvl for lvl in self.levels if lvl not in (1, 2, 3)]
        if bad:
            raise ValueError(f"levels must be 1, 2 or 3, got {bad}")
        bad = [k for k in self.losses if k not in LOSS_KINDS]
        if bad:
            raise ValueError(f"unknown loss kinds {bad}")
        if self.encoder.get("kind") not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder {self.encoder.get('kind')!r}")
        if self.train_trajectories < 1 or self.test_trajectories < 1:
            raise ValueError("need at least one training and one test trajectory")

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "object_seeds": list(self.object_seeds),
            "train_trajectories": self.train_trajectories,
            "test_trajectories": self.test_trajectories,
            "walk_length": self.walk_length,
            "injectivity_pairs": self.injectivity_pairs,
            "encoder": dict(self.encoder),
            "train": self.train.to_dict(),
            "losses": list(self.losses),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = cls().to_dict()
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "encoder" in d:
            d["encoder"] = {**known["encoder"], **d["encoder"]}
        if "train" in d:
            d["train"] = TrainConfig.from_dict({**known["train"], **d["train"]})
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping")
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Copy with ``seed`` propagated to every RNG stream."""
        d = self.to_dict()
        d["seed"] = seed
        d["train"]["seed"] = seed
        return ExperimentConfig.from_dict(d)

    def output_root(self) -> Path:
        return Path(os.environ.get("LSA_OUT") or self.output_dir)

    def dataset_config(self, level: int) -> DatasetConfig:
        return DatasetConfig(
            level=level,
            object_seeds=list(self.object_seeds),
            train_trajectories=self.train_trajectories,
            test_trajectories=self.test_trajectories,
            walk_length=self.walk_length,
            seed=self.seed,
            injectivity_pairs=self.injectivity_pairs,
        )

    def encoder_spec(self):
        e = self.encoder
        return make_encoder(e["kind"], e.get("d_model"), int(e.get("seed", 0)))

    def train_config(self, loss_kind: str) -> TrainConfig:
        d = self.train.to_dict()
        d["loss_kind"] = loss_kind
        return TrainConfig.from_dict(d)
