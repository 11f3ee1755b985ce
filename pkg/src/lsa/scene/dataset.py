"""Random-walk trajectories, dataset generation and the visual injectivity check."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .actions import CANONICAL, NUM_ACTIONS, PoseState, generator_block, level_generators, replay
from .mesh import Mesh, generate_mesh, sphere_mesh
from .raster import FRAME_SIZE, read_pgm, render, write_pgm

MAX_WALK = 20
# 0.5% of the largest possible L2 distance between two 8-bit frames.
INJECTIVITY_TAU = 0.005 * 255.0 * FRAME_SIZE
SPHERE_ID = -1


@lru_cache(maxsize=32)
def object_mesh(object_id: int) -> Mesh:
    """Procedural mesh for an object id; ``SPHERE_ID`` is the symmetric control."""
    if object_id == SPHERE_ID:
        return sphere_mesh()
    return generate_mesh(object_id)


@dataclass
class Trajectory:
    object_id: int
    level: int
    initial_state: PoseState
    actions: list
    frames: list | None = None
    split: str = "test"
    index: int = 0
    burn_in: list = field(default_factory=list)

    @property
    def states(self) -> list[PoseState]:
        return replay(self.level, self.actions, self.initial_state)

    def frame_paths(self) -> list[str]:
        return [f"frames/{self.split}/{self.index:05d}_{k:02d}.pgm" for k in range(len(self.actions) + 1)]


def render_states(states, mesh: Mesh) -> list[np.ndarray]:
    return [render(s, mesh) for s in states]


def random_walk(mesh_id: int, level: int, length: int, rng_seed, *, start: PoseState = CANONICAL,
                mesh: Mesh | None = None, render_frames: bool = True) -> Trajectory:
    """Uniform i.i.d. walk of ``length`` generators, with every intermediate frame rendered."""
    if not 1 <= length <= MAX_WALK:
        raise ValueError(f"walk length must be in [1, {MAX_WALK}], got {length}")
    level_generators(level)
    rng = np.random.default_rng(rng_seed)
    actions = [int(a) for a in rng.integers(0, NUM_ACTIONS, size=length)]
    traj = Trajectory(mesh_id, level, start, actions)
    if render_frames:
        traj.frames = render_states(traj.states, mesh if mesh is not None else object_mesh(mesh_id))
    return traj


def frame_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a.astype(np.float64) - b.astype(np.float64)))


def check_injectivity(pairs, mesh: Mesh, tau: float = INJECTIVITY_TAU, frames=None) -> dict:
    """Check that distinct states render to frames more than ``tau`` apart.

    ``pairs`` holds ``(state_a, state_b)`` tuples; identical states are
    skipped.  ``frames`` may supply the already-rendered frames per pair.
    Violations are listed in the report rather than raised.
    """
    checked, skipped = 0, 0
    violations = []
    distances = []
    for k, (a, b) in enumerate(pairs):
        if a.distance(b) <= 1e-9:
            skipped += 1
            continue
        fa, fb = frames[k] if frames is not None else (render(a, mesh), render(b, mesh))
        d = frame_distance(fa, fb)
        distances.append(d)
        checked += 1
        if d <= tau:
            violations.append({"pair": k, "distance": d})
    return {
        "tau": tau,
        "pairs_checked": checked,
        "identical_pairs_skipped": skipped,
        "min_distance": min(distances) if distances else None,
        "violations": violations,
        "passed": not violations,
    }


def sample_state_pairs(level: int, n_pairs: int, seed: int, max_length: int = MAX_WALK) -> list:
    """Pairs of states reached by independent random walks of random length."""
    rng = np.random.default_rng([seed, level])
    pairs = []
    while len(pairs) < n_pairs:
        ends = []
        for _ in range(2):
            n = int(rng.integers(0, max_length + 1))
            ends.append(replay(level, rng.integers(0, NUM_ACTIONS, size=n))[-1])
        if ends[0].distance(ends[1]) > 1e-9:
            pairs.append(tuple(ends))
    return pairs


def rotation_only_pairs(n_pairs: int, seed: int) -> list:
    """Level-3 state pairs that differ only in orientation (sphere control)."""
    rng = np.random.default_rng([seed, 99])
    pairs = []
    while len(pairs) < n_pairs:
        a = replay(3, rng.integers(0, 3, size=int(rng.integers(0, MAX_WALK + 1))))[-1]
        b = replay(3, rng.integers(0, 3, size=int(rng.integers(1, MAX_WALK + 1))))[-1]
        if a.distance(b) > 1e-9:
            pairs.append((a, b))
    return pairs


@dataclass
class DatasetConfig:
    level: int = 1
    object_seeds: list = field(default_factory=lambda: list(range(7)))
    train_trajectories: int = 210
    test_trajectories: int = 35
    walk_length: int = MAX_WALK
    seed: int = 42
    injectivity_pairs: int = 100

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "object_seeds": list(self.object_seeds),
            "train_trajectories": self.train_trajectories,
            "test_trajectories": self.test_trajectories,
            "walk_length": self.walk_length,
            "seed": self.seed,
            "injectivity_pairs": self.injectivity_pairs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        return cls(**{k: d[k] for k in cls().to_dict() if k in d})


def _stream(cfg: DatasetConfig, split: str, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed, cfg.level, 0 if split == "train" else 1, index])


def _plan(cfg: DatasetConfig, split: str, index: int) -> Trajectory:
    """Actions for one trajectory; training walks start from a burned-in state."""
    obj = int(cfg.object_seeds[index % len(cfg.object_seeds)])
    seq = _stream(cfg, split, index)
    burn_seed, walk_seed = seq.spawn(2)
    start, burn_in = CANONICAL, []
    if split == "train":
        rng = np.random.default_rng(burn_seed)
        burn_in = [int(a) for a in rng.integers(0, NUM_ACTIONS, size=int(rng.integers(0, cfg.walk_length)))]
        start = replay(cfg.level, burn_in)[-1]
        length = 1
    else:
        length = cfg.walk_length
    traj = random_walk(obj, cfg.level, length, walk_seed, start=start, render_frames=False)
    traj.split, traj.index, traj.burn_in = split, index, burn_in
    return traj


@dataclass
class Dataset:
    config: DatasetConfig
    trajectories: list
    root: Path | None = None
    injectivity: dict | None = None

    @classmethod
    def generate(cls, cfg: DatasetConfig, workers: int = 1) -> "Dataset":
        level_generators(cfg.level)
        if not 1 <= cfg.walk_length <= MAX_WALK:
            raise ValueError(f"walk_length must be in [1, {MAX_WALK}]")
        plans = [_plan(cfg, "train", i) for i in range(cfg.train_trajectories)]
        plans += [_plan(cfg, "test", i) for i in range(cfg.test_trajectories)]
        for obj in sorted({t.object_id for t in plans}):
            object_mesh(obj)

        def work(t: Trajectory):
            t.frames = render_states(t.states, object_mesh(t.object_id))

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(work, plans))
        else:
            for t in plans:
                work(t)
        ds = cls(cfg, plans)
        ds.injectivity = ds.check_injectivity()
        return ds

    @property
    def train(self) -> list:
        return [t for t in self.trajectories if t.split == "train"]

    @property
    def test(self) -> list:
        return [t for t in self.trajectories if t.split == "test"]

    def frames_of(self, traj: Trajectory) -> list:
        if traj.frames is None:
            traj.frames = [read_pgm(self.root / p) for p in traj.frame_paths()]
        return traj.frames

    def check_injectivity(self, n_pairs: int | None = None) -> dict:
        """Sample pairs of distinct recorded states of the same object and compare frames."""
        n_pairs = self.config.injectivity_pairs if n_pairs is None else n_pairs
        by_object: dict = {}
        for t in self.trajectories:
            for k, s in enumerate(t.states):
                by_object.setdefault(t.object_id, []).append((s, t, k))
        rng = np.random.default_rng([self.config.seed, self.config.level, 2])
        objects = sorted(by_object)
        pairs, frames = [], []
        attempts = 0
        while len(pairs) < n_pairs and attempts < 50 * max(n_pairs, 1):
            attempts += 1
            pool = by_object[objects[int(rng.integers(len(objects)))]]
            (sa, ta, ka), (sb, tb, kb) = (pool[int(i)] for i in rng.integers(len(pool), size=2))
            if sa.distance(sb) <= 1e-9:
                continue
            pairs.append((sa, sb))
            frames.append((self.frames_of(ta)[ka], self.frames_of(tb)[kb]))
        return check_injectivity(pairs, None, frames=frames)

    def manifest(self) -> dict:
        return {
            "format": "lsa-dataset/1",
            "config": self.config.to_dict(),
            "generators": generator_block(self.config.level),
            "frame_size": [FRAME_SIZE, FRAME_SIZE],
            "trajectories": [
                {
                    "index": t.index,
                    "split": t.split,
                    "object_id": t.object_id,
                    "burn_in": t.burn_in,
                    "initial_state": t.initial_state.to_dict(),
                    "actions": t.actions,
                    "frames": t.frame_paths(),
                }
                for t in self.trajectories
            ],
        }

    def write(self, root) -> Path:
        root = Path(root)
        for split in ("train", "test"):
            (root / "frames" / split).mkdir(parents=True, exist_ok=True)
        for t in self.trajectories:
            for path, frame in zip(t.frame_paths(), self.frames_of(t)):
                write_pgm(root / path, frame)
        (root / "manifest.json").write_text(json.dumps(self.manifest(), indent=1, sort_keys=True) + "\n")
        if self.injectivity is not None:
            (root / "injectivity.json").write_text(json.dumps(self.injectivity, indent=1, sort_keys=True) + "\n")
        self.root = root
        return root / "manifest.json"

    @classmethod
    def load(cls, root) -> "Dataset":
        root = Path(root)
        data = json.loads((root / "manifest.json").read_text())
        cfg = DatasetConfig.from_dict(data["config"])
        trajs = [
            Trajectory(
                int(t["object_id"]), cfg.level, PoseState.from_dict(t["initial_state"]), list(t["actions"]),
                None, t["split"], int(t["index"]), list(t["burn_in"]),
            )
            for t in data["trajectories"]
        ]
        inj_path = root / "injectivity.json"
        inj = json.loads(inj_path.read_text()) if inj_path.exists() else None
        return cls(cfg, trajs, root, inj)
