"""Latent pose states and the six generators of each benchmark level."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ..groups import GroupSpec, MatrixElement, axis_rotation, derived_series, icosahedral_elements, vertex_permutation

STEP_PX = 20.0
SCALE_FACTOR = 1.2
ANGLE_DEG = 30.0
TRANSLATION_3D = (0.15, 0.15, 0.0)
NUM_ACTIONS = 6

_IDENTITY3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


class LevelError(ValueError):
    pass


@dataclass(frozen=True)
class PoseState:
    """Latent state of one object.

    ``translation_2d`` is an image-space offset in pixels (x right, y down),
    ``scale`` a uniform scale, ``rotation`` a 3x3 rotation stored row-major as
    nested tuples and ``translation_3d`` a world-space offset in units of the
    mesh radius.
    """

    translation_2d: tuple = (0.0, 0.0)
    scale: float = 1.0
    rotation: tuple = _IDENTITY3
    translation_3d: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3) or np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9 or abs(np.linalg.det(r) - 1) > 1e-9:
            raise ValueError("rotation must be a proper rotation matrix")

    @property
    def rotation_matrix(self) -> np.ndarray:
        return np.array(self.rotation, dtype=float)

    def to_dict(self) -> dict:
        return {
            "translation_2d": list(self.translation_2d),
            "scale": self.scale,
            "rotation": [list(row) for row in self.rotation],
            "translation_3d": list(self.translation_3d),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoseState":
        return cls(
            tuple(float(x) for x in d["translation_2d"]),
            float(d["scale"]),
            tuple(tuple(float(x) for x in row) for row in d["rotation"]),
            tuple(float(x) for x in d["translation_3d"]),
        )

    def distance(self, other: "PoseState") -> float:
        """Largest absolute difference over all state coordinates."""
        a = np.concatenate([self.translation_2d, [self.scale], np.ravel(self.rotation), self.translation_3d])
        b = np.concatenate([other.translation_2d, [other.scale], np.ravel(other.rotation), other.translation_3d])
        return float(np.max(np.abs(a - b)))


CANONICAL = PoseState()


@dataclass(frozen=True)
class GeneratorAction:
    level: int
    index: int
    name: str
    kind: str  # "translate2d" | "scale" | "rotate" | "translate3d"
    params: dict = field(default_factory=dict, compare=False)


def _translations(names):
    vec = {"R": (STEP_PX, 0.0), "L": (-STEP_PX, 0.0), "U": (0.0, -STEP_PX), "D": (0.0, STEP_PX),
           "DR": (STEP_PX, STEP_PX), "UL": (-STEP_PX, -STEP_PX)}
    return [(n, "translate2d", {"vector": vec[n]}) for n in names]


def level_generators(level: int) -> list[GeneratorAction]:
    """The six generators of a level, in their fixed index order.

    Diagonal steps move ``STEP_PX`` along both axes so the level stays a
    lattice with exact (integer) coordinates.
    """
    if level == 1:
        specs = _translations(["R", "L", "U", "D", "DR", "UL"])
    elif level == 2:
        specs = [
            ("ScaleUp", "scale", {"factor": SCALE_FACTOR}),
            ("ScaleDown", "scale", {"factor": 1.0 / SCALE_FACTOR}),
        ] + _translations(["R", "L", "U", "D"])
    elif level == 3:
        specs = [(f"R{a.upper()}", "rotate", {"axis": a, "degrees": ANGLE_DEG}) for a in "xyz"] + [
            ("ScaleUp", "scale", {"factor": SCALE_FACTOR}),
            ("ScaleDown", "scale", {"factor": 1.0 / SCALE_FACTOR}),
            ("Translate", "translate3d", {"vector": TRANSLATION_3D}),
        ]
    else:
        raise LevelError(f"level must be 1, 2 or 3, got {level!r}")
    return [GeneratorAction(level, i, name, kind, params) for i, (name, kind, params) in enumerate(specs)]


def generator_block(level: int) -> dict:
    """Parameterization summary written into dataset manifests."""
    block = {"level": level, "actions": [a.name for a in level_generators(level)]}
    if level in (1, 2):
        block["step_px"] = STEP_PX
    if level in (2, 3):
        block["scale_factor"] = SCALE_FACTOR
    if level == 3:
        block["angle_deg"] = ANGLE_DEG
        block["translation_3d"] = list(TRANSLATION_3D)
    return block


def apply(state: PoseState, action: GeneratorAction, level: int | None = None) -> PoseState:
    """Act on ``state`` with one generator.

    Level 2 scaling is a homothety about the image center, so it multiplies
    the image-space offset as well as the scale.  Level 3 scaling and rotation
    act about the object's own center with world-fixed axes.
    """
    if level is not None and action.level != level:
        raise LevelError(f"level-{action.level} action applied in a level-{level} dataset")
    p = action.params
    if action.kind == "translate2d":
        dx, dy = p["vector"]
        tx, ty = state.translation_2d
        return replace(state, translation_2d=(tx + dx, ty + dy))
    if action.kind == "scale":
        k = p["factor"]
        if action.level == 2:
            tx, ty = state.translation_2d
            return replace(state, scale=state.scale * k, translation_2d=(k * tx, k * ty))
        return replace(state, scale=state.scale * k)
    if action.kind == "rotate":
        q = axis_rotation(p["axis"], p["degrees"]).entries
        r = q @ state.rotation_matrix
        return replace(state, rotation=tuple(tuple(float(x) for x in row) for row in r))
    if action.kind == "translate3d":
        return replace(state, translation_3d=tuple(a + b for a, b in zip(state.translation_3d, p["vector"])))
    raise LevelError(f"unknown action kind {action.kind!r}")


def replay(level: int, actions, start: PoseState = CANONICAL) -> list[PoseState]:
    """States visited by a sequence of action indices, starting state included."""
    gens = level_generators(level)
    states = [start]
    for a in actions:
        states.append(apply(states[-1], gens[int(a)], level))
    return states


def rotation_generators() -> list[MatrixElement]:
    """The level-3 rotation generators as matrices."""
    return [axis_rotation(a, ANGLE_DEG) for a in "xyz"]


def quantized_rotation_spec(max_word_length: int = 3, radius: float = 0.25) -> GroupSpec:
    """Snap short words in the level-3 rotations onto the icosahedral group.

    Every word of length at most ``max_word_length`` whose product lies within
    Frobenius distance ``radius`` of a nontrivial icosahedral rotation is
    replaced by that rotation.  Distinct icosahedral rotations are more than
    1.6 apart, so the snap is unambiguous.  The result is the permutation group
    the snapped rotations generate on the 12 icosahedron vertices.
    """
    gens = [g.entries for g in rotation_generators()]
    ico = np.array([e.entries for e in icosahedral_elements()])
    hits = set()
    for length in range(1, max_word_length + 1):
        for word in itertools.product(range(len(gens)), repeat=length):
            m = np.eye(3)
            for i in word:
                m = gens[i] @ m
            d = np.linalg.norm(ico - m, axis=(1, 2))
            nearest = int(np.argmin(d))
            if nearest != 0 and d[nearest] < radius:
                hits.add(nearest)
    if not hits:
        raise ValueError("no word snapped onto the icosahedral group; increase max_word_length")
    return GroupSpec(tuple(vertex_permutation(ico[i]) for i in sorted(hits)))


def rotation_level_class():
    return derived_series(quantized_rotation_spec())
