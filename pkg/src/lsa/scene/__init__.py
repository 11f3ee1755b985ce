"""Latent Space Algebra benchmark: poses, generators, meshes, rendering and datasets."""

from .actions import (
    ANGLE_DEG,
    CANONICAL,
    NUM_ACTIONS,
    SCALE_FACTOR,
    STEP_PX,
    TRANSLATION_3D,
    GeneratorAction,
    LevelError,
    PoseState,
    apply,
    generator_block,
    level_generators,
    quantized_rotation_spec,
    replay,
    rotation_generators,
)
from .dataset import (
    INJECTIVITY_TAU,
    SPHERE_ID,
    Dataset,
    DatasetConfig,
    Trajectory,
    check_injectivity,
    frame_distance,
    object_mesh,
    random_walk,
    rotation_only_pairs,
    sample_state_pairs,
)
from .mesh import Mesh, MeshFormatError, generate_mesh, load_mesh, sphere_mesh, write_obj, write_ply
from .raster import FRAME_SIZE, read_pgm, render, write_pgm
