"""Triangle meshes: procedural asymmetric objects and a minimal OBJ/PLY reader."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from ..groups import icosahedral_elements


class MeshFormatError(ValueError):
    pass


class SymmetricMeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        f = np.ascontiguousarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshFormatError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshFormatError(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshFormatError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def vertex_normals(self) -> np.ndarray:
        v, f = self.vertices, self.faces
        face_n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        n = np.zeros_like(v)
        for k in range(3):
            np.add.at(n, f[:, k], face_n)
        norms = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(norms > 0, norms, 1.0)


def icosphere(subdivisions: int = 3) -> Mesh:
    """Unit icosphere with outward (counter-clockwise) winding."""
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache: dict = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return Mesh(np.array(verts), np.array(faces))


def normalize(vertices: np.ndarray) -> np.ndarray:
    """Center on the bounding-box center and scale so the largest radius is 1."""
    v = np.asarray(vertices, dtype=float)
    center = (v.min(axis=0) + v.max(axis=0)) / 2.0
    v = v - center
    r = np.max(np.linalg.norm(v, axis=1))
    if r == 0:
        raise MeshFormatError("degenerate mesh: all vertices coincide")
    return v / r


def sampled_rotations(seed: int = 0, n_random: int = 200) -> np.ndarray:
    """Candidate symmetries: the icosahedral and octahedral groups plus random rotations."""
    ico = [e.entries for e in icosahedral_elements()]
    octa = [r for r in Rotation.create_group("O").as_matrix()]
    rand = list(Rotation.random(n_random, random_state=seed).as_matrix())
    mats = np.array(ico + octa + rand)
    # Small turns are indistinguishable from vertex jitter; only test real symmetries.
    angles = np.arccos(np.clip((np.trace(mats, axis1=1, axis2=2) - 1) / 2, -1, 1))
    return mats[angles > np.deg2rad(15)]


def symmetry_residuals(mesh: Mesh, rotations: np.ndarray | None = None) -> np.ndarray:
    """For each rotation, the worst distance from a rotated vertex to the original cloud."""
    if rotations is None:
        rotations = sampled_rotations()
    tree = cKDTree(mesh.vertices)
    out = np.empty(len(rotations))
    for i, r in enumerate(rotations):
        d, _ = tree.query(mesh.vertices @ r.T)
        out[i] = d.max()
    return out


def is_asymmetric(mesh: Mesh, tol: float = 0.05, rotations: np.ndarray | None = None) -> bool:
    return bool(symmetry_residuals(mesh, rotations).min() > tol)


def generate_mesh(seed: int, subdivisions: int = 3) -> Mesh:
    """Procedural asymmetric blob: an icosphere with seeded radial bumps and jitter.

    Raises ``SymmetricMeshError`` if the result maps onto itself under any
    sampled rotation.
    """
    rng = np.random.default_rng([seed, 7919])
    base = icosphere(subdivisions)
    dirs = base.vertices
    n_bumps = 6
    centers = rng.normal(size=(n_bumps, 3))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    amps = rng.uniform(0.15, 0.45, n_bumps) * rng.choice([-0.6, 1.0], n_bumps)
    widths = rng.uniform(0.15, 0.4, n_bumps)
    radius = 1.0 + np.exp(-(1.0 - dirs @ centers.T) / widths) @ amps
    radius += 0.02 * rng.standard_normal(len(dirs))
    stretch = rng.uniform(0.7, 1.0, 3)
    verts = normalize(dirs * radius[:, None] * stretch)
    mesh = Mesh(verts, base.faces)
    if not is_asymmetric(mesh):
        raise SymmetricMeshError(f"mesh for seed {seed} has a rotational symmetry")
    return mesh


def sphere_mesh(subdivisions: int = 6) -> Mesh:
    """Symmetric control object, fine enough that rotations are invisible at 224 px."""
    return icosphere(subdivisions)


def write_obj(mesh: Mesh, path) -> None:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_ply(mesh: Mesh, path) -> None:
    header = [
        "ply", "format ascii 1.0", f"element vertex {len(mesh.vertices)}",
        "property float x", "property float y", "property float z",
        f"element face {len(mesh.faces)}", "property list uchar int vertex_indices", "end_header",
    ]
    body = [f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    body += [f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist()]
    Path(path).write_text("\n".join(header + body) + "\n")


def _read_obj(text: str):
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
                if len(parts) < 4:
                    raise ValueError("vertex needs 3 coordinates")
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshFormatError(f"line {lineno}: only triangular faces are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
        except MeshFormatError:
            raise
        except ValueError as exc:
            raise MeshFormatError(f"line {lineno}: {exc}") from None
    return verts, faces


def _read_ply(text: str):
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshFormatError("missing 'ply' magic")
    counts = {}
    fmt = None
    i = 1
    while i < len(lines) and lines[i].strip() != "end_header":
        parts = lines[i].split()
        if parts and parts[0] == "format":
            fmt = parts[1]
        elif parts and parts[0] == "element":
            counts[parts[1]] = int(parts[2])
        i += 1
    if fmt != "ascii":
        raise MeshFormatError("only ASCII PLY is supported")
    if i == len(lines):
        raise MeshFormatError("missing end_header")
    body = [ln.split() for ln in lines[i + 1 :] if ln.strip()]
    nv, nf = counts.get("vertex", 0), counts.get("face", 0)
    if len(body) < nv + nf:
        raise MeshFormatError("file ends before all elements were read")
    try:
        verts = [[float(x) for x in row[:3]] for row in body[:nv]]
        faces = []
        for row in body[nv : nv + nf]:
            if int(row[0]) != 3:
                raise MeshFormatError("only triangular faces are supported")
            faces.append([int(x) for x in row[1:4]])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(str(exc)) from None
    return verts, faces


def load_mesh(path) -> Mesh:
    """Read an ASCII OBJ or PLY triangle mesh, normalized to the unit bounding sphere."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".ply" or text.startswith("ply"):
        verts, faces = _read_ply(text)
    else:
        verts, faces = _read_obj(text)
    if not verts or not faces:
        raise MeshFormatError(f"{path}: no vertices or faces")
    return Mesh(normalize(np.array(verts)), np.array(faces))
