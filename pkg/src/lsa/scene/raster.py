"""Deterministic grayscale rasterizer and PGM frame I/O.

Camera model: orthographic view down the -z axis from ``CAMERA_DISTANCE``
units away.  A unit-radius object at the origin spans ``OBJECT_SPAN`` of the
frame.  World point ``p`` lands at pixel::

    x = c + PIXELS_PER_UNIT * p_x + tx        y = c - PIXELS_PER_UNIT * p_y + ty

where ``c`` is the frame center and ``(tx, ty)`` the state's image-space
offset.  Projected vertices are snapped to a 1/16-pixel grid before
rasterization, so integer pixel offsets shift the frame bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numba
import numpy as np

from .actions import PoseState
from .mesh import Mesh

FRAME_SIZE = 224
OBJECT_SPAN = 0.6
PIXELS_PER_UNIT = OBJECT_SPAN * FRAME_SIZE / 2.0
CAMERA_DISTANCE = 3.0
SUBPIXEL = 16.0
LIGHT_DIR = np.array([-0.3, 0.45, 0.84]) / np.linalg.norm([-0.3, 0.45, 0.84])
AMBIENT = 0.2


@numba.njit(cache=True, nogil=True)
def _rasterize(xy, z, normals, faces, light, ambient, size):
    img = np.zeros((size, size), dtype=np.uint8)
    zbuf = np.full((size, size), -np.inf)
    for f in range(faces.shape[0]):
        a, b, c = faces[f, 0], faces[f, 1], faces[f, 2]
        x0, y0 = xy[a, 0], xy[a, 1]
        x1, y1 = xy[b, 0], xy[b, 1]
        x2, y2 = xy[c, 0], xy[c, 1]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        sign = 1.0 if area > 0 else -1.0
        area *= sign
        xmin = max(int(np.floor(min(x0, min(x1, x2)) - 0.5)), 0)
        xmax = min(int(np.ceil(max(x0, max(x1, x2)) - 0.5)), size - 1)
        ymin = max(int(np.floor(min(y0, min(y1, y2)) - 0.5)), 0)
        ymax = min(int(np.ceil(max(y0, max(y1, y2)) - 0.5)), size - 1)
        for i in range(ymin, ymax + 1):
            py = i + 0.5
            for j in range(xmin, xmax + 1):
                px = j + 0.5
                w0 = sign * ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1))
                w1 = sign * ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2))
                w2 = sign * ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0))
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                l0, l1, l2 = w0 / area, w1 / area, w2 / area
                depth = l0 * z[a] + l1 * z[b] + l2 * z[c]
                if depth <= zbuf[i, j]:
                    continue
                zbuf[i, j] = depth
                nx = l0 * normals[a, 0] + l1 * normals[b, 0] + l2 * normals[c, 0]
                ny = l0 * normals[a, 1] + l1 * normals[b, 1] + l2 * normals[c, 1]
                nz = l0 * normals[a, 2] + l1 * normals[b, 2] + l2 * normals[c, 2]
                norm = np.sqrt(nx * nx + ny * ny + nz * nz)
                shade = ambient
                if norm > 0.0:
                    if nz < 0.0:
                        nx, ny, nz = -nx, -ny, -nz
                    lam = (nx * light[0] + ny * light[1] + nz * light[2]) / norm
                    if lam > 0.0:
                        shade += (1.0 - ambient) * lam
                img[i, j] = np.uint8(min(255.0, np.floor(255.0 * shade + 0.5)))
    return img


def project(state: PoseState, mesh: Mesh):
    """World-space depth, snapped pixel coordinates and rotated normals."""
    r = state.rotation_matrix
    world = state.scale * (mesh.vertices @ r.T) + np.asarray(state.translation_3d)
    c = FRAME_SIZE / 2.0
    x = c + PIXELS_PER_UNIT * world[:, 0] + state.translation_2d[0]
    y = c - PIXELS_PER_UNIT * world[:, 1] + state.translation_2d[1]
    xy = np.round(np.stack([x, y], axis=1) * SUBPIXEL) / SUBPIXEL
    normals = mesh.vertex_normals() @ r.T
    return xy, world[:, 2], normals


def render(state: PoseState, mesh: Mesh) -> np.ndarray:
    """Render one 224x224 uint8 frame; background pixels are exactly 0."""
    xy, z, normals = project(state, mesh)
    # Near plane: drop triangles touching or behind the camera.
    faces = mesh.faces[np.all(z[mesh.faces] < CAMERA_DISTANCE, axis=1)]
    return _rasterize(
        np.ascontiguousarray(xy), np.ascontiguousarray(z), np.ascontiguousarray(normals),
        np.ascontiguousarray(faces), LIGHT_DIR, AMBIENT, FRAME_SIZE,
    )


def write_pgm(path, frame: np.ndarray) -> None:
    frame = np.asarray(frame, dtype=np.uint8)
    h, w = frame.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(frame.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(x) for x in fields[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported")
    pos += 1
    return np.frombuffer(data[pos : pos + w * h], dtype=np.uint8).reshape(h, w).copy()
