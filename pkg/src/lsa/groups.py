"""Finite permutation groups and matrix groups.

Composition convention used everywhere in this package::

    compose(a, b)(x) == a(b(x))

i.e. ``b`` is applied first.  This is the convention of matrices acting on
column vectors, so ``compose(A, B)`` for matrix elements is ``A @ B``.

Cycle notation follows the usual reading: ``(0 1 2)`` sends 0 to 1, 1 to 2 and
2 to 0.  Points not mentioned are fixed.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from itertools import product
from typing import Iterable, Sequence, Union

import numpy as np

ORDER_CAP = 10_080
MATRIX_TOL = 1e-9


class DimensionError(ValueError):
    """Two elements do not act on the same carrier."""


class GroupTooLargeError(RuntimeError):
    """Closure enumeration exceeded the configured order cap."""


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class Permutation:
    """A bijection on ``{0, ..., n-1}`` stored as its tuple of images."""

    __slots__ = ("images",)

    def __init__(self, images: Iterable[int], check: bool = True):
        images = tuple(int(i) for i in images)
        if check and sorted(images) != list(range(len(images))):
            raise ValueError(f"{images} is not a permutation")
        self.images = images

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(n), check=False)

    @classmethod
    def from_cycles(cls, text: str, n: int | None = None) -> "Permutation":
        return parse_cycles(text, n)

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, x: int) -> int:
        return self.images[x]

    def __mul__(self, other: "Permutation") -> "Permutation":
        if not isinstance(other, Permutation):
            return NotImplemented
        if other.degree != self.degree:
            raise DimensionError(f"degree {self.degree} vs {other.degree}")
        a = self.images
        return Permutation([a[j] for j in other.images], check=False)

    def inverse(self) -> "Permutation":
        inv = [0] * self.degree
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(inv, check=False)

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.images))

    def cycles(self) -> list[tuple[int, ...]]:
        """Nontrivial cycles, each starting at its smallest point."""
        seen = set()
        out = []
        for start in range(self.degree):
            if start in seen:
                continue
            cyc = [start]
            seen.add(start)
            j = self.images[start]
            while j != start:
                cyc.append(j)
                seen.add(j)
                j = self.images[j]
            if len(cyc) > 1:
                out.append(tuple(cyc))
        return out

    def cycle_string(self) -> str:
        cycles = self.cycles()
        if not cycles:
            return "()"
        return "".join("(" + " ".join(map(str, c)) + ")" for c in cycles)

    def is_even(self) -> bool:
        return sum(len(c) - 1 for c in self.cycles()) % 2 == 0

    def order(self) -> int:
        out = 1
        for c in self.cycles():
            out = np.lcm(out, len(c))
        return int(out)

    def __eq__(self, other):
        return isinstance(other, Permutation) and self.images == other.images

    def __hash__(self):
        return hash(self.images)

    def __repr__(self):
        return f"Permutation({self.cycle_string()}, n={self.degree})"


@dataclass(frozen=True, eq=False)
class MatrixElement:
    """A square real matrix tagged with the representation it belongs to."""

    entries: np.ndarray
    rep_tag: str = ""

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def identity(cls, d: int, rep_tag: str = "") -> "MatrixElement":
        return cls(np.eye(d), rep_tag)

    @property
    def degree(self) -> int:
        return self.entries.shape[0]

    def __mul__(self, other: "MatrixElement") -> "MatrixElement":
        if not isinstance(other, MatrixElement):
            return NotImplemented
        if other.degree != self.degree:
            raise DimensionError(f"dimension {self.degree} vs {other.degree}")
        return MatrixElement(self.entries @ other.entries, self.rep_tag)

    def inverse(self) -> "MatrixElement":
        return MatrixElement(np.linalg.inv(self.entries), self.rep_tag)

    def is_identity(self, tol: float = MATRIX_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - np.eye(self.degree))) <= tol)

    def is_rotation(self, tol: float = MATRIX_TOL) -> bool:
        m = self.entries
        return bool(
            np.max(np.abs(m.T @ m - np.eye(self.degree))) <= tol
            and abs(np.linalg.det(m) - 1.0) <= tol
        )

    def close_to(self, other: "MatrixElement", tol: float = MATRIX_TOL) -> bool:
        return bool(np.max(np.abs(self.entries - other.entries)) <= tol)

    def __repr__(self):
        return f"MatrixElement({self.entries.tolist()}, rep_tag={self.rep_tag!r})"


GroupElement = Union[Permutation, MatrixElement]


class GroupKind(str, Enum):
    PERMUTATION = "finite-permutation"
    MATRIX = "matrix"


@dataclass(frozen=True)
class GroupSpec:
    generators: tuple
    names: tuple = ()
    kind: GroupKind = GroupKind.PERMUTATION

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("a group needs at least one generator")
        expected = Permutation if self.kind == GroupKind.PERMUTATION else MatrixElement
        if not all(isinstance(g, expected) for g in gens):
            raise TypeError(f"{self.kind.value} groups need {expected.__name__} generators")
        if len({g.degree for g in gens}) != 1:
            raise DimensionError("generators act on different carriers")
        names = tuple(self.names) or tuple(f"g{i}" for i in range(len(gens)))
        if len(names) != len(gens):
            raise ValueError("one name per generator")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "names", names)

    @property
    def degree(self) -> int:
        return self.generators[0].degree

    def identity(self) -> GroupElement:
        if self.kind == GroupKind.PERMUTATION:
            return Permutation.identity(self.degree)
        return MatrixElement.identity(self.degree, self.generators[0].rep_tag)


class Level(str, Enum):
    ABELIAN = "Abelian"
    SOLVABLE_NON_ABELIAN = "SolvableNonAbelian"
    NON_SOLVABLE = "NonSolvable"


@dataclass(frozen=True)
class SolvabilityClass:
    level: Level
    series_orders: list = field(default_factory=list)
    subgroups: tuple = field(default=(), repr=False, compare=False)


def compose(a: GroupElement, b: GroupElement) -> GroupElement:
    """Return ``a*b``: apply ``b`` first, then ``a``."""
    if type(a) is not type(b):
        raise DimensionError(f"cannot compose {type(a).__name__} with {type(b).__name__}")
    return a * b


def inverse(g: GroupElement) -> GroupElement:
    return g.inverse()


def commutator(g: GroupElement, h: GroupElement) -> GroupElement:
    """``g^-1 h^-1 g h``."""
    return compose(compose(compose(inverse(g), inverse(h)), g), h)


def is_identity(g: GroupElement, tol: float = MATRIX_TOL) -> bool:
    if isinstance(g, MatrixElement):
        return g.is_identity(tol)
    return g.is_identity()


def _close(generators: Sequence[Permutation], n: int, cap: int) -> frozenset:
    identity = Permutation.identity(n)
    seen = {identity}
    queue = deque([identity])
    while queue:
        x = queue.popleft()
        for g in generators:
            y = g * x
            if y not in seen:
                seen.add(y)
                if len(seen) > cap:
                    raise GroupTooLargeError(f"group order exceeds cap {cap}")
                queue.append(y)
    return frozenset(seen)


def closure(spec: GroupSpec, cap: int = ORDER_CAP) -> frozenset:
    """All elements of the finite group generated by ``spec``, by breadth-first search."""
    if spec.kind != GroupKind.PERMUTATION:
        raise TypeError("closure is only defined for finite permutation groups")
    return _close(spec.generators, spec.degree, cap)


def derived_series(spec: GroupSpec, cap: int = ORDER_CAP) -> SolvabilityClass:
    """Derived series G >= [G,G] >= ... and the resulting solvability level.

    Each term is the closure of the set of all commutators of the previous
    term.  Iteration stops at the trivial group or when the order stops
    dropping (a perfect subgroup).  For non-solvable groups the repeated
    order is kept at the end of ``series_orders`` to show the stabilization.
    """
    n = spec.degree
    current = closure(spec, cap)
    orders = [len(current)]
    subgroups = [current]
    while len(current) > 1:
        elems = sorted(current, key=lambda p: p.images)
        comms = {commutator(g, h) for g in elems for h in elems}
        comms.discard(Permutation.identity(n))
        nxt = _close(sorted(comms, key=lambda p: p.images), n, cap) if comms else frozenset({Permutation.identity(n)})
        orders.append(len(nxt))
        subgroups.append(nxt)
        if len(nxt) == len(current):
            break
        current = nxt

    if orders[-1] > 1:
        level = Level.NON_SOLVABLE
    elif len(orders) <= 2:
        level = Level.ABELIAN
    else:
        level = Level.SOLVABLE_NON_ABELIAN
    return SolvabilityClass(level, orders, tuple(subgroups))


# Words are sequences of (generator index, inverted) pairs.
Word = Sequence[tuple[int, bool]]


def word_evaluate(spec: GroupSpec, word: Word) -> GroupElement:
    """Left-fold product ``g_1 * g_2 * ... * g_n`` of a word over the generators."""
    gens = spec.generators
    acc = spec.identity()
    for index, inverted in word:
        if not 0 <= index < len(gens):
            raise IndexError(f"generator index {index} out of range for {len(gens)} generators")
        g = gens[index]
        acc = compose(acc, g.inverse() if inverted else g)
    return acc


def inverse_word(word: Word) -> list[tuple[int, bool]]:
    return [(i, not inv) for i, inv in reversed(word)]


def parse_word(text: str, spec: GroupSpec) -> list[tuple[int, bool]]:
    """Parse ``"g0 g1^-1 g2"`` (generator names separated by whitespace).

    ``e`` and ``1`` denote the identity and are skipped.
    """
    names = {name: i for i, name in enumerate(spec.names)}
    out = []
    pos = 0
    for m in re.finditer(r"\S+", text):
        token = m.group(0)
        pos = m.start()
        inverted = False
        for suffix in ("^-1", "^{-1}", "'"):
            if token.endswith(suffix):
                token = token[: -len(suffix)]
                inverted = True
                break
        if token in ("e", "1"):
            continue
        if token not in names:
            raise ParseError(f"unknown generator {token!r}", pos)
        out.append((names[token], inverted))
    return out


def iterated_matrix_action(rho_images: Sequence, z0) -> np.ndarray:
    """``(rho_1 rho_2 ... rho_n) z0``: the last matrix acts on ``z0`` first."""
    z = np.array(z0, dtype=float)
    for m in reversed(list(rho_images)):
        m = m.entries if isinstance(m, MatrixElement) else np.asarray(m, dtype=float)
        if m.shape != (z.shape[0], z.shape[0]):
            raise DimensionError(f"matrix {m.shape} cannot act on vector of length {z.shape[0]}")
        z = m @ z
    return z


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation by ``angle`` radians about ``axis`` (right-handed)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def axis_rotation(axis: str, degrees: float) -> MatrixElement:
    """Rotation about a principal axis, e.g. ``axis_rotation("x", 30)``."""
    a = np.deg2rad(degrees)
    c, s = np.cos(a), np.sin(a)
    m = {
        "x": [[1, 0, 0], [0, c, -s], [0, s, c]],
        "y": [[c, 0, s], [0, 1, 0], [-s, 0, c]],
        "z": [[c, -s, 0], [s, c, 0], [0, 0, 1]],
    }[axis.lower()]
    return MatrixElement(np.array(m, dtype=float), "SO(3)")


_PHI = (1.0 + 5.0**0.5) / 2.0


def icosahedron_vertices() -> np.ndarray:
    """The 12 vertices (0, +-1, +-phi) and cyclic permutations, unnormalized."""
    verts = []
    for a, b in product((1.0, -1.0), repeat=2):
        verts.append((0.0, a, b * _PHI))
        verts.append((a, b * _PHI, 0.0))
        verts.append((b * _PHI, 0.0, a))
    return np.array(sorted(verts))


def icosahedral_so3_generators() -> list[MatrixElement]:
    """Two rotations generating the order-60 icosahedral rotation group.

    A 5-fold turn about a vertex axis and a 3-fold turn about the (1,1,1) face
    axis.  Together they generate the full rotation group of the icosahedron,
    isomorphic to A5.
    """
    five = rotation_matrix((0.0, 1.0, _PHI), 2.0 * np.pi / 5.0)
    three = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return [MatrixElement(five, "icosahedral"), MatrixElement(three, "icosahedral")]


def vertex_permutation(m, vertices: np.ndarray | None = None, tol: float = 1e-6) -> Permutation:
    """Quantize a rotation to the permutation it induces on a vertex set.

    Raises ``ValueError`` if the rotation does not map the set onto itself.
    """
    if vertices is None:
        vertices = icosahedron_vertices()
    m = m.entries if isinstance(m, MatrixElement) else np.asarray(m, dtype=float)
    moved = vertices @ m.T
    dist = np.linalg.norm(moved[:, None, :] - vertices[None, :, :], axis=2)
    images = np.argmin(dist, axis=1)
    if np.max(dist[np.arange(len(vertices)), images]) > tol or len(set(images)) != len(images):
        raise ValueError("rotation is not a symmetry of the vertex set")
    return Permutation(images.tolist())


def icosahedral_permutation_spec() -> GroupSpec:
    gens = [vertex_permutation(m) for m in icosahedral_so3_generators()]
    return GroupSpec(tuple(gens), ("g0", "g1"))


def icosahedral_elements() -> list[MatrixElement]:
    """All 60 icosahedral rotation matrices, in breadth-first order."""
    gens = icosahedral_so3_generators()
    out = [MatrixElement.identity(3, "icosahedral")]
    keys = {tuple(np.round(out[0].entries, 6).ravel())}
    queue = deque(out)
    while queue:
        x = queue.popleft()
        for g in gens:
            y = g * x
            key = tuple(np.round(y.entries, 6).ravel() + 0.0)
            if key not in keys:
                keys.add(key)
                out.append(y)
                queue.append(y)
    return out


def parse_cycles(text: str, n: int | None = None) -> Permutation:
    """Parse cycle notation such as ``"(0 1 2)(3 4)"``.

    Points inside a cycle are separated by spaces or commas.  ``"()"`` or an
    empty string is the identity.  The degree is ``n`` if given, otherwise one
    more than the largest point mentioned.
    """
    cycles = []
    pos = 0
    text_len = len(text)
    while pos < text_len:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch != "(":
            raise ParseError(f"expected '(' but found {ch!r}", pos)
        end = text.find(")", pos)
        if end < 0:
            raise ParseError("unclosed cycle", pos)
        body = text[pos + 1 : end]
        points = []
        for m in re.finditer(r"[^\s,]+", body):
            if not m.group(0).isdigit():
                raise ParseError(f"bad point {m.group(0)!r}", pos + 1 + m.start())
            points.append(int(m.group(0)))
        if len(set(points)) != len(points):
            raise ParseError("repeated point in cycle", pos)
        cycles.append(points)
        pos = end + 1
    largest = max((p for c in cycles for p in c), default=-1)
    if n is None:
        n = largest + 1
    elif largest >= n:
        raise ParseError(f"point {largest} out of range for degree {n}", 0)
    images = list(range(n))
    # Apply right-to-left so products of non-disjoint cycles follow compose().
    for cyc in reversed(cycles):
        step = list(range(n))
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            step[a] = b
        images = [step[i] for i in images]
    return Permutation(images)


def cyclic_spec(n: int) -> GroupSpec:
    return GroupSpec((Permutation([(i + 1) % n for i in range(n)]),))


def symmetric_spec(n: int) -> GroupSpec:
    gens = [Permutation([(i + 1) % n for i in range(n)])]
    if n > 2:
        gens.append(parse_cycles("(0 1)", n))
    return GroupSpec(tuple(gens))


def preset(name: str) -> GroupSpec:
    """Named groups: ``Z<n>``, ``S<n>``, ``A5`` and ``icosahedral``.

    ``A5`` is the icosahedral rotation group acting on the 12 icosahedron
    vertices; ``icosahedral`` is the same group as 3x3 rotation matrices.
    """
    key = name.strip()
    if key.upper() == "A5":
        return icosahedral_permutation_spec()
    if key.lower() == "icosahedral":
        return GroupSpec(tuple(icosahedral_so3_generators()), ("g0", "g1"), GroupKind.MATRIX)
    m = re.fullmatch(r"([ZS])(\d+)", key.upper())
    if m and int(m.group(2)) >= 1:
        k = int(m.group(2))
        return cyclic_spec(k) if m.group(1) == "Z" else symmetric_spec(k)
    raise KeyError(f"unknown group preset {name!r}")


def spec_from_cycles(generators: Sequence[str], n: int | None = None) -> GroupSpec:
    perms = [parse_cycles(g) for g in generators]
    if n is None:
        n = max(p.degree for p in perms)
    return GroupSpec(tuple(parse_cycles(g, n) for g in generators))


def permutation_spec_of(spec: GroupSpec) -> GroupSpec:
    """Permutation version of a group: matrix groups are quantized on icosahedron vertices."""
    if spec.kind == GroupKind.PERMUTATION:
        return spec
    return GroupSpec(tuple(vertex_permutation(g) for g in spec.generators), spec.names)


def product_of(elements: Sequence[GroupElement]) -> GroupElement:
    return reduce(compose, elements)
