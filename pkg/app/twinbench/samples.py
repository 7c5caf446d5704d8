"""Procedural meshes used by the acceptance runs and the ``sample:`` model prefix."""
import math

import numpy as np

from .exceptions import MeshFormatError
from .mesh_io import RasterImage, TriangleMesh

SAMPLE_PREFIX = "sample:"

CHECKER_COLORS = ((196, 64, 40), (36, 92, 188))

_CUBE_VERTICES = [
    (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
]
_CUBE_FACES = [
    (0, 3, 2, 1),
    (4, 5, 6, 7),
    (0, 1, 5, 4),
    (2, 3, 7, 6),
    (3, 0, 4, 7),
    (1, 2, 6, 5),
]


def checkerboard(size: int = 64, cells: int = 8, colors=CHECKER_COLORS) -> RasterImage:
    rows, cols = np.indices((size, size)) * cells // size
    parity = (rows + cols) % 2
    pixels = np.where(parity[..., None] == 0, np.asarray(colors[0]), np.asarray(colors[1]))
    # a horizontal ramp so flipped UVs are visible
    ramp = np.linspace(0, 40, size).astype(np.int64)[None, :, None]
    return RasterImage.from_array(np.clip(pixels + ramp, 0, 255).astype(np.uint8))


def unit_cube(textured: bool = True) -> TriangleMesh:
    """The cube [0, 1]^3; textured faces each carry the full checkerboard."""
    triangles, uv_triangles = [], []
    for a, b, c, d in _CUBE_FACES:
        triangles += [(a, b, c), (a, c, d)]
        uv_triangles += [(0, 1, 2), (0, 2, 3)]
    if not textured:
        return TriangleMesh(_CUBE_VERTICES, triangles, diffuse=(0.7, 0.55, 0.4), name="cube")
    return TriangleMesh(
        vertices=_CUBE_VERTICES,
        triangles=triangles,
        uvs=[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
        uv_triangles=uv_triangles,
        texture=checkerboard(),
        name="cube",
    )


def blob(seed: int = 0, rings: int = 20, segments: int = 26) -> TriangleMesh:
    """UV sphere with smooth seeded radial bumps; about 1k triangles at the defaults."""
    rng = np.random.default_rng(seed)
    lobes = rng.normal(size=(5, 3))
    lobes /= np.linalg.norm(lobes, axis=1, keepdims=True)
    amplitudes = rng.uniform(0.05, 0.2, size=5)
    frequencies = rng.uniform(1.0, 3.0, size=5)

    directions = [(0.0, 0.0, 1.0)]
    for i in range(1, rings):
        polar = math.pi * i / rings
        for j in range(segments):
            azimuth = 2.0 * math.pi * j / segments
            directions.append((math.sin(polar) * math.cos(azimuth),
                               math.sin(polar) * math.sin(azimuth),
                               math.cos(polar)))
    directions.append((0.0, 0.0, -1.0))
    directions = np.asarray(directions)
    radius = 1.0 + (amplitudes * np.sin(frequencies * (directions @ lobes.T) * math.pi)).sum(axis=1)
    vertices = directions * radius[:, None]

    def ring(i, j):
        return 1 + (i - 1) * segments + j % segments

    south = len(directions) - 1
    triangles = []
    for j in range(segments):
        triangles.append((0, ring(1, j), ring(1, j + 1)))
        triangles.append((south, ring(rings - 1, j + 1), ring(rings - 1, j)))
    for i in range(1, rings - 1):
        for j in range(segments):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j + 1), ring(i + 1, j)
            triangles += [(a, d, c), (a, c, b)]
    return TriangleMesh(vertices, triangles, diffuse=(0.62, 0.5, 0.38), name=f"blob{seed}")


def cylinder(length: float = 10.0, radius: float = 0.25, segments: int = 24) -> TriangleMesh:
    """Long thin closed cylinder along the x axis."""
    angles = 2.0 * math.pi * np.arange(segments) / segments
    ring = np.column_stack([np.zeros(segments), radius * np.cos(angles), radius * np.sin(angles)])
    near = ring - [length / 2.0, 0.0, 0.0]
    far = ring + [length / 2.0, 0.0, 0.0]
    vertices = np.vstack([near, far, [[-length / 2.0, 0.0, 0.0]], [[length / 2.0, 0.0, 0.0]]])
    near_cap, far_cap = 2 * segments, 2 * segments + 1
    triangles = []
    for j in range(segments):
        k = (j + 1) % segments
        triangles += [(j, k, segments + k), (j, segments + k, segments + j)]
        triangles.append((near_cap, k, j))
        triangles.append((far_cap, segments + j, segments + k))
    return TriangleMesh(vertices, triangles, diffuse=(0.3, 0.58, 0.34), name="cylinder")


SAMPLES = {
    "cube": unit_cube,
    "cube-flat": lambda: unit_cube(textured=False),
    "blob": blob,
    "cylinder": cylinder,
}


def is_sample(reference: str) -> bool:
    return reference.startswith(SAMPLE_PREFIX)


def load_sample(reference: str) -> TriangleMesh:
    name = reference[len(SAMPLE_PREFIX):] if is_sample(reference) else reference
    try:
        return SAMPLES[name]()
    except KeyError:
        raise MeshFormatError(f"unknown sample mesh {name!r}; choose from {sorted(SAMPLES)}")
