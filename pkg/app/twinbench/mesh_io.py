"""
Readers and writers for the on-disk artifacts: a Wavefront OBJ/MTL subset,
binary PPM rasters and the plain-text TWINPOSE camera pose format.

Every parser accepts arbitrary bytes and either returns a value or raises a
subclass of TwinbenchError; nothing else escapes.
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import MeshFormatError, PoseFormatError, RasterFormatError
from .poses import CameraPose, PoseSet

logger = logging.getLogger(__name__)

RGB = Tuple[int, int, int]
MaterialResolver = Callable[[str], bytes]

POSE_MAGIC = "TWINPOSE"
POSE_VERSION = 1
QUATERNION_TOLERANCE = 1e-6

_PPM_WHITESPACE = frozenset(b" \t\r\n\x0b\x0c")
_PPM_FIELD_DIGITS = 10


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major 8-bit RGB raster; ``pixels`` has shape (height, width, 3)."""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise RasterFormatError(f"image dimensions must be positive, got {self.width}x{self.height}")
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.shape != (self.height, self.width, 3):
            raise RasterFormatError(
                f"pixel array shape {pixels.shape} does not match {self.width}x{self.height}"
            )
        object.__setattr__(self, "pixels", pixels)

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "RasterImage":
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise RasterFormatError(f"expected an (h, w, 3) array, got {pixels.shape}")
        return cls(pixels.shape[1], pixels.shape[0], pixels)

    @classmethod
    def filled(cls, width: int, height: int, color: RGB) -> "RasterImage":
        pixels = np.empty((height, width, 3), dtype=np.uint8)
        pixels[...] = np.asarray(color, dtype=np.uint8)
        return cls(width, height, pixels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True)
class Material:
    """Diffuse-only material: ``Kd`` colour in [0, 1] and an optional ``map_Kd`` path."""
    name: str
    diffuse: Optional[Tuple[float, float, float]] = None
    texture_path: Optional[str] = None


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """
    Indexed triangle mesh with optional per-corner UVs and a texture.

    ``uv_triangles[i]`` holds the UV indices of the three corners of
    ``triangles[i]``. Zero-area triangles are allowed.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    uvs: Optional[np.ndarray] = None
    uv_triangles: Optional[np.ndarray] = None
    texture: Optional[RasterImage] = None
    diffuse: Optional[Tuple[float, float, float]] = None
    name: str = "mesh"

    def __post_init__(self) -> None:
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshFormatError("triangle references a vertex out of range")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        if (self.uvs is None) != (self.uv_triangles is None):
            raise MeshFormatError("uvs and uv_triangles must be given together")
        if self.uvs is not None:
            uvs = np.asarray(self.uvs, dtype=np.float64).reshape(-1, 2)
            uv_triangles = np.asarray(self.uv_triangles, dtype=np.int64).reshape(-1, 3)
            if uv_triangles.shape != triangles.shape:
                raise MeshFormatError("uv_triangles must match triangles one to one")
            if len(uv_triangles) and (uv_triangles.min() < 0 or uv_triangles.max() >= len(uvs)):
                raise MeshFormatError("triangle references a UV out of range")
            object.__setattr__(self, "uvs", uvs)
            object.__setattr__(self, "uv_triangles", uv_triangles)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def is_textured(self) -> bool:
        return self.texture is not None and self.uvs is not None

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        return replace(self, vertices=vertices)

    def __repr__(self) -> str:
        return (f"TriangleMesh(name={self.name!r}, vertices={self.vertex_count}, "
                f"triangles={self.triangle_count}, textured={self.is_textured})")


# OBJ / MTL


def _parse_floats(tokens: Sequence[str], lineno: int, what: str) -> List[float]:
    try:
        values = [float(token) for token in tokens]
    except ValueError:
        raise MeshFormatError(f"non-numeric {what} coordinate", line=lineno)
    if not all(np.isfinite(values)):
        raise MeshFormatError(f"non-finite {what} coordinate", line=lineno)
    return values


def _resolve_index(token: str, count: int, lineno: int, what: str) -> int:
    try:
        index = int(token)
    except ValueError:
        raise MeshFormatError(f"non-integer {what} index {token!r}", line=lineno)
    if index > 0:
        resolved = index - 1
    elif index < 0:
        resolved = count + index
    else:
        raise MeshFormatError(f"{what} index 0 is not valid in OBJ", line=lineno)
    if not 0 <= resolved < count:
        raise MeshFormatError(f"{what} index {index} out of range (have {count})", line=lineno)
    return resolved


def parse_mtl(data: bytes) -> Dict[str, Material]:
    """Parse ``newmtl``/``Kd``/``map_Kd``; every other statement is ignored."""
    text = bytes(data).decode("utf-8", errors="replace")
    materials: Dict[str, Material] = {}
    current: Optional[Material] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        keyword, args = tokens[0], tokens[1:]
        if keyword == "newmtl":
            if not args:
                raise MeshFormatError("newmtl without a name", line=lineno)
            current = Material(name=args[0])
            materials[current.name] = current
        elif current is None:
            continue
        elif keyword == "Kd":
            if len(args) < 3:
                raise MeshFormatError("Kd needs three components", line=lineno)
            r, g, b = _parse_floats(args[:3], lineno, "Kd")
            current = replace(current, diffuse=(r, g, b))
            materials[current.name] = current
        elif keyword == "map_Kd":
            if not args:
                raise MeshFormatError("map_Kd without a path", line=lineno)
            # options such as -s/-o precede the path
            current = replace(current, texture_path=args[-1])
            materials[current.name] = current
    return materials


def write_mtl(material: Material) -> bytes:
    lines = [f"newmtl {material.name}"]
    if material.diffuse is not None:
        lines.append("Kd " + " ".join(repr(float(c)) for c in material.diffuse))
    if material.texture_path is not None:
        lines.append(f"map_Kd {material.texture_path}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _load_texture(material: Material, resolver: Optional[MaterialResolver]) -> Optional[RasterImage]:
    if material.texture_path is None:
        return None
    if not material.texture_path.lower().endswith(".ppm"):
        raise MeshFormatError(
            f"texture {material.texture_path!r} is not a PPM file; convert textures to binary PPM (P6) first"
        )
    if resolver is None:
        raise MeshFormatError(f"no resolver available for texture {material.texture_path!r}")
    try:
        data = resolver(material.texture_path)
    except OSError as exc:
        raise MeshFormatError(f"texture {material.texture_path!r} not found: {exc}")
    return read_ppm(data)


def parse_obj(
    data: bytes,
    material_resolver: Optional[MaterialResolver] = None,
    name: str = "mesh",
) -> TriangleMesh:
    """
    Parse the v / vt / f / mtllib / usemtl subset of Wavefront OBJ.

    Polygons are fan-triangulated from their first corner. ``vn`` and all
    other statements are skipped. ``material_resolver`` maps a path relative
    to the OBJ file (MTL library or texture) to its bytes.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MeshFormatError("OBJ input must be bytes")
    text = bytes(data).decode("utf-8", errors="replace")

    vertices: List[List[float]] = []
    uvs: List[List[float]] = []
    triangles: List[Tuple[int, int, int]] = []
    uv_triangles: List[Optional[Tuple[int, int, int]]] = []
    materials: Dict[str, Material] = {}
    used_materials: List[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        keyword, args = tokens[0], tokens[1:]
        if keyword == "v":
            if len(args) < 3:
                raise MeshFormatError("vertex needs three coordinates", line=lineno)
            vertices.append(_parse_floats(args[:3], lineno, "vertex"))
        elif keyword == "vt":
            if not args:
                raise MeshFormatError("texture coordinate needs at least one component", line=lineno)
            uv = _parse_floats(args[:2], lineno, "texture")
            uvs.append(uv if len(uv) == 2 else [uv[0], 0.0])
        elif keyword == "f":
            if len(args) < 3:
                raise MeshFormatError("face needs at least three corners", line=lineno)
            corners = []
            for token in args:
                parts = token.split("/")
                if len(parts) > 3 or not parts[0]:
                    raise MeshFormatError(f"malformed face corner {token!r}", line=lineno)
                vertex_index = _resolve_index(parts[0], len(vertices), lineno, "vertex")
                uv_index = None
                if len(parts) > 1 and parts[1]:
                    uv_index = _resolve_index(parts[1], len(uvs), lineno, "texture")
                corners.append((vertex_index, uv_index))
            has_uv = all(uv_index is not None for _, uv_index in corners)
            for k in range(1, len(corners) - 1):
                fan = (corners[0], corners[k], corners[k + 1])
                triangles.append(tuple(c[0] for c in fan))
                uv_triangles.append(tuple(c[1] for c in fan) if has_uv else None)
        elif keyword == "mtllib":
            for library in args:
                if material_resolver is None:
                    logger.warning("mtllib %s ignored: no material resolver", library)
                    continue
                try:
                    materials.update(parse_mtl(material_resolver(library)))
                except OSError as exc:
                    logger.warning("mtllib %s could not be read: %s", library, exc)
        elif keyword == "usemtl":
            if args and args[0] not in used_materials:
                used_materials.append(args[0])

    if not vertices:
        raise MeshFormatError("OBJ contains no vertices")

    mesh_uvs = mesh_uv_triangles = None
    if triangles and all(t is not None for t in uv_triangles):
        mesh_uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
        mesh_uv_triangles = np.asarray(uv_triangles, dtype=np.int64).reshape(-1, 3)
    elif any(t is not None for t in uv_triangles):
        logger.warning("%s: some faces lack texture coordinates; UVs dropped", name)

    texture = diffuse = None
    known = [m for m in used_materials if m in materials]
    if len(set(known)) > 1:
        logger.warning("%s: %d materials in use; only %s is applied", name, len(known), known[0])
    if known:
        material = materials[known[0]]
        diffuse = material.diffuse
        texture = _load_texture(material, material_resolver)
        if texture is not None and mesh_uvs is None:
            logger.warning("%s: texture %s ignored, mesh has no UVs", name, material.texture_path)
            texture = None

    return TriangleMesh(
        vertices=np.asarray(vertices, dtype=np.float64),
        triangles=np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
        uvs=mesh_uvs,
        uv_triangles=mesh_uv_triangles,
        texture=texture,
        diffuse=diffuse,
        name=name,
    )


def write_obj(mesh: TriangleMesh, material_library: Optional[str] = None,
              material_name: str = "material_0") -> bytes:
    """Serialise ``mesh``; floats use the shortest repr that round-trips exactly."""
    lines = [f"# twinbench mesh {mesh.name}"]
    if material_library is not None:
        lines.append(f"mtllib {material_library}")
        lines.append(f"usemtl {material_name}")
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    if mesh.uvs is not None:
        for u, v in mesh.uvs:
            lines.append(f"vt {float(u)!r} {float(v)!r}")
        for tri, uv_tri in zip(mesh.triangles + 1, mesh.uv_triangles + 1):
            lines.append("f " + " ".join(f"{a}/{b}" for a, b in zip(tri, uv_tri)))
    else:
        for a, b, c in mesh.triangles + 1:
            lines.append(f"f {a} {b} {c}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _directory_resolver(directory: Path) -> MaterialResolver:
    def resolve(relative: str) -> bytes:
        return (directory / relative).read_bytes()
    return resolve


def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MeshFormatError(f"cannot read {path}: {exc}")
    return parse_obj(data, _directory_resolver(path.parent), name=path.stem)


def save_mesh(mesh: TriangleMesh, path) -> Path:
    """Write OBJ plus, when the mesh has a material, its MTL and PPM texture."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    library = None
    if mesh.diffuse is not None or mesh.texture is not None:
        library = path.with_suffix(".mtl").name
        texture_name = None
        if mesh.texture is not None:
            texture_name = f"{path.stem}_texture.ppm"
            (path.parent / texture_name).write_bytes(write_ppm(mesh.texture))
        material = Material("material_0", mesh.diffuse, texture_name)
        (path.parent / library).write_bytes(write_mtl(material))
    path.write_bytes(write_obj(mesh, material_library=library))
    return path


# PPM


def read_ppm(data: bytes) -> RasterImage:
    """Read a binary P6 PPM with maxval 255."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise RasterFormatError("PPM input must be bytes")
    data = bytes(data)
    if data[:2] != b"P6":
        raise RasterFormatError("unsupported magic number, expected P6")
    pos = 2
    fields: List[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise RasterFormatError("truncated PPM header")
        if data[pos] in _PPM_WHITESPACE:
            pos += 1
            continue
        if data[pos] == ord("#"):
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        if pos == 2:
            raise RasterFormatError("unsupported magic number, expected P6")
        start = pos
        while pos < len(data) and data[pos] not in _PPM_WHITESPACE and data[pos] != ord("#"):
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise RasterFormatError(f"invalid PPM header field {token[:16]!r}")
        if len(token) > _PPM_FIELD_DIGITS:
            raise RasterFormatError(f"PPM header field {token[:16]!r}... is too long")
        fields.append(int(token))
    if pos >= len(data) or data[pos] not in _PPM_WHITESPACE:
        raise RasterFormatError("truncated PPM header")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise RasterFormatError(f"unsupported maxval {maxval}")
    if width < 1 or height < 1:
        raise RasterFormatError(f"invalid PPM dimensions {width}x{height}")
    size = width * height * 3
    if len(data) - pos < size:
        raise RasterFormatError("truncated pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos)
    return RasterImage(width, height, pixels.reshape(height, width, 3).copy())


def write_ppm(image: RasterImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(image.pixels, dtype=np.uint8).tobytes()


# Pose files


def write_pose_file(poses: PoseSet) -> bytes:
    lines = [f"{POSE_MAGIC} {POSE_VERSION} {len(poses)}"]
    for pose in poses:
        values = [*pose.position, *pose.rotation, pose.roll, pose.vertical_fov]
        lines.append(" ".join([str(pose.index)] + [repr(float(v)) for v in values]))
    return ("\n".join(lines) + "\n").encode("ascii")


def read_pose_file(data: bytes, require_contiguous: bool = True) -> PoseSet:
    """
    Read a TWINPOSE file, preserving record order.

    With ``require_contiguous`` the indices must be 0..n-1 in file order;
    otherwise they only need to be strictly increasing (an importer may
    carry a subset of the rendered frames).
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise PoseFormatError("pose file input must be bytes")
    try:
        text = bytes(data).decode("ascii")
    except UnicodeDecodeError:
        raise PoseFormatError("pose file is not ASCII text")

    content = [(lineno, line.split()) for lineno, line in enumerate(text.splitlines(), start=1)
               if line.strip() and not line.lstrip().startswith("#")]
    if not content:
        raise PoseFormatError("empty pose file")

    header_line, header = content[0]
    if len(header) != 3 or header[0] != POSE_MAGIC:
        raise PoseFormatError(f"missing {POSE_MAGIC} header", line=header_line)
    if header[1] != str(POSE_VERSION):
        raise PoseFormatError(f"unsupported pose file version {header[1]!r}", line=header_line)
    try:
        count = int(header[2])
    except ValueError:
        raise PoseFormatError(f"invalid frame count {header[2]!r}", line=header_line)
    if count < 1:
        raise PoseFormatError("pose file must hold at least one pose", line=header_line)

    records = content[1:]
    if len(records) != count:
        raise PoseFormatError(f"header declares {count} poses but file has {len(records)}")

    poses = []
    previous = -1
    for position, (lineno, tokens) in enumerate(records):
        if len(tokens) != 10:
            raise PoseFormatError(f"expected 10 fields, got {len(tokens)}", line=lineno)
        try:
            index = int(tokens[0])
            values = [float(token) for token in tokens[1:]]
        except ValueError:
            raise PoseFormatError("non-numeric pose field", line=lineno)
        if not all(np.isfinite(values)):
            raise PoseFormatError("non-finite pose field", line=lineno)
        if require_contiguous and index != position:
            raise PoseFormatError(f"expected index {position}, got {index}", line=lineno)
        if index <= previous:
            raise PoseFormatError(f"pose index {index} is not strictly increasing", line=lineno)
        previous = index
        quaternion = np.asarray(values[3:7])
        if abs(np.linalg.norm(quaternion) - 1.0) > QUATERNION_TOLERANCE:
            raise PoseFormatError("rotation quaternion is not unit length", line=lineno)
        poses.append(CameraPose(
            position=values[0:3],
            rotation=quaternion,
            roll=values[7],
            vertical_fov=values[8],
            index=index,
        ))
    return PoseSet(tuple(poses))


def load_pose_file(path, require_contiguous: bool = True) -> PoseSet:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise PoseFormatError(f"cannot read {path}: {exc}")
    return read_pose_file(data, require_contiguous=require_contiguous)


def save_pose_file(poses: PoseSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_pose_file(poses))
    return path
