"""Scene description: proxy meshes, materials, camera, area light, timeline.

A scene is parsed from one strict JSON document (unknown keys are errors).
Control paintings are bound to geometry by camera projection evaluated at
the rest pose (frame 0): UVs are baked per vertex at parse time, so the
painting travels with a surface that moves later.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import (
    ConfigError,
    FormatError,
    InputIOError,
    TrackNotFoundError,
    ValidationError,
)
from .image import Image, load_png

__all__ = [
    "Mesh",
    "Material",
    "Camera",
    "AreaLight",
    "Timeline",
    "Scene",
    "load_obj",
    "parse_scene",
    "load_scene",
    "project_uv",
    "sample_texture",
    "interpolate_track",
]

MIN_TRIANGLE_AREA = 1e-12


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


@dataclass
class Mesh:
    vertices: np.ndarray            # (N, 3) world units
    triangles: np.ndarray           # (M, 3) vertex indices
    material_id: str = ""
    track: dict | None = None       # {"translate": [...], "rotate_deg": [...]}
    baked_uv: np.ndarray | None = None  # (N, 2) rest-pose projection, set at parse


@dataclass
class Material:
    id: str
    ks: float                       # mirror reflection coefficient in [0, 1]
    eta: float                      # index of refraction, Fresnel control only
    base_color: np.ndarray          # flat color for the weight pass
    shininess: float                # Blinn exponent
    shadow_texture: Image
    diffuse_texture: Image


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    vfov: float                     # vertical field of view, degrees
    aspect: float                   # width / height

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.look_at = np.asarray(self.look_at, dtype=np.float64)
        self.up = np.asarray(self.up, dtype=np.float64)
        if np.allclose(self.position, self.look_at):
            raise ValidationError("camera: position equals look_at")
        if not (0.0 < self.vfov < 180.0):
            raise ValidationError(f"camera: vfov must be in (0, 180), got {self.vfov}")
        if not (self.aspect > 0.0):
            raise ValidationError(f"camera: aspect must be > 0, got {self.aspect}")
        forward = _normalize(self.look_at - self.position)
        if np.linalg.norm(np.cross(forward, self.up)) < 1e-9:
            raise ValidationError("camera: up vector is parallel to view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (forward, right, up) frame of the camera."""
        forward = _normalize(self.look_at - self.position)
        right = _normalize(np.cross(forward, self.up))
        cam_up = np.cross(right, forward)
        return forward, right, cam_up


@dataclass
class AreaLight:
    corner: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    emission: np.ndarray
    ambient: np.ndarray
    track: dict | None = None       # {"translate": [...]}

    def __post_init__(self):
        for name in ("corner", "edge_u", "edge_v", "emission", "ambient"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if np.linalg.norm(np.cross(self.edge_u, self.edge_v)) < 1e-12:
            raise ValidationError("light: edge_u x edge_v must span a positive area")
        if (self.emission < 0).any() or (self.ambient < 0).any():
            raise ValidationError("light: emission and ambient must be >= 0")


@dataclass
class Timeline:
    frame_count: int
    fps: float
    keyframes: dict[str, list[tuple[float, np.ndarray]]] = field(default_factory=dict)

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValidationError(f"timeline: frame_count must be >= 1, got {self.frame_count}")
        if not (self.fps > 0):
            raise ValidationError(f"timeline: fps must be > 0, got {self.fps}")
        for name, keys in self.keyframes.items():
            if not keys:
                raise ValidationError(f"track {name!r}: needs at least one keyframe")
            frames = [k[0] for k in keys]
            if any(b <= a for a, b in zip(frames, frames[1:])):
                raise ValidationError(f"track {name!r}: keyframe frames must be strictly increasing")


def interpolate_track(timeline: Timeline, track: str, frame: float) -> np.ndarray:
    """Piecewise-linear track value at ``frame``; constant beyond the ends."""
    if track not in timeline.keyframes:
        raise TrackNotFoundError(f"unknown track {track!r}")
    keys = timeline.keyframes[track]
    frames = np.array([k[0] for k in keys], dtype=np.float64)
    values = np.stack([np.asarray(k[1], dtype=np.float64) for k in keys])
    return np.stack([np.interp(frame, frames, values[:, i]) for i in range(values.shape[1])])


@dataclass
class Scene:
    meshes: list[Mesh]
    materials: dict[str, Material]
    material_order: list[str]
    camera: Camera
    light: AreaLight
    timeline: Timeline
    width: int
    height: int
    background: np.ndarray
    max_depth: int
    fresnel: bool
    output_dir: str
    bitdepth: int
    config: dict = field(repr=False, default_factory=dict)  # raw document, for pass hashing

    def mesh_vertices_at(self, index: int, frame: float) -> np.ndarray:
        """World-space vertices of mesh ``index`` at ``frame``."""
        mesh = self.meshes[index]
        verts = mesh.vertices
        if mesh.track is None:
            return verts
        rot = np.eye(3)
        offset = np.zeros(3)
        name = f"mesh[{index}]"
        if "rotate_deg" in mesh.track:
            degs = interpolate_track(self.timeline, f"{name}.rotate_deg", frame)
            rot = Rotation.from_euler("xyz", degs, degrees=True).as_matrix()
        if "translate" in mesh.track:
            offset = interpolate_track(self.timeline, f"{name}.translate", frame)
        return verts @ rot.T + offset

    def light_at(self, frame: float) -> AreaLight:
        light = self.light
        if light.track is None or "translate" not in light.track:
            return light
        offset = interpolate_track(self.timeline, "light.translate", frame)
        return AreaLight(light.corner + offset, light.edge_u, light.edge_v,
                         light.emission, light.ambient)


# ---------------------------------------------------------------------------
# Camera projection and texture sampling
# ---------------------------------------------------------------------------

def _project_raw(camera: Camera, points: np.ndarray):
    """Unclamped perspective UVs and forward depth for an (N, 3) point array."""
    forward, right, cam_up = camera.basis()
    d = np.atleast_2d(points) - camera.position
    z = d @ forward
    tan_half = math.tan(math.radians(camera.vfov) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (d @ right) / (z * tan_half * camera.aspect)
        y = (d @ cam_up) / (z * tan_half)
    u = 0.5 * (1.0 + x)
    v = 0.5 * (1.0 - y)
    return u, v, z


def project_uv(camera: Camera, point) -> tuple[float, float] | None:
    """Project a world point onto the camera image plane.

    Returns (u, v) with the full field of view mapped to [0, 1]^2, u growing
    rightward and v downward, or None for points behind the camera or
    outside the frustum.
    """
    point = np.asarray(point, dtype=np.float64)
    if np.allclose(point, camera.position):
        raise ValueError("degenerate input: point coincides with camera position")
    u, v, z = _project_raw(camera, point)
    u, v, z = float(u[0]), float(v[0]), float(z[0])
    if z <= 0.0 or not (0.0 <= u <= 1.0) or not (0.0 <= v <= 1.0):
        return None
    return u, v


def sample_texture(image: Image, u, v):
    """Bilinear texture lookup with clamp-to-edge addressing.

    (u, v) = (0, 0) is the top-left texel center and (1, 1) the bottom-right
    texel center. Accepts scalars or same-shaped arrays; returns (..., 3).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h, w = image.height, image.width
    x = u * (w - 1)
    y = v * (h - 1)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(x - x0, 0.0, 1.0)[..., None]
    fy = np.clip(y - y0, 0.0, 1.0)[..., None]
    data = image.data
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bottom = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


# ---------------------------------------------------------------------------
# Wavefront OBJ loading
# ---------------------------------------------------------------------------

def load_obj(path) -> Mesh:
    """Load a v/f-only Wavefront OBJ; quads and larger faces are fan-triangulated."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InputIOError(f"no such file: {path}")
    vertices: list[list[float]] = []
    faces: list[tuple[int, list[int]]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            record = parts[0]
            if record == "v":
                if len(parts) != 4:
                    raise FormatError(f"{path}:{lineno}: vertex record needs 3 coordinates")
                try:
                    vertices.append([float(p) for p in parts[1:]])
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif record == "f":
                if len(parts) < 4:
                    raise FormatError(f"{path}:{lineno}: face record needs >= 3 vertices")
                idx = []
                for token in parts[1:]:
                    head = token.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise FormatError(f"{path}:{lineno}: bad face index {token!r}") from exc
                    if i < 1:
                        raise FormatError(f"{path}:{lineno}: OBJ indices are 1-based, got {i}")
                    idx.append(i - 1)
                faces.append((lineno, idx))
            else:
                raise FormatError(f"{path}:{lineno}: unsupported record {record!r} (only v and f)")
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    triangles = []
    for lineno, idx in faces:
        if max(idx) >= len(verts):
            raise FormatError(f"{path}:{lineno}: face index {max(idx) + 1} out of range")
        for k in range(1, len(idx) - 1):
            tri = (idx[0], idx[k], idx[k + 1])
            a, b, c = verts[tri[0]], verts[tri[1]], verts[tri[2]]
            if 0.5 * np.linalg.norm(np.cross(b - a, c - a)) <= MIN_TRIANGLE_AREA:
                raise FormatError(f"{path}:{lineno}: degenerate triangle (area ~ 0)")
            triangles.append(tri)
    return Mesh(verts, np.asarray(triangles, dtype=np.int64).reshape(-1, 3))


# ---------------------------------------------------------------------------
# Strict JSON schema parsing
# ---------------------------------------------------------------------------

def _object(node, path, required, optional=()):
    if not isinstance(node, dict):
        raise ConfigError(path, "expected an object")
    for key in node:
        if key not in required and key not in optional:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in node:
            raise ConfigError(f"{path}.{key}", "missing required key")
    return node


def _number(node, path, minimum=None, exclusive=False):
    if not isinstance(node, (int, float)) or isinstance(node, bool) or not math.isfinite(node):
        raise ConfigError(path, "expected a finite number")
    value = float(node)
    if minimum is not None and (value <= minimum if exclusive else value < minimum):
        op = ">" if exclusive else ">="
        raise ConfigError(path, f"must be {op} {minimum}")
    return value


def _integer(node, path, minimum=None):
    if not isinstance(node, int) or isinstance(node, bool):
        raise ConfigError(path, "expected an integer")
    if minimum is not None and node < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return node


def _string(node, path):
    if not isinstance(node, str) or not node:
        raise ConfigError(path, "expected a non-empty string")
    return node


def _vec3(node, path):
    if (not isinstance(node, list) or len(node) != 3
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in node)
            or any(not math.isfinite(x) for x in node)):
        raise ConfigError(path, "expected a 3-element array of finite numbers")
    return np.asarray(node, dtype=np.float64)


def _track(node, path, allowed):
    node = _object(node, path, required=(), optional=allowed)
    track = {}
    for key in node:
        entry = node[key]
        if not isinstance(entry, list) or not entry:
            raise ConfigError(f"{path}.{key}", "expected a non-empty array of [frame, [x,y,z]] pairs")
        keys = []
        for i, pair in enumerate(entry):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"{path}.{key}[{i}]", "expected a [frame, [x,y,z]] pair")
            frame = _number(pair[0], f"{path}.{key}[{i}][0]")
            keys.append((frame, _vec3(pair[1], f"{path}.{key}[{i}][1]")))
        track[key] = keys
    return track or None


def parse_scene(config_text: str, base_dir: str = ".") -> Scene:
    """Parse and fully validate a scene config document.

    File references (OBJ meshes, texture PNGs) are resolved against
    ``base_dir`` and loaded eagerly; any invalid document raises a
    structured error rather than yielding a partial Scene.
    """
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from exc
    _object(doc, "$", required=("render", "camera", "light", "materials", "meshes", "passes"))

    render = _object(doc["render"], "$.render",
                     required=("width", "height", "frames", "fps"),
                     optional=("background", "max_depth", "fresnel"))
    width = _integer(render["width"], "$.render.width", minimum=1)
    height = _integer(render["height"], "$.render.height", minimum=1)
    frames = _integer(render["frames"], "$.render.frames", minimum=1)
    fps = _number(render["fps"], "$.render.fps", minimum=0, exclusive=True)
    background = _vec3(render.get("background", [0.0, 0.0, 0.0]), "$.render.background")
    max_depth = _integer(render.get("max_depth", 3), "$.render.max_depth", minimum=0)
    fresnel = render.get("fresnel", False)
    if not isinstance(fresnel, bool):
        raise ConfigError("$.render.fresnel", "expected a boolean")

    cam = _object(doc["camera"], "$.camera", required=("position", "look_at", "up", "vfov_deg"))
    camera = Camera(
        position=_vec3(cam["position"], "$.camera.position"),
        look_at=_vec3(cam["look_at"], "$.camera.look_at"),
        up=_vec3(cam["up"], "$.camera.up"),
        vfov=_number(cam["vfov_deg"], "$.camera.vfov_deg"),
        aspect=width / height,
    )

    li = _object(doc["light"], "$.light",
                 required=("corner", "edge_u", "edge_v", "emission", "ambient"),
                 optional=("track",))
    light = AreaLight(
        corner=_vec3(li["corner"], "$.light.corner"),
        edge_u=_vec3(li["edge_u"], "$.light.edge_u"),
        edge_v=_vec3(li["edge_v"], "$.light.edge_v"),
        emission=_vec3(li["emission"], "$.light.emission"),
        ambient=_vec3(li["ambient"], "$.light.ambient"),
        track=_track(li["track"], "$.light.track", ("translate",)) if "track" in li else None,
    )

    if not isinstance(doc["materials"], list) or not doc["materials"]:
        raise ConfigError("$.materials", "expected a non-empty array")
    materials: dict[str, Material] = {}
    material_order: list[str] = []
    for i, node in enumerate(doc["materials"]):
        path = f"$.materials[{i}]"
        node = _object(node, path, required=("id", "ks", "eta", "base_color", "shininess",
                                             "shadow_texture", "diffuse_texture"))
        mat_id = _string(node["id"], f"{path}.id")
        if mat_id in materials:
            raise ConfigError(f"{path}.id", f"duplicate material id {mat_id!r}")
        ks = _number(node["ks"], f"{path}.ks")
        if not (0.0 <= ks <= 1.0):
            raise ValidationError(f"material {mat_id!r}: ks must be in [0, 1], got {ks}")
        eta = _number(node["eta"], f"{path}.eta")
        if eta < 1.0:
            raise ValidationError(f"material {mat_id!r}: eta must be >= 1, got {eta}")
        shininess = _number(node["shininess"], f"{path}.shininess")
        if not (shininess > 0.0):
            raise ValidationError(f"material {mat_id!r}: shininess must be > 0, got {shininess}")
        base_color = _vec3(node["base_color"], f"{path}.base_color")
        if (base_color < 0).any():
            raise ValidationError(f"material {mat_id!r}: base_color channels must be >= 0")
        textures = {}
        for key in ("shadow_texture", "diffuse_texture"):
            tex_path = os.path.join(base_dir, _string(node[key], f"{path}.{key}"))
            textures[key] = load_png(tex_path)
            if (textures[key].width, textures[key].height) != (width, height):
                raise ValidationError(
                    f"material {mat_id!r}: {key} is {textures[key].width}x{textures[key].height}, "
                    f"render target is {width}x{height}")
        materials[mat_id] = Material(mat_id, ks, eta, base_color, shininess,
                                     textures["shadow_texture"], textures["diffuse_texture"])
        material_order.append(mat_id)

    if not isinstance(doc["meshes"], list) or not doc["meshes"]:
        raise ConfigError("$.meshes", "expected a non-empty array")
    meshes: list[Mesh] = []
    keyframes: dict[str, list] = {}
    for i, node in enumerate(doc["meshes"]):
        path = f"$.meshes[{i}]"
        node = _object(node, path, required=("obj_path", "material"), optional=("track",))
        mesh = load_obj(os.path.join(base_dir, _string(node["obj_path"], f"{path}.obj_path")))
        mesh.material_id = _string(node["material"], f"{path}.material")
        if mesh.material_id not in materials:
            raise ValidationError(f"mesh[{i}]: unknown material {mesh.material_id!r}")
        if "track" in node:
            mesh.track = _track(node["track"], f"{path}.track", ("translate", "rotate_deg"))
        if mesh.track:
            for key, keys in mesh.track.items():
                keyframes[f"mesh[{i}].{key}"] = keys
        meshes.append(mesh)

    if light.track:
        for key, keys in light.track.items():
            keyframes[f"light.{key}"] = keys
    timeline = Timeline(frame_count=frames, fps=fps, keyframes=keyframes)

    passes = _object(doc["passes"], "$.passes", required=("output_dir", "bitdepth"))
    output_dir = _string(passes["output_dir"], "$.passes.output_dir")
    bitdepth = _integer(passes["bitdepth"], "$.passes.bitdepth")
    if bitdepth not in (8, 16):
        raise ConfigError("$.passes.bitdepth", "must be 8 or 16")

    scene = Scene(meshes, materials, material_order, camera, light, timeline,
                  width, height, background, max_depth, fresnel, output_dir, bitdepth,
                  config=doc)
    _bake_uvs(scene)
    return scene


def load_scene(path) -> Scene:
    """Read a config file and parse it relative to its own directory."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InputIOError(f"no such file: {path}")
    with open(path) as fh:
        text = fh.read()
    return parse_scene(text, base_dir=os.path.dirname(path) or ".")


def _bake_uvs(scene: Scene) -> None:
    # Rest pose is the frame-0 transform; geometry behind the camera gets
    # extrapolated coordinates (clamped depth) rather than a hole.
    for i, mesh in enumerate(scene.meshes):
        verts = scene.mesh_vertices_at(i, 0.0)
        u, v, z = _project_raw(scene.camera, verts)
        behind = z <= 1e-12
        if behind.any():
            u = np.where(behind, 0.5, u)
            v = np.where(behind, 0.5, v)
        mesh.baked_uv = np.stack([u, v], axis=1)
