"""Deterministic ray tracer for the three pass animations.

Texture passes (t0, t1) paint each hit with its object's bound control
texture and fold mirror reflections in by convex blending; they contain no
light, shadow, or specular term at all. The weight pass (w) shades every
object with a single flat material under the area light: Blinn-Phong with
soft shadows from stratified light sampling.

Determinism contract: every random number is a pure hash of
(seed, frame, pixel, bounce depth, stratum), so output bytes are identical
for any worker count or execution order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import manifest as mf
from .errors import InputIOError
from .image import Image, save_png
from .scene import AreaLight, Scene, sample_texture

__all__ = [
    "PassKind",
    "Ray",
    "HitRecord",
    "FrameGeometry",
    "reflect",
    "intersect",
    "render_texture_pass",
    "render_weight_pass",
    "render_sequence",
    "light_visibility",
]

EPS_RAY = 1e-4          # self-intersection offset for secondary/shadow rays
TIE_EPS = 1e-12         # equal-t tie-break window; earlier (mesh, tri) wins
_EDGE_EPS = 1e-10       # barycentric slack so shared edges register on both faces


class PassKind(str, Enum):
    SHADOW_TEXTURE = "t0"
    DIFFUSE_TEXTURE = "t1"
    WEIGHT = "w"


TEXTURE_PASSES = (PassKind.SHADOW_TEXTURE, PassKind.DIFFUSE_TEXTURE)


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray  # unit length

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.direction = np.asarray(self.direction, dtype=np.float64)
        norm = np.linalg.norm(self.direction)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {norm}")


@dataclass
class HitRecord:
    t_hit: float
    point: np.ndarray
    normal: np.ndarray          # geometric, unit, facing the incoming ray
    mesh_index: int
    triangle_index: int         # within the mesh
    material_id: str
    uv: tuple[float, float]     # interpolated rest-pose (baked) coordinates


def reflect(direction: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Mirror a unit direction about a unit normal: d - 2(d.n)n."""
    direction = np.asarray(direction, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    out = direction - 2.0 * np.dot(direction, normal) * normal
    return out / np.linalg.norm(out)


# ---------------------------------------------------------------------------
# Flattened per-frame geometry
# ---------------------------------------------------------------------------

class FrameGeometry:
    """All triangles of a scene at one frame, flattened for batch tracing."""

    def __init__(self, scene: Scene, frame: float):
        v0s, v1s, v2s, uv0s, uv1s, uv2s, mats, mesh_ids, tri_ids = [], [], [], [], [], [], [], [], []
        mat_index = {mid: k for k, mid in enumerate(scene.material_order)}
        for i, mesh in enumerate(scene.meshes):
            verts = scene.mesh_vertices_at(i, frame)
            tris = mesh.triangles
            v0s.append(verts[tris[:, 0]])
            v1s.append(verts[tris[:, 1]])
            v2s.append(verts[tris[:, 2]])
            uv0s.append(mesh.baked_uv[tris[:, 0]])
            uv1s.append(mesh.baked_uv[tris[:, 1]])
            uv2s.append(mesh.baked_uv[tris[:, 2]])
            mats.append(np.full(len(tris), mat_index[mesh.material_id], dtype=np.int64))
            mesh_ids.append(np.full(len(tris), i, dtype=np.int64))
            tri_ids.append(np.arange(len(tris), dtype=np.int64))
        self.v0 = np.concatenate(v0s)
        self.e1 = np.concatenate(v1s) - self.v0
        self.e2 = np.concatenate(v2s) - self.v0
        self.uv0 = np.concatenate(uv0s)
        self.uv1 = np.concatenate(uv1s)
        self.uv2 = np.concatenate(uv2s)
        self.mat_index = np.concatenate(mats)
        self.mesh_index = np.concatenate(mesh_ids)
        self.tri_index = np.concatenate(tri_ids)
        normals = np.cross(self.e1, self.e2)
        self.normal = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        self.count = len(self.v0)

        self.materials = [scene.materials[mid] for mid in scene.material_order]
        self.ks = np.array([m.ks for m in self.materials])
        self.eta = np.array([m.eta for m in self.materials])
        self.base_color = np.stack([m.base_color for m in self.materials])
        self.shininess = np.array([m.shininess for m in self.materials])
        self.light = scene.light_at(frame)
        self.background = scene.background
        self.max_depth = scene.max_depth
        self.fresnel = scene.fresnel


def _intersect_batch(geom: FrameGeometry, origins: np.ndarray, dirs: np.ndarray):
    """Nearest Moller-Trumbore hit per ray.

    Returns (t, tri, bu, bv); tri is the flat triangle index or -1 on miss.
    Triangles are visited in (mesh, triangle) order and a new hit must beat
    the incumbent by more than TIE_EPS, which fixes the tie-break.
    """
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_tri = np.full(n, -1, dtype=np.int64)
    best_u = np.zeros(n)
    best_v = np.zeros(n)
    for k in range(geom.count):
        pvec = np.cross(dirs, geom.e2[k])
        det = pvec @ geom.e1[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
        tvec = origins - geom.v0[k]
        u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
        qvec = np.cross(tvec, geom.e1[k])
        v = np.einsum("ij,ij->i", dirs, qvec) * inv_det
        t = (qvec @ geom.e2[k]) * inv_det
        accept = (
            (np.abs(det) > 1e-14)
            & (u >= -_EDGE_EPS)
            & (v >= -_EDGE_EPS)
            & (u + v <= 1.0 + _EDGE_EPS)
            & (t > EPS_RAY)
            & (t < best_t - TIE_EPS)
        )
        best_t = np.where(accept, t, best_t)
        best_tri = np.where(accept, k, best_tri)
        best_u = np.where(accept, u, best_u)
        best_v = np.where(accept, v, best_v)
    return best_t, best_tri, best_u, best_v


def _occluded_batch(geom: FrameGeometry, origins: np.ndarray, dirs: np.ndarray,
                    t_limits: np.ndarray) -> np.ndarray:
    """True where any triangle blocks the segment (EPS_RAY, t_limit - EPS_RAY)."""
    blocked = np.zeros(len(origins), dtype=bool)
    for k in range(geom.count):
        pvec = np.cross(dirs, geom.e2[k])
        det = pvec @ geom.e1[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_det = 1.0 / det
        tvec = origins - geom.v0[k]
        u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
        qvec = np.cross(tvec, geom.e1[k])
        v = np.einsum("ij,ij->i", dirs, qvec) * inv_det
        t = (qvec @ geom.e2[k]) * inv_det
        blocked |= (
            (np.abs(det) > 1e-14)
            & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
            & (t > EPS_RAY) & (t < t_limits - EPS_RAY)
        )
    return blocked


def intersect(scene_at_t: FrameGeometry, ray: Ray) -> HitRecord | None:
    """Nearest intersection of one ray, or None on miss."""
    t, tri, bu, bv = _intersect_batch(
        scene_at_t, ray.origin[None, :], ray.direction[None, :])
    if tri[0] < 0:
        return None
    k = int(tri[0])
    w = 1.0 - bu[0] - bv[0]
    uv = w * scene_at_t.uv0[k] + bu[0] * scene_at_t.uv1[k] + bv[0] * scene_at_t.uv2[k]
    normal = scene_at_t.normal[k]
    if np.dot(normal, ray.direction) > 0:
        normal = -normal
    material = scene_at_t.materials[scene_at_t.mat_index[k]]
    return HitRecord(
        t_hit=float(t[0]),
        point=ray.origin + t[0] * ray.direction,
        normal=normal,
        mesh_index=int(scene_at_t.mesh_index[k]),
        triangle_index=int(scene_at_t.tri_index[k]),
        material_id=material.id,
        uv=(float(uv[0]), float(uv[1])),
    )


# ---------------------------------------------------------------------------
# Counter-based RNG: pure function of (seed, frame, pixel, counter)
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def _mix_int(x: int) -> int:
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _unit_floats(seed: int, frame: int, pixel_ids: np.ndarray, counter: int) -> np.ndarray:
    base = _mix_int(_mix_int(seed ^ 0x9E3779B97F4A7C15) + frame * 0xD1342543DE82EF95)
    base = _mix_int(base + counter * 0xA0761D6478BD642F)
    h = pixel_ids.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    h ^= np.uint64(base)
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def light_visibility(geom: FrameGeometry, points: np.ndarray, light: AreaLight,
                     samples: int, seed: int, frame: int,
                     pixel_ids: np.ndarray, depth: int = 0) -> np.ndarray:
    """Fraction of the area light visible from each point.

    The rectangle is sampled on a jittered ceil(sqrt(samples))^2 stratified
    grid; each stratum casts one binary shadow ray.
    """
    if samples < 1:
        raise ValueError(f"light samples must be >= 1, got {samples}")
    n = math.isqrt(samples)
    if n * n < samples:
        n += 1
    strata = n * n
    unblocked = np.zeros(len(points), dtype=np.float64)
    for s in range(strata):
        i, j = s % n, s // n
        counter = (depth * 65536 + s) * 2
        xi = _unit_floats(seed, frame, pixel_ids, counter)
        xj = _unit_floats(seed, frame, pixel_ids, counter + 1)
        target = (light.corner
                  + np.outer((i + xi) / n, light.edge_u)
                  + np.outer((j + xj) / n, light.edge_v))
        delta = target - points
        dist = np.linalg.norm(delta, axis=1)
        dirs = delta / dist[:, None]
        unblocked += ~_occluded_batch(geom, points, dirs, dist)
    return unblocked / strata


# ---------------------------------------------------------------------------
# Pass rendering
# ---------------------------------------------------------------------------

def _primary_rays(scene: Scene):
    """One ray per pixel through the NDC grid x/(W-1), y/(H-1).

    This grid makes the render camera, project_uv, and sample_texture agree
    texel-for-texel, which is what keeps projected control paintings
    registered with the geometry they were painted over.
    """
    w, h = scene.width, scene.height
    forward, right, cam_up = scene.camera.basis()
    tan_half = math.tan(math.radians(scene.camera.vfov) / 2.0)
    ndc_u = np.linspace(0.0, 1.0, w) if w > 1 else np.array([0.5])
    ndc_v = np.linspace(0.0, 1.0, h) if h > 1 else np.array([0.5])
    uu, vv = np.meshgrid(ndc_u, ndc_v)
    dirs = (forward
            + (2.0 * uu[..., None] - 1.0) * tan_half * scene.camera.aspect * right
            + (1.0 - 2.0 * vv[..., None]) * tan_half * cam_up).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(scene.camera.position, dirs.shape).copy()
    return origins, dirs


def _effective_reflectance(geom: FrameGeometry, mat: np.ndarray, cos_theta: np.ndarray):
    kf = geom.ks[mat]
    if geom.fresnel:
        r0 = ((1.0 - geom.eta[mat]) / (1.0 + geom.eta[mat])) ** 2
        kf = kf * (r0 + (1.0 - r0) * (1.0 - cos_theta) ** 5)
    return kf


def _hit_uv(geom: FrameGeometry, tri: np.ndarray, bu: np.ndarray, bv: np.ndarray):
    w = 1.0 - bu - bv
    return (w[:, None] * geom.uv0[tri]
            + bu[:, None] * geom.uv1[tri]
            + bv[:, None] * geom.uv2[tri])


def _sample_material_texture(geom: FrameGeometry, kind: PassKind,
                             mat: np.ndarray, uv: np.ndarray) -> np.ndarray:
    out = np.zeros((len(mat), 3))
    for m, material in enumerate(geom.materials):
        sel = mat == m
        if not sel.any():
            continue
        tex = (material.shadow_texture if kind is PassKind.SHADOW_TEXTURE
               else material.diffuse_texture)
        out[sel] = sample_texture(tex, uv[sel, 0], uv[sel, 1])
    return out


def _shade_weight(geom: FrameGeometry, points, normals, view_dirs, mat,
                  samples, seed, frame, pixel_ids, depth):
    base = geom.base_color[mat]
    local = geom.light.ambient * base
    center = geom.light.corner + 0.5 * geom.light.edge_u + 0.5 * geom.light.edge_v
    to_light = center - points
    to_light /= np.linalg.norm(to_light, axis=1, keepdims=True)
    ndotl = np.einsum("ij,ij->i", normals, to_light)
    lit = ndotl > 0.0
    if lit.any():
        offset = points[lit] + EPS_RAY * normals[lit]
        vis = light_visibility(geom, offset, geom.light, samples,
                               seed, frame, pixel_ids[lit], depth)
        diffuse = base[lit] * geom.light.emission * ndotl[lit, None]
        half = to_light[lit] - view_dirs[lit]
        half /= np.linalg.norm(half, axis=1, keepdims=True)
        ndoth = np.clip(np.einsum("ij,ij->i", normals[lit], half), 0.0, None)
        specular = geom.light.emission * (ndoth ** geom.shininess[mat][lit])[:, None]
        local = local.copy()
        local[lit] += vis[:, None] * (diffuse + specular)
    return local


def _trace(geom: FrameGeometry, scene: Scene, kind: PassKind, frame: int,
           samples: int, seed: int) -> np.ndarray:
    origins, dirs = _primary_rays(scene)
    n = len(origins)
    color = np.zeros((n, 3))
    ids = np.arange(n, dtype=np.int64)
    weights = np.ones(n)
    for depth in range(geom.max_depth + 1):
        if len(ids) == 0:
            break
        t, tri, bu, bv = _intersect_batch(geom, origins, dirs)
        miss = tri < 0
        if miss.any():
            color[ids[miss]] += weights[miss, None] * geom.background
        hit = ~miss
        if not hit.any():
            break
        ids, weights = ids[hit], weights[hit]
        origins, dirs = origins[hit], dirs[hit]
        t, tri, bu, bv = t[hit], tri[hit], bu[hit], bv[hit]
        mat = geom.mat_index[tri]
        points = origins + t[:, None] * dirs
        normals = geom.normal[tri]
        backface = np.einsum("ij,ij->i", normals, dirs) > 0.0
        normals = np.where(backface[:, None], -normals, normals)
        cos_theta = np.abs(np.einsum("ij,ij->i", normals, dirs))

        if kind in TEXTURE_PASSES:
            local = _sample_material_texture(geom, kind, mat, _hit_uv(geom, tri, bu, bv))
        else:
            local = _shade_weight(geom, points, normals, dirs, mat,
                                  samples, seed, frame, ids, depth)

        kf = _effective_reflectance(geom, mat, cos_theta)
        color[ids] += (weights * (1.0 - kf))[:, None] * local
        if depth == geom.max_depth:
            break
        bounce = kf > 0.0
        if not bounce.any():
            break
        ids, weights = ids[bounce], weights[bounce] * kf[bounce]
        normals, dirs = normals[bounce], dirs[bounce]
        reflected = dirs - 2.0 * np.einsum("ij,ij->i", normals, dirs)[:, None] * normals
        reflected /= np.linalg.norm(reflected, axis=1, keepdims=True)
        origins = points[bounce] + EPS_RAY * normals
        dirs = reflected
    return color


def _check_frame(scene: Scene, frame: int) -> None:
    if not isinstance(frame, (int, np.integer)) or not (0 <= frame < scene.timeline.frame_count):
        raise ValueError(
            f"invalid frame {frame}: timeline has frames 0..{scene.timeline.frame_count - 1}")


def render_texture_pass(scene: Scene, kind: PassKind, frame: int) -> Image:
    """Render one unlit texture-pass frame (t0 or t1) with embedded reflections."""
    if kind not in TEXTURE_PASSES:
        raise ValueError(f"texture pass kind must be t0 or t1, got {kind}")
    _check_frame(scene, frame)
    geom = FrameGeometry(scene, frame)
    color = _trace(geom, scene, kind, frame, samples=0, seed=0)
    return Image(color.reshape(scene.height, scene.width, 3)).assert_finite()


def render_weight_pass(scene: Scene, frame: int, light_samples: int = 64,
                       seed: int = 0) -> Image:
    """Render one weight-pass frame: flat materials, soft shadows, highlights."""
    _check_frame(scene, frame)
    if light_samples < 1:
        raise ValueError(f"light_samples must be >= 1, got {light_samples}")
    geom = FrameGeometry(scene, frame)
    color = _trace(geom, scene, PassKind.WEIGHT, frame, light_samples, seed)
    color = np.clip(color, 0.0, 1.0)
    return Image(color.reshape(scene.height, scene.width, 3)).assert_finite()


# ---------------------------------------------------------------------------
# Sequence rendering
# ---------------------------------------------------------------------------

def _render_frame_file(scene: Scene, kind: PassKind, frame: int, light_samples: int,
                       seed: int, output_dir: str, bitdepth: int) -> int:
    if kind is PassKind.WEIGHT:
        image = render_weight_pass(scene, frame, light_samples, seed)
    else:
        image = render_texture_pass(scene, kind, frame)
    save_png(image, os.path.join(output_dir, mf.frame_filename(kind.value, frame)), bitdepth)
    return frame


def render_sequence(scene: Scene, kind: PassKind, frame_range: tuple[int, int],
                    seed: int, output_dir: str, light_samples: int = 64,
                    jobs: int = 1) -> dict:
    """Render frames [first, last] of one pass and write PNGs plus a manifest.

    The manifest starts out marked incomplete and is flipped once every
    frame is on disk, so an interrupted run leaves partial output behind
    with an honest manifest.
    """
    first, last = frame_range
    _check_frame(scene, first)
    _check_frame(scene, last)
    if last < first:
        raise ValueError(f"empty frame range {first}..{last}")
    os.makedirs(output_dir, exist_ok=True)
    record = {
        "pass": kind.value,
        "frames": [first, last],
        "seed": seed,
        "config_sha256": mf.pass_config_hash(scene.config, kind.value,
                                             light_samples if kind is PassKind.WEIGHT else None),
        "complete": False,
    }
    mf.write_manifest(output_dir, record)
    frames = list(range(first, last + 1))
    try:
        if jobs > 1 and len(frames) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_render_frame_file, scene, kind, f, light_samples,
                                       seed, output_dir, scene.bitdepth) for f in frames]
                for fut in futures:
                    fut.result()
        else:
            for f in frames:
                _render_frame_file(scene, kind, f, light_samples, seed,
                                   output_dir, scene.bitdepth)
    except (OSError, InputIOError):
        raise  # manifest on disk still says complete: false
    record["complete"] = True
    mf.write_manifest(output_dir, record)
    return record
