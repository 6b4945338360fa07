"""Procedural test scenes standing in for the original painting assets.

Each generator writes a scene config, OBJ meshes, and control-texture PNGs
(flat color fields with distinct hues, plus a checkerboard for the
registration scene) into a target directory.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .image import Image, save_png

__all__ = ["SCENE_NAMES", "gen_testscene"]

SCENE_NAMES = ("registration", "mirrorbox", "pond")


def _write_obj(path: str, vertices, faces) -> None:
    with open(path, "w") as fh:
        for v in vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for face in faces:
            fh.write("f " + " ".join(str(i + 1) for i in face) + "\n")


def _quad_y(path: str, y: float, x0: float, x1: float, z0: float, z1: float) -> None:
    """Horizontal rectangle at height y, wound to face +y."""
    verts = [(x0, y, z0), (x0, y, z1), (x1, y, z1), (x1, y, z0)]
    _write_obj(path, verts, [(0, 1, 2, 3)])


def _icosphere(center, radius: float, subdivisions: int):
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        verts_list = list(verts)

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                mid = (verts_list[a] + verts_list[b]) / 2.0
                verts_list.append(mid / np.linalg.norm(mid))
                cache[key] = len(verts_list) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        verts = np.array(verts_list)
        faces = new_faces
    return np.asarray(center) + radius * verts, faces


def _flat_field(size: int, color) -> Image:
    return Image(np.broadcast_to(np.asarray(color, dtype=np.float64),
                                 (size, size, 3)).copy())


def _checkerboard(size: int, cell: int, color_a, color_b) -> Image:
    yy, xx = np.mgrid[0:size, 0:size]
    mask = ((xx // cell + yy // cell) % 2 == 0)
    data = np.where(mask[..., None], np.asarray(color_a), np.asarray(color_b))
    return Image(data.astype(np.float64))


def _write_config(path: str, config: dict) -> None:
    with open(path, "w") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")


def _gen_registration(out: str) -> str:
    size = 512
    # Quad marginally larger than the 90-degree frustum at z = -2, so every
    # pixel lands strictly inside it.
    half = 2.002
    _write_obj(os.path.join(out, "canvas.obj"),
               [(-half, -half, -2.0), (half, -half, -2.0),
                (half, half, -2.0), (-half, half, -2.0)],
               [(0, 1, 2, 3)])
    save_png(_checkerboard(size, 32, (0.85, 0.75, 0.55), (0.25, 0.35, 0.55)),
             os.path.join(out, "canvas_diffuse.png"), 8)
    save_png(_checkerboard(size, 32, (0.30, 0.25, 0.20), (0.08, 0.10, 0.18)),
             os.path.join(out, "canvas_shadow.png"), 8)
    config = {
        "render": {"width": size, "height": size, "frames": 1, "fps": 24},
        "camera": {"position": [0, 0, 0], "look_at": [0, 0, -1],
                   "up": [0, 1, 0], "vfov_deg": 90.0},
        "light": {"corner": [-0.5, 1.5, -1.5], "edge_u": [1, 0, 0],
                  "edge_v": [0, 0, 1], "emission": [0.9, 0.9, 0.85],
                  "ambient": [0.1, 0.1, 0.1]},
        "materials": [{
            "id": "canvas", "ks": 0.0, "eta": 1.0,
            "base_color": [0.8, 0.8, 0.8], "shininess": 32,
            "shadow_texture": "canvas_shadow.png",
            "diffuse_texture": "canvas_diffuse.png",
        }],
        "meshes": [{"obj_path": "canvas.obj", "material": "canvas"}],
        "passes": {"output_dir": "out", "bitdepth": 8},
    }
    path = os.path.join(out, "registration.json")
    _write_config(path, config)
    return path


def _gen_mirrorbox(out: str) -> str:
    size = 256
    verts, faces = _icosphere((0.0, 0.9, -2.0), 0.35, 2)
    _write_obj(os.path.join(out, "sphere.obj"), verts, faces)
    _quad_y(os.path.join(out, "mirror.obj"), 0.0, -8.0, 8.0, -8.0, 8.0)
    save_png(_flat_field(size, (0.85, 0.08, 0.08)),
             os.path.join(out, "sphere_diffuse.png"), 8)
    save_png(_flat_field(size, (0.35, 0.03, 0.03)),
             os.path.join(out, "sphere_shadow.png"), 8)
    save_png(_flat_field(size, (0.25, 0.25, 0.28)),
             os.path.join(out, "mirror_diffuse.png"), 8)
    save_png(_flat_field(size, (0.10, 0.10, 0.12)),
             os.path.join(out, "mirror_shadow.png"), 8)
    config = {
        "render": {"width": size, "height": size, "frames": 1, "fps": 24},
        "camera": {"position": [0, 1.1, 2.5], "look_at": [0, 0.1, -2.0],
                   "up": [0, 1, 0], "vfov_deg": 40.0},
        "light": {"corner": [-0.6, 4.0, -2.6], "edge_u": [1.2, 0, 0],
                  "edge_v": [0, 0, 1.2], "emission": [0.9, 0.9, 0.85],
                  "ambient": [0.1, 0.1, 0.12]},
        "materials": [
            {"id": "sphere", "ks": 0.0, "eta": 1.0,
             "base_color": [0.8, 0.3, 0.3], "shininess": 48,
             "shadow_texture": "sphere_shadow.png",
             "diffuse_texture": "sphere_diffuse.png"},
            {"id": "mirror", "ks": 1.0, "eta": 1.5,
             "base_color": [0.4, 0.4, 0.45], "shininess": 96,
             "shadow_texture": "mirror_shadow.png",
             "diffuse_texture": "mirror_diffuse.png"},
        ],
        "meshes": [
            {"obj_path": "sphere.obj", "material": "sphere"},
            {"obj_path": "mirror.obj", "material": "mirror"},
        ],
        "passes": {"output_dir": "out", "bitdepth": 8},
    }
    path = os.path.join(out, "mirrorbox.json")
    _write_config(path, config)
    return path


def _gen_pond(out: str) -> str:
    size = 256
    _quad_y(os.path.join(out, "water.obj"), 0.0, -6.0, 6.0, -6.0, 6.0)
    pads = [(-1.4, -1.8, 0.9), (0.6, -0.8, 0.7), (-0.3, -2.9, 1.1),
            (1.6, -2.3, 0.8), (-2.2, -0.4, 0.6)]
    pad_verts, pad_faces = [], []
    for px, pz, s in pads:
        base = len(pad_verts)
        pad_verts += [(px - s / 2, 0.02, pz - s / 2), (px - s / 2, 0.02, pz + s / 2),
                      (px + s / 2, 0.02, pz + s / 2), (px + s / 2, 0.02, pz - s / 2)]
        pad_faces.append((base, base + 1, base + 2, base + 3))
    _write_obj(os.path.join(out, "pads.obj"), pad_verts, pad_faces)
    verts, faces = _icosphere((0.8, 0.42, -1.1), 0.3, 0)
    _write_obj(os.path.join(out, "bud.obj"), verts, faces)

    save_png(_flat_field(size, (0.35, 0.50, 0.62)), os.path.join(out, "water_diffuse.png"), 8)
    save_png(_flat_field(size, (0.05, 0.10, 0.16)), os.path.join(out, "water_shadow.png"), 8)
    save_png(_flat_field(size, (0.30, 0.60, 0.25)), os.path.join(out, "pad_diffuse.png"), 8)
    save_png(_flat_field(size, (0.07, 0.16, 0.07)), os.path.join(out, "pad_shadow.png"), 8)
    save_png(_flat_field(size, (0.85, 0.55, 0.70)), os.path.join(out, "bud_diffuse.png"), 8)
    save_png(_flat_field(size, (0.30, 0.14, 0.22)), os.path.join(out, "bud_shadow.png"), 8)

    config = {
        "render": {"width": size, "height": size, "frames": 8, "fps": 12},
        "camera": {"position": [0, 2.2, 4.0], "look_at": [0, 0, -1.0],
                   "up": [0, 1, 0], "vfov_deg": 50.0},
        "light": {"corner": [-2.1, 4.0, -2.6], "edge_u": [1.2, 0, 0],
                  "edge_v": [0, 0, 1.2], "emission": [0.85, 0.80, 0.65],
                  "ambient": [0.12, 0.12, 0.15],
                  "track": {"translate": [[0, [0, 0, 0]], [7, [2.8, 0, 0]]]}},
        "materials": [
            {"id": "water", "ks": 0.6, "eta": 1.33,
             "base_color": [0.20, 0.35, 0.50], "shininess": 96,
             "shadow_texture": "water_shadow.png",
             "diffuse_texture": "water_diffuse.png"},
            {"id": "pad", "ks": 0.0, "eta": 1.0,
             "base_color": [0.30, 0.55, 0.25], "shininess": 16,
             "shadow_texture": "pad_shadow.png",
             "diffuse_texture": "pad_diffuse.png"},
            {"id": "bud", "ks": 0.0, "eta": 1.0,
             "base_color": [0.80, 0.45, 0.60], "shininess": 32,
             "shadow_texture": "bud_shadow.png",
             "diffuse_texture": "bud_diffuse.png"},
        ],
        "meshes": [
            {"obj_path": "water.obj", "material": "water"},
            {"obj_path": "pads.obj", "material": "pad"},
            {"obj_path": "bud.obj", "material": "bud"},
        ],
        "passes": {"output_dir": "out", "bitdepth": 8},
    }
    path = os.path.join(out, "pond.json")
    _write_config(path, config)
    return path


def gen_testscene(name: str, out: str) -> str:
    """Write the named test scene into ``out``; returns the config path."""
    if name not in SCENE_NAMES:
        raise ValueError(f"unknown test scene {name!r}; choose from {SCENE_NAMES}")
    os.makedirs(out, exist_ok=True)
    if name == "registration":
        return _gen_registration(out)
    if name == "mirrorbox":
        return _gen_mirrorbox(out)
    return _gen_pond(out)
