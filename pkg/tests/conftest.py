import numpy as np
import pytest

from baryflow.image import Image
from baryflow.scene import (
    AreaLight,
    Camera,
    Material,
    Mesh,
    Scene,
    Timeline,
    _bake_uvs,
)


def flat_image(width, height, color):
    return Image(np.broadcast_to(np.asarray(color, float), (height, width, 3)).copy())


def rand_image(rng, width, height):
    return Image(rng.random((height, width, 3)))


def make_material(mat_id="m", ks=0.0, eta=1.0, base_color=(0.8, 0.8, 0.8),
                  shininess=32.0, shadow=None, diffuse=None, size=8):
    shadow = shadow if shadow is not None else flat_image(size, size, (0.1, 0.1, 0.1))
    diffuse = diffuse if diffuse is not None else flat_image(size, size, (0.7, 0.7, 0.7))
    return Material(mat_id, ks, eta, np.asarray(base_color, float), shininess,
                    shadow, diffuse)


def make_scene(meshes, materials, width=8, height=8, camera=None, light=None,
               frames=1, keyframes=None, background=(0.0, 0.0, 0.0), max_depth=3):
    """Assemble a Scene directly (no JSON), then bake rest-pose UVs."""
    camera = camera or Camera(position=np.array([0.0, 0.0, 0.0]),
                              look_at=np.array([0.0, 0.0, -1.0]),
                              up=np.array([0.0, 1.0, 0.0]),
                              vfov=90.0, aspect=width / height)
    light = light or AreaLight(corner=np.array([-0.5, 2.0, -1.5]),
                               edge_u=np.array([1.0, 0.0, 0.0]),
                               edge_v=np.array([0.0, 0.0, 1.0]),
                               emission=np.array([1.0, 1.0, 1.0]),
                               ambient=np.array([0.1, 0.1, 0.1]))
    timeline = Timeline(frame_count=frames, fps=24.0, keyframes=keyframes or {})
    scene = Scene(
        meshes=meshes,
        materials={m.id: m for m in materials},
        material_order=[m.id for m in materials],
        camera=camera,
        light=light,
        timeline=timeline,
        width=width,
        height=height,
        background=np.asarray(background, float),
        max_depth=max_depth,
        fresnel=False,
        output_dir="out",
        bitdepth=8,
        config={},
    )
    _bake_uvs(scene)
    return scene


def quad_mesh(half=2.0, z=-2.0, material_id="m", y_offset=0.0):
    """Fronto-parallel square centered on the optical axis."""
    verts = np.array([
        [-half, -half + y_offset, z],
        [half, -half + y_offset, z],
        [half, half + y_offset, z],
        [-half, half + y_offset, z],
    ])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh(verts, tris, material_id=material_id)


def floor_mesh(y=0.0, half=10.0, material_id="m"):
    verts = np.array([
        [-half, y, -half], [-half, y, half], [half, y, half], [half, y, -half],
    ])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh(verts, tris, material_id=material_id)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
