import numpy as np
import pytest

from baryflow.image import Image
from baryflow.manifest import frame_filename, manifest_path, read_manifest
from baryflow.render import (
    EPS_RAY,
    FrameGeometry,
    PassKind,
    Ray,
    intersect,
    light_visibility,
    reflect,
    render_sequence,
    render_texture_pass,
    render_weight_pass,
)
from baryflow.scene import AreaLight, Mesh

from conftest import (
    flat_image,
    floor_mesh,
    make_material,
    make_scene,
    quad_mesh,
)

SQ2 = np.sqrt(2.0)


class TestReflect:
    def test_45_degree_mirror(self):
        out = reflect(np.array([1, -1, 0]) / SQ2, np.array([0, 1, 0.0]))
        np.testing.assert_allclose(out, np.array([1, 1, 0]) / SQ2, atol=1e-12)

    def test_normal_incidence(self):
        out = reflect(np.array([0, -1, 0.0]), np.array([0, 1, 0.0]))
        np.testing.assert_allclose(out, [0, 1, 0], atol=1e-12)

    def test_grazing_direction_unchanged(self):
        d = np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(reflect(d, np.array([0, 1, 0.0])), d, atol=1e-12)

    def test_involution_and_length(self, rng):
        for _ in range(50):
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            r = reflect(d, n)
            assert abs(np.linalg.norm(r) - 1.0) <= 1e-9
            np.testing.assert_allclose(reflect(r, n), d, atol=1e-9)
            # tangential component is preserved
            tang_d = d - np.dot(d, n) * n
            tang_r = r - np.dot(r, n) * n
            np.testing.assert_allclose(tang_d, tang_r, atol=1e-9)

    def test_ray_requires_unit_direction(self):
        with pytest.raises(ValueError):
            Ray(np.zeros(3), np.array([0, 0, -2.0]))


def _single_quad_scene(**kwargs):
    mat = make_material("m")
    return make_scene([quad_mesh(material_id="m")], [mat], **kwargs)


class TestIntersect:
    def test_axis_aligned_hit(self):
        scene = _single_quad_scene()
        geom = FrameGeometry(scene, 0)
        hit = intersect(geom, Ray(np.zeros(3), np.array([0, 0, -1.0])))
        assert hit is not None
        assert hit.t_hit == pytest.approx(2.0, abs=1e-12)
        np.testing.assert_allclose(hit.point, [0, 0, -2.0], atol=1e-12)
        assert abs(np.linalg.norm(hit.normal) - 1.0) <= 1e-6
        assert np.dot(hit.normal, [0, 0, -1.0]) < 0

    def test_triangle_behind_ray(self):
        mat = make_material("m")
        scene = make_scene([quad_mesh(z=+2.0, material_id="m")], [mat])
        geom = FrameGeometry(scene, 0)
        assert intersect(geom, Ray(np.zeros(3), np.array([0, 0, -1.0]))) is None

    def test_shared_edge_tie_break(self):
        # The quad's two triangles share the diagonal through (0, 0, -2);
        # a ray down the axis grazes that edge and must resolve to the
        # lower triangle index.
        verts = np.array([[-1, -1, -2], [1, -1, -2], [1, 1, -2], [-1, 1, -2]], float)
        tris = np.array([[0, 1, 2], [0, 2, 3]])
        mesh = Mesh(verts, tris, material_id="m")
        scene = make_scene([mesh], [make_material("m")])
        geom = FrameGeometry(scene, 0)
        hit = intersect(geom, Ray(np.zeros(3), np.array([0, 0, -1.0])))
        assert hit is not None
        assert (hit.mesh_index, hit.triangle_index) == (0, 0)

    def test_mesh_order_tie_break(self):
        verts = np.array([[-1, -1, -2], [1, -1, -2], [0, 1, -2]], float)
        tris = np.array([[0, 1, 2]])
        first = Mesh(verts.copy(), tris.copy(), material_id="m")
        second = Mesh(verts.copy(), tris.copy(), material_id="m")
        scene = make_scene([first, second], [make_material("m")])
        geom = FrameGeometry(scene, 0)
        hit = intersect(geom, Ray(np.zeros(3), np.array([0, 0, -1.0])))
        assert hit.mesh_index == 0

    def test_min_t_threshold(self):
        scene = _single_quad_scene()
        geom = FrameGeometry(scene, 0)
        # origin sits within EPS_RAY of the quad: no self-hit
        origin = np.array([0, 0, -2.0 + EPS_RAY / 2])
        assert intersect(geom, Ray(origin, np.array([0, 0, -1.0]))) is None


class TestTexturePass:
    def test_projected_texture_round_trip(self, rng):
        size = 32
        tex = Image(rng.random((size, size, 3)))
        mat = make_material("m", diffuse=tex, shadow=flat_image(size, size, (0, 0, 0)),
                            size=size)
        scene = make_scene([quad_mesh(half=2.002, material_id="m")], [mat],
                           width=size, height=size)
        out = render_texture_pass(scene, PassKind.DIFFUSE_TEXTURE, 0)
        assert np.abs(out.data - tex.data).max() < 1e-9

    def test_light_invariance(self):
        mat = make_material("m")
        moved_light = AreaLight(corner=np.array([5.0, 9.0, 2.0]),
                                edge_u=np.array([0.0, 1.0, 0.0]),
                                edge_v=np.array([0.0, 0.0, 1.0]),
                                emission=np.array([9.0, 0.5, 3.0]),
                                ambient=np.array([0.9, 0.9, 0.9]))
        base = make_scene([quad_mesh(material_id="m")], [mat], width=16, height=16)
        moved = make_scene([quad_mesh(material_id="m")], [mat], width=16, height=16,
                           light=moved_light)
        for kind in (PassKind.SHADOW_TEXTURE, PassKind.DIFFUSE_TEXTURE):
            a = render_texture_pass(base, kind, 0)
            b = render_texture_pass(moved, kind, 0)
            assert np.array_equal(a.data, b.data)

    def test_mirror_blend_is_convex(self):
        # fronto-parallel half-mirror over black background: the center
        # pixel reflects straight back to a miss, so its color is
        # (1 - ks) * texture + ks * background.
        size = 8
        mat = make_material("m", ks=0.5, diffuse=flat_image(size, size, (0.8, 0.4, 0.2)),
                            shadow=flat_image(size, size, (0.1, 0.1, 0.1)), size=size)
        scene = make_scene([quad_mesh(material_id="m")], [mat],
                           width=size, height=size, background=(0, 0, 0))
        out = render_texture_pass(scene, PassKind.DIFFUSE_TEXTURE, 0)
        center = out.data[size // 2, size // 2]
        np.testing.assert_allclose(center, 0.5 * np.array([0.8, 0.4, 0.2]), atol=1e-12)

    def test_fresnel_scales_reflectance(self):
        size = 8
        mat = make_material("m", ks=1.0, eta=1.5,
                            diffuse=flat_image(size, size, (0.5, 0.5, 0.5)), size=size)
        scene = make_scene([quad_mesh(material_id="m")], [mat],
                           width=size, height=size, background=(0, 0, 0))
        scene.fresnel = True
        out = render_texture_pass(scene, PassKind.DIFFUSE_TEXTURE, 0)
        # normal incidence: Schlick gives R0 = ((1-1.5)/(1+1.5))^2 = 0.04
        r0 = 0.04
        np.testing.assert_allclose(out.data[size // 2, size // 2],
                                   (1 - r0) * 0.5, atol=1e-9)

    def test_weight_kind_rejected(self):
        scene = _single_quad_scene()
        with pytest.raises(ValueError):
            render_texture_pass(scene, PassKind.WEIGHT, 0)

    def test_invalid_frame(self):
        scene = _single_quad_scene()
        with pytest.raises(ValueError):
            render_texture_pass(scene, PassKind.DIFFUSE_TEXTURE, 5)


def _floor_scene(width=16, height=16, light=None, extra_meshes=(), extra_mats=(),
                 base_color=(1.0, 1.0, 1.0), **kwargs):
    from baryflow.scene import Camera
    mat = make_material("floor", base_color=base_color, size=width)
    meshes = [floor_mesh(material_id="floor")] + list(extra_meshes)
    camera = Camera(position=np.array([0.0, 3.0, 6.0]),
                    look_at=np.array([0.0, 0.0, 0.0]),
                    up=np.array([0.0, 1.0, 0.0]), vfov=60.0, aspect=width / height)
    return make_scene(meshes, [mat] + list(extra_mats), width=width, height=height,
                      camera=camera, light=light, **kwargs)


class TestWeightPass:
    def test_cosine_falloff_ordering(self):
        # light directly above the floor center: pixels under the light see
        # a higher cosine than grazing pixels near the horizon
        light = AreaLight(corner=np.array([-0.25, 4.0, -0.25]),
                          edge_u=np.array([0.5, 0.0, 0.0]),
                          edge_v=np.array([0.0, 0.0, 0.5]),
                          emission=np.array([0.8, 0.8, 0.8]),
                          ambient=np.array([0.0, 0.0, 0.0]))
        scene = _floor_scene(light=light)
        out = render_weight_pass(scene, 0, light_samples=4, seed=1)
        column = out.data[:, 8, 0]
        lit_rows = np.nonzero(column > 0)[0]
        # within the floor region, brightness increases toward the point
        # under the light (image rows nearer the camera)
        under_light = column[lit_rows[-1]]
        grazing = column[lit_rows[0]]
        assert under_light > grazing

    def test_fully_occluded_equals_ambient(self):
        # small light above a wide plate: the floor around the origin sits
        # in the umbra but is still visible to the camera past the plate's
        # near edge (camera rays cross y = 2 at z = 4, outside the plate)
        light = AreaLight(corner=np.array([-0.25, 4.0, -0.25]),
                          edge_u=np.array([0.5, 0.0, 0.0]),
                          edge_v=np.array([0.0, 0.0, 0.5]),
                          emission=np.array([1.0, 1.0, 1.0]),
                          ambient=np.array([0.07, 0.11, 0.13]))
        plate = quad_mesh(material_id="plate")
        plate.vertices = np.array([[-3.0, 2.0, -3.0], [-3.0, 2.0, 3.0],
                                   [3.0, 2.0, 3.0], [3.0, 2.0, -3.0]], float)
        scene = _floor_scene(light=light, extra_meshes=[plate],
                             extra_mats=[make_material("plate", size=16)])
        out = render_weight_pass(scene, 0, light_samples=16, seed=7)
        expected = np.array([0.07, 0.11, 0.13])  # base_color is white
        umbra = (np.abs(out.data - expected) < 1e-12).all(axis=2)
        assert umbra.sum() > 5

    def test_emission_monotonicity(self):
        def light_with(emission):
            return AreaLight(corner=np.array([-0.5, 4.0, -0.5]),
                             edge_u=np.array([1.0, 0.0, 0.0]),
                             edge_v=np.array([0.0, 0.0, 1.0]),
                             emission=np.asarray(emission, float),
                             ambient=np.array([0.02, 0.02, 0.02]))
        dim = _floor_scene(light=light_with([0.2, 0.2, 0.2]))
        bright = _floor_scene(light=light_with([0.4, 0.4, 0.4]))
        a = render_weight_pass(dim, 0, light_samples=9, seed=3)
        b = render_weight_pass(bright, 0, light_samples=9, seed=3)
        assert (b.data >= a.data - 1e-12).all()

    def test_determinism_same_seed(self):
        scene = _floor_scene()
        a = render_weight_pass(scene, 0, light_samples=16, seed=11)
        b = render_weight_pass(scene, 0, light_samples=16, seed=11)
        assert np.array_equal(a.data, b.data)

    def test_seed_changes_output(self):
        light = AreaLight(corner=np.array([-2.0, 3.0, -2.0]),
                          edge_u=np.array([4.0, 0.0, 0.0]),
                          edge_v=np.array([0.0, 0.0, 4.0]),
                          emission=np.array([0.9, 0.9, 0.9]),
                          ambient=np.array([0.05, 0.05, 0.05]))
        blocker = quad_mesh(material_id="plate")
        blocker.vertices = np.array([[-1.5, 1.5, -1.5], [-1.5, 1.5, 0.0],
                                     [0.0, 1.5, 0.0], [0.0, 1.5, -1.5]], float)
        scene = _floor_scene(light=light, extra_meshes=[blocker],
                             extra_mats=[make_material("plate", size=16)])
        a = render_weight_pass(scene, 0, light_samples=4, seed=1)
        b = render_weight_pass(scene, 0, light_samples=4, seed=2)
        assert not np.array_equal(a.data, b.data)

    def test_output_clamped(self):
        light = AreaLight(corner=np.array([-0.5, 4.0, -0.5]),
                          edge_u=np.array([1.0, 0.0, 0.0]),
                          edge_v=np.array([0.0, 0.0, 1.0]),
                          emission=np.array([50.0, 50.0, 50.0]),
                          ambient=np.array([0.5, 0.5, 0.5]))
        scene = _floor_scene(light=light)
        out = render_weight_pass(scene, 0, light_samples=4, seed=0)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


class TestLightVisibility:
    def _light(self):
        return AreaLight(corner=np.array([-0.5, 2.0, -0.5]),
                         edge_u=np.array([1.0, 0.0, 0.0]),
                         edge_v=np.array([0.0, 0.0, 1.0]),
                         emission=np.ones(3), ambient=np.zeros(3))

    def test_unoccluded_is_one(self):
        scene = _floor_scene()
        geom = FrameGeometry(scene, 0)
        points = np.array([[0.0, 0.5, 0.0], [1.0, 0.2, 1.0]])
        vis = light_visibility(geom, points, self._light(), 16, seed=5, frame=0,
                               pixel_ids=np.arange(2))
        np.testing.assert_array_equal(vis, [1.0, 1.0])

    def test_fully_blocked_is_zero(self):
        plate = quad_mesh(material_id="m")
        plate.vertices = np.array([[-40, 1.0, -40], [-40, 1.0, 40],
                                   [40, 1.0, 40], [40, 1.0, -40]], float)
        scene = make_scene([plate], [make_material("m")], width=8, height=8)
        geom = FrameGeometry(scene, 0)
        vis = light_visibility(geom, np.array([[0.0, 0.0, 0.0]]), self._light(),
                               16, seed=5, frame=0, pixel_ids=np.arange(1))
        np.testing.assert_array_equal(vis, [0.0])

    def test_half_occluded_near_half(self):
        # plate covering the x < 0 half-space between point and light; the
        # point is nudged off the stratification boundary so the estimate
        # is genuinely Monte Carlo
        plate = quad_mesh(material_id="m")
        plate.vertices = np.array([[-40, 1.0, -40], [-40, 1.0, 40],
                                   [0.0, 1.0, 40], [0.0, 1.0, -40]], float)
        scene = make_scene([plate], [make_material("m")], width=8, height=8)
        geom = FrameGeometry(scene, 0)
        point = np.array([[0.013, 0.0, 0.007]])
        vis = light_visibility(geom, point, self._light(), 256, seed=5, frame=0,
                               pixel_ids=np.arange(1))
        assert abs(vis[0] - 0.5) <= 0.05

    def test_range_invariant(self, rng):
        scene = _floor_scene()
        geom = FrameGeometry(scene, 0)
        points = rng.random((20, 3)) * [4, 1, 4] - [2, -0.1, 2]
        vis = light_visibility(geom, points, self._light(), 7, seed=1, frame=0,
                               pixel_ids=np.arange(20))
        assert (vis >= 0).all() and (vis <= 1).all()


class TestRenderSequence:
    def _moving_light_scene(self, frames=3):
        light = AreaLight(corner=np.array([-2.0, 3.0, -2.0]),
                          edge_u=np.array([1.0, 0.0, 0.0]),
                          edge_v=np.array([0.0, 0.0, 1.0]),
                          emission=np.array([0.9, 0.9, 0.9]),
                          ambient=np.array([0.05, 0.05, 0.05]),
                          track={"translate": [(0, np.zeros(3)),
                                               (frames - 1, np.array([3.0, 0, 0]))]})
        blocker = quad_mesh(material_id="plate")
        blocker.vertices = np.array([[-1.0, 1.0, -1.0], [-1.0, 1.0, 0.5],
                                     [0.5, 1.0, 0.5], [0.5, 1.0, -1.0]], float)
        keyframes = {"light.translate": light.track["translate"]}
        return _floor_scene(width=12, height=12, light=light,
                            extra_meshes=[blocker],
                            extra_mats=[make_material("plate", size=12)],
                            frames=frames, keyframes=keyframes)

    def test_single_frame_range(self, tmp_path):
        scene = _single_quad_scene()
        record = render_sequence(scene, PassKind.DIFFUSE_TEXTURE, (0, 0), 0,
                                 str(tmp_path))
        assert record["complete"]
        assert (tmp_path / frame_filename("t1", 0)).exists()
        assert len(list(tmp_path.glob("t1_*.png"))) == 1
        on_disk = read_manifest(manifest_path(str(tmp_path), "t1"))
        assert on_disk == record

    def test_rerun_byte_identical(self, tmp_path):
        scene = self._moving_light_scene()
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        render_sequence(scene, PassKind.WEIGHT, (0, 2), 9, str(a_dir), light_samples=9)
        render_sequence(scene, PassKind.WEIGHT, (0, 2), 9, str(b_dir), light_samples=9)
        for frame in range(3):
            name = frame_filename("w", frame)
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()

    def test_static_textures_moving_weight(self, tmp_path):
        scene = self._moving_light_scene()
        out = tmp_path / "seq"
        render_sequence(scene, PassKind.SHADOW_TEXTURE, (0, 2), 0, str(out))
        render_sequence(scene, PassKind.DIFFUSE_TEXTURE, (0, 2), 0, str(out))
        render_sequence(scene, PassKind.WEIGHT, (0, 2), 0, str(out), light_samples=9)
        t0_bytes = [(out / frame_filename("t0", f)).read_bytes() for f in range(3)]
        t1_bytes = [(out / frame_filename("t1", f)).read_bytes() for f in range(3)]
        w_bytes = [(out / frame_filename("w", f)).read_bytes() for f in range(3)]
        assert len(set(t0_bytes)) == 1
        assert len(set(t1_bytes)) == 1
        assert len(set(w_bytes)) == 3

    def test_jobs_do_not_change_bytes(self, tmp_path):
        scene = self._moving_light_scene()
        a_dir, b_dir = tmp_path / "j1", tmp_path / "j2"
        render_sequence(scene, PassKind.WEIGHT, (0, 2), 4, str(a_dir),
                        light_samples=4, jobs=1)
        render_sequence(scene, PassKind.WEIGHT, (0, 2), 4, str(b_dir),
                        light_samples=4, jobs=3)
        for frame in range(3):
            name = frame_filename("w", frame)
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()

    def test_incomplete_manifest_on_failure(self, tmp_path, monkeypatch):
        import baryflow.render as render_mod
        scene = self._moving_light_scene()
        calls = {"n": 0}
        real_save = render_mod.save_png

        def flaky_save(image, path, bitdepth):
            calls["n"] += 1
            if calls["n"] == 2:
                raise OSError("disk full")
            real_save(image, path, bitdepth)

        monkeypatch.setattr(render_mod, "save_png", flaky_save)
        with pytest.raises(OSError):
            render_sequence(scene, PassKind.SHADOW_TEXTURE, (0, 2), 0, str(tmp_path))
        record = read_manifest(manifest_path(str(tmp_path), "t0"))
        assert record["complete"] is False
        assert (tmp_path / frame_filename("t0", 0)).exists()

    def test_invalid_range(self, tmp_path):
        scene = _single_quad_scene()
        with pytest.raises(ValueError):
            render_sequence(scene, PassKind.WEIGHT, (0, 5), 0, str(tmp_path))

    def test_mirror_recursion_terminates(self):
        size = 8
        opposing = quad_mesh(z=+2.0, material_id="m")
        scene = make_scene([quad_mesh(material_id="m"), opposing],
                           [make_material("m", ks=1.0, size=size)],
                           width=size, height=size, max_depth=3)
        out = render_texture_pass(scene, PassKind.DIFFUSE_TEXTURE, 0)
        assert np.isfinite(out.data).all()
