"""Command-line front end for the five-step pipeline.

Subcommands: render one pass, composite three pass sequences, run the full
pipeline with manifest-based caching, generate synthetic test scenes, and
report per-frame statistics. Exit codes are a stable contract: 0 success,
2 config/usage, 3 I/O, 4 validation.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import manifest as mf
from .composite import FORMULAS, CompositeJob, ManipulatorChain, composite_sequence
from .errors import ConfigError, InputIOError, ValidationError
from .filters import DITHER_METHODS, DitherSpec
from .render import PassKind, render_sequence
from .report import write_report
from .scene import Scene, load_scene
from .testscenes import SCENE_NAMES, gen_testscene

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def _parse_frames(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            first, last = text.split("..", 1)
            return int(first), int(last)
        frame = int(text)
        return frame, frame
    except ValueError:
        raise ValueError(f"bad frame range {text!r}; use FIRST..LAST or a single frame")


def _parse_dither(text: str) -> DitherSpec:
    levels, _, method = text.partition(":")
    try:
        levels = int(levels)
    except ValueError:
        raise ValueError(f"bad dither levels in {text!r}")
    return DitherSpec(method=method or "floyd-steinberg", levels=levels)


def _chain_from_args(args) -> ManipulatorChain:
    return ManipulatorChain.build(
        hue=args.hue,
        saturation=args.saturation,
        blur_sigma=args.blur_sigma,
        dither_spec=_parse_dither(args.dither) if args.dither else None,
    )


def _output_dir(args, scene: Scene | None = None, scene_path: str | None = None) -> str:
    if args.out:
        return args.out
    env = os.environ.get("BARYFLOW_OUT")
    if env:
        return env
    if scene is not None:
        base = os.path.dirname(scene_path) if scene_path else "."
        return os.path.join(base or ".", scene.output_dir)
    return "."


def _frame_range(args, scene: Scene) -> tuple[int, int]:
    if args.frames is None:
        return 0, scene.timeline.frame_count - 1
    first, last = _parse_frames(args.frames)
    limit = scene.timeline.frame_count - 1
    if not (0 <= first <= last <= limit):
        raise ValidationError(
            f"frame range {first}..{last} outside timeline 0..{limit}")
    return first, last


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    out = _output_dir(args, scene, args.scene)
    frames = _frame_range(args, scene)
    kind = PassKind(args.render_pass)
    record = render_sequence(scene, kind, frames, args.seed, out,
                             light_samples=args.samples, jobs=args.jobs)
    print(f"wrote {frames[1] - frames[0] + 1} {kind.value} frames to {out} "
          f"(manifest {mf.manifest_path(out, kind.value)})")
    return EXIT_OK if record["complete"] else EXIT_IO


def cmd_composite(args) -> int:
    job = CompositeJob(
        t0_manifest=args.t0_manifest,
        t1_manifest=args.t1_manifest,
        w_manifest=args.w_manifest,
        chain=_chain_from_args(args),
        formula=args.formula,
        output_dir=_output_dir(args),
        bitdepth=args.bitdepth,
    )
    record = composite_sequence(job)
    first, last = record["frames"]
    print(f"composited frames {first}..{last} into {job.output_dir} ({job.formula})")
    return EXIT_OK


def _cached_manifest(out: str, pass_name: str, expected_hash: str,
                     frames: tuple[int, int], seed: int | None) -> dict | None:
    path = mf.manifest_path(out, pass_name)
    if not os.path.isfile(path):
        return None
    try:
        record = mf.read_manifest(path)
    except Exception:
        return None
    if (not record["complete"] or record["config_sha256"] != expected_hash
            or tuple(record["frames"]) != frames):
        return None
    if seed is not None and record["seed"] != seed:
        return None
    for frame in range(frames[0], frames[1] + 1):
        if not os.path.isfile(os.path.join(out, mf.frame_filename(pass_name, frame))):
            return None
    return record


def cmd_pipeline(args) -> int:
    scene = load_scene(args.scene)
    out = _output_dir(args, scene, args.scene)
    frames = _frame_range(args, scene)
    os.makedirs(out, exist_ok=True)

    for kind in (PassKind.SHADOW_TEXTURE, PassKind.DIFFUSE_TEXTURE, PassKind.WEIGHT):
        is_weight = kind is PassKind.WEIGHT
        expected = mf.pass_config_hash(scene.config, kind.value,
                                       args.samples if is_weight else None)
        cached = _cached_manifest(out, kind.value, expected, frames,
                                  args.seed if is_weight else None)
        if cached:
            print(f"pass {kind.value}: cached ({frames[0]}..{frames[1]})")
        else:
            render_sequence(scene, kind, frames, args.seed, out,
                            light_samples=args.samples, jobs=args.jobs)
            print(f"pass {kind.value}: rendered {frames[0]}..{frames[1]}")

    chain = _chain_from_args(args)
    input_hashes = [mf.read_manifest(mf.manifest_path(out, p))["config_sha256"]
                    for p in ("t0", "t1", "w")]
    expected = mf.composite_config_hash(args.formula, chain.describe(), input_hashes)
    if _cached_manifest(out, "c", expected, frames, None):
        print(f"pass c: cached ({frames[0]}..{frames[1]})")
    else:
        job = CompositeJob(
            t0_manifest=mf.manifest_path(out, "t0"),
            t1_manifest=mf.manifest_path(out, "t1"),
            w_manifest=mf.manifest_path(out, "w"),
            chain=chain, formula=args.formula,
            output_dir=out, bitdepth=scene.bitdepth,
        )
        composite_sequence(job)
        print(f"pass c: composited {frames[0]}..{frames[1]}")
    return EXIT_OK


def cmd_gen(args) -> int:
    config = gen_testscene(args.name, args.out or os.environ.get("BARYFLOW_OUT", "."))
    print(f"wrote test scene config {config}")
    return EXIT_OK


def cmd_report(args) -> int:
    out = args.out or os.environ.get("BARYFLOW_OUT") \
        or (os.path.dirname(args.manifests[0]) or ".")
    written = write_report(args.manifests, out)
    print(f"wrote {written['csv']}, {written['means']}, {written['sheet']}")
    return EXIT_OK


def _add_chain_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hue", type=float, default=None,
                        help="rotate weight hue by DEGREES before compositing")
    parser.add_argument("--saturation", type=float, default=None,
                        help="scale weight saturation by FACTOR")
    parser.add_argument("--blur-sigma", type=float, default=None,
                        help="gaussian-blur the weight with this sigma (pixels)")
    parser.add_argument("--dither", type=str, default=None, metavar="LEVELS[:METHOD]",
                        help=f"dither the weight; methods: {', '.join(DITHER_METHODS)}")
    parser.add_argument("--formula", choices=FORMULAS, default="barycentric",
                        help="compositing formula (default: barycentric)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="baryflow",
        description="Render and composite dynamic-painting pass animations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render one pass of a scene")
    p_render.add_argument("scene", help="scene config JSON")
    p_render.add_argument("--pass", dest="render_pass", required=True,
                          choices=[k.value for k in PassKind])
    p_render.add_argument("--frames", default=None, metavar="FIRST..LAST")
    p_render.add_argument("--seed", type=int, default=0)
    p_render.add_argument("--samples", type=int, default=64,
                          help="area-light samples for the weight pass")
    p_render.add_argument("--jobs", type=int, default=1,
                          help="frame workers; never affects output bytes")
    p_render.add_argument("--out", default=None,
                          help="output dir (default: $BARYFLOW_OUT, then config)")
    p_render.set_defaults(func=cmd_render)

    p_comp = sub.add_parser("composite", help="composite three pass sequences")
    p_comp.add_argument("t0_manifest")
    p_comp.add_argument("t1_manifest")
    p_comp.add_argument("w_manifest")
    _add_chain_flags(p_comp)
    p_comp.add_argument("--bitdepth", type=int, choices=(8, 16), default=8)
    p_comp.add_argument("--out", default=None)
    p_comp.set_defaults(func=cmd_composite)

    p_pipe = sub.add_parser("pipeline", help="render all passes and composite, with caching")
    p_pipe.add_argument("scene")
    p_pipe.add_argument("--frames", default=None, metavar="FIRST..LAST")
    p_pipe.add_argument("--seed", type=int, default=0)
    p_pipe.add_argument("--samples", type=int, default=64)
    p_pipe.add_argument("--jobs", type=int, default=1)
    _add_chain_flags(p_pipe)
    p_pipe.add_argument("--out", default=None)
    p_pipe.set_defaults(func=cmd_pipeline)

    p_gen = sub.add_parser("gen", help="generate a synthetic test scene")
    p_gen.add_argument("name", choices=SCENE_NAMES)
    p_gen.add_argument("--out", default=None)
    p_gen.set_defaults(func=cmd_gen)

    p_rep = sub.add_parser("report", help="per-frame stats CSV plus figures")
    p_rep.add_argument("manifests", nargs="+", help="sequence manifest JSON files")
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputIOError, OSError) as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ValueError, KeyError) as exc:
        print(f"error (validation): {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
