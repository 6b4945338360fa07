"""Barycentric compositing of texture passes weighted by the weight pass.

The final frame is the per-pixel, per-channel convex combination

    c = t1 * w + t0 * (1 - w)

so a white weight selects the fully lit texture and a black weight the
shadow texture. The classical baseline drops the shadow term (t0 = 0).
The weight sequence may be manipulated (hue, saturation, blur, dither)
before compositing; the textures never are.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import manifest as mf
from .errors import InputIOError, ShapeError, ValidationError
from .filters import DitherSpec, dither, gaussian_blur, hue_shift, saturate
from .image import Image, load_png, save_png

__all__ = [
    "ManipulatorChain",
    "CompositeJob",
    "composite_frame",
    "classical_composite",
    "apply_chain",
    "composite_sequence",
]

FORMULAS = ("barycentric", "classical")


@dataclass(frozen=True)
class ManipulatorChain:
    """Ordered weight-image transforms, applied left to right."""

    steps: tuple = ()

    @classmethod
    def build(cls, hue: float | None = None, saturation: float | None = None,
              blur_sigma: float | None = None,
              dither_spec: DitherSpec | None = None) -> "ManipulatorChain":
        steps = []
        if hue is not None:
            steps.append(("hue_shift", float(hue)))
        if saturation is not None:
            steps.append(("saturate", float(saturation)))
        if blur_sigma is not None:
            steps.append(("gaussian_blur", float(blur_sigma)))
        if dither_spec is not None:
            steps.append(("dither", dither_spec))
        return cls(tuple(steps))

    def describe(self) -> list:
        """JSON-ready description for manifests."""
        out = []
        for name, arg in self.steps:
            if name == "dither":
                out.append([name, {"levels": arg.levels, "method": arg.method}])
            else:
                out.append([name, arg])
        return out


def apply_chain(chain: ManipulatorChain, w: Image) -> Image:
    """Run every chain step over the weight image; an empty chain is identity."""
    for name, arg in chain.steps:
        if name == "hue_shift":
            w = hue_shift(w, arg)
        elif name == "saturate":
            w = saturate(w, arg)
        elif name == "gaussian_blur":
            w = gaussian_blur(w, arg)
        elif name == "dither":
            w = dither(w, arg)
        else:
            raise ValueError(f"unknown chain step {name!r}")
    return w


def _check_shapes(named_images: list[tuple[str, Image]]):
    ref_name, ref = named_images[0]
    for name, img in named_images[1:]:
        if (img.height, img.width) != (ref.height, ref.width):
            raise ShapeError(
                f"{name} is {img.width}x{img.height}, expected "
                f"{ref.width}x{ref.height} to match {ref_name}")


def composite_frame(t0: Image, t1: Image, w: Image) -> Image:
    """Blend t1 toward t0 using w as a per-pixel barycentric weight.

    Inputs are clamped to [0, 1] on entry, making the output an exact
    convex combination. The w = 0, w = 1, and t0 = t1 cases reproduce the
    corresponding input bit-for-bit.
    """
    _check_shapes([("t0", t0), ("t1", t1), ("w", w)])
    a = np.clip(t0.data, 0.0, 1.0)
    b = np.clip(t1.data, 0.0, 1.0)
    k = np.clip(w.data, 0.0, 1.0)
    c = a * (1.0 - k) + b * k
    # Rounding may overshoot the endpoints by an ulp; convexity is a contract.
    c = np.clip(c, np.minimum(a, b), np.maximum(a, b))
    c = np.where(k == 0.0, a, c)
    c = np.where(k == 1.0, b, c)
    c = np.where(a == b, a, c)
    return Image(c)


def classical_composite(t1: Image, w: Image) -> Image:
    """The pre-barycentric baseline: c = t1 * w (i.e. t0 forced to black)."""
    _check_shapes([("t1", t1), ("w", w)])
    b = np.clip(t1.data, 0.0, 1.0)
    k = np.clip(w.data, 0.0, 1.0)
    return Image(b * k)


@dataclass
class CompositeJob:
    t0_manifest: str
    t1_manifest: str
    w_manifest: str
    chain: ManipulatorChain = field(default_factory=ManipulatorChain)
    formula: str = "barycentric"
    output_dir: str = "."
    bitdepth: int = 8

    def __post_init__(self):
        if self.formula not in FORMULAS:
            raise ValueError(f"formula must be one of {FORMULAS}, got {self.formula!r}")
        if self.bitdepth not in (8, 16):
            raise ValueError(f"bitdepth must be 8 or 16, got {self.bitdepth}")


def _load_frame(manifest_file: str, record: dict, frame: int) -> Image:
    directory = os.path.dirname(manifest_file) or "."
    path = os.path.join(directory, mf.frame_filename(record["pass"], frame))
    if not os.path.isfile(path):
        raise InputIOError(f"missing frame file for frame {frame}: {path}")
    return load_png(path)


def composite_sequence(job: CompositeJob) -> dict:
    """Composite every frame of the three input sequences and write a manifest."""
    records = {}
    for name, path in (("t0", job.t0_manifest), ("t1", job.t1_manifest),
                       ("w", job.w_manifest)):
        rec = mf.read_manifest(path)
        if rec["pass"] != name:
            raise ValidationError(f"{path}: expected a {name} manifest, found {rec['pass']!r}")
        if not rec["complete"]:
            raise ValidationError(f"{path}: manifest is marked incomplete")
        records[name] = rec
    ranges = {name: tuple(rec["frames"]) for name, rec in records.items()}
    if len(set(ranges.values())) != 1:
        raise ValidationError(f"input frame ranges differ: {ranges}")
    first, last = ranges["t0"]

    os.makedirs(job.output_dir, exist_ok=True)
    record = {
        "pass": "c",
        "frames": [first, last],
        "seed": 0,
        "config_sha256": mf.composite_config_hash(
            job.formula, job.chain.describe(),
            [records[n]["config_sha256"] for n in ("t0", "t1", "w")]),
        "complete": False,
        "formula": job.formula,
        "chain": job.chain.describe(),
        "inputs": {n: records[n]["config_sha256"] for n in ("t0", "t1", "w")},
    }
    mf.write_manifest(job.output_dir, record)
    for frame in range(first, last + 1):
        t0 = _load_frame(job.t0_manifest, records["t0"], frame)
        t1 = _load_frame(job.t1_manifest, records["t1"], frame)
        w = apply_chain(job.chain, _load_frame(job.w_manifest, records["w"], frame))
        if job.formula == "classical":
            out = classical_composite(t1, w)
        else:
            out = composite_frame(t0, t1, w)
        save_png(out, os.path.join(job.output_dir, mf.frame_filename("c", frame)),
                 job.bitdepth)
    record["complete"] = True
    mf.write_manifest(job.output_dir, record)
    return record
