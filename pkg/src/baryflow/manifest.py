"""Sequence manifests and pass-scoped config hashing.

A manifest describes one rendered or composited frame sequence:

    {"pass": "w", "frames": [0, 7], "seed": 42,
     "config_sha256": "...", "complete": true}

Composite manifests additionally record formula, chain, and input hashes.
Config hashes are scoped per pass so that edits which cannot change a
pass's pixels (e.g. moving the light never affects t0/t1) leave its hash
untouched and its cache valid.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os

from .errors import FormatError, InputIOError

__all__ = [
    "frame_filename",
    "manifest_path",
    "write_manifest",
    "read_manifest",
    "pass_config_hash",
    "composite_config_hash",
]

PASS_NAMES = ("t0", "t1", "w", "c")


def frame_filename(pass_name: str, frame: int) -> str:
    return f"{pass_name}_{frame:04d}.png"


def manifest_path(output_dir: str, pass_name: str) -> str:
    return os.path.join(output_dir, f"{pass_name}_manifest.json")


def write_manifest(output_dir: str, record: dict) -> str:
    path = manifest_path(output_dir, record["pass"])
    try:
        with open(path, "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise InputIOError(f"cannot write manifest {path}: {exc}") from exc
    return path


def read_manifest(path) -> dict:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise InputIOError(f"no such manifest: {path}")
    with open(path) as fh:
        try:
            record = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("pass", "frames", "seed", "config_sha256", "complete"):
        if key not in record:
            raise FormatError(f"{path}: manifest missing key {key!r}")
    if record["pass"] not in PASS_NAMES:
        raise FormatError(f"{path}: unknown pass {record['pass']!r}")
    frames = record["frames"]
    if (not isinstance(frames, list) or len(frames) != 2
            or not all(isinstance(f, int) for f in frames) or frames[1] < frames[0]):
        raise FormatError(f"{path}: frames must be [first, last]")
    return record


def _digest(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def pass_config_hash(config: dict, pass_name: str, samples: int | None = None) -> str:
    """Hash the parts of the scene config that can affect this pass's pixels.

    t0/t1 drop the light block and the weight-only material fields
    (base_color, shininess); w folds in the light sample count. The output
    directory never participates.
    """
    doc = copy.deepcopy(config)
    if isinstance(doc.get("passes"), dict):
        doc["passes"].pop("output_dir", None)
    if pass_name in ("t0", "t1"):
        doc.pop("light", None)
        for mat in doc.get("materials", []):
            if isinstance(mat, dict):
                mat.pop("base_color", None)
                mat.pop("shininess", None)
    payload = {"pass": pass_name, "config": doc}
    if pass_name == "w":
        payload["samples"] = samples
    return _digest(payload)


def composite_config_hash(formula: str, chain_desc: list, input_hashes: list[str]) -> str:
    return _digest({"pass": "c", "formula": formula, "chain": chain_desc,
                    "inputs": input_hashes})
