"""Sequence inspection reports: per-frame statistics as CSV plus figures.

Given one or more sequence manifests, writes ``report.csv`` (one row per
frame: channel means, extrema, and mean absolute difference to the
previous frame) alongside two rendered figures: channel means over time
and a contact sheet of frames.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import manifest as mf
from .errors import InputIOError
from .image import load_png

__all__ = ["sequence_stats", "write_report"]

_MAX_SHEET_COLS = 8


def _frames_of(manifest_file: str, record: dict):
    directory = os.path.dirname(manifest_file) or "."
    first, last = record["frames"]
    for frame in range(first, last + 1):
        path = os.path.join(directory, mf.frame_filename(record["pass"], frame))
        if not os.path.isfile(path):
            raise InputIOError(f"missing frame file: {path}")
        yield frame, load_png(path)


def sequence_stats(manifest_file: str) -> list[dict]:
    """Per-frame statistics for one sequence, in frame order."""
    record = mf.read_manifest(manifest_file)
    rows = []
    prev = None
    for frame, image in _frames_of(manifest_file, record):
        data = image.data
        row = {
            "pass": record["pass"],
            "frame": frame,
            "mean_r": float(data[..., 0].mean()),
            "mean_g": float(data[..., 1].mean()),
            "mean_b": float(data[..., 2].mean()),
            "min": float(data.min()),
            "max": float(data.max()),
            "diff_prev": float(np.abs(data - prev).mean()) if prev is not None else 0.0,
        }
        rows.append(row)
        prev = data
    return rows


def _means_figure(stats_by_pass: dict[str, list[dict]], path: str) -> None:
    fig, axes = plt.subplots(len(stats_by_pass), 1, sharex=True,
                             figsize=(7, 2.2 * len(stats_by_pass)), squeeze=False)
    for ax, (name, rows) in zip(axes[:, 0], stats_by_pass.items()):
        frames = [r["frame"] for r in rows]
        for channel, color in (("mean_r", "tab:red"), ("mean_g", "tab:green"),
                               ("mean_b", "tab:blue")):
            ax.plot(frames, [r[channel] for r in rows], color=color,
                    label=channel if name == next(iter(stats_by_pass)) else None)
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
    axes[0, 0].legend(loc="upper right", fontsize="small")
    axes[-1, 0].set_xlabel("frame")
    fig.suptitle("channel means per frame")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def _sheet_figure(manifest_files: list[str], path: str) -> None:
    rows = []
    for manifest_file in manifest_files:
        record = mf.read_manifest(manifest_file)
        frames = list(_frames_of(manifest_file, record))
        if len(frames) > _MAX_SHEET_COLS:
            idx = np.linspace(0, len(frames) - 1, _MAX_SHEET_COLS).round().astype(int)
            frames = [frames[i] for i in idx]
        rows.append((record["pass"], frames))
    ncols = max(len(frames) for _, frames in rows)
    fig, axes = plt.subplots(len(rows), ncols,
                             figsize=(1.8 * ncols, 1.9 * len(rows)), squeeze=False)
    for r, (name, frames) in enumerate(rows):
        for c in range(ncols):
            ax = axes[r, c]
            ax.set_axis_off()
            if c < len(frames):
                frame, image = frames[c]
                ax.imshow(np.clip(image.data, 0.0, 1.0))
                ax.set_title(f"{name} {frame}", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def write_report(manifest_files: list[str], out_dir: str) -> dict[str, str]:
    """Write report.csv, report_means.png, and report_sheet.png into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    stats_by_pass: dict[str, list[dict]] = {}
    for manifest_file in manifest_files:
        rows = sequence_stats(manifest_file)
        stats_by_pass[rows[0]["pass"]] = rows

    csv_path = os.path.join(out_dir, "report.csv")
    fieldnames = ["pass", "frame", "mean_r", "mean_g", "mean_b", "min", "max", "diff_prev"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for rows in stats_by_pass.values():
            writer.writerows(rows)

    means_path = os.path.join(out_dir, "report_means.png")
    _means_figure(stats_by_pass, means_path)
    sheet_path = os.path.join(out_dir, "report_sheet.png")
    _sheet_figure(manifest_files, sheet_path)
    return {"csv": csv_path, "means": means_path, "sheet": sheet_path}
