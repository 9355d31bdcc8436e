"""File formats.

Everything here is deliberately plain: JSON for camera models, poses and
rectification setups; CSV for correspondences and per-trial benchmark
results; binary Netpbm (16-bit P5 PGM, P4 PBM) for sub-aperture images and
their validity masks.  All writers format floats with ``repr`` (shortest
round-trip form) and use LF line endings, so identical inputs produce
byte-identical files on every platform.

Mask polarity: in PBM files a 1 bit is black.  Black marks INVALID pixels;
white (0) marks pixels that carry data.

A rendered or resampled light field is stored as a directory::

    sai_r{row}_c{col}.pgm    sub-aperture image, 16-bit grayscale
    sai_r{row}_c{col}.pbm    validity mask (black = invalid)
    grid.json                sub-aperture coordinates, pixel->slope mapping,
                             and (for rectified output) the aligned-grid
                             provenance
"""

from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import LFIntrinsics, RelativePose, euler_xyz_intrinsic
from .pose import CorrespondenceSet
from .rectify import RectifiedSetup
from .resample import AlignedGrid, SampledLF, SpatialMapping
from .simulate import (
    BoardPose,
    BoardSpec,
    SimConfig,
    TrialReport,
    default_intrinsics_pair,
)

__all__ = [
    "load_json",
    "save_json",
    "load_intrinsics",
    "save_intrinsics",
    "load_pose",
    "save_pose",
    "load_setup",
    "save_setup",
    "CORRESPONDENCE_HEADER",
    "write_correspondence_csv",
    "read_correspondence_csv",
    "TRIAL_HEADER",
    "write_trial_report_csv",
    "write_pgm16",
    "read_pgm16",
    "write_pbm",
    "read_pbm",
    "save_sampled_lf",
    "load_sampled_lf",
    "parse_pose_dict",
    "parse_sim_config",
    "load_sim_config",
]


def _fmt(x) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def load_json(path) -> dict:
    """Read a JSON file, turning syntax errors into ConfigError with the
    offending line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    return data


def save_json(path, data: dict):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def load_intrinsics(path) -> LFIntrinsics:
    try:
        return LFIntrinsics.from_json_dict(load_json(path))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from e


def save_intrinsics(path, k: LFIntrinsics):
    save_json(path, k.to_json_dict())


def load_pose(path) -> RelativePose:
    try:
        return RelativePose.from_json_dict(load_json(path))
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"{path}: {e}") from e


def save_pose(path, pose: RelativePose):
    save_json(path, pose.to_json_dict())


def load_setup(path) -> RectifiedSetup:
    try:
        return RectifiedSetup.from_json_dict(load_json(path))
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"{path}: {e}") from e


def save_setup(path, setup: RectifiedSetup):
    save_json(path, setup.to_json_dict())


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

CORRESPONDENCE_HEADER = ["u_c", "v_c", "lambda", "u_c_prime", "v_c_prime", "lambda_prime"]
TRIAL_HEADER = ["trial", "err_R_deg", "err_T_deg", "converged", "iterations"]


def write_correspondence_csv(path, corr: CorrespondenceSet):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CORRESPONDENCE_HEADER)
    for a, b in zip(corr.first, corr.second):
        w.writerow([_fmt(a[0]), _fmt(a[1]), _fmt(a[2]), _fmt(b[0]), _fmt(b[1]), _fmt(b[2])])
    Path(path).write_text(buf.getvalue())


def read_correspondence_csv(path, k1: LFIntrinsics, k2: LFIntrinsics) -> CorrespondenceSet:
    """Read LF-point pairs; the intrinsics give the set its camera models."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != CORRESPONDENCE_HEADER:
        raise ConfigError(
            f"{path}: first line must be '{','.join(CORRESPONDENCE_HEADER)}'"
        )
    first, second = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 6:
            raise ConfigError(f"{path}:{lineno}: expected 6 columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
        first.append(vals[:3])
        second.append(vals[3:])
    try:
        return CorrespondenceSet(
            first=np.array(first, float), second=np.array(second, float), k1=k1, k2=k2
        )
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def write_trial_report_csv(path, report: TrialReport):
    """Per-trial rows followed by a ``mean`` summary row.

    The summary row carries the mean angular errors over the finite trials,
    the count of converged trials and the mean iteration count.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_HEADER)
    for t in range(report.n_trials):
        w.writerow(
            [
                str(t),
                _fmt(report.err_R_deg[t]),
                _fmt(report.err_T_deg[t]),
                "1" if report.converged[t] else "0",
                str(int(report.iterations[t])),
            ]
        )
    w.writerow(
        [
            "mean",
            _fmt(report.mean_err_R),
            _fmt(report.mean_err_T),
            str(int(np.count_nonzero(report.converged))),
            _fmt(float(np.mean(report.iterations))),
        ]
    )
    Path(path).write_text(buf.getvalue())


# --------------------------------------------------------------------------
# Netpbm images
# --------------------------------------------------------------------------


def write_pgm16(path, image: np.ndarray):
    """16-bit binary PGM (big-endian sample order) of a [0, 1] image."""
    img = np.asarray(image, float)
    if img.ndim != 2:
        raise ValueError("image must be 2D")
    data = np.round(np.clip(img, 0.0, 1.0) * 65535.0).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(data.tobytes())


def _read_pnm_tokens(raw: bytes, count: int):
    """First ``count`` whitespace-separated tokens after the magic,
    honouring '#' comments; returns (tokens, offset past final whitespace)."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(raw):
            raise ValueError("truncated Netpbm header")
        c = raw[i:i + 1]
        if c == b"#":
            while i < len(raw) and raw[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j:j + 1].isspace() and raw[j:j + 1] != b"#":
                j += 1
            tokens.append(raw[i:j])
            i = j
    return tokens, i + 1  # single whitespace byte terminates the header


def read_pgm16(path) -> np.ndarray:
    """Read a binary PGM into a float image scaled to [0, 1]."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    tokens, offset = _read_pnm_tokens(raw[2:], 3)
    w, h, maxval = (int(t) for t in tokens)
    if not (0 < maxval < 65536):
        raise ValueError(f"{path}: bad maxval {maxval}")
    dtype = ">u2" if maxval > 255 else np.uint8
    data = np.frombuffer(raw, dtype=dtype, count=w * h, offset=2 + offset)
    return data.reshape(h, w).astype(float) / maxval


def write_pbm(path, valid_mask: np.ndarray):
    """Binary PBM of a validity mask: black bits (1) mark invalid pixels."""
    valid = np.asarray(valid_mask, bool)
    if valid.ndim != 2:
        raise ValueError("mask must be 2D")
    h, w = valid.shape
    bits = np.packbits((~valid).astype(np.uint8), axis=1)
    with open(path, "wb") as f:
        f.write(f"P4\n{w} {h}\n".encode("ascii"))
        f.write(bits.tobytes())


def read_pbm(path) -> np.ndarray:
    """Read a binary PBM back into a validity mask (True = valid)."""
    raw = Path(path).read_bytes()
    if raw[:2] != b"P4":
        raise ValueError(f"{path}: not a binary PBM")
    tokens, offset = _read_pnm_tokens(raw[2:], 2)
    w, h = (int(t) for t in tokens)
    row_bytes = (w + 7) // 8
    data = np.frombuffer(raw, dtype=np.uint8, count=h * row_bytes, offset=2 + offset)
    bits = np.unpackbits(data.reshape(h, row_bytes), axis=1)[:, :w]
    return bits == 0


# --------------------------------------------------------------------------
# Light-field directories
# --------------------------------------------------------------------------

_SAI_RE = re.compile(r"^sai_r(\d+)_c(\d+)\.pgm$")


def save_sampled_lf(dirpath, lf: SampledLF, grid: AlignedGrid | None = None):
    """Write a light field as one PGM + PBM per sub-aperture plus grid.json.

    ``grid`` attaches aligned-grid provenance (which side each rectified
    sub-aperture came from) when saving rectified output.
    """
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    for i in range(lf.n_rows):
        for j in range(lf.n_cols):
            write_pgm16(d / f"sai_r{i}_c{j}.pgm", lf.images[i, j])
            write_pbm(d / f"sai_r{i}_c{j}.pbm", lf.mask[i, j])
    meta = {
        "rows_mm": [float(x) for x in lf.t_mm],
        "cols_mm": [float(x) for x in lf.s_mm],
        "mapping": lf.mapping.to_json_dict(),
        "mask": "pbm-black-is-invalid",
    }
    if grid is not None:
        meta["aligned"] = grid.to_json_dict()
    save_json(d / "grid.json", meta)


def load_sampled_lf(dirpath) -> tuple[SampledLF, AlignedGrid | None]:
    d = Path(dirpath)
    meta = load_json(d / "grid.json")
    try:
        t_mm = np.array(meta["rows_mm"], float)
        s_mm = np.array(meta["cols_mm"], float)
        mapping = SpatialMapping.from_json_dict(meta["mapping"])
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"{d / 'grid.json'}: {e}") from e
    nr, nc = t_mm.size, s_mm.size
    images = None
    mask = None
    for i in range(nr):
        for j in range(nc):
            img = read_pgm16(d / f"sai_r{i}_c{j}.pgm")
            if images is None:
                images = np.empty((nr, nc) + img.shape)
                mask = np.ones((nr, nc) + img.shape, bool)
            images[i, j] = img
            pbm = d / f"sai_r{i}_c{j}.pbm"
            if pbm.exists():
                mask[i, j] = read_pbm(pbm)
    if images is None:
        raise ConfigError(f"{d}: no sub-aperture images")
    lf = SampledLF(images=images, mask=mask, s_mm=s_mm, t_mm=t_mm, mapping=mapping)
    grid = AlignedGrid.from_json_dict(meta["aligned"]) if "aligned" in meta else None
    return lf, grid


# --------------------------------------------------------------------------
# Simulation configs
# --------------------------------------------------------------------------


def parse_pose_dict(d: dict) -> RelativePose:
    """A pose either as Euler angles or as an explicit row-major matrix.

    ``{"euler_deg": [ax, ay, az], "T_mm": [x, y, z]}`` applies the
    rotations about x, then y, then z (intrinsic axes, degrees), or
    ``{"layout": "row-major", "R": [...9...], "T": [...]}`` gives the
    matrix directly.
    """
    if "euler_deg" in d:
        ang = [float(x) for x in d["euler_deg"]]
        if len(ang) != 3:
            raise ValueError("euler_deg needs exactly three angles")
        T = np.array(d.get("T_mm", d.get("T", [0.0, 0.0, 0.0])), float)
        return RelativePose(euler_xyz_intrinsic(*ang), T)
    return RelativePose.from_json_dict(d)


def parse_sim_config(data: dict, source: str = "<config>") -> SimConfig:
    """Build a SimConfig from a plain dict (see load_sim_config)."""
    try:
        dk1, dk2 = default_intrinsics_pair()
        k1 = LFIntrinsics.from_json_dict(data["intrinsics1"]) if "intrinsics1" in data else dk1
        k2 = LFIntrinsics.from_json_dict(data["intrinsics2"]) if "intrinsics2" in data else dk2
        if "pose" not in data:
            raise ValueError("missing required key 'pose'")
        pose = parse_pose_dict(data["pose"])
        board = BoardSpec(
            rows=int(data.get("board", {}).get("rows", 7)),
            cols=int(data.get("board", {}).get("cols", 11)),
            spacing_mm=float(data.get("board", {}).get("spacing_mm", 22.5)),
        )
        board_poses = []
        for bp in data.get("board_poses", []):
            ang = [float(x) for x in bp["euler_deg"]]
            board_poses.append(
                BoardPose(euler_xyz_intrinsic(*ang), np.array(bp["center_mm"], float))
            )
        return SimConfig(
            k1=k1,
            k2=k2,
            pose=pose,
            board=board,
            board_poses=tuple(board_poses),
            sai_rows=int(data.get("sai_rows", 13)),
            sai_cols=int(data.get("sai_cols", 13)),
            sigma_px=float(data.get("sigma_px", 0.0)),
            trials=int(data.get("trials", 100)),
            seed=int(data.get("seed", 0)),
        )
    except (KeyError, ValueError, TypeError) as e:
        msg = e.args[0] if e.args else e
        raise ConfigError(f"{source}: {msg}") from e


def load_sim_config(path) -> SimConfig:
    """Read a simulation config JSON.

    Recognised keys (all but ``pose`` optional): intrinsics1, intrinsics2,
    pose, board {rows, cols, spacing_mm}, board_poses
    [{euler_deg, center_mm}, ...], sai_rows, sai_cols, sigma_px, trials,
    seed.  Omitted camera models and board placements fall back to the
    benchmark defaults.
    """
    return parse_sim_config(load_json(path), source=str(path))
