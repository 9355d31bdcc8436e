"""Resampling of 4D light fields onto a rectified, row-aligned grid.

A :class:`SampledLF` stores sub-aperture images L[t-row, s-col, pixel-row,
pixel-col] together with the grid coordinates of the sub-apertures (mm on
the s/t plane) and the affine map from pixel indices to (u, v) ray slopes.
Luminance is float in [0, 1]; the boolean mask marks valid pixels.

``plan_aligned_grid`` decides where the sub-apertures of a rectified pair
should live: target rows are the left light field's warped rows, target
columns snap both cameras' warped columns to the left angular pitch, so that
sub-apertures of both sources end up interleaved on common horizontal lines.
``render_aligned_sais`` then back-warps every target pixel ray into its
source camera and samples the source light field by 4D multilinear
interpolation (2x2 sub-apertures x 2x2 pixels).  Pixels whose interpolation
neighborhood leaves the sampled aperture, or touches any invalid source
pixel, are masked out rather than extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import IndexOutOfRange, NoOverlap, OutOfAperture
from .rectify import RectifiedSetup, warp_rays

__all__ = [
    "SpatialMapping",
    "SampledLF",
    "AlignedGrid",
    "EpiImage",
    "plan_aligned_grid",
    "interpolate_ray",
    "render_aligned_sais",
    "extract_epi",
]

# Absolute slack (in index units / mm) allowed at hull boundaries before a
# query counts as outside; covers warp round-off without real extrapolation.
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class SpatialMapping:
    """Affine map from pixel indices to ray slopes: u = u0 + du * col,
    v = v0 + dv * row (pixel centers at integer indices)."""

    u0: float
    du: float
    v0: float
    dv: float

    def __post_init__(self):
        if self.du == 0 or self.dv == 0:
            raise ValueError("pixel pitches du, dv must be nonzero")

    def slopes(self, rows_px, cols_px):
        return self.v0 + self.dv * np.asarray(rows_px, float), self.u0 + self.du * np.asarray(cols_px, float)

    def to_json_dict(self) -> dict:
        return {"u0": self.u0, "du": self.du, "v0": self.v0, "dv": self.dv}

    @classmethod
    def from_json_dict(cls, d: dict) -> "SpatialMapping":
        return cls(float(d["u0"]), float(d["du"]), float(d["v0"]), float(d["dv"]))


def _check_regular(coords: np.ndarray, name: str):
    if coords.ndim != 1 or coords.size == 0:
        raise ValueError(f"{name} must be a non-empty 1D array")
    if coords.size >= 2:
        d = np.diff(coords)
        if np.abs(d - d.mean()).max() > 1e-9:
            raise ValueError(f"{name} is not a regular lattice (1e-9 mm)")
        if d.mean() == 0:
            raise ValueError(f"{name} has coincident entries")


@dataclass(frozen=True)
class SampledLF:
    """A sampled 4D light field.

    images: (n_t, n_s, H, W) luminance in [0, 1].
    mask:   same shape, True where the sample is valid.
    s_mm, t_mm: sub-aperture grid coordinates (regular lattices).
    mapping: pixel-to-slope affine map shared by all sub-apertures.
    """

    images: np.ndarray
    mask: np.ndarray
    s_mm: np.ndarray
    t_mm: np.ndarray
    mapping: SpatialMapping

    def __post_init__(self):
        img = np.asarray(self.images, float)
        msk = np.asarray(self.mask, bool)
        s = np.asarray(self.s_mm, float)
        t = np.asarray(self.t_mm, float)
        if img.ndim != 4:
            raise ValueError("images must be (n_t, n_s, H, W)")
        if msk.shape != img.shape:
            raise ValueError("mask shape must match images")
        _check_regular(s, "s_mm")
        _check_regular(t, "t_mm")
        if img.shape[0] != t.size or img.shape[1] != s.size:
            raise ValueError("grid coordinate counts must match image layout")
        for arr, name in ((img, "images"), (msk, "mask"), (s, "s_mm"), (t, "t_mm")):
            object.__setattr__(self, name, arr)

    @property
    def n_rows(self) -> int:
        return self.t_mm.size

    @property
    def n_cols(self) -> int:
        return self.s_mm.size

    @property
    def height(self) -> int:
        return self.images.shape[2]

    @property
    def width(self) -> int:
        return self.images.shape[3]

    @property
    def pitch_s(self) -> float:
        return float(self.s_mm[1] - self.s_mm[0]) if self.n_cols > 1 else 0.0

    @property
    def pitch_t(self) -> float:
        return float(self.t_mm[1] - self.t_mm[0]) if self.n_rows > 1 else 0.0

    def grid_centers(self) -> np.ndarray:
        """All (s, t) sub-aperture positions as an (n_t, n_s, 2) array."""
        S, T = np.meshgrid(self.s_mm, self.t_mm)
        return np.stack([S, T], axis=-1)


@dataclass(frozen=True)
class AlignedGrid:
    """Placement of the rectified output sub-apertures.

    rows_mm: target t coordinates (ascending) = the left LF's warped rows.
    cols_mm: target s coordinates (ascending), a contiguous lattice at the
    left angular pitch covering both cameras' snapped columns.
    provenance: (n_rows, n_cols) int8; bit 1 = supplied by the left source,
    bit 2 = by the right source, 0 = no source (kept to make the lattice
    contiguous, rendered as masked).
    left_cols_mm / right_cols_mm: the snapped column positions contributed
    by each source.
    """

    rows_mm: np.ndarray
    cols_mm: np.ndarray
    provenance: np.ndarray
    left_cols_mm: np.ndarray
    right_cols_mm: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows_mm, float)
        cols = np.asarray(self.cols_mm, float)
        prov = np.asarray(self.provenance, np.int8)
        if prov.shape != (rows.size, cols.size):
            raise ValueError("provenance shape must be (n_rows, n_cols)")
        _check_regular(cols, "cols_mm")
        for arr, name in ((rows, "rows_mm"), (cols, "cols_mm"), (prov, "provenance")):
            object.__setattr__(self, name, arr)

    def to_json_dict(self) -> dict:
        return {
            "rows_mm": [float(x) for x in self.rows_mm],
            "cols_mm": [float(x) for x in self.cols_mm],
            "provenance": self.provenance.tolist(),
            "left_cols_mm": [float(x) for x in self.left_cols_mm],
            "right_cols_mm": [float(x) for x in self.right_cols_mm],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AlignedGrid":
        return cls(
            rows_mm=np.array(d["rows_mm"], float),
            cols_mm=np.array(d["cols_mm"], float),
            provenance=np.array(d["provenance"], np.int8),
            left_cols_mm=np.array(d["left_cols_mm"], float),
            right_cols_mm=np.array(d["right_cols_mm"], float),
        )


@dataclass(frozen=True)
class EpiImage:
    """An epipolar-plane image: one scan line stacked over the sub-aperture
    columns of one grid row, ordered by s."""

    image: np.ndarray
    mask: np.ndarray
    s_mm: np.ndarray


def _axis_positions(values: np.ndarray, coords: np.ndarray):
    """Continuous index of each value along a regular coordinate axis, with
    validity against the axis extent."""
    c0 = float(coords[0])
    if coords.size == 1:
        idx = np.zeros_like(values)
        valid = np.abs(values - c0) <= _EDGE_TOL
        return idx, valid
    pitch = float(coords[1] - coords[0])
    idx = (values - c0) / pitch
    valid = (idx >= -_EDGE_TOL) & (idx <= coords.size - 1 + _EDGE_TOL)
    return idx, valid


def _sample_many(lf: SampledLF, rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """4D multilinear interpolation of an (n, 4) ray bundle in the LF's own
    TPP.  Returns (values, valid); invalid entries are 0.  A query is valid
    only if all four coordinates lie inside the sampled extent and none of
    the 16 samples of its interpolation neighborhood is masked out."""
    rays = np.asarray(rays, float)
    s_idx, s_ok = _axis_positions(rays[:, 0], lf.s_mm)
    t_idx, t_ok = _axis_positions(rays[:, 1], lf.t_mm)
    c_idx = (rays[:, 2] - lf.mapping.u0) / lf.mapping.du
    r_idx = (rays[:, 3] - lf.mapping.v0) / lf.mapping.dv
    W, H = lf.width, lf.height
    c_ok = (c_idx >= -_EDGE_TOL) & (c_idx <= W - 1 + _EDGE_TOL)
    r_ok = (r_idx >= -_EDGE_TOL) & (r_idx <= H - 1 + _EDGE_TOL)
    valid = s_ok & t_ok & c_ok & r_ok & np.all(np.isfinite(rays), axis=1)

    def split(idx, n):
        idx = np.clip(idx, 0.0, float(n - 1))
        lo = np.minimum(np.floor(idx).astype(np.intp), max(n - 2, 0))
        frac = idx - lo
        hi = np.minimum(lo + 1, n - 1)
        return lo, hi, frac

    t_lo, t_hi, t_f = split(t_idx, lf.n_rows)
    s_lo, s_hi, s_f = split(s_idx, lf.n_cols)
    r_lo, r_hi, r_f = split(r_idx, H)
    c_lo, c_hi, c_f = split(c_idx, W)

    values = np.zeros(rays.shape[0])
    ok = valid.copy()
    for bt, bs, br, bc in product((0, 1), repeat=4):
        ti = t_hi if bt else t_lo
        si = s_hi if bs else s_lo
        ri = r_hi if br else r_lo
        ci = c_hi if bc else c_lo
        w = (
            (t_f if bt else 1.0 - t_f)
            * (s_f if bs else 1.0 - s_f)
            * (r_f if br else 1.0 - r_f)
            * (c_f if bc else 1.0 - c_f)
        )
        values += w * lf.images[ti, si, ri, ci]
        ok &= lf.mask[ti, si, ri, ci]
    values[~ok] = 0.0
    return values, ok


def interpolate_ray(lf: SampledLF, ray) -> float:
    """Luminance of one ray by 4D multilinear interpolation.

    A ray exactly on a stored sample reproduces that sample's value.
    Raises OutOfAperture when the ray leaves the sampled extent or its
    neighborhood touches a masked-out pixel.
    """
    from .geometry import Ray4D

    r = ray.as_array() if isinstance(ray, Ray4D) else np.asarray(ray, float)
    values, ok = _sample_many(lf, r.reshape(1, 4))
    if not ok[0]:
        raise OutOfAperture("ray outside the sampled light field")
    return float(values[0])


def _warped_centers(lf: SampledLF, R, T):
    """Warp every sub-aperture's central ray (s, t, 0, 0); returns
    (s', t', valid) arrays of shape (n_t, n_s)."""
    S, Tg = np.meshgrid(lf.s_mm, lf.t_mm)
    rays = np.column_stack(
        [S.ravel(), Tg.ravel(), np.zeros(S.size), np.zeros(S.size)]
    )
    warped, valid = warp_rays(rays, R, T)
    shape = S.shape
    return (
        warped[:, 0].reshape(shape),
        warped[:, 1].reshape(shape),
        valid.reshape(shape),
    )


def _row_representative(values: np.ndarray, valid: np.ndarray, center: int):
    """Representative coordinate of one grid row/column: the central entry
    when valid, otherwise the mean of the valid entries (NaN if none)."""
    if valid[center]:
        return float(values[center])
    if valid.any():
        return float(values[valid].mean())
    return float("nan")


def plan_aligned_grid(
    left: SampledLF, right: SampledLF, setup: RectifiedSetup
) -> AlignedGrid:
    """Choose the rectified output grid.

    Target rows are the warped rows of the left light field (each row
    represented by its central sub-aperture).  Both cameras' warped columns
    snap to a contiguous lattice at the left angular pitch anchored at the
    warped left centre; the provenance map records which source feeds each
    target sub-aperture.  Raises NoOverlap when no target row would receive
    sub-apertures from both sources.
    """
    sl, tl, vl = _warped_centers(left, setup.R_l, setup.T_l)
    sr, tr, vr = _warped_centers(right, setup.R_r, setup.T_r)
    diagnostics = {
        "left_t_range": [float(np.nanmin(np.where(vl, tl, np.nan)))
                         if vl.any() else float("nan"),
                         float(np.nanmax(np.where(vl, tl, np.nan)))
                         if vl.any() else float("nan")],
        "right_t_range": [float(np.nanmin(np.where(vr, tr, np.nan)))
                          if vr.any() else float("nan"),
                          float(np.nanmax(np.where(vr, tr, np.nan)))
                          if vr.any() else float("nan")],
        "left_mappable": int(vl.sum()),
        "right_mappable": int(vr.sum()),
    }
    if not vl.any() or not vr.any():
        raise NoOverlap(
            "a camera has no sub-aperture mappable into the common frame",
            diagnostics=diagnostics,
        )

    ctr_row_l, ctr_col_l = left.n_rows // 2, left.n_cols // 2
    ctr_row_r, ctr_col_r = right.n_rows // 2, right.n_cols // 2
    pitch = abs(left.pitch_s) if left.n_cols > 1 else abs(left.pitch_t)
    if pitch == 0:
        pitch = 1.0  # single sub-aperture per axis; arbitrary unit lattice

    # Rows: one target row per left grid row.
    row_vals = np.array(
        [_row_representative(tl[i], vl[i], ctr_col_l) for i in range(left.n_rows)]
    )
    row_keep = np.isfinite(row_vals)

    # Column lattice anchored at the warped left centre.
    anchor = _row_representative(sl[ctr_row_l], vl[ctr_row_l], ctr_col_l)
    if not np.isfinite(anchor):
        anchor = float(sl[vl].mean())
    col_vals_l = np.array(
        [_row_representative(sl[:, j], vl[:, j], ctr_row_l) for j in range(left.n_cols)]
    )
    col_vals_r = np.array(
        [_row_representative(sr[:, j], vr[:, j], ctr_row_r) for j in range(right.n_cols)]
    )
    k_left = np.round((col_vals_l[np.isfinite(col_vals_l)] - anchor) / pitch).astype(int)
    k_right = np.round((col_vals_r[np.isfinite(col_vals_r)] - anchor) / pitch).astype(int)
    if k_left.size == 0 or k_right.size == 0:
        raise NoOverlap("no mappable columns on one side", diagnostics=diagnostics)
    k_min = int(min(k_left.min(), k_right.min()))
    k_max = int(max(k_left.max(), k_right.max()))
    cols_mm = anchor + np.arange(k_min, k_max + 1) * pitch

    rows_sorted_idx = np.argsort(row_vals[row_keep], kind="stable")
    rows_mm = row_vals[row_keep][rows_sorted_idx]
    # Map each surviving left row to its (sorted) target row slot.
    left_row_target = np.full(left.n_rows, -1)
    left_row_target[np.flatnonzero(row_keep)[rows_sorted_idx]] = np.arange(
        rows_mm.size
    )

    provenance = np.zeros((rows_mm.size, cols_mm.size), np.int8)
    # Left sub-apertures land on their own row and snapped column.
    for i in range(left.n_rows):
        tgt = left_row_target[i]
        if tgt < 0:
            continue
        for j in range(left.n_cols):
            if not vl[i, j] or not np.isfinite(col_vals_l[j]):
                continue
            k = int(round((col_vals_l[j] - anchor) / pitch)) - k_min
            provenance[tgt, k] |= 1
    # Right sub-apertures snap to the nearest target row and column.
    row_pitch = (
        abs(float(np.diff(rows_mm).mean())) if rows_mm.size > 1 else pitch
    )
    for i in range(right.n_rows):
        rep_t = _row_representative(tr[i], vr[i], ctr_col_r)
        if not np.isfinite(rep_t):
            continue
        tgt = int(np.argmin(np.abs(rows_mm - rep_t)))
        if abs(rows_mm[tgt] - rep_t) > 0.5 * row_pitch + _EDGE_TOL:
            continue
        for j in range(right.n_cols):
            if not vr[i, j] or not np.isfinite(col_vals_r[j]):
                continue
            k = int(round((col_vals_r[j] - anchor) / pitch)) - k_min
            provenance[tgt, k] |= 2

    has_both = np.any(
        np.any(provenance & 1, axis=1) & np.any(provenance & 2, axis=1)
    )
    if not has_both:
        raise NoOverlap(
            "no target row receives sub-apertures from both cameras",
            diagnostics=diagnostics,
        )
    left_cols = np.unique(anchor + k_left * pitch)
    right_cols = np.unique(anchor + k_right * pitch)
    return AlignedGrid(
        rows_mm=rows_mm,
        cols_mm=cols_mm,
        provenance=provenance,
        left_cols_mm=left_cols,
        right_cols_mm=right_cols,
    )


def render_aligned_sais(
    left: SampledLF,
    right: SampledLF,
    setup: RectifiedSetup,
    grid: AlignedGrid,
) -> SampledLF:
    """Render the rectified pair onto the aligned grid.

    Every target sub-aperture keeps the left camera's pixel mapping and
    image size.  For each target pixel, the ray (s, t, u, v) in the common
    TPP is warped back into the supplying camera (left preferred where both
    could serve) and the source light field is sampled by 4D multilinear
    interpolation; rays leaving the source aperture are masked out.
    Sub-apertures with no source stay fully masked.
    """
    H, W = left.height, left.width
    mp = left.mapping
    rows_px, cols_px = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    v_px, u_px = mp.slopes(rows_px.ravel(), cols_px.ravel())

    inv = {
        1: (left, setup.R_l.T, -setup.R_l.T @ setup.T_l),
        2: (right, setup.R_r.T, -setup.R_r.T @ setup.T_r),
    }
    n_rows, n_cols = grid.provenance.shape
    images = np.zeros((n_rows, n_cols, H, W))
    mask = np.zeros((n_rows, n_cols, H, W), bool)
    for i in range(n_rows):
        for j in range(n_cols):
            prov = int(grid.provenance[i, j])
            if prov == 0:
                continue
            source, R_inv, T_inv = inv[1] if prov & 1 else inv[2]
            rays = np.column_stack(
                [
                    np.full(u_px.size, grid.cols_mm[j]),
                    np.full(u_px.size, grid.rows_mm[i]),
                    u_px,
                    v_px,
                ]
            )
            back, ok = warp_rays(rays, R_inv, T_inv)
            vals, good = _sample_many(source, back)
            good &= ok
            vals[~good] = 0.0
            images[i, j] = vals.reshape(H, W)
            mask[i, j] = good.reshape(H, W)
    return SampledLF(
        images=images,
        mask=mask,
        s_mm=grid.cols_mm.copy(),
        t_mm=grid.rows_mm.copy(),
        mapping=mp,
    )


def extract_epi(lf: SampledLF, row: int, line: int) -> EpiImage:
    """Stack one pixel scan line across all sub-apertures of one grid row,
    ordered by s.  ``row`` indexes the sub-aperture rows, ``line`` the pixel
    scan lines.  Raises IndexOutOfRange for indices outside the grid."""
    if not 0 <= row < lf.n_rows:
        raise IndexOutOfRange(f"grid row {row} outside 0..{lf.n_rows - 1}")
    if not 0 <= line < lf.height:
        raise IndexOutOfRange(f"scan line {line} outside 0..{lf.height - 1}")
    order = np.argsort(lf.s_mm, kind="stable")
    return EpiImage(
        image=lf.images[row, order, line, :].copy(),
        mask=lf.mask[row, order, line, :].copy(),
        s_mm=lf.s_mm[order].copy(),
    )
