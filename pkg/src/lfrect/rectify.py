"""Rectification of a light-field camera pair into one common two-plane
parameterization.

A ray (s, t, u, v) lives in the TPP of one camera: it passes through
(s, t, 0) and (s+u, t+v, 1) in that camera's frame.  Warping a ray into
another frame means rigidly moving those two anchor points and re-intersecting
the moved line with the new frame's z=0 and z=1 planes.  ``warp_ray``
implements this both ways: a closed form obtained by eliminating the
intermediate points, and the explicit geometric construction; they agree to
machine precision away from the degenerate configurations and serve as
cross-checks of each other.

The rectifying rotation builds a frame whose x-axis is the baseline, so that
after warping both light fields, corresponding sub-apertures sit on common
horizontal lines and matching scan lines are vertically aligned.

POSE DIRECTION.  All functions in this module take the transform that maps
CAMERA-2 COORDINATES INTO CAMERA-1 (X_1 = R X_2 + T): with that convention
``R_rect`` applied to both cameras puts camera 2 at baseline distance along
the common +x axis.  The estimation pipeline produces the camera-1-to-camera-2
transform; invert it (``pose.inverse()``) before building a rectified setup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CollinearConstruction,
    DegenerateSegment,
    ParallelRay,
    ZeroBaseline,
)
from .geometry import Ray4D, RelativePose

__all__ = [
    "RectifiedSetup",
    "warp_ray",
    "warp_rays",
    "rectifying_rotation",
    "build_rectified_setup",
    "warp_lf_to_common",
]

_EPS = 1e-12


@dataclass(frozen=True)
class RectifiedSetup:
    """The rigid transforms taking each camera's TPP into the common one.

    R_rect is the rectifying rotation; the left camera moves by
    (R_l, T_l) = (R_rect, 0) and the right camera by
    (R_r, T_r) = (R_rect R, R_rect T), which places the right camera at
    (baseline_mm, 0, 0) in the common frame.
    """

    R_rect: np.ndarray
    R_l: np.ndarray
    T_l: np.ndarray
    R_r: np.ndarray
    T_r: np.ndarray
    baseline_mm: float

    def __post_init__(self):
        for name in ("R_rect", "R_l", "R_r"):
            M = np.asarray(getattr(self, name), float)
            if M.shape != (3, 3) or np.abs(M @ M.T - np.eye(3)).max() > 1e-9:
                raise ValueError(f"{name} must be orthonormal")
            if np.linalg.det(M) < 0:
                raise ValueError(f"{name} must have det +1")
            object.__setattr__(self, name, M)
        T_l = np.asarray(self.T_l, float).reshape(3)
        T_r = np.asarray(self.T_r, float).reshape(3)
        if np.abs(T_l).max() > 1e-12:
            raise ValueError("T_l must be zero: the left camera anchors the frame")
        if not self.baseline_mm > 0:
            raise ValueError("baseline must be positive")
        # The right camera must sit on the common x-axis.
        if np.abs(T_r[1:]).max() > 1e-9 * max(self.baseline_mm, 1.0):
            raise ValueError("T_r must be aligned with the common x-axis")
        object.__setattr__(self, "T_l", T_l)
        object.__setattr__(self, "T_r", T_r)

    def to_json_dict(self) -> dict:
        return {
            "layout": "row-major",
            "R_rect": [float(x) for x in self.R_rect.reshape(-1)],
            "R_l": [float(x) for x in self.R_l.reshape(-1)],
            "T_l": [float(x) for x in self.T_l],
            "R_r": [float(x) for x in self.R_r.reshape(-1)],
            "T_r": [float(x) for x in self.T_r],
            "baseline_mm": float(self.baseline_mm),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RectifiedSetup":
        if d.get("layout") != "row-major":
            raise ValueError("setup JSON must declare layout 'row-major'")
        return cls(
            R_rect=np.array(d["R_rect"], float).reshape(3, 3),
            R_l=np.array(d["R_l"], float).reshape(3, 3),
            T_l=np.array(d["T_l"], float),
            R_r=np.array(d["R_r"], float).reshape(3, 3),
            T_r=np.array(d["T_r"], float),
            baseline_mm=float(d["baseline_mm"]),
        )


def _warp_ray_closed(ray: np.ndarray, R: np.ndarray, T: np.ndarray) -> np.ndarray:
    s, t, u, v = ray
    num_u = R[0, 2] + R[0, 0] * u + R[0, 1] * v
    num_v = R[1, 2] + R[1, 0] * u + R[1, 1] * v
    den = R[2, 2] + R[2, 0] * u + R[2, 1] * v
    if abs(den) <= _EPS:
        raise ParallelRay("ray is parallel to the target parameterization planes")
    u_p = num_u / den
    v_p = num_v / den
    z_s = T[2] + R[2, 0] * s + R[2, 1] * t  # depth of the moved z=0 anchor
    s_p = T[0] + R[0, 0] * s + R[0, 1] * t - z_s * u_p
    t_p = T[1] + R[1, 0] * s + R[1, 1] * t - z_s * v_p
    return np.array([s_p, t_p, u_p, v_p])


def _warp_ray_geometric(ray: np.ndarray, R: np.ndarray, T: np.ndarray) -> np.ndarray:
    s, t, u, v = ray
    p1 = R @ np.array([s, t, 0.0]) + T
    p2 = R @ np.array([s + u, t + v, 1.0]) + T
    dz = p1[2] - p2[2]
    if abs(dz) <= _EPS:
        raise DegenerateSegment("transformed anchor points share a depth")
    lam1 = p1[2] / dz
    lam2 = (p1[2] - 1.0) / dz
    q1 = p1 + lam1 * (p2 - p1)  # on z = 0
    q2 = p1 + lam2 * (p2 - p1)  # on z = 1
    return np.array([q1[0], q1[1], q2[0] - q1[0], q2[1] - q1[1]])


def warp_ray(ray, transform: RelativePose, method: str = "closed") -> Ray4D:
    """Map a TPP ray through a rigid transform into the target frame's TPP.

    ``method`` selects the production closed form or the explicit geometric
    construction (two moved anchor points re-intersected with the planes);
    both give the same answer and the second exists as an independent
    cross-check of the first.  Raises ParallelRay / DegenerateSegment when
    the warped ray is parallel to the parameterization planes.
    """
    r = ray.as_array() if isinstance(ray, Ray4D) else np.asarray(ray, float)
    if method == "closed":
        out = _warp_ray_closed(r, transform.R, transform.T)
    elif method == "geometric":
        out = _warp_ray_geometric(r, transform.R, transform.T)
    else:
        raise ValueError(f"unknown warp method {method!r}")
    return Ray4D(*out)


def warp_rays(rays: np.ndarray, R, T) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form warp of an (n, 4) ray bundle; no exceptions.

    Returns (warped, valid); rows with |denominator| <= 1e-12 are invalid
    and their warped values are zeros.
    """
    rays = np.asarray(rays, float)
    R = np.asarray(R, float)
    T = np.asarray(T, float).reshape(3)
    s, t, u, v = rays.T
    num_u = R[0, 2] + R[0, 0] * u + R[0, 1] * v
    num_v = R[1, 2] + R[1, 0] * u + R[1, 1] * v
    den = R[2, 2] + R[2, 0] * u + R[2, 1] * v
    valid = np.abs(den) > _EPS
    safe = np.where(valid, den, 1.0)
    u_p = num_u / safe
    v_p = num_v / safe
    z_s = T[2] + R[2, 0] * s + R[2, 1] * t
    s_p = T[0] + R[0, 0] * s + R[0, 1] * t - z_s * u_p
    t_p = T[1] + R[1, 0] * s + R[1, 1] * t - z_s * v_p
    out = np.column_stack([s_p, t_p, u_p, v_p])
    out[~valid] = 0.0
    return out, valid


def rectifying_rotation(pose_2to1: RelativePose) -> np.ndarray:
    """Rotation whose rows are the axes of the common rectified frame.

    The first axis is the baseline direction e1 = T/|T|.  The second is
    e1 crossed against the mean of the two optical-axis directions (the
    camera-2 z-axis expressed in camera 1, plus the camera-1 z-axis), which
    keeps the common image planes as close as possible to both originals;
    e3 completes the right-handed frame.

    Raises ZeroBaseline when |T| vanishes and CollinearConstruction when
    the baseline is parallel to the axis-mean direction.
    """
    R, T = pose_2to1.R, pose_2to1.T
    norm_T = float(np.linalg.norm(T))
    if norm_T <= 1e-9:
        raise ZeroBaseline("cameras share a centre; no rectifying frame")
    e1 = T / norm_T
    S = R[:, 2] + np.array([0.0, 0.0, 1.0])
    e2_raw = np.cross(T, S)
    n2 = float(np.linalg.norm(e2_raw))
    if n2 <= 1e-12 * max(norm_T * float(np.linalg.norm(S)), 1e-300):
        raise CollinearConstruction("baseline is parallel to the mean optical axis")
    e2 = e2_raw / n2
    e3 = np.cross(e1, e2)
    return np.vstack([e1, e2, e3])


def build_rectified_setup(pose_2to1: RelativePose) -> RectifiedSetup:
    """Assemble the common-frame transforms for both cameras.

    ``pose_2to1`` maps camera-2 coordinates into camera-1 (see the module
    docstring).  The left camera is rotated by R_rect with no translation;
    the right camera lands at (|T|, 0, 0).
    """
    R_rect = rectifying_rotation(pose_2to1)
    R, T = pose_2to1.R, pose_2to1.T
    T_r = R_rect @ T
    baseline = float(np.linalg.norm(T))
    # Rows 2 and 3 of R_rect are orthogonal to T by construction; zero the
    # residual round-off so downstream row alignment is exact.
    T_r = np.array([T_r[0], 0.0, 0.0])
    return RectifiedSetup(
        R_rect=R_rect,
        R_l=R_rect,
        T_l=np.zeros(3),
        R_r=R_rect @ R,
        T_r=T_r,
        baseline_mm=baseline,
    )


def warp_lf_to_common(
    rays: np.ndarray, setup: RectifiedSetup, side: str
) -> tuple[np.ndarray, np.ndarray]:
    """Warp an (n, 4) ray bundle of one camera into the common TPP.

    ``side`` is "left" (camera 1) or "right" (camera 2).  Returns
    (warped, valid) as in :func:`warp_rays`.
    """
    if side == "left":
        return warp_rays(rays, setup.R_l, setup.T_l)
    if side == "right":
        return warp_rays(rays, setup.R_r, setup.T_r)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")
