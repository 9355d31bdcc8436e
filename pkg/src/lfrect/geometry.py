"""Core geometry of plenoptic (light-field) cameras.

COORDINATE AND UNIT CONVENTIONS
-------------------------------
- Camera frames are right-handed: x right, y down, z along the optical axis
  into the scene.  3D coordinates are millimetres.
- An LF-point (u_c, v_c, lambda) summarizes how a scene point appears across
  the sub-aperture images of one light-field camera: (u_c, v_c) is its pixel
  position in the central sub-aperture image and lambda is the horizontal
  (equivalently vertical) pixel disparity between laterally adjacent
  sub-aperture images.  u_c, v_c and lambda are all in pixels.
- The intrinsic model maps a homogeneous scene point [X, Y, Z, 1] to a
  homogeneous LF-point through the 4x4 block

        [ f_x  0   c_x  0  ]
        [ 0   f_y  c_y  0  ]
        [ 0    0  -K1  -K2 ]
        [ 0    0    1   0  ]

  so u_c = (f_x X + c_x Z)/Z, v_c = (f_y Y + c_y Z)/Z and
  lambda = (-K1 Z - K2)/Z.  K1 is dimensionless, K2 is in pixel*mm/mm =
  pixels; for scene points in front of the camera and K2 > 0, lambda < -K1.
- A relative pose (R, T) maps camera-1 coordinates into camera-2:
  X_2 = R X_1 + T.  T is millimetres.
- Rotations given as Euler angles use intrinsic rotations about x, then y,
  then z: R = R_x(a) R_y(b) R_z(c).

A ray in two-plane parameterization (s, t, u, v) passes through (s, t, 0) on
the z=0 plane and (s+u, t+v, 1) on the z=1 plane; s, t are millimetres, u, v
are slopes (mm per unit z).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDisparity, NonPositiveDepth, ZeroVector

__all__ = [
    "LFPoint",
    "LFIntrinsics",
    "RelativePose",
    "Ray4D",
    "ScenePoint3D",
    "project_to_lfpoint",
    "backproject_lfpoint",
    "angular_error_rotation",
    "angular_error_translation",
    "euler_xyz_intrinsic",
    "skew",
    "so3_exp",
]

# Margin (in units of machine epsilon) within which a trace-derived cosine is
# snapped to +-1, so that comparing a rotation against itself yields exactly
# zero instead of the ~1e-8 rad noise floor of arccos near 1.
_COS_SNAP = 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class LFPoint:
    """A scene point as seen by one light-field camera.

    u_c, v_c: pixel coordinates in the central sub-aperture image.
    lam: inter-sub-aperture disparity in pixels (named ``lam`` because
    ``lambda`` is reserved in Python; serialized files use ``lambda``).
    """

    u_c: float
    v_c: float
    lam: float

    def as_array(self) -> np.ndarray:
        return np.array([self.u_c, self.v_c, self.lam], dtype=float)

    def homogeneous(self) -> np.ndarray:
        return np.array([self.u_c, self.v_c, self.lam, 1.0], dtype=float)


@dataclass(frozen=True)
class ScenePoint3D:
    """A 3D point in a camera frame, millimetres."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Ray4D:
    """A ray in two-plane parameterization: through (s, t, 0) and
    (s+u, t+v, 1)."""

    s: float
    t: float
    u: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.t, self.u, self.v], dtype=float)


@dataclass(frozen=True)
class LFIntrinsics:
    """Intrinsic parameters of a light-field camera.

    f_x, f_y, c_x, c_y are the usual pinhole parameters of the central
    sub-aperture image (pixels).  K1 (dimensionless) and K2 (pixels) relate
    scene depth to inter-sub-aperture disparity:
    lambda = -K1 - K2 / Z.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    K1: float
    K2: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.K2 == 0:
            raise ValueError("K2 must be nonzero")
        for name in ("fx", "fy", "cx", "cy", "K1", "K2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def matrix_H(self) -> np.ndarray:
        """The 4x4 block mapping homogeneous scene points to homogeneous
        LF-points."""
        return np.array(
            [
                [self.fx, 0.0, self.cx, 0.0],
                [0.0, self.fy, self.cy, 0.0],
                [0.0, 0.0, -self.K1, -self.K2],
                [0.0, 0.0, 1.0, 0.0],
            ]
        )

    def matrix_H_inverse(self) -> np.ndarray:
        """Closed-form inverse of :meth:`matrix_H` (no numerical inverse)."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, 0.0, -self.cy / self.fy],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0 / self.K2, -self.K1 / self.K2],
            ]
        )

    def to_json_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "K1": self.K1,
            "K2": self.K2,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LFIntrinsics":
        try:
            return cls(**{k: float(d[k]) for k in ("fx", "fy", "cx", "cy", "K1", "K2")})
        except KeyError as e:
            raise ValueError(f"intrinsics JSON missing key {e.args[0]!r}") from e


class RelativePose:
    """A rigid transform X_2 = R X_1 + T between two camera frames.

    R must be orthonormal with det +1 (checked to 1e-9 on construction);
    T is millimetres.
    """

    __slots__ = ("R", "T")

    def __init__(self, R, T):
        R = np.asarray(R, dtype=float)
        T = np.asarray(T, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("R must be 3x3")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(T))):
            raise ValueError("pose entries must be finite")
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-9:
            raise ValueError("R is not orthonormal to 1e-9")
        if np.linalg.det(R) < 0:
            raise ValueError("R must have det +1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)
        R.flags.writeable = False
        T.flags.writeable = False

    def __setattr__(self, name, value):
        raise AttributeError("RelativePose is immutable")

    def __reduce__(self):
        # Immutability breaks the default slot-based pickling; rebuild
        # through the constructor instead.
        return (RelativePose, (np.array(self.R), np.array(self.T)))

    def __repr__(self):
        return f"RelativePose(R={self.R.tolist()}, T={self.T.tolist()})"

    def matrix(self) -> np.ndarray:
        """The 4x4 homogeneous transform [R T; 0 1]."""
        M = np.eye(4)
        M[:3, :3] = self.R
        M[:3, 3] = self.T
        return M

    def inverse(self) -> "RelativePose":
        """The transform mapping frame 2 back into frame 1."""
        return RelativePose(self.R.T, -self.R.T @ self.T)

    def apply(self, points) -> np.ndarray:
        """Transform one (3,) point or an (n, 3) array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.R.T + self.T

    def to_json_dict(self) -> dict:
        return {
            "layout": "row-major",
            "R": [float(x) for x in self.R.reshape(-1)],
            "T": [float(x) for x in self.T],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RelativePose":
        if d.get("layout") != "row-major":
            raise ValueError("pose JSON must declare layout 'row-major'")
        R = np.array(d["R"], dtype=float).reshape(3, 3)
        T = np.array(d["T"], dtype=float)
        return cls(R, T)  # constructor re-checks orthonormality/finiteness


def project_to_lfpoint(point, k: LFIntrinsics) -> LFPoint:
    """Project a scene point (camera frame, mm) to its LF-point.

    Raises NonPositiveDepth if the point is not strictly in front of the
    camera.
    """
    p = point.as_array() if isinstance(point, ScenePoint3D) else np.asarray(point, float)
    X, Y, Z = p
    if not Z > 0:
        raise NonPositiveDepth(f"depth Z={Z} is not positive")
    return LFPoint(
        (k.fx * X + k.cx * Z) / Z,
        (k.fy * Y + k.cy * Z) / Z,
        (-k.K1 * Z - k.K2) / Z,
    )


def backproject_lfpoint(lfp: LFPoint, k: LFIntrinsics) -> ScenePoint3D:
    """Recover the scene point of an LF-point.

    The disparity determines depth: Z = -K2 / (lambda + K1).  Raises
    DegenerateDisparity when lambda + K1 is zero to working precision
    (depth at infinity) and NonPositiveDepth when the recovered depth is
    not positive.
    """
    denom = lfp.lam + k.K1
    if abs(denom) <= 1e-12:
        raise DegenerateDisparity("lambda + K1 is zero: depth at infinity")
    Z = -k.K2 / denom
    if not Z > 0:
        raise NonPositiveDepth(f"recovered depth Z={Z} is not positive")
    return ScenePoint3D(Z * (lfp.u_c - k.cx) / k.fx, Z * (lfp.v_c - k.cy) / k.fy, Z)


def _arccos_snapped_deg(x: float) -> float:
    """arccos in degrees with the argument clamped to [-1, 1]; values within
    a few machine epsilons of +-1 snap exactly, so self-comparisons return
    exactly 0 (or 180)."""
    if x >= 1.0 - _COS_SNAP:
        return 0.0
    if x <= -1.0 + _COS_SNAP:
        return 180.0
    return float(np.degrees(np.arccos(x)))


def angular_error_rotation(R_true, R_est) -> float:
    """Angle in degrees of the rotation taking R_est to R_true."""
    R_true = np.asarray(R_true, float)
    R_est = np.asarray(R_est, float)
    c = 0.5 * (np.trace(R_true @ R_est.T) - 1.0)
    return _arccos_snapped_deg(c)


def angular_error_translation(T_true, T_est) -> float:
    """Angle in degrees between two translation directions (scale invariant).

    Raises ZeroVector if either argument has zero length.
    """
    a = np.asarray(T_true, float).reshape(3)
    b = np.asarray(T_est, float).reshape(3)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= 1e-12 or nb <= 1e-12:
        raise ZeroVector("translation direction has zero length")
    return _arccos_snapped_deg(float(np.dot(a, b) / (na * nb)))


def euler_xyz_intrinsic(ax_deg: float, ay_deg: float, az_deg: float) -> np.ndarray:
    """Rotation matrix from intrinsic x-y-z Euler angles in degrees:
    R = R_x(ax) R_y(ay) R_z(az)."""
    ax, ay, az = np.radians([ax_deg, ay_deg, az_deg])
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rx @ Ry @ Rz


def skew(w) -> np.ndarray:
    """The 3x3 cross-product matrix: skew(w) @ x == cross(w, x)."""
    wx, wy, wz = np.asarray(w, float).reshape(3)
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def so3_exp(w) -> np.ndarray:
    """Rodrigues exponential: the rotation by angle |w| about axis w/|w|.

    Uses series expansions of sin(x)/x and (1-cos(x))/x^2 near zero, so it
    is smooth through w = 0.
    """
    w = np.asarray(w, float).reshape(3)
    theta2 = float(w @ w)
    W = skew(w)
    if theta2 < 1e-16:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        theta = np.sqrt(theta2)
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    return np.eye(3) + a * W + b * (W @ W)
