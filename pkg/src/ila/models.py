"""Measurement and motion models with analytic Jacobians.

Covers the GPS pseudorange model, the pinhole direct photometric
alignment model (projection, inverse-depth unprojection, rigid warp),
and a linear state transition. The navigation state is 7-dimensional:
3D position, 3D orientation (roll/pitch/yaw) and receiver clock bias
expressed in meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, InvalidInputError
from .pzono import PZonotope

DEPTH_FLOOR = 0.01  # meters; projection refuses points at or behind this


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    w = np.remainder(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


@dataclass(frozen=True)
class NavState:
    """Position (m), orientation (rad, roll/pitch/yaw) and clock bias (m)."""

    position: np.ndarray
    orientation: np.ndarray
    clock_bias: float

    def __post_init__(self):
        p = np.array(self.position, dtype=float)
        o = wrap_angle(np.array(self.orientation, dtype=float))
        if p.shape != (3,) or o.shape != (3,):
            raise InvalidInputError("NavState needs 3D position and orientation")
        if not (np.isfinite(p).all() and np.isfinite(o).all() and np.isfinite(self.clock_bias)):
            raise InvalidInputError("NavState entries must be finite")
        p.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", o)
        object.__setattr__(self, "clock_bias", float(self.clock_bias))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.orientation, [self.clock_bias]])

    @classmethod
    def from_vector(cls, v) -> "NavState":
        v = np.asarray(v, dtype=float)
        if v.shape != (7,):
            raise InvalidInputError("state vector must have 7 entries")
        return cls(v[:3], v[3:6], v[6])


def state_delta(a: NavState, b: NavState) -> np.ndarray:
    """7-vector a - b with orientation components wrapped."""
    d = a.as_vector() - b.as_vector()
    d[3:6] = wrap_angle(d[3:6])
    return d


@dataclass(frozen=True)
class GpsSatellite:
    id: str
    position: np.ndarray
    clock_correction: float
    elevation_deg: float
    azimuth_deg: float

    def __post_init__(self):
        p = np.array(self.position, dtype=float)
        if p.shape != (3,):
            raise InvalidInputError("satellite position must be 3D")
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise InvalidInputError("elevation out of [-90, 90]")
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise InvalidInputError("azimuth out of [0, 360)")
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")


@dataclass(frozen=True)
class Keyframe:
    """Reference frame: key pixels with inverse depths and intensities."""

    state: NavState
    key_pixels: np.ndarray
    inverse_depths: np.ndarray
    intensities: np.ndarray
    _pixel_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        px = np.array(self.key_pixels, dtype=float).reshape(-1, 2)
        d = np.atleast_1d(np.array(self.inverse_depths, dtype=float))
        ii = np.atleast_1d(np.array(self.intensities, dtype=float))
        if not (len(px) == len(d) == len(ii)):
            raise InvalidInputError("keyframe lists must have equal length")
        if (d <= 0).any():
            raise InvalidInputError("inverse depths must be positive")
        for a in (px, d, ii):
            a.setflags(write=False)
        object.__setattr__(self, "key_pixels", px)
        object.__setattr__(self, "inverse_depths", d)
        object.__setattr__(self, "intensities", ii)
        index = {(round(u, 9), round(v, 9)): i for i, (u, v) in enumerate(px)}
        if len(index) != len(px):
            raise InvalidInputError("key pixels must be distinct")
        object.__setattr__(self, "_pixel_index", index)

    def __len__(self) -> int:
        return len(self.key_pixels)

    def index_of(self, pixel) -> int:
        u, v = (float(pixel[0]), float(pixel[1]))
        key = (round(u, 9), round(v, 9))
        if key not in self._pixel_index:
            raise InvalidInputError(f"pixel {pixel!r} is not a key pixel")
        return self._pixel_index[key]


@dataclass(frozen=True)
class VisionLandmark:
    id: str
    position: np.ndarray
    position_set: PZonotope
    source_pixel: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float)
        u = np.array(self.source_pixel, dtype=float)
        if p.shape != (3,) or not np.isfinite(p).all():
            raise InvalidInputError("landmark position must be finite 3D")
        if self.position_set.dim != 3:
            raise InvalidInputError("landmark position set must be 3D")
        if u.shape != (2,):
            raise InvalidInputError("source pixel must be 2D")
        p.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "source_pixel", u)


@dataclass(frozen=True)
class MotionModel:
    transition: np.ndarray
    noise_set: PZonotope

    def __post_init__(self):
        f = np.array(self.transition, dtype=float)
        if f.shape != (7, 7) or not np.isfinite(f).all():
            raise InvalidInputError("transition must be a finite 7x7 matrix")
        if self.noise_set.dim != 7:
            raise InvalidInputError("motion noise set must be 7D")
        f.setflags(write=False)
        object.__setattr__(self, "transition", f)

    @classmethod
    def identity(cls, noise_set: PZonotope) -> "MotionModel":
        return cls(np.eye(7), noise_set)


# --- rotations (Z-Y-X Euler composition) ---------------------------------


def rotation_matrix(angles) -> np.ndarray:
    """R = Rz(yaw) @ Ry(pitch) @ Rx(roll) for angles (roll, pitch, yaw)."""
    r, p, y = np.asarray(angles, dtype=float)
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rotation_jacobian_columns(angles, point) -> np.ndarray:
    """3x3 matrix of d(R(angles) @ point)/d angles, one column per angle."""
    r, p, y = np.asarray(angles, dtype=float)
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    drx = np.array([[0, 0, 0], [0, -sr, -cr], [0, cr, -sr]])
    dry = np.array([[-sp, 0, cp], [0, 0, 0], [-cp, 0, -sp]])
    drz = np.array([[-sy, -cy, 0], [cy, -sy, 0], [0, 0, 0]])
    pt = np.asarray(point, dtype=float)
    return np.column_stack(
        [rz @ ry @ drx @ pt, rz @ dry @ rx @ pt, drz @ ry @ rx @ pt]
    )


# --- GPS pseudorange -------------------------------------------------------


def gps_predict(state: NavState, sat: GpsSatellite) -> float:
    """Pseudorange: geometric range plus receiver/satellite clock offset."""
    diff = sat.position - state.position
    rng = float(np.linalg.norm(diff))
    if rng <= 0.0:
        raise InvalidInputError("satellite co-located with receiver")
    return rng + (state.clock_bias - sat.clock_correction)


def gps_jacobian(state: NavState, sat: GpsSatellite) -> np.ndarray:
    """Row of pseudorange derivatives: [-los, 0, 0, 0, 1]."""
    diff = sat.position - state.position
    rng = float(np.linalg.norm(diff))
    if rng <= 0.0:
        raise InvalidInputError("satellite co-located with receiver")
    row = np.zeros(7)
    row[:3] = -diff / rng
    row[6] = 1.0
    return row


# --- pinhole camera --------------------------------------------------------


def project(intr: CameraIntrinsics, p_cam) -> np.ndarray:
    p = np.asarray(p_cam, dtype=float)
    if p[2] <= DEPTH_FLOOR:
        raise BehindCameraError(f"depth {p[2]:.4f} at or behind floor {DEPTH_FLOOR}")
    return np.array(
        [intr.fx * p[0] / p[2] + intr.cx, intr.fy * p[1] / p[2] + intr.cy]
    )


def projection_jacobian(intr: CameraIntrinsics, p_cam) -> np.ndarray:
    """2x3 derivative of the pinhole projection."""
    x, y, z = np.asarray(p_cam, dtype=float)
    return np.array(
        [
            [intr.fx / z, 0.0, -intr.fx * x / (z * z)],
            [0.0, intr.fy / z, -intr.fy * y / (z * z)],
        ]
    )


def unproject(intr: CameraIntrinsics, pixel, inv_depth: float) -> np.ndarray:
    if inv_depth <= 0.0:
        raise InvalidInputError("inverse depth must be positive")
    u, v = np.asarray(pixel, dtype=float)
    z = 1.0 / inv_depth
    return np.array([(u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z])


def relative_transform(state: NavState, kf_state: NavState):
    """Rotation/translation of the state change relative to the keyframe."""
    d_ang = wrap_angle(state.orientation - kf_state.orientation)
    return rotation_matrix(d_ang), state.position - kf_state.position


def warp_point(state: NavState, kf_state: NavState, p_kf) -> np.ndarray:
    """Rigid transform of a keyframe-frame point by the relative state change."""
    rot, t = relative_transform(state, kf_state)
    return rot @ np.asarray(p_kf, dtype=float) + t


def warp(state: NavState, kf: Keyframe, pixel, intr: CameraIntrinsics) -> np.ndarray:
    """Unproject a key pixel and transform it by the relative state change."""
    idx = kf.index_of(pixel)
    p_kf = unproject(intr, kf.key_pixels[idx], kf.inverse_depths[idx])
    return warp_point(state, kf.state, p_kf)


def point_in_keyframe(kf_state: NavState, p_world) -> np.ndarray:
    """World point expressed in the keyframe camera frame."""
    rot = rotation_matrix(kf_state.orientation)
    return rot.T @ (np.asarray(p_world, dtype=float) - kf_state.position)


# --- direct photometric model ---------------------------------------------


def vision_predict(state, landmark, kf, intr, field) -> float:
    """Intensity of the landmark's warped projection in the current frame.

    ``field`` supplies the analytic current-frame image: ``field.value(uv)``
    and ``field.gradient(uv)``.
    """
    p_kf = point_in_keyframe(kf.state, landmark.position)
    p_cur = warp_point(state, kf.state, p_kf)
    return float(field.value(project(intr, p_cur)))


def vision_jacobians(state, landmark, kf, intr, field):
    """Rows of intensity derivatives w.r.t. state (7,) and landmark position (3,)."""
    p_kf = point_in_keyframe(kf.state, landmark.position)
    rot, _t = relative_transform(state, kf.state)
    p_cur = warp_point(state, kf.state, p_kf)
    uv = project(intr, p_cur)
    grad_i = np.asarray(field.gradient(uv), dtype=float)
    j_pi = projection_jacobian(intr, p_cur)
    row_pix = grad_i @ j_pi  # 1x3 in current-camera coordinates

    b_x = np.zeros(7)
    b_x[:3] = row_pix  # d p_cur / d position = identity
    d_ang = wrap_angle(state.orientation - kf.state.orientation)
    b_x[3:6] = row_pix @ rotation_jacobian_columns(d_ang, p_kf)

    kf_rot = rotation_matrix(kf.state.orientation)
    b_p = row_pix @ rot @ kf_rot.T
    return b_x, b_p


# --- motion ----------------------------------------------------------------


def motion_predict(model: MotionModel, prev: NavState) -> NavState:
    """Noise-free motion mean F @ x_{k-1}."""
    return NavState.from_vector(model.transition @ prev.as_vector())
