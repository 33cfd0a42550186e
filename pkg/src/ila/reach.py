"""Stochastic-reachability pipeline over one measurement epoch.

Per landmark: map the measurement innovation and its declared noise
bounds into a 7D expected-state-error p-zonotope (via the pseudoinverse
of the measurement row), score the innovation against its expected 1D
p-zonotope to get a fault status, and average statuses over a sliding
window. The scaled union of included members yields the scalar cost that
drives landmark selection.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kern, models, pzono
from .errors import (
    DegenerateGeometryError,
    InvalidInputError,
    UninformativeLandmarkError,
)

ALPHA_CAP = 0.99  # joint fault status clamp; bounds the (1-a)^-1 scale at 100
Q_FLOOR = 1e-3  # members with inclusion weight at or below this are omitted
FD_STEP = 1e-3  # forward-difference step on inclusion weights


@dataclass(frozen=True)
class NoiseBounds:
    """Declared non-faulty error bounds, immutable after initialization."""

    gps: dict
    vision: dict
    motion: pzono.PZonotope

    def __post_init__(self):
        if self.motion.dim != 7:
            raise InvalidInputError("motion noise set must be 7D")
        for table, label in ((self.gps, "gps"), (self.vision, "vision")):
            for key, pz in table.items():
                if pz.dim != 1:
                    raise InvalidInputError(f"{label} noise set for {key!r} must be 1D")

    def gps_for(self, sat_id: str) -> pzono.PZonotope:
        try:
            return self.gps[sat_id]
        except KeyError:
            raise InvalidInputError(f"no gps noise bound for {sat_id!r}") from None

    def vision_for(self, lm_id: str) -> pzono.PZonotope:
        try:
            return self.vision[lm_id]
        except KeyError:
            raise InvalidInputError(f"no vision noise bound for {lm_id!r}") from None


@dataclass(frozen=True)
class FaultStatus:
    per_epoch: float
    joint: float

    def __post_init__(self):
        if not (0.0 <= self.per_epoch <= 1.0 and 0.0 <= self.joint <= 1.0):
            raise InvalidInputError("fault statuses must lie in [0, 1]")


@dataclass
class EpochInputs:
    """One epoch's measurements plus the catalogs and camera context."""

    a_priori_state: models.NavState
    motion_mean: models.NavState
    satellites: list
    pseudoranges: np.ndarray
    landmarks: list
    intensities: np.ndarray
    keyframe: models.Keyframe | None = None
    intrinsics: models.CameraIntrinsics | None = None
    field: object | None = None

    def __post_init__(self):
        self.pseudoranges = np.atleast_1d(np.asarray(self.pseudoranges, dtype=float))
        self.intensities = np.atleast_1d(np.asarray(self.intensities, dtype=float))
        if len(self.pseudoranges) != len(self.satellites):
            raise InvalidInputError("pseudorange count must match satellite catalog")
        if len(self.intensities) != len(self.landmarks):
            raise InvalidInputError("intensity count must match landmark catalog")
        if len(self.satellites) == 0 and len(self.landmarks) == 0:
            raise InvalidInputError("epoch needs at least one landmark")
        if self.landmarks and (self.keyframe is None or self.intrinsics is None or self.field is None):
            raise InvalidInputError("vision landmarks require keyframe, intrinsics and field")

    @property
    def n_gps(self) -> int:
        return len(self.satellites)

    @property
    def n_vis(self) -> int:
        return len(self.landmarks)


class FaultHistory:
    """Sliding per-landmark windows of per-epoch fault statuses."""

    def __init__(self, window: int):
        if window < 1:
            raise InvalidInputError("history window must be >= 1")
        self.window = window
        self._hist: dict = {}

    def push(self, key: str, status: float) -> None:
        self._hist.setdefault(key, deque(maxlen=self.window)).append(float(status))

    def statuses(self, key: str):
        return list(self._hist.get(key, ()))


def joint_fault_status(history, window: int) -> float:
    """Mean of the most recent ``min(window, available)`` statuses, capped."""
    hist = list(history)
    if not hist:
        raise InvalidInputError("empty fault-status history")
    if window < 1:
        raise InvalidInputError("window must be >= 1")
    recent = hist[-window:]
    return min(float(np.mean(recent)), ALPHA_CAP)


# --- expected-state and innovation sets -------------------------------------


def _row_pseudoinverse(row: np.ndarray) -> np.ndarray:
    nrm2 = float(row @ row)
    if nrm2 <= 0.0:
        raise DegenerateGeometryError("zero measurement row")
    return (row / nrm2).reshape(-1, 1)


def expected_state_motion(inputs: EpochInputs, bounds: NoiseBounds) -> pzono.PZonotope:
    dz = models.state_delta(inputs.motion_mean, inputs.a_priori_state)
    return pzono.translate(dz, bounds.motion)


def linearize_gps(inputs: EpochInputs, i: int):
    sat = inputs.satellites[i]
    row = models.gps_jacobian(inputs.a_priori_state, sat)
    dz = float(inputs.pseudoranges[i] - models.gps_predict(inputs.a_priori_state, sat))
    return row, dz


def expected_state_gps(inputs: EpochInputs, bounds: NoiseBounds, i: int) -> pzono.PZonotope:
    row, dz = linearize_gps(inputs, i)
    pinv = _row_pseudoinverse(row)
    noise = bounds.gps_for(inputs.satellites[i].id)
    return pzono.linear_map(pinv, pzono.translate([dz], noise))


def _landmark_error_set(lm) -> pzono.PZonotope:
    """Landmark position uncertainty recentered at zero."""
    return pzono.translate(-lm.position_set.center, lm.position_set)


def linearize_vision(inputs: EpochInputs, j: int):
    lm = inputs.landmarks[j]
    b_x, b_p = models.vision_jacobians(
        inputs.a_priori_state, lm, inputs.keyframe, inputs.intrinsics, inputs.field
    )
    predicted = models.vision_predict(
        inputs.a_priori_state, lm, inputs.keyframe, inputs.intrinsics, inputs.field
    )
    dz = float(inputs.intensities[j] - predicted)
    return b_x, b_p, dz


def expected_state_vision(inputs: EpochInputs, bounds: NoiseBounds, j: int) -> pzono.PZonotope:
    b_x, b_p, dz = linearize_vision(inputs, j)
    if float(b_x @ b_x) <= 0.0:
        raise UninformativeLandmarkError(inputs.landmarks[j].id)
    noise = bounds.vision_for(inputs.landmarks[j].id)
    mapped_lm = pzono.linear_map(b_p.reshape(1, 3), _landmark_error_set(inputs.landmarks[j]))
    inner = pzono.minkowski_sum(mapped_lm, pzono.translate([dz], noise))
    return pzono.linear_map(_row_pseudoinverse(b_x), inner)


def innovation_pzono_gps(inputs: EpochInputs, bounds: NoiseBounds, i: int):
    """Innovation value and its expected 1D p-zonotope for satellite ``i``."""
    row, dz = linearize_gps(inputs, i)
    dx_mm = models.state_delta(inputs.motion_mean, inputs.a_priori_state)
    eps = dz - float(row @ dx_mm)
    motion_set = expected_state_motion(inputs, bounds)
    expected = pzono.minkowski_sum(
        pzono.linear_map(row.reshape(1, 7), motion_set),
        bounds.gps_for(inputs.satellites[i].id),
    )
    return eps, expected


def innovation_pzono_vision(inputs: EpochInputs, bounds: NoiseBounds, j: int):
    """Innovation value and expected set for vision landmark ``j``.

    The landmark-position term enters as the zero-centered position-error
    set; its center contribution already cancels inside the measurement
    residual, which is computed against the a priori landmark position.
    """
    b_x, b_p, dz = linearize_vision(inputs, j)
    if float(b_x @ b_x) <= 0.0:
        raise UninformativeLandmarkError(inputs.landmarks[j].id)
    dx_mm = models.state_delta(inputs.motion_mean, inputs.a_priori_state)
    eps = dz - float(b_x @ dx_mm)
    motion_set = expected_state_motion(inputs, bounds)
    expected = pzono.minkowski_sum(
        pzono.minkowski_sum(
            pzono.linear_map(b_x.reshape(1, 7), motion_set),
            pzono.linear_map(b_p.reshape(1, 3), _landmark_error_set(inputs.landmarks[j])),
        ),
        bounds.vision_for(inputs.landmarks[j].id),
    )
    return eps, expected


def scaled_union(
    motion_set: pzono.PZonotope,
    gps_sets,
    gps_statuses,
    vision_sets,
    vision_statuses,
    q_gps,
    q_vis,
    q_floor: float = Q_FLOOR,
) -> pzono.PZonotope:
    """Enclosure of the motion set and the fault-scaled included members."""
    members = [motion_set]
    for sets, statuses, weights in (
        (gps_sets, gps_statuses, np.atleast_1d(q_gps)),
        (vision_sets, vision_statuses, np.atleast_1d(q_vis)),
    ):
        for pz, alpha, q in zip(sets, statuses, weights):
            if q <= q_floor or pz is None:
                continue
            scale = q / (1.0 - min(alpha, ALPHA_CAP))
            members.append(pzono.linear_map(scale * np.eye(pz.dim), pz))
    return pzono.enclose_union(members)


def pzono_cost(union_set: pzono.PZonotope, gamma: float, w: pzono.WeightVector) -> float:
    """Weighted squared size of the union's confidence cut."""
    return pzono.zonotope_size(pzono.confidence_cut(union_set, gamma), w)


# --- per-epoch pipeline state ------------------------------------------------


@dataclass
class MemberReach:
    """Reachability summary of one landmark at one epoch."""

    id: str
    kind: str  # "gps" | "vision"
    expected_set: pzono.PZonotope | None
    innovation: float
    innovation_set: pzono.PZonotope | None
    status: FaultStatus
    active: bool = True


@dataclass
class EpochReach:
    """All per-landmark reachability products for one epoch.

    Carries compact per-member arrays (box centers/radii and per-axis
    covariance bounds) so the selection optimizer can evaluate the union
    cost without rebuilding set objects.
    """

    inputs: EpochInputs
    bounds: NoiseBounds
    motion_set: pzono.PZonotope
    gps: list
    vision: list
    _centers: np.ndarray = field(init=False, repr=False)
    _radii: np.ndarray = field(init=False, repr=False)
    _covb: np.ndarray = field(init=False, repr=False)
    _alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        members = [self.motion_set] + [m.expected_set for m in self.gps + self.vision]
        n = 7
        count = len(members)
        self._centers = np.zeros((count, n))
        self._radii = np.zeros((count, n))
        self._covb = np.zeros((count, n))
        for idx, pz in enumerate(members):
            if pz is None:
                continue
            self._centers[idx] = pz.center
            self._radii[idx] = pz.axis_radii()
            self._covb[idx] = pz.covariance_cut_radii()
        self._alpha = np.array(
            [min(m.status.joint, ALPHA_CAP) for m in self.gps + self.vision]
        )

    @property
    def n_gps(self) -> int:
        return len(self.gps)

    @property
    def n_vis(self) -> int:
        return len(self.vision)

    @property
    def active_vision(self) -> np.ndarray:
        return np.array([m.active for m in self.vision], dtype=bool)

    def joint_statuses(self, kind: str) -> np.ndarray:
        group = self.gps if kind == "gps" else self.vision
        return np.array([m.status.joint for m in group])

    def _q_full(self, q_gps, q_vis) -> np.ndarray:
        q = np.concatenate([np.atleast_1d(q_gps), np.atleast_1d(q_vis)]).astype(float)
        if len(q) != self.n_gps + self.n_vis:
            raise InvalidInputError("inclusion weight length mismatch")
        inactive = ~np.concatenate([np.ones(self.n_gps, dtype=bool), self.active_vision])
        q = q.copy()
        q[inactive] = 0.0
        return q

    def cost(self, q_gps, q_vis, gamma: float, w: pzono.WeightVector) -> float:
        q = self._q_full(q_gps, q_vis)
        m2 = pzono.coverage_multiplier(gamma) ** 2
        return kern.union_cost(
            self._centers, self._radii, self._covb, self._alpha, q, w.weights, m2, Q_FLOOR
        )

    def cost_and_grad(self, q_gps, q_vis, gamma: float, w: pzono.WeightVector):
        q = self._q_full(q_gps, q_vis)
        m2 = pzono.coverage_multiplier(gamma) ** 2
        return kern.union_cost_grad(
            self._centers, self._radii, self._covb, self._alpha, q, w.weights, m2,
            Q_FLOOR, FD_STEP,
        )

    def kernel_context(self, gamma: float, w: pzono.WeightVector) -> "KernelContext":
        """Precomputed handle for tight optimizer loops."""
        return KernelContext(self, gamma, w)

    def union(self, q_gps, q_vis) -> pzono.PZonotope:
        """Object-path scaled union (slow path, identical to cost())."""
        n_gps = self.n_gps
        q = self._q_full(q_gps, q_vis)
        return scaled_union(
            self.motion_set,
            [m.expected_set for m in self.gps],
            self._alpha[:n_gps],
            [m.expected_set for m in self.vision],
            self._alpha[n_gps:],
            q[:n_gps],
            q[n_gps:],
        )


class KernelContext:
    """Cost/gradient evaluations with the per-call conversions hoisted out.

    ``q`` is the full landmark weight vector (GPS then vision); inactive
    vision entries are zeroed in place.
    """

    def __init__(self, epoch: EpochReach, gamma: float, w: pzono.WeightVector):
        self._e = epoch
        self._m2 = pzono.coverage_multiplier(gamma) ** 2
        self._w = np.ascontiguousarray(w.weights)
        active = np.concatenate([np.ones(epoch.n_gps, dtype=bool), epoch.active_vision])
        self._inactive_idx = np.nonzero(~active)[0]

    def mask(self, q: np.ndarray) -> np.ndarray:
        if len(self._inactive_idx):
            q[self._inactive_idx] = 0.0
        return q

    def cost(self, q: np.ndarray) -> float:
        e = self._e
        return kern.union_cost(
            e._centers, e._radii, e._covb, e._alpha, q, self._w, self._m2, Q_FLOOR
        )

    def cost_grad(self, q: np.ndarray):
        e = self._e
        return kern.union_cost_grad(
            e._centers, e._radii, e._covb, e._alpha, q, self._w, self._m2, Q_FLOOR, FD_STEP
        )


def build_epoch_reach(
    inputs: EpochInputs,
    bounds: NoiseBounds,
    history: FaultHistory,
) -> EpochReach:
    """Linearize, score and summarize every landmark of one epoch.

    Pushes this epoch's per-landmark statuses into ``history`` and uses
    the updated windows for the joint statuses. Uninformative vision
    landmarks are kept in the catalog but marked inactive (excluded by
    default).
    """
    motion_set = expected_state_motion(inputs, bounds)
    gps_members = []
    for i, sat in enumerate(inputs.satellites):
        expected = expected_state_gps(inputs, bounds, i)
        eps, inno_set = innovation_pzono_gps(inputs, bounds, i)
        per_epoch = pzono.fault_status_point(inno_set, [eps])
        history.push(("gps", sat.id), per_epoch)
        joint = joint_fault_status(history.statuses(("gps", sat.id)), history.window)
        gps_members.append(
            MemberReach(sat.id, "gps", expected, eps, inno_set, FaultStatus(per_epoch, joint))
        )
    vis_members = []
    for j, lm in enumerate(inputs.landmarks):
        try:
            expected = expected_state_vision(inputs, bounds, j)
            eps, inno_set = innovation_pzono_vision(inputs, bounds, j)
        except UninformativeLandmarkError:
            vis_members.append(
                MemberReach(lm.id, "vision", None, 0.0, None, FaultStatus(0.0, 0.0), active=False)
            )
            continue
        per_epoch = pzono.fault_status_point(inno_set, [eps])
        history.push(("vision", lm.id), per_epoch)
        joint = joint_fault_status(history.statuses(("vision", lm.id)), history.window)
        vis_members.append(
            MemberReach(lm.id, "vision", expected, eps, inno_set, FaultStatus(per_epoch, joint))
        )
    return EpochReach(inputs, bounds, motion_set, gps_members, vis_members)
