"""Baseline GPS-vision estimator: weighted Gauss-Newton with a prior.

Closes the loop around landmark selection: estimates the 7-state vector
from the selected pseudoranges and intensities, refines per-landmark
positions, and applies the availability-gated motion feedback rule.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import models
from .errors import EstimationFailure, InvalidInputError
from .pzono import PZonotope

MAX_ITERS = 20
STEP_TOL = 1e-8
DIVERGENCE_STRIKES = 3
COV_INFLATION = 1.01  # per-epoch factor on unobserved landmark covariance


@dataclass(frozen=True)
class LandmarkEstimate:
    position: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        p = np.array(self.position, dtype=float)
        c = np.array(self.covariance, dtype=float)
        if p.shape != (3,) or c.shape != (3, 3):
            raise InvalidInputError("landmark estimate must be 3D with 3x3 covariance")
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "covariance", c)

    def position_set(self) -> PZonotope:
        """Gaussian-overbound p-zonotope (zero generators) of the position."""
        return PZonotope(self.position, np.zeros((3, 0)), self.covariance)


@dataclass(frozen=True)
class EstimatorState:
    state: models.NavState
    covariance: np.ndarray
    landmarks: dict

    def __post_init__(self):
        c = np.array(self.covariance, dtype=float)
        if c.shape != (7, 7):
            raise InvalidInputError("state covariance must be 7x7")
        c.setflags(write=False)
        object.__setattr__(self, "covariance", c)


def _vision_row(state, lm_est: LandmarkEstimate, landmark, kf, intr, field):
    probe = replace(landmark, position=lm_est.position)
    predicted = models.vision_predict(state, probe, kf, intr, field)
    b_x, b_p = models.vision_jacobians(state, probe, kf, intr, field)
    return predicted, b_x, b_p


def estimate_state(
    inputs,
    selected_gps,
    selected_vision,
    prior: EstimatorState,
    bounds,
    max_iters: int = MAX_ITERS,
    step_tol: float = STEP_TOL,
) -> EstimatorState:
    """Weighted Gauss-Newton over the selected measurement rows plus a prior.

    ``selected_gps`` / ``selected_vision`` are index iterables into the
    epoch catalogs. Row weights come from the declared noise covariances.
    Raises EstimationFailure after three consecutive cost increases.
    """
    selected_gps = list(selected_gps)
    selected_vision = list(selected_vision)

    prior_vec = prior.state.as_vector()
    prior_info = np.linalg.inv(prior.covariance + 1e-12 * np.eye(7))
    x = models.NavState.from_vector(prior_vec)

    def residuals_and_jacobian(state):
        rows, res, wts = [], [], []
        for i in selected_gps:
            sat = inputs.satellites[i]
            res.append(inputs.pseudoranges[i] - models.gps_predict(state, sat))
            rows.append(models.gps_jacobian(state, sat))
            var = float(bounds.gps_for(sat.id).covariance[0, 0])
            wts.append(1.0 / max(var, 1e-12))
        for j in selected_vision:
            lm = inputs.landmarks[j]
            est = prior.landmarks.get(lm.id)
            pos = est.position if est is not None else lm.position
            probe = replace(lm, position=pos)
            try:
                predicted = models.vision_predict(
                    state, probe, inputs.keyframe, inputs.intrinsics, inputs.field
                )
                b_x, _ = models.vision_jacobians(
                    state, probe, inputs.keyframe, inputs.intrinsics, inputs.field
                )
            except models.BehindCameraError:
                continue
            if not b_x.any():
                continue
            res.append(inputs.intensities[j] - predicted)
            rows.append(b_x)
            var = float(bounds.vision_for(lm.id).covariance[0, 0])
            wts.append(1.0 / max(var, 1e-12))
        if not rows:
            return np.zeros((0, 7)), np.zeros(0), np.zeros(0)
        return np.array(rows), np.array(res), np.array(wts)

    jac, res, wts = residuals_and_jacobian(x)
    if len(res) == 0:
        return EstimatorState(prior.state, prior.covariance, dict(prior.landmarks))

    def total_cost(state, res_vec):
        d = models.state_delta(state, prior.state)
        return float(res_vec @ (wts * res_vec) + d @ prior_info @ d)

    cost = total_cost(x, res)
    strikes = 0
    for _ in range(max_iters):
        hessian = jac.T @ (wts[:, None] * jac) + prior_info
        grad = jac.T @ (wts * res) + prior_info @ (prior_vec - x.as_vector())
        step = np.linalg.solve(hessian, grad)
        # backtrack on the step before counting a divergence strike
        scale = 1.0
        for _half in range(5):
            trial = models.NavState.from_vector(x.as_vector() + scale * step)
            jac_t, res_t, wts_t = residuals_and_jacobian(trial)
            new_cost = total_cost(trial, res_t)
            if new_cost <= cost or scale <= 1.0 / 16.0:
                break
            scale *= 0.5
        x, jac, res, wts = trial, jac_t, res_t, wts_t
        if new_cost > cost:
            strikes += 1
            if strikes >= DIVERGENCE_STRIKES:
                raise EstimationFailure("cost increased three consecutive iterations")
        else:
            strikes = 0
        cost = new_cost
        if scale * np.linalg.norm(step) < step_tol:
            break
    covariance = np.linalg.inv(jac.T @ (wts[:, None] * jac) + prior_info)
    return EstimatorState(x, covariance, dict(prior.landmarks))


def update_landmarks(
    inputs,
    selected_vision,
    state: models.NavState,
    estimates: dict,
    bounds,
    inflation: float = COV_INFLATION,
) -> dict:
    """One Gauss-Newton refinement step per observed landmark.

    Unobserved landmarks get their covariance inflated by ``inflation``.
    Observations with zero intensity gradient are skipped.
    """
    observed = {inputs.landmarks[j].id: j for j in selected_vision}
    out = {}
    for lm_id, est in estimates.items():
        j = observed.get(lm_id)
        if j is None:
            out[lm_id] = LandmarkEstimate(est.position, est.covariance * inflation)
            continue
        lm = inputs.landmarks[j]
        try:
            predicted, _, b_p = _vision_row(
                state, est, lm, inputs.keyframe, inputs.intrinsics, inputs.field
            )
        except models.BehindCameraError:
            out[lm_id] = LandmarkEstimate(est.position, est.covariance * inflation)
            continue
        if not b_p.any():
            out[lm_id] = est
            continue
        residual = float(inputs.intensities[j] - predicted)
        var = float(bounds.vision_for(lm_id).covariance[0, 0])
        w = 1.0 / max(var, 1e-12)
        prior_info = np.linalg.inv(est.covariance + 1e-12 * np.eye(3))
        info = prior_info + w * np.outer(b_p, b_p)
        cov = np.linalg.inv(info)
        step = cov @ (w * b_p * residual)
        out[lm_id] = LandmarkEstimate(est.position + step, cov)
    return out


def feedback_motion(
    available: bool, estimate: models.NavState, motion_mean: models.NavState
) -> models.NavState:
    """Availability-gated feedback: trust the estimate only when available."""
    return estimate if available else motion_mean
