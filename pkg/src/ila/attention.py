"""Landmark selection: relaxed fractional optimization, rounding, bounds.

Minimizes (union cost) / (number of included landmarks) over inclusion
weights in [0, 1] subject to per-sensor minimum counts, then rounds at a
threshold with constraint repair. An exhaustive oracle provides ground
truth on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kern, pzono, reach
from .errors import (
    InfeasibleSelectionError,
    InstanceTooLargeError,
    InvalidInputError,
)

DEFAULT_WEIGHTS = pzono.WeightVector([0.3, 0.3, 0.3, 0.02, 0.02, 0.02, 0.04])
POSITION_WEIGHTS = pzono.WeightVector([1 / 3, 1 / 3, 1 / 3, 0.0, 0.0, 0.0, 0.0])

ORACLE_CAP = 20
DINKELBACH_TOL = 1e-4
DINKELBACH_MAX_OUTER = 50
INNER_ITERS = 120


@dataclass(frozen=True)
class SelectionConfig:
    n_min: int = 5
    l_min: int = 10
    beta: float = 0.75
    gamma: float = 0.999
    alert_limit: float = 7.5
    weights: pzono.WeightVector = DEFAULT_WEIGHTS
    bound_weights: pzono.WeightVector = POSITION_WEIGHTS

    def __post_init__(self):
        if self.n_min < 1 or self.l_min < 0:
            raise InvalidInputError("n_min must be >= 1 and l_min >= 0")
        if not 0.0 < self.beta < 1.0:
            raise InvalidInputError("beta must lie in (0, 1)")
        if not 0.0 < self.gamma < 1.0:
            raise InvalidInputError("gamma must lie in (0, 1)")
        if self.alert_limit <= 0:
            raise InvalidInputError("alert limit must be positive")


@dataclass(frozen=True)
class AttentionSet:
    """Per-landmark inclusion weights, relaxed in [0,1] or rounded to {0,1}."""

    gps_weights: np.ndarray
    vision_weights: np.ndarray
    relaxed: bool

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gps_weights, dtype=float))
        v = np.atleast_1d(np.asarray(self.vision_weights, dtype=float)) if np.size(self.vision_weights) else np.zeros(0)
        for arr in (g, v):
            if ((arr < 0) | (arr > 1)).any():
                raise InvalidInputError("inclusion weights must lie in [0, 1]")
            if not self.relaxed and not np.isin(arr, (0.0, 1.0)).all():
                raise InvalidInputError("rounded weights must be binary")
            arr.setflags(write=False)
        object.__setattr__(self, "gps_weights", g)
        object.__setattr__(self, "vision_weights", v)

    @property
    def total(self) -> float:
        return float(self.gps_weights.sum() + self.vision_weights.sum())

    def counts(self):
        return int(round(self.gps_weights.sum())), int(round(self.vision_weights.sum()))


@dataclass(frozen=True)
class SelectionResult:
    rounded: AttentionSet
    relaxed: AttentionSet
    predicted_bound: float
    available: bool
    objective: float

    def to_dict(self, epoch: int | None = None) -> dict:
        d = {
            "q_gps": self.rounded.gps_weights.tolist(),
            "q_vis": self.rounded.vision_weights.tolist(),
            "predicted_bound_m": self.predicted_bound,
            "available": bool(self.available),
            "objective": self.objective,
        }
        if epoch is not None:
            d = {"epoch": epoch, **d}
        return d


def objective(q: AttentionSet, epoch: reach.EpochReach, cfg: SelectionConfig) -> float:
    """Union cost per included landmark."""
    total = q.total
    if total <= 0:
        raise InvalidInputError("objective undefined for an all-zero attention set")
    cost = epoch.cost(q.gps_weights, q.vision_weights, cfg.gamma, cfg.weights)
    return cost / total


def _project_counts(q: np.ndarray, n_gps: int, n_min: int, l_min: int, active_vis: np.ndarray) -> np.ndarray:
    """Project onto [0,1]^d intersected with per-sensor minimum-sum halfspaces."""
    out = np.clip(q, 0.0, 1.0)
    out[n_gps:][~active_vis] = 0.0

    def lift(block, minimum, mask=None):
        idx = np.arange(len(block)) if mask is None else np.nonzero(mask)[0]
        if len(idx) < minimum:
            raise InfeasibleSelectionError("not enough landmarks for the minimum count")
        vals = block[idx]
        if vals.sum() >= minimum:
            return block
        lo_t, hi_t = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo_t + hi_t)
            if np.clip(vals + mid, 0.0, 1.0).sum() >= minimum:
                hi_t = mid
            else:
                lo_t = mid
        block = block.copy()
        block[idx] = np.clip(vals + hi_t, 0.0, 1.0)
        return block

    out[:n_gps] = lift(out[:n_gps], n_min)
    out[n_gps:] = lift(out[n_gps:], l_min, active_vis)
    return out


def solve_relaxed(epoch: reach.EpochReach, cfg: SelectionConfig) -> AttentionSet:
    """Relaxed fractional minimization via Dinkelbach iterations.

    Outer iterations update the ratio parameter (relative tolerance on
    its change); the inner problem (cost minus ratio times count) is
    handled with projected subgradient steps using the kernel's
    forward-difference gradient. Deterministic: fixed all-ones
    initialization, no randomness.
    """
    n_gps, n_vis = epoch.n_gps, epoch.n_vis
    active_vis = epoch.active_vision
    if n_gps < cfg.n_min or int(active_vis.sum()) < cfg.l_min:
        raise InfeasibleSelectionError(
            f"need >= {cfg.n_min} GPS and >= {cfg.l_min} vision landmarks; "
            f"have {n_gps} and {int(active_vis.sum())}"
        )

    ctx = epoch.kernel_context(cfg.gamma, cfg.weights)
    q = ctx.mask(np.ones(n_gps + n_vis))
    lam = ctx.cost(q) / q.sum()

    best_q = q.copy()
    best_ratio = lam
    for _ in range(DINKELBACH_MAX_OUTER):
        inner_q = best_q.copy()
        inner_best = inner_q.copy()
        inner_best_val = np.inf
        for t in range(INNER_ITERS):
            cost, grad_cost = ctx.cost_grad(inner_q)
            val = cost - lam * inner_q.sum()
            if val < inner_best_val:
                inner_best_val = val
                inner_best = inner_q.copy()
            grad = grad_cost - lam
            norm = np.linalg.norm(grad)
            if norm <= 1e-14:
                break
            step = 0.5 / (norm * np.sqrt(t + 1.0))
            inner_q = ctx.mask(
                _project_counts(
                    inner_q - step * grad, n_gps, cfg.n_min, cfg.l_min, active_vis
                )
            )
        q = inner_best
        new_lam = ctx.cost(q) / q.sum()
        moved = float(np.abs(q - best_q).max())
        if new_lam < best_ratio:
            best_ratio = new_lam
            best_q = q.copy()
        if abs(new_lam - lam) < DINKELBACH_TOL * max(abs(lam), 1e-12) and moved < 1e-3:
            break
        lam = min(new_lam, best_ratio)
    return AttentionSet(best_q[:n_gps], best_q[n_gps:], relaxed=True)


def round_attention(relaxed: AttentionSet, cfg: SelectionConfig) -> AttentionSet:
    """Threshold at beta; repair violated count minima by top-weight inclusion."""
    if not relaxed.relaxed:
        return relaxed

    def round_block(weights, minimum, label):
        bits = (weights >= cfg.beta).astype(float)
        if bits.sum() < minimum:
            if len(weights) < minimum:
                raise InfeasibleSelectionError(
                    f"cannot include {minimum} {label} landmarks out of {len(weights)}"
                )
            excluded = np.nonzero(bits == 0.0)[0]
            order = excluded[np.argsort(-weights[excluded], kind="stable")]
            need = int(minimum - bits.sum())
            bits[order[:need]] = 1.0
        return bits

    return AttentionSet(
        round_block(relaxed.gps_weights, cfg.n_min, "GPS"),
        round_block(relaxed.vision_weights, cfg.l_min, "vision"),
        relaxed=False,
    )


def predict_availability(
    rounded: AttentionSet,
    epoch: reach.EpochReach,
    cfg: SelectionConfig,
    relaxed: AttentionSet | None = None,
) -> SelectionResult:
    """Predicted position error bound for the rounded set, against the alert limit."""
    bound_sq = epoch.cost(
        rounded.gps_weights, rounded.vision_weights, cfg.gamma, cfg.bound_weights
    )
    bound = float(np.sqrt(bound_sq))
    obj = objective(rounded, epoch, cfg) if rounded.total > 0 else 0.0
    return SelectionResult(
        rounded=rounded,
        relaxed=relaxed if relaxed is not None else rounded,
        predicted_bound=bound,
        available=bound <= cfg.alert_limit,
        objective=obj,
    )


def select_landmarks(epoch: reach.EpochReach, cfg: SelectionConfig) -> SelectionResult:
    """Full selection step: relax, round, predict."""
    relaxed = solve_relaxed(epoch, cfg)
    rounded = round_attention(relaxed, cfg)
    return predict_availability(rounded, epoch, cfg, relaxed=relaxed)


def brute_force_oracle(epoch: reach.EpochReach, cfg: SelectionConfig) -> AttentionSet:
    """Exhaustive minimizer of the rounded objective on small instances.

    Ties break toward more landmarks, then lexicographically smallest
    assignment (GPS bits first).
    """
    n_gps, n_vis = epoch.n_gps, epoch.n_vis
    total = n_gps + n_vis
    if total > ORACLE_CAP:
        raise InstanceTooLargeError(f"{total} landmarks exceeds oracle cap {ORACLE_CAP}")
    active_vis = epoch.active_vision
    if n_gps < cfg.n_min or int(active_vis.sum()) < cfg.l_min:
        raise InfeasibleSelectionError("count constraints infeasible")

    m2 = pzono.coverage_multiplier(cfg.gamma) ** 2
    best = None
    best_key = None
    for code in range(1 << total):
        bits = np.array([(code >> k) & 1 for k in range(total)], dtype=float)
        if bits[:n_gps].sum() < cfg.n_min:
            continue
        vis_bits = bits[n_gps:]
        if (vis_bits[~active_vis] > 0).any():
            continue
        if vis_bits.sum() < cfg.l_min:
            continue
        cost = kern.union_cost(
            epoch._centers, epoch._radii, epoch._covb, epoch._alpha, bits,
            cfg.weights.weights, m2, reach.Q_FLOOR,
        )
        key = (cost / bits.sum(), -bits.sum(), tuple(bits))
        if best_key is None or key < best_key:
            best_key = key
            best = bits
    if best is None:
        raise InfeasibleSelectionError("no feasible assignment")
    return AttentionSet(best[:n_gps], best[n_gps:], relaxed=False)
