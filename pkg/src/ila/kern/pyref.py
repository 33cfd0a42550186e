"""Pure-NumPy reference implementation of the hot kernels.

Semantics are shared with the compiled backend (``ila.kern._core``):

``union_cost``
    Weighted squared size of the confidence cut of the interval-hull /
    Gershgorin enclosure of scaled members. Member 0 is always included
    with unit scale; member ``i >= 1`` is included with scale
    ``q[i-1] / (1 - alpha[i-1])`` when ``q[i-1] > q_floor``.

``union_cost_grad``
    Same cost plus a forward finite-difference gradient with respect to
    ``q``, computed with leave-one-out hull prefixes so the whole
    gradient costs O(members x dims).

``box_qp``
    Coordinate descent for ``min_{b in [-1,1]^e} const - 2 v.b + b.A.b``
    (the Mahalanobis distance from a point to a zonotope).
"""

import numpy as np

BACKEND = "python"


def _scaled_boxes(centers, radii, gersh, alpha, q, q_floor):
    scale = np.concatenate(([1.0], q / (1.0 - alpha)))
    active = np.concatenate(([True], q > q_floor))
    s = scale[active, None]
    c = centers[active] * s
    r = radii[active] * s
    g = gersh[active] * (s * s)
    return c - r, c + r, g


def union_cost(centers, radii, gersh, alpha, q, w, m2, q_floor):
    lo, hi, g = _scaled_boxes(centers, radii, gersh, alpha, q, q_floor)
    hw = 0.5 * (hi.max(axis=0) - lo.min(axis=0))
    d = g.max(axis=0)
    return float(w @ (hw * hw + m2 * d))


def union_cost_grad(centers, radii, gersh, alpha, q, w, m2, q_floor, fd_step):
    n_land = len(q)
    scale = np.concatenate(([1.0], q / (1.0 - alpha)))
    active = np.concatenate(([True], q > q_floor))
    s = np.where(active, scale, 0.0)[:, None]
    lo = centers * s - radii * np.abs(s)
    hi = centers * s + radii * np.abs(s)
    g = gersh * (s * s)
    # Inactive members must not shrink the hull of the active ones.
    big = np.inf
    lo = np.where(active[:, None], lo, big)
    hi = np.where(active[:, None], hi, -big)
    g = np.where(active[:, None], g, 0.0)

    def _cost(lo_ax, hi_ax, d_ax):
        hw = 0.5 * (hi_ax - lo_ax)
        return float(w @ (hw * hw + m2 * d_ax))

    base = _cost(lo.min(axis=0), hi.max(axis=0), g.max(axis=0))

    m = len(scale)
    # prefix/suffix extrema over the member axis -> leave-one-out hulls
    pref_lo = np.minimum.accumulate(lo, axis=0)
    pref_hi = np.maximum.accumulate(hi, axis=0)
    pref_g = np.maximum.accumulate(g, axis=0)
    suf_lo = np.minimum.accumulate(lo[::-1], axis=0)[::-1]
    suf_hi = np.maximum.accumulate(hi[::-1], axis=0)[::-1]
    suf_g = np.maximum.accumulate(g[::-1], axis=0)[::-1]

    grad = np.zeros(n_land)
    for j in range(n_land):
        i = j + 1  # member 0 is the motion set, never perturbed
        if i == m - 1:
            loo_lo, loo_hi, loo_g = pref_lo[i - 1], pref_hi[i - 1], pref_g[i - 1]
        else:
            loo_lo = np.minimum(pref_lo[i - 1], suf_lo[i + 1])
            loo_hi = np.maximum(pref_hi[i - 1], suf_hi[i + 1])
            loo_g = np.maximum(pref_g[i - 1], suf_g[i + 1])
        qj = q[j] + fd_step
        if qj > q_floor:
            sj = qj / (1.0 - alpha[j])
            lo_j = np.minimum(loo_lo, centers[i] * sj - radii[i] * sj)
            hi_j = np.maximum(loo_hi, centers[i] * sj + radii[i] * sj)
            g_j = np.maximum(loo_g, gersh[i] * sj * sj)
        else:
            lo_j, hi_j, g_j = loo_lo, loo_hi, loo_g
        grad[j] = (_cost(lo_j, hi_j, g_j) - base) / fd_step
    return base, grad


def box_qp(a_mat, v, const, tol=1e-10, max_iter=10000):
    e = len(v)
    beta = np.zeros(e)
    if e == 0:
        return beta, max(const, 0.0)
    diag = np.diag(a_mat)
    obj = const
    for _ in range(max_iter):
        for i in range(e):
            if diag[i] <= 0.0:
                continue
            num = v[i] - a_mat[i] @ beta + diag[i] * beta[i]
            beta[i] = min(1.0, max(-1.0, num / diag[i]))
        new_obj = const - 2.0 * (v @ beta) + beta @ a_mat @ beta
        if obj - new_obj < tol:
            obj = new_obj
            break
        obj = new_obj
    return beta, max(float(obj), 0.0)
