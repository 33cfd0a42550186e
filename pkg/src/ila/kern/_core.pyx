# Compiled hot kernels; see ila.kern.pyref for the reference semantics.

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


cdef double _hull_cost(double[:, ::1] lo, double[:, ::1] hi, double[:, ::1] g,
                       unsigned char[::1] active, const double[::1] w, double m2,
                       Py_ssize_t m, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double lo_j, hi_j, g_j, hw, cost = 0.0
    for j in range(n):
        lo_j = lo[0, j]
        hi_j = hi[0, j]
        g_j = g[0, j]
        for i in range(1, m):
            if not active[i]:
                continue
            if lo[i, j] < lo_j:
                lo_j = lo[i, j]
            if hi[i, j] > hi_j:
                hi_j = hi[i, j]
            if g[i, j] > g_j:
                g_j = g[i, j]
        hw = 0.5 * (hi_j - lo_j)
        cost += w[j] * (hw * hw + m2 * g_j)
    return cost


def union_cost(cnp.ndarray centers_in, cnp.ndarray radii_in, cnp.ndarray gersh_in,
               cnp.ndarray alpha_in, cnp.ndarray q_in, cnp.ndarray w_in,
               double m2, double q_floor):
    cdef const double[:, ::1] centers = np.ascontiguousarray(centers_in, dtype=np.float64)
    cdef const double[:, ::1] radii = np.ascontiguousarray(radii_in, dtype=np.float64)
    cdef const double[:, ::1] gersh = np.ascontiguousarray(gersh_in, dtype=np.float64)
    cdef const double[::1] alpha = np.ascontiguousarray(alpha_in, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t m = centers.shape[0]
    cdef Py_ssize_t n = centers.shape[1]
    cdef Py_ssize_t i, j
    cdef double s

    lo_a = np.empty((m, n), dtype=np.float64)
    hi_a = np.empty((m, n), dtype=np.float64)
    g_a = np.empty((m, n), dtype=np.float64)
    act_a = np.zeros(m, dtype=np.uint8)
    cdef double[:, ::1] lo = lo_a
    cdef double[:, ::1] hi = hi_a
    cdef double[:, ::1] g = g_a
    cdef unsigned char[::1] active = act_a

    active[0] = 1
    for j in range(n):
        lo[0, j] = centers[0, j] - radii[0, j]
        hi[0, j] = centers[0, j] + radii[0, j]
        g[0, j] = gersh[0, j]
    for i in range(1, m):
        if q[i - 1] > q_floor:
            active[i] = 1
            s = q[i - 1] / (1.0 - alpha[i - 1])
            for j in range(n):
                lo[i, j] = centers[i, j] * s - radii[i, j] * s
                hi[i, j] = centers[i, j] * s + radii[i, j] * s
                g[i, j] = gersh[i, j] * s * s
    return _hull_cost(lo, hi, g, active, w, m2, m, n)


def union_cost_grad(cnp.ndarray centers_in, cnp.ndarray radii_in, cnp.ndarray gersh_in,
                    cnp.ndarray alpha_in, cnp.ndarray q_in, cnp.ndarray w_in,
                    double m2, double q_floor, double fd_step):
    cdef const double[:, ::1] centers = np.ascontiguousarray(centers_in, dtype=np.float64)
    cdef const double[:, ::1] radii = np.ascontiguousarray(radii_in, dtype=np.float64)
    cdef const double[:, ::1] gersh = np.ascontiguousarray(gersh_in, dtype=np.float64)
    cdef const double[::1] alpha = np.ascontiguousarray(alpha_in, dtype=np.float64)
    cdef const double[::1] q = np.ascontiguousarray(q_in, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t m = centers.shape[0]
    cdef Py_ssize_t n = centers.shape[1]
    cdef Py_ssize_t i, j, jj
    cdef double s, qj, lo_j, hi_j, g_j, hw, base, cost

    cdef double BIG = 1e300
    lo_a = np.empty((m, n), dtype=np.float64)
    hi_a = np.empty((m, n), dtype=np.float64)
    g_a = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] lo = lo_a
    cdef double[:, ::1] hi = hi_a
    cdef double[:, ::1] g = g_a

    for j in range(n):
        lo[0, j] = centers[0, j] - radii[0, j]
        hi[0, j] = centers[0, j] + radii[0, j]
        g[0, j] = gersh[0, j]
    for i in range(1, m):
        if q[i - 1] > q_floor:
            s = q[i - 1] / (1.0 - alpha[i - 1])
            for j in range(n):
                lo[i, j] = centers[i, j] * s - radii[i, j] * s
                hi[i, j] = centers[i, j] * s + radii[i, j] * s
                g[i, j] = gersh[i, j] * s * s
        else:
            for j in range(n):
                lo[i, j] = BIG
                hi[i, j] = -BIG
                g[i, j] = 0.0

    pref_lo_a = np.empty((m, n), dtype=np.float64)
    pref_hi_a = np.empty((m, n), dtype=np.float64)
    pref_g_a = np.empty((m, n), dtype=np.float64)
    suf_lo_a = np.empty((m, n), dtype=np.float64)
    suf_hi_a = np.empty((m, n), dtype=np.float64)
    suf_g_a = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] pref_lo = pref_lo_a
    cdef double[:, ::1] pref_hi = pref_hi_a
    cdef double[:, ::1] pref_g = pref_g_a
    cdef double[:, ::1] suf_lo = suf_lo_a
    cdef double[:, ::1] suf_hi = suf_hi_a
    cdef double[:, ::1] suf_g = suf_g_a

    grad_a = np.zeros(m - 1, dtype=np.float64)
    cdef double[::1] grad = grad_a

    with nogil:
        for j in range(n):
            pref_lo[0, j] = lo[0, j]
            pref_hi[0, j] = hi[0, j]
            pref_g[0, j] = g[0, j]
        for i in range(1, m):
            for j in range(n):
                pref_lo[i, j] = lo[i, j] if lo[i, j] < pref_lo[i - 1, j] else pref_lo[i - 1, j]
                pref_hi[i, j] = hi[i, j] if hi[i, j] > pref_hi[i - 1, j] else pref_hi[i - 1, j]
                pref_g[i, j] = g[i, j] if g[i, j] > pref_g[i - 1, j] else pref_g[i - 1, j]
        for j in range(n):
            suf_lo[m - 1, j] = lo[m - 1, j]
            suf_hi[m - 1, j] = hi[m - 1, j]
            suf_g[m - 1, j] = g[m - 1, j]
        for i in range(m - 2, -1, -1):
            for j in range(n):
                suf_lo[i, j] = lo[i, j] if lo[i, j] < suf_lo[i + 1, j] else suf_lo[i + 1, j]
                suf_hi[i, j] = hi[i, j] if hi[i, j] > suf_hi[i + 1, j] else suf_hi[i + 1, j]
                suf_g[i, j] = g[i, j] if g[i, j] > suf_g[i + 1, j] else suf_g[i + 1, j]

        base = 0.0
        for j in range(n):
            hw = 0.5 * (pref_hi[m - 1, j] - pref_lo[m - 1, j])
            base += w[j] * (hw * hw + m2 * pref_g[m - 1, j])

        for i in range(1, m):
            jj = i - 1
            qj = q[jj] + fd_step
            cost = 0.0
            for j in range(n):
                lo_j = pref_lo[i - 1, j]
                hi_j = pref_hi[i - 1, j]
                g_j = pref_g[i - 1, j]
                if i < m - 1:
                    if suf_lo[i + 1, j] < lo_j:
                        lo_j = suf_lo[i + 1, j]
                    if suf_hi[i + 1, j] > hi_j:
                        hi_j = suf_hi[i + 1, j]
                    if suf_g[i + 1, j] > g_j:
                        g_j = suf_g[i + 1, j]
                if qj > q_floor:
                    s = qj / (1.0 - alpha[jj])
                    if centers[i, j] * s - radii[i, j] * s < lo_j:
                        lo_j = centers[i, j] * s - radii[i, j] * s
                    if centers[i, j] * s + radii[i, j] * s > hi_j:
                        hi_j = centers[i, j] * s + radii[i, j] * s
                    if gersh[i, j] * s * s > g_j:
                        g_j = gersh[i, j] * s * s
                hw = 0.5 * (hi_j - lo_j)
                cost += w[j] * (hw * hw + m2 * g_j)
            grad[jj] = (cost - base) / fd_step

    return base, grad_a


def box_qp(cnp.ndarray a_in, cnp.ndarray v_in, double const,
           double tol=1e-10, int max_iter=10000):
    cdef const double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef Py_ssize_t e = v.shape[0]
    beta_a = np.zeros(e, dtype=np.float64)
    cdef double[::1] beta = beta_a
    cdef Py_ssize_t i, k, it
    cdef double num, obj, new_obj, acc

    if e == 0:
        return beta_a, max(const, 0.0)

    obj = const
    with nogil:
        for it in range(max_iter):
            for i in range(e):
                if a[i, i] <= 0.0:
                    continue
                num = v[i]
                for k in range(e):
                    num -= a[i, k] * beta[k]
                num += a[i, i] * beta[i]
                num /= a[i, i]
                if num > 1.0:
                    num = 1.0
                elif num < -1.0:
                    num = -1.0
                beta[i] = num
            new_obj = const
            for i in range(e):
                acc = 0.0
                for k in range(e):
                    acc += a[i, k] * beta[k]
                new_obj += beta[i] * acc - 2.0 * v[i] * beta[i]
            if obj - new_obj < tol:
                obj = new_obj
                break
            obj = new_obj
    if obj < 0.0:
        obj = 0.0
    return beta_a, obj
