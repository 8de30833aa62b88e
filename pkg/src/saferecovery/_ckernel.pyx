# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop kernel: RK4 on (x, xh) with a CBF-QP input.

Same contract and operation order as ``_pykernel.run_closed_loop``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport isfinite

cnp.import_array()

cdef enum:
    STATUS_OK = 0
    STATUS_INFEASIBLE = 1
    STATUS_NONFINITE = 2


cdef struct Work:
    Py_ssize_t n, m, p, ns, nv
    double r_bar


cdef inline void matvec(const double[:, ::1] mat, const double[::1] v, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s
    for i in range(mat.shape[0]):
        s = 0.0
        for j in range(mat.shape[1]):
            s += mat[i, j] * v[j]
        out[i] = s


cdef bint qp(Work wk, const double[:, ::1] a, const double[:, ::1] b, const double[:, ::1] c,
             const double[:, ::1] l_nom, const double[:, ::1] l_att, const double[:, ::1] c_sec,
             const cnp.intp_t[::1] sec_idx, const cnp.intp_t[::1] vul_idx,
             const double[:, ::1] k_gain, const double[:, ::1] m_bar, const double[::1] q_bar,
             const double[::1] x, const double[::1] xh, bint att, const double[::1] y_vul,
             double[::1] y, double[::1] tmp_p, double[::1] innov, double[::1] grad,
             double[::1] tmp_n, double[::1] g, double[::1] w, double* lam_out) noexcept nogil:
    """Closed-form projection of (-K xh, 0) onto {g . w <= c}; False if infeasible."""
    cdef Py_ssize_t i, j, n = wk.n, m = wk.m
    cdef double s, h, cval, viol, lam, gg
    matvec(c, x, y)
    if att:
        for i in range(wk.nv):
            y[vul_idx[i]] = y_vul[i]
        for i in range(wk.ns):
            s = 0.0
            for j in range(n):
                s += c_sec[i, j] * xh[j]
            tmp_p[i] = y[sec_idx[i]] - s
        for i in range(n):
            s = 0.0
            for j in range(wk.ns):
                s += l_att[i, j] * tmp_p[j]
            innov[i] = s
    else:
        for i in range(wk.p):
            s = 0.0
            for j in range(n):
                s += c[i, j] * xh[j]
            tmp_p[i] = y[i] - s
        for i in range(n):
            s = 0.0
            for j in range(wk.p):
                s += l_nom[i, j] * tmp_p[j]
            innov[i] = s
    h = wk.r_bar
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += m_bar[i, j] * xh[j]
        grad[i] = 2.0 * s + q_bar[i]
        h += xh[i] * s + q_bar[i] * xh[i]
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += grad[i] * b[i, j]
        g[j] = s
    g[m] = h
    matvec(a, xh, tmp_n)
    cval = 0.0
    for i in range(n):
        cval += grad[i] * (tmp_n[i] + innov[i])
    cval = -cval
    for i in range(m):
        s = 0.0
        for j in range(n):
            s += k_gain[i, j] * xh[j]
        w[i] = -s
    w[m] = 0.0
    viol = 0.0
    for i in range(m + 1):
        viol += g[i] * w[i]
    viol = viol - cval
    lam = 0.0
    if viol > 0.0:
        gg = 0.0
        for i in range(m + 1):
            gg += g[i] * g[i]
        if gg == 0.0:
            return False
        lam = viol / gg
        for i in range(m + 1):
            w[i] = w[i] - lam * g[i]
    lam_out[0] = lam
    return True


cdef void rhs(const double[:, ::1] a, const double[:, ::1] b, const double[:, ::1] gain,
              const double[:, ::1] c_obs, const double[::1] x, const double[::1] xh,
              const double[::1] u, double[::1] dx, double[::1] dxh,
              double[::1] bu, double[::1] tmp_p) noexcept nogil:
    cdef Py_ssize_t i, j, n = a.shape[0], p_obs = c_obs.shape[0]
    cdef double s
    matvec(b, u, bu)
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j] * x[j]
        dx[i] = s + bu[i]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += a[i, j] * xh[j]
        dxh[i] = s + bu[i]
    if p_obs > 0:
        # gain @ (C_obs x - C_obs xh)
        for i in range(p_obs):
            s = 0.0
            for j in range(n):
                s += c_obs[i, j] * x[j]
            tmp_p[i] = s
            s = 0.0
            for j in range(n):
                s += c_obs[i, j] * xh[j]
            tmp_p[i] = tmp_p[i] - s
        for i in range(n):
            s = 0.0
            for j in range(p_obs):
                s += gain[i, j] * tmp_p[j]
            dxh[i] = dxh[i] + s


def run_closed_loop(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c,
                    double[:, ::1] l_nom, double[:, ::1] l_att,
                    cnp.intp_t[::1] sec_idx, cnp.intp_t[::1] vul_idx,
                    double[:, ::1] k_gain, double[:, ::1] m_bar, double[::1] q_bar, double r_bar,
                    double[::1] t_grid, cnp.int8_t[::1] attacked, bint hold_policy,
                    double[:, ::1] y_attack, double[::1] z0, bint stage_feedback):
    cdef Work wk
    wk.n = a.shape[0]
    wk.m = b.shape[1]
    wk.p = c.shape[0]
    wk.ns = sec_idx.shape[0]
    wk.nv = vul_idx.shape[0]
    wk.r_bar = r_bar
    cdef Py_ssize_t n = wk.n, m = wk.m
    cdef Py_ssize_t n_steps = t_grid.shape[0] - 1
    cdef Py_ssize_t i, j, k, st
    cdef int status = STATUS_OK
    cdef Py_ssize_t last = n_steps
    cdef bint att, ok = True
    cdef double s, lam = 0.0, lam_stage = 0.0, dt, wst

    c_sec_np = np.ascontiguousarray(np.asarray(c)[np.asarray(sec_idx), :])
    c_vul_np = np.ascontiguousarray(np.asarray(c)[np.asarray(vul_idx), :])
    cdef double[:, ::1] c_sec = c_sec_np
    cdef double[:, ::1] c_vul = c_vul_np

    z_np = np.zeros((n_steps + 1, 2 * n))
    u_np = np.zeros((n_steps + 1, m))
    qp_np = np.zeros((n_steps + 1, 3))
    cdef double[:, ::1] z_log = z_np
    cdef double[:, ::1] u_log = u_np
    cdef double[:, ::1] qp_log = qp_np

    cdef double[::1] x = np.array(z0[:n])
    cdef double[::1] xh = np.array(z0[n:])
    cdef double[::1] xs = np.zeros(n)
    cdef double[::1] xhs = np.zeros(n)
    cdef double[::1] hold = np.zeros(wk.nv)
    cdef double[::1] y_vul = np.zeros(wk.nv)
    cdef double[::1] y = np.zeros(wk.p)
    cdef double[::1] innov = np.zeros(n)
    cdef double[::1] grad = np.zeros(n)
    cdef double[::1] g = np.zeros(m + 1)
    cdef double[::1] w = np.zeros(m + 1)
    cdef double[::1] u = np.zeros(m)
    cdef double[::1] bu = np.zeros(n)
    cdef double[::1] tmp_p = np.zeros(max(wk.p, 1))
    cdef double[::1] tmp_n = np.zeros(n)
    cdef double[:, ::1] kx = np.zeros((4, n))
    cdef double[:, ::1] kh = np.zeros((4, n))
    cdef double[:, ::1] gain
    cdef double[:, ::1] c_obs

    for k in range(n_steps + 1):
        att = attacked[k] != 0
        if att and (k == 0 or attacked[k - 1] == 0):
            for i in range(wk.nv):
                s = 0.0
                for j in range(n):
                    s += c_vul[i, j] * x[j]
                hold[i] = s
        for i in range(wk.nv):
            y_vul[i] = hold[i] if hold_policy else y_attack[k, i]
        ok = qp(wk, a, b, c, l_nom, l_att, c_sec, sec_idx, vul_idx, k_gain, m_bar, q_bar,
                x, xh, att, y_vul, y, tmp_p, innov, grad, tmp_n, g, w, &lam)
        for i in range(n):
            z_log[k, i] = x[i]
            z_log[k, n + i] = xh[i]
        if not ok:
            status = STATUS_INFEASIBLE
            last = k
            break
        for i in range(m):
            u[i] = w[i]
            u_log[k, i] = w[i]
        qp_log[k, 0] = 1.0 if lam > 0.0 else 0.0
        qp_log[k, 1] = lam
        qp_log[k, 2] = w[m]
        if k == n_steps:
            break
        dt = t_grid[k + 1] - t_grid[k]
        if att:
            gain = l_att
            c_obs = c_sec
        else:
            gain = l_nom
            c_obs = c
        for st in range(4):
            if st == 0:
                for i in range(n):
                    xs[i] = x[i]
                    xhs[i] = xh[i]
            else:
                wst = dt if st == 3 else 0.5 * dt
                for i in range(n):
                    xs[i] = x[i] + wst * kx[st - 1, i]
                    xhs[i] = xh[i] + wst * kh[st - 1, i]
                if stage_feedback:
                    ok = qp(wk, a, b, c, l_nom, l_att, c_sec, sec_idx, vul_idx, k_gain, m_bar,
                            q_bar, xs, xhs, att, y_vul, y, tmp_p, innov, grad, tmp_n, g, w,
                            &lam_stage)
                    if not ok:
                        break
                    for i in range(m):
                        u[i] = w[i]
            rhs(a, b, gain, c_obs, xs, xhs, u, kx[st], kh[st], bu, tmp_p)
        if not ok:
            status = STATUS_INFEASIBLE
            last = k
            break
        for i in range(n):
            x[i] = x[i] + (dt / 6.0) * (kx[0, i] + 2.0 * kx[1, i] + 2.0 * kx[2, i] + kx[3, i])
            xh[i] = xh[i] + (dt / 6.0) * (kh[0, i] + 2.0 * kh[1, i] + 2.0 * kh[2, i] + kh[3, i])
        for i in range(n):
            if not (isfinite(x[i]) and isfinite(xh[i])):
                status = STATUS_NONFINITE
                last = k
                break
        if status != STATUS_OK:
            break
    return z_np, u_np, qp_np, status, last
