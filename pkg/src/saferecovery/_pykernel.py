"""Pure-Python closed-loop kernel (fallback when the compiled extension is absent).

Mirrors ``_ckernel.pyx`` operation by operation; see ``kernel.run_closed_loop``
for the argument contract.
"""

import numpy as np

STATUS_OK = 0
STATUS_INFEASIBLE = 1
STATUS_NONFINITE = 2


def run_closed_loop(a, b, c, l_nom, l_att, sec_idx, vul_idx, k_gain, m_bar, q_bar, r_bar,
                    t_grid, attacked, hold_policy, y_attack, z0, stage_feedback):
    n = a.shape[0]
    m = b.shape[1]
    n_steps = t_grid.shape[0] - 1
    c_sec = c[sec_idx, :]
    c_vul = c[vul_idx, :]
    has_sec = sec_idx.shape[0] > 0

    z_log = np.zeros((n_steps + 1, 2 * n))
    u_log = np.zeros((n_steps + 1, m))
    qp_log = np.zeros((n_steps + 1, 3))
    x = z0[:n].copy()
    xh = z0[n:].copy()
    hold = np.zeros(vul_idx.shape[0])
    status = STATUS_OK
    last = n_steps

    def qp(x, xh, att, y_vul):
        # closed-form projection of (-K xh, 0) onto {g . w <= c}
        y = c @ x
        if att:
            y[vul_idx] = y_vul
            innov = l_att @ (y[sec_idx] - c_sec @ xh) if has_sec else np.zeros(n)
        else:
            innov = l_nom @ (y - c @ xh)
        grad = 2.0 * (m_bar @ xh) + q_bar
        h = float(xh @ m_bar @ xh + q_bar @ xh + r_bar)
        g = np.empty(m + 1)
        g[:m] = grad @ b
        g[m] = h
        cval = -float(grad @ (a @ xh + innov))
        w = np.empty(m + 1)
        w[:m] = -(k_gain @ xh)
        w[m] = 0.0
        viol = float(g @ w) - cval
        lam = 0.0
        if viol > 0.0:
            gg = float(g @ g)
            if gg == 0.0:
                return None, 0.0, 0.0
            lam = viol / gg
            w = w - lam * g
        return w[:m], lam, w[m]

    def rhs(x, xh, u, att):
        bu = b @ u
        dx = a @ x + bu
        if att:
            if has_sec:
                dxh = a @ xh + bu + l_att @ (c_sec @ x - c_sec @ xh)
            else:
                dxh = a @ xh + bu
        else:
            dxh = a @ xh + bu + l_nom @ (c @ x - c @ xh)
        return dx, dxh

    for k in range(n_steps + 1):
        att = bool(attacked[k])
        if att and (k == 0 or not attacked[k - 1]):
            hold = c_vul @ x
        y_vul = hold if hold_policy else y_attack[k]
        u, lam, slack = qp(x, xh, att, y_vul)
        z_log[k, :n] = x
        z_log[k, n:] = xh
        if u is None:
            status = STATUS_INFEASIBLE
            last = k
            break
        u_log[k] = u
        qp_log[k, 0] = 1.0 if lam > 0.0 else 0.0
        qp_log[k, 1] = lam
        qp_log[k, 2] = slack
        if k == n_steps:
            break
        dt = t_grid[k + 1] - t_grid[k]
        kx = []
        kh = []
        for st in range(4):
            if st == 0:
                xs, xhs = x, xh
            else:
                wst = dt if st == 3 else 0.5 * dt
                xs, xhs = x + wst * kx[-1], xh + wst * kh[-1]
                if stage_feedback:
                    u, _, _ = qp(xs, xhs, att, y_vul)
                    if u is None:
                        break
            dx, dxh = rhs(xs, xhs, u, att)
            kx.append(dx)
            kh.append(dxh)
        if u is None:
            status = STATUS_INFEASIBLE
            last = k
            break
        x = x + (dt / 6.0) * (kx[0] + 2.0 * kx[1] + 2.0 * kx[2] + kx[3])
        xh = xh + (dt / 6.0) * (kh[0] + 2.0 * kh[1] + 2.0 * kh[2] + kh[3])
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xh))):
            status = STATUS_NONFINITE
            last = k
            break
    return z_log, u_log, qp_log, status, last
