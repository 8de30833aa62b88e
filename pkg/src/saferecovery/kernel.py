"""Backend selection for the closed-loop integration kernel.

The compiled extension ``_ckernel`` is used when it imports; otherwise the
pure-Python ``_pykernel`` runs.  Set ``SAFERECOVERY_BACKEND=python`` to force
the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

STATUS_OK = _pykernel.STATUS_OK
STATUS_INFEASIBLE = _pykernel.STATUS_INFEASIBLE
STATUS_NONFINITE = _pykernel.STATUS_NONFINITE

_BACKENDS = {"python": _pykernel}
if _ckernel is not None:
    _BACKENDS["cython"] = _ckernel


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def default_backend() -> str:
    forced = os.environ.get("SAFERECOVERY_BACKEND", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(f"backend {forced!r} unavailable; have {available_backends()}")
        return forced
    return "cython" if "cython" in _BACKENDS else "python"


BACKEND = default_backend()


def run_closed_loop(a, b, c, l_nom, l_att, sec_idx, vul_idx, k_gain, m_bar, q_bar, r_bar,
                    t_grid, attacked, hold_policy, y_attack, z0, stage_feedback=True,
                    backend: str | None = None):
    """Integrate the coupled plant/observer loop on *t_grid*.

    ``attacked[k]`` is the mode on ``[t_k, t_{k+1})`` (and at ``t_k``).  The
    vulnerable channels read ``y_attack[k]`` under attack, or the value at
    the attack start when *hold_policy* is set.  With *stage_feedback* the QP
    input is re-evaluated at every RK4 stage; otherwise it is held over the
    step.  Returns ``(z, u, qp, status,
    last)`` where ``qp`` columns are (active, multiplier, slack) and rows
    beyond *last* are unused when ``status != STATUS_OK``.
    """
    mod = _BACKENDS[backend or BACKEND]
    f64 = lambda v: np.array(v, dtype=np.float64, order="C")  # noqa: E731  (writable copy)
    n = np.asarray(a).shape[0]
    return mod.run_closed_loop(
        f64(a), f64(b), f64(c),
        f64(np.asarray(l_nom).reshape(n, -1)), f64(np.asarray(l_att).reshape(n, -1)),
        np.array(sec_idx, dtype=np.intp), np.array(vul_idx, dtype=np.intp),
        f64(k_gain), f64(m_bar), f64(q_bar), float(r_bar),
        f64(t_grid), np.array(attacked, dtype=np.int8, order="C"), bool(hold_policy),
        f64(y_attack), f64(z0), bool(stage_feedback),
    )
