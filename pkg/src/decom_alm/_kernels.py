"""Compiled inner loop of one backward-induction layer."""

import numba
import numpy as np
from numba import njit, prange

# TBB on this platform is often too old and only produces a warning.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True, inline="always")
def _locate(x, lo, step, n):
    """Fractional index on a uniform axis with clamping; returns (i, w, clamped)."""
    f = (x - lo) / step
    clamped = False
    if f < 0.0:
        f = 0.0
        clamped = True
    elif f > n - 1:
        f = n - 1.0
        clamped = True
    i = int(f)
    if i > n - 2:
        i = n - 2
    return i, f - i, clamped


@njit(parallel=True, cache=True)
def solve_layer(
    a_axis, d_axis, v_next, growth, outflow, s_lo, s_w,
    L_next, constrained, terminal, L_T, c2, c3, scale,
    out_value, out_control, out_clamp,
):
    """Minimise the one-step expectation at every node of a layer.

    ``growth[j, c, m]`` and ``outflow[j, c, m]`` give the end-of-step asset
    value ``A * growth - outflow`` for S-node ``j``, control ``c`` and inner
    draw ``m``.  ``s_lo``/``s_w`` locate each draw's next index level on the
    next layer's S axis.  On the terminal step the objective is evaluated
    directly instead of interpolated.
    """
    nA = a_axis.shape[0]
    nD = d_axis.shape[0]
    nS = growth.shape[0]
    nC = growth.shape[1]
    M = growth.shape[2]
    nS_next = v_next.shape[2]
    a_lo = a_axis[0]
    a_step = a_axis[1] - a_axis[0]
    d_lo = d_axis[0]
    d_step = d_axis[1] - d_axis[0]

    for flat in prange(nA * nD * nS):
        ia = flat // (nD * nS)
        rem = flat - ia * (nD * nS)
        idd = rem // nS
        j = rem - idd * nS
        A = a_axis[ia]
        D = d_axis[idd]
        best = np.inf
        best_c = 0
        best_clamp = 0
        for c in range(nC):
            acc = 0.0
            n_clamp = 0
            for m in range(M):
                a_end = A * growth[j, c, m] - outflow[j, c, m]
                if constrained:
                    inj = L_next - a_end if a_end < L_next else 0.0
                else:
                    inj = -a_end if a_end < 0.0 else 0.0
                a2 = a_end + inj
                d2 = D + inj
                if terminal:
                    x = (d2 + L_T - a2) / scale
                    if x > 0.0:
                        acc += x + c2 * x * x + c3 * x * x * x
                    continue
                i, wa, ca = _locate(a2, a_lo, a_step, nA)
                k, wd, cd = _locate(d2, d_lo, d_step, nD)
                if ca or cd:
                    n_clamp += 1
                s0 = s_lo[j, m]
                ws = s_w[j, m]
                v = (
                    (1.0 - wa) * ((1.0 - wd) * v_next[i, k, s0] + wd * v_next[i, k + 1, s0])
                    + wa * ((1.0 - wd) * v_next[i + 1, k, s0] + wd * v_next[i + 1, k + 1, s0])
                )
                if ws > 0.0:
                    s1 = s0 + 1
                    v1 = (
                        (1.0 - wa) * ((1.0 - wd) * v_next[i, k, s1] + wd * v_next[i, k + 1, s1])
                        + wa * ((1.0 - wd) * v_next[i + 1, k, s1] + wd * v_next[i + 1, k + 1, s1])
                    )
                    v = (1.0 - ws) * v + ws * v1
                acc += v
            mean = acc / M
            if mean < best:
                best = mean
                best_c = c
                best_clamp = n_clamp
        out_value[ia, idd, j] = best
        out_control[ia, idd, j] = best_c
        out_clamp[ia, idd, j] = best_clamp
