"""Pure-Python RK4 frame transport (fallback for the compiled kernel).

State: position f (3 reals) and f_p (3 complex), p the path's complex
coordinate.  With dp = p'(s), coefficient samples at nodes and midpoints
(index 2k, 2k+1, 2k+2 for step k):

    d f_p / ds = dp (psi_p f_p + A conj(f_p)) + conj(dp) B xi,   xi = (0, 0, 1)
    d f / ds   = 2 Re(dp f_p)
"""

import numpy as np


def _rhs(fp, dp, psi, a, b):
    out = [dp * (psi * fp[i] + a * fp[i].conjugate()) for i in range(3)]
    out[2] += dp.conjugate() * b
    df = [2.0 * (dp * fp[i]).real for i in range(3)]
    return out, df


def rk4_transport(dp, psi_p, A, B, h, f0, fp0, f_out, fp_out):
    """Integrate n = len(f_out) - 1 RK4 steps of size h, writing every node."""
    dp = [complex(v) for v in dp]
    psi_p = [complex(v) for v in psi_p]
    A = [complex(v) for v in A]
    B = [float(v) for v in B]
    f = [float(v) for v in f0]
    fp = [complex(v) for v in fp0]
    n = len(f_out) - 1
    f_out[0] = f
    fp_out[0] = fp
    for k in range(n):
        i0, i1, i2 = 2 * k, 2 * k + 1, 2 * k + 2
        k1, l1 = _rhs(fp, dp[i0], psi_p[i0], A[i0], B[i0])
        y = [fp[i] + 0.5 * h * k1[i] for i in range(3)]
        k2, l2 = _rhs(y, dp[i1], psi_p[i1], A[i1], B[i1])
        y = [fp[i] + 0.5 * h * k2[i] for i in range(3)]
        k3, l3 = _rhs(y, dp[i1], psi_p[i1], A[i1], B[i1])
        y = [fp[i] + h * k3[i] for i in range(3)]
        k4, l4 = _rhs(y, dp[i2], psi_p[i2], A[i2], B[i2])
        for i in range(3):
            fp[i] = fp[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
            f[i] = f[i] + h / 6.0 * (l1[i] + 2 * l2[i] + 2 * l3[i] + l4[i])
        f_out[k + 1] = f
        fp_out[k + 1] = fp
    return np.asarray(f_out), np.asarray(fp_out)
