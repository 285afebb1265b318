"""Fused arithmetic kernels for the recurrent hot loops.

These implement exactly the same IEEE operation chains as the plain numpy
expressions they replace (no fastmath), but in one pass over memory.
Transcendentals stay in numpy, whose SIMD implementations are faster.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def lstm_backward_step(z, tc, c_prev, dh_t, dh_next, dc, dz):
    """One BPTT step's gate-gradient arithmetic, fused.

    z holds the cached post-activation gates in [f, i, o, c~] blocks;
    ``dc`` carries the incoming cell gradient and leaves as the next
    (earlier) step's incoming cell gradient; ``dz`` receives the
    pre-activation gate gradients.
    """
    n_dir, batch, width = dz.shape
    h = width // 4
    for d in range(n_dir):
        for b in range(batch):
            for j in range(h):
                f = z[d, b, j]
                i = z[d, b, h + j]
                o = z[d, b, 2 * h + j]
                ct = z[d, b, 3 * h + j]
                tcv = tc[d, b, j]
                dh = dh_t[d, b, j] + dh_next[d, b, j]
                dho = dh * o
                dcv = dc[d, b, j] + dho - dho * tcv * tcv
                dz[d, b, j] = dcv * c_prev[d, b, j] * f * (1.0 - f)
                dz[d, b, h + j] = dcv * ct * i * (1.0 - i)
                dz[d, b, 2 * h + j] = dh * tcv * o * (1.0 - o)
                dz[d, b, 3 * h + j] = dcv * i * (1.0 - ct * ct)
                dc[d, b, j] = dcv * f


@njit(cache=True, fastmath=False)
def bn_backward_dx(dflat, xhat, coef, dbeta, dgamma, n, out):
    """dx = coef * (n * dout - dbeta - xhat * dgamma), one pass."""
    rows, cols = dflat.shape
    for i in range(rows):
        for j in range(cols):
            out[i, j] = coef[j] * (n * dflat[i, j] - dbeta[j]
                                   - xhat[i, j] * dgamma[j])


@njit(cache=True, fastmath=False)
def adam_update(p, g, m, v, lr, beta1, beta2, eps, bias1, bias2):
    """Fused bias-corrected Adam update for one flattened tensor."""
    n = p.size
    pf = p.reshape(n)
    gf = g.reshape(n)
    mf = m.reshape(n)
    vf = v.reshape(n)
    for k in range(n):
        gv = gf[k]
        mv = beta1 * mf[k] + (1.0 - beta1) * gv
        vv = beta2 * vf[k] + (1.0 - beta2) * gv * gv
        mf[k] = mv
        vf[k] = vv
        pf[k] -= lr * (mv / bias1) / (np.sqrt(vv / bias2) + eps)
