"""Pure numpy implementation of the hot kernels.

Used when the compiled extension is unavailable. Both backends write the same
packed layout: row ``b`` of the output holds, for every ``l <= lmax``, the
``(2l+1) x (2l+1)`` block ``d^l_{m'm}(beta_b)`` flattened row-major at offset
``block_offsets(lmax)[l]``; row index is ``m' + l``, column index ``m + l``.
"""

from math import lgamma

import numpy as np


def block_offsets(lmax):
    sizes = [(2 * l + 1) ** 2 for l in range(lmax + 1)]
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)


def _seed_coefficient(j, mp, m):
    # The explicit Wigner sum has a single term when j == max(|m'|, |m|).
    s = max(0, m - mp)
    logc = 0.5 * (lgamma(j + mp + 1) + lgamma(j - mp + 1) + lgamma(j + m + 1) + lgamma(j - m + 1))
    logc -= lgamma(j + m - s + 1) + lgamma(s + 1) + lgamma(mp - m + s + 1) + lgamma(j - mp - s + 1)
    sign = -1.0 if (mp - m + s) % 2 else 1.0
    return sign * np.exp(logc), 2 * j + m - mp - 2 * s, mp - m + 2 * s


def small_d_packed(lmax, betas):
    betas = np.ascontiguousarray(betas, dtype=np.float64).ravel()
    n = betas.shape[0]
    offsets = block_offsets(lmax)
    out = np.zeros((n, offsets[-1]))
    c = np.cos(betas / 2.0)
    s = np.sin(betas / 2.0)
    cb = np.cos(betas)
    for mp in range(-lmax, lmax + 1):
        for m in range(-lmax, lmax + 1):
            j0 = max(abs(mp), abs(m))
            coef, pc, ps = _seed_coefficient(j0, mp, m)
            prev = np.zeros(n)
            cur = coef * c**pc * s**ps
            j = j0
            while True:
                width = 2 * j + 1
                out[:, offsets[j] + (mp + j) * width + (m + j)] = cur
                if j == lmax:
                    break
                denom = np.sqrt(((j + 1) ** 2 - m * m) * ((j + 1) ** 2 - mp * mp))
                if j == 0:
                    nxt = cb * cur
                else:
                    a = (j + 1) * (2 * j + 1) * (cb - mp * m / (j * (j + 1)))
                    b = (j + 1) * np.sqrt((j * j - m * m) * (j * j - mp * mp)) / j
                    nxt = (a * cur - b * prev) / denom
                prev, cur = cur, nxt
                j += 1
    return out

