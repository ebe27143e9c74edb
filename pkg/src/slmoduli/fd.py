"""Finite-difference machinery on uniform box grids.

Fourth-order centered stencils in the interior with one-sided stencils at the
boundary, generated by Fornberg's weight algorithm.  Also hosts the two-grid
Richardson estimate used to turn "stencil tolerance" into a number per run.
"""

from functools import lru_cache

import numpy as np


def fornberg_weights(x, x0, m):
    """Weights of the m-th derivative at x0 from samples at nodes x."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@lru_cache(maxsize=None)
def diff_matrix(n, spacing, deriv, accuracy=4):
    """Dense n x n differentiation matrix, one-sided at the boundary."""
    width = deriv + accuracy  # stencil size giving the requested order
    if n < width:
        raise ValueError(f"need at least {width} nodes for this stencil")
    x = np.arange(n) * float(spacing)
    d = np.zeros((n, n))
    half = width // 2
    for i in range(n):
        lo = min(max(i - half + (1 - width % 2), 0), n - width)
        idx = np.arange(lo, lo + width)
        d[i, idx] = fornberg_weights(x[idx], x[i], deriv)
    return d


def apply_diff(values, axis, spacing, deriv, accuracy=4):
    """Apply the 1D differentiation matrix along one axis of an array."""
    values = np.asarray(values, dtype=float)
    d = diff_matrix(values.shape[axis], float(spacing), deriv, accuracy)
    moved = np.moveaxis(values, axis, 0)
    out = np.tensordot(d, moved, axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def hessian_field(values, spacings, accuracy=4, pure_first=False):
    """Discrete Hessian of a scalar grid function, shape (*grid, m, m).

    Diagonal entries use dedicated second-derivative stencils unless
    ``pure_first`` is set, in which case every entry is a composition of
    first-derivative matrices (the composed matrices along different axes
    commute exactly, which makes symmetry checks of third derivatives exact).
    """
    values = np.asarray(values, dtype=float)
    m = values.ndim
    hess = np.empty(values.shape + (m, m))
    for a in range(m):
        if pure_first:
            hess[..., a, a] = apply_diff(
                apply_diff(values, a, spacings[a], 1, accuracy), a, spacings[a], 1, accuracy
            )
        else:
            hess[..., a, a] = apply_diff(values, a, spacings[a], 2, accuracy)
        for b in range(a + 1, m):
            mixed = apply_diff(
                apply_diff(values, a, spacings[a], 1, accuracy), b, spacings[b], 1, accuracy
            )
            hess[..., a, b] = mixed
            hess[..., b, a] = mixed
    return hess


def gradient_field(values, spacings, accuracy=4):
    """Discrete gradient, shape (*grid, m)."""
    values = np.asarray(values, dtype=float)
    return np.stack(
        [apply_diff(values, a, spacings[a], 1, accuracy) for a in range(values.ndim)],
        axis=-1,
    )


def richardson_tolerance(coarse_value, order=4, factor=2, floor=1e-12):
    """Estimate the fine-grid truncation scale from a coarse-grid residual.

    For a quantity vanishing in the continuum at rate h^order, the coarse
    residual is ~ factor^order times the fine one, so the fine-grid scale is
    coarse / factor^order.
    """
    return max(abs(float(coarse_value)) / factor ** order, floor)
