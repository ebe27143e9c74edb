"""The augmented moduli space M x T^m built from a Hessian potential.

In the (u, x) coordinates the metric is the block form
sum phi_jk (du_j du_k + dx_j dx_k) with Kahler form -sum dv_k ^ dx_k and
holomorphic form dw_1 ^ ... ^ dw_m, w_j = u_j + i x_j.  The module computes
the Kahler-closedness residual, the Nijenhuis integrability residual of
charts given by a period matrix function lambda(t), the holomorphic-norm
field, the Ricci form by the log-det identity with a Christoffel-symbol
oracle as an independent second route, and the m = 2 Gibbons-Hawking
cross-check.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import InputError, MetricError
from .fd import apply_diff, hessian_field
from .forms import GridTorus
from .hessian import HessianPotential, hessian_metric


@dataclass
class SemiflatManifold:
    """Kahler data on M x T^m derived from a convex potential."""

    potential: HessianPotential
    fiber: GridTorus
    metric_block: np.ndarray  # (*u-grid, m, m), both blocks identical
    kahler_residual: float

    @property
    def m(self):
        return self.potential.dim

    def full_metric(self):
        """Real 2m x 2m metric field blockdiag(H, H) over the u-grid."""
        m = self.m
        h = self.metric_block
        g = np.zeros(h.shape[:-2] + (2 * m, 2 * m))
        g[..., :m, :m] = h
        g[..., m:, m:] = h
        return g

    def hermitian_residual(self):
        """max |g(I., I.) - g(.,.)| for the standard structure in (u, x)."""
        m = self.m
        g = self.full_metric()
        j = np.zeros((2 * m, 2 * m))
        j[:m, m:] = -np.eye(m)
        j[m:, :m] = np.eye(m)
        pulled = np.einsum("ca,...cd,db->...ab", j, g, j)
        return float(np.max(np.abs(pulled - g)))

    def fiber_slag_residuals(self):
        """Restriction of the Kahler form and the phased m-form to {u = const}.

        The Kahler form -sum dv_k ^ dx_k has no dx ^ dx component, and the
        restriction of i^m dw_1 ^ ... ^ dw_m is the real multiple (-1)^m of
        the fiber volume form, so the vanishing part is the imaginary one.
        """
        kahler_restriction = 0.0  # structurally zero: every term carries a du
        restricted = (1j ** self.m) * (1j ** self.m)  # i^m Omega on dx_1..dx_m
        return kahler_restriction, abs(restricted.imag)


def build_semiflat(pot, fiber_resolution=8):
    """Assemble the semiflat manifold and certify closedness of its 2-form.

    The closedness residual is the antisymmetric part of the third
    derivatives of the potential, evaluated with composed first-derivative
    stencils so that exact symmetry of the discrete operators is visible.
    """
    hess = hessian_metric(pot)  # raises on convexity loss
    pure = pot.hessian(pure_first=True)
    m = pot.dim
    residual = 0.0
    for k in range(m):
        for l in range(m):
            for j in range(l + 1, m):
                anti = apply_diff(pure[..., k, j], l, pot.spacings[l], 1) - apply_diff(
                    pure[..., k, l], j, pot.spacings[j], 1
                )
                residual = max(residual, float(np.max(np.abs(anti))))
    fiber = GridTorus((fiber_resolution,) * m)
    return SemiflatManifold(pot, fiber, hess, residual)


def holomorphic_norm_field(sf):
    """Pointwise squared-norm ratio of the holomorphic m-form, up to a constant.

    Equals 1/det(Hess phi) up to a fixed dimensional factor; constancy is
    equivalent to the Monge-Ampere condition.
    """
    det = np.linalg.det(sf.metric_block)
    if np.min(det) <= 0:
        raise MetricError("metric determinant must be positive")
    norm = 1.0 / det
    interior = _interior_slice(sf.potential)
    core = norm[interior]
    variation = float(np.max(core) / np.min(core) - 1.0)
    return {"field": norm, "variation": variation}


def _interior_slice(pot, trim=2):
    return tuple(
        slice(trim, -trim) if len(ax) > 2 * trim else slice(None) for ax in pot.axes
    )


def ricci_form(sf):
    """R_jk = -1/2 d^2/du_j du_k log det(Hess phi) (Kahler log-det identity)."""
    det = np.linalg.det(sf.metric_block)
    if np.min(det) <= 0:
        raise MetricError("metric determinant must be positive")
    log_det = np.log(det)
    return -0.5 * hessian_field(log_det, sf.potential.spacings)


def ricci_oracle(sf):
    """Ricci of the real 2m-metric via Christoffel symbols (independent route).

    Returns the (u_j, u_k) block; the full tensor is block diagonal with two
    identical blocks for these metrics, which the comparison helper verifies.
    """
    g = sf.full_metric()
    ric = ricci_from_metric(g, sf.potential.spacings)
    m = sf.m
    return ric[..., :m, :m]


def ricci_agreement(sf, trim=None):
    """max interior deviation between the log-det Ricci and the oracle.

    Also checks the oracle's block structure: the x-x block must repeat the
    u-u block and the mixed block must vanish.  The default trim grows with
    the grid because the oracle stacks three one-sided derivative passes near
    the boundary.
    """
    m = sf.m
    if trim is None:
        trim = max(3, min(len(ax) for ax in sf.potential.axes) // 8)
    kahler = ricci_form(sf)
    g = sf.full_metric()
    oracle = ricci_from_metric(g, sf.potential.spacings)
    interior = _interior_slice(sf.potential, trim)
    dev = np.max(np.abs(oracle[interior + (slice(None, m), slice(None, m))]
                        - kahler[interior]))
    block = np.max(np.abs(oracle[interior + (slice(m, None), slice(m, None))]
                          - oracle[interior + (slice(None, m), slice(None, m))]))
    mixed = np.max(np.abs(oracle[interior + (slice(None, m), slice(m, None))]))
    return float(max(dev, block, mixed))


def ricci_from_metric(components, spacings):
    """Numerical Ricci tensor of a metric field on a box grid.

    The grid axes correspond to the first p coordinates; the remaining
    coordinates are Killing directions (derivatives vanish).  All derivatives
    use the shared fourth-order stencils.
    """
    components = np.asarray(components, dtype=float)
    p = components.ndim - 2
    d = components.shape[-1]
    ginv = np.linalg.inv(components)
    dg = _directional_derivatives(components, spacings, p, d)
    # Gamma^a_{bc} = 1/2 g^{ad} (d_b g_{dc} + d_c g_{db} - d_d g_{bc})
    gamma = 0.5 * (
        np.einsum("...ad,...dcb->...abc", ginv, dg)
        + np.einsum("...ad,...dbc->...abc", ginv, dg)
        - np.einsum("...ad,...bcd->...abc", ginv, dg)
    )
    dgamma = _directional_derivatives(gamma, spacings, p, d)
    # R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db}
    #           - Gamma^a_{de} Gamma^e_{cb}
    term1 = np.einsum("...adbc->...abcd", dgamma)
    term2 = np.einsum("...acbd->...abcd", dgamma)
    term3 = np.einsum("...ace,...edb->...abcd", gamma, gamma)
    term4 = np.einsum("...ade,...ecb->...abcd", gamma, gamma)
    riem = term1 - term2 + term3 - term4
    return np.einsum("...abad->...bd", riem)


def _directional_derivatives(tensor, spacings, p, d):
    """Append a derivative-direction axis of length d; zero beyond the grid axes."""
    out = np.zeros(tensor.shape + (d,))
    for axis in range(p):
        out[..., axis] = apply_diff(tensor, axis, spacings[axis], 1)
    return out


def nijenhuis_residual(lam_fn, axes, trim=2):
    """Max norm of the Nijenhuis tensor of the chart structure on (t, x).

    The almost complex structure sends d/dt_j to sum_i lambda_ij d/dx_i; it is
    integrable precisely when lambda is the Jacobian of some u(t).
    """
    axes = [np.asarray(ax, dtype=float) for ax in axes]
    m = len(axes)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    lam = lam_fn(pts)
    if np.min(np.abs(np.linalg.det(lam))) < 1e-12:
        raise InputError("lambda(t) is singular somewhere on the chart")
    d = 2 * m
    j = np.zeros(pts.shape[:-1] + (d, d))
    j[..., :m, m:] = -np.linalg.inv(lam)
    j[..., m:, :m] = lam
    spacings = [float(ax[1] - ax[0]) for ax in axes]
    dj = np.zeros(j.shape + (d,))
    for axis in range(m):
        dj[..., axis] = apply_diff(j, axis, spacings[axis], 1)
    # N^e_{ab} = J^e_d (d_a J^d_b - d_b J^d_a) - (J^d_a d_d J^e_b - J^d_b d_d J^e_a)
    curl = np.einsum("...ed,...dba->...eab", j, dj) - np.einsum(
        "...ed,...dab->...eab", j, dj
    )
    drag = np.einsum("...da,...ebd->...eab", j, dj) - np.einsum(
        "...db,...ead->...eab", j, dj
    )
    nij = curl - drag
    interior = tuple(slice(trim, -trim) for _ in range(m))
    return float(np.max(np.abs(nij[interior])))


def hessian_chart(fn_hess):
    """Wrap a Hessian-valued function of t as a vectorized lambda(t)."""

    def lam(pts):
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, pts.shape[-1])
        out = np.stack([np.asarray(fn_hess(t), dtype=float) for t in flat])
        return out.reshape(pts.shape[:-1] + out.shape[-2:])

    return lam


@dataclass
class GibbonsHawkingMetric:
    axes: list
    potential_v: np.ndarray
    conjugate_w: np.ndarray
    components: np.ndarray  # (*grid, 4, 4) in (y1, y2, y3, tau)
    ricci_max: float
    harmonic_residual: float


def gh_metric(v_values, axes, tol=1e-8, trim=3):
    """Gibbons-Hawking 4-metric from a positive harmonic function of (y1, y2).

    g = V (dy1^2 + dy2^2 + dy3^2) + V^{-1} (dtau + W dy3)^2 where W is the
    harmonic conjugate of V, so that the connection satisfies dA = *dV.
    Returns the assembled metric and its max |Ricci| via the Christoffel
    oracle; the construction is Ricci-flat, so the residual is pure stencil
    error.
    """
    axes = [np.asarray(ax, dtype=float) for ax in axes]
    v = np.asarray(v_values, dtype=float)
    if v.shape != (len(axes[0]), len(axes[1])):
        raise InputError("V must be sampled on the (y1, y2) grid")
    spacings = [float(ax[1] - ax[0]) for ax in axes]
    lap = apply_diff(v, 0, spacings[0], 2) + apply_diff(v, 1, spacings[1], 2)
    harmonic_residual = float(np.max(np.abs(lap)))
    if harmonic_residual > tol:
        raise InputError(
            f"V is not harmonic: ||Laplacian||_inf = {harmonic_residual:.3e}"
        )
    if np.min(v) <= 0:
        raise InputError("V must be positive on the whole domain")
    w = _harmonic_conjugate(v, axes, spacings)
    g = np.zeros(v.shape + (4, 4))
    g[..., 0, 0] = v
    g[..., 1, 1] = v
    g[..., 2, 2] = v + w ** 2 / v
    g[..., 2, 3] = g[..., 3, 2] = w / v
    g[..., 3, 3] = 1.0 / v
    ric = ricci_from_metric(g, spacings)
    core = ric[trim:-trim, trim:-trim]
    return GibbonsHawkingMetric(
        axes, v, w, g, float(np.max(np.abs(core))), harmonic_residual
    )


def _harmonic_conjugate(v, axes, spacings):
    """W with dW = -V_2 dy1 + V_1 dy2, by spline antiderivatives."""
    v1 = apply_diff(v, 0, spacings[0], 1)
    v2 = apply_diff(v, 1, spacings[1], 1)
    w = np.zeros_like(v)
    base_row = make_interp_spline(axes[0], -v2[:, 0], k=5).antiderivative()
    w0 = base_row(axes[0]) - base_row(axes[0][0])
    for i in range(v.shape[0]):
        col = make_interp_spline(axes[1], v1[i, :], k=5).antiderivative()
        w[i, :] = w0[i] + col(axes[1]) - col(axes[1][0])
    return w
