"""Hessian potentials on a box chart: metrics, Legendre duality, Monge-Ampere.

A potential is a strictly convex scalar on a uniform box grid.  The module
computes its Hessian metric, the Monge-Ampere residual det(Hess) - c, the
discrete Legendre transform (per-axis conjugation of the piecewise-linear
interpolant, optionally sharpened by a spline Newton refinement), the mirror
role-swap, the 2D partial Legendre reduction to the Laplace equation, and a
damped-Newton Dirichlet solver for det(Hess phi) = c in two variables.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import RectBivariateSpline, make_interp_spline
from scipy.sparse.linalg import spsolve

from .errors import ConvergenceError, ConvexityError, DomainError, InputError
from .fd import apply_diff, diff_matrix, gradient_field, hessian_field


@dataclass
class HessianPotential:
    """Scalar potential phi on a uniform box grid in u-space."""

    axes: list
    values: np.ndarray
    c: float = None

    def __post_init__(self):
        self.axes = [np.asarray(ax, dtype=float) for ax in self.axes]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(len(ax) for ax in self.axes):
            raise InputError("potential values do not match the grid axes")
        for ax in self.axes:
            steps = np.diff(ax)
            if len(steps) == 0 or np.max(np.abs(steps - steps[0])) > 1e-10 * abs(steps[0]):
                raise InputError("grid axes must be uniform and non-trivial")

    @classmethod
    def from_function(cls, axes, fn, c=None):
        mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
        return cls(axes, fn(*mesh), c)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def spacings(self):
        return tuple(float(ax[1] - ax[0]) for ax in self.axes)

    def meshgrid(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def points(self):
        return np.stack(self.meshgrid(), axis=-1)

    def hessian(self, pure_first=False):
        return hessian_field(self.values, self.spacings, pure_first=pure_first)

    def gradient(self):
        return gradient_field(self.values, self.spacings)

    def spline(self):
        """Quintic interpolant of the potential (m = 1 or 2)."""
        if self.dim == 1:
            return make_interp_spline(self.axes[0], self.values, k=5)
        if self.dim == 2:
            return RectBivariateSpline(self.axes[0], self.axes[1], self.values, kx=5, ky=5)
        raise InputError("spline interpolation supports m <= 2")


def hessian_metric(pot, tol=1e-10):
    """Discrete Hessian matrix field; raises if convexity fails at an interior node."""
    hess = pot.hessian()
    interior = tuple(slice(2, -2) if len(ax) > 4 else slice(None) for ax in pot.axes)
    eigs = np.linalg.eigvalsh(hess[interior])
    if eigs.size and np.min(eigs) <= tol:
        flat = np.argmin(eigs.min(axis=-1))
        node = np.unravel_index(flat, hess[interior].shape[:-2])
        raise ConvexityError(
            f"potential fails strict convexity (min eigenvalue {np.min(eigs):.3e})",
            node=tuple(int(i) + 2 for i in node),
        )
    return hess


def ma_residual(pot, c):
    """det(discrete Hessian) - c per node."""
    hess = hessian_metric(pot)
    return np.linalg.det(hess) - float(c)


def _conjugate_axis(values, u_nodes, v_nodes):
    """Exact conjugate of the piecewise-linear interpolant along one axis.

    ``values`` has the conjugation variable on axis 0; the sup over the PL
    interpolant is attained at a grid node, so a max over nodes is exact.
    Returns the conjugate values and the argmax node index.
    """
    scores = (
        v_nodes[:, None, None] * u_nodes[None, :, None]
        - values.reshape(1, len(u_nodes), -1)
    )
    arg = np.argmax(scores, axis=1)
    best = np.take_along_axis(scores, arg[:, None, :], axis=1)[:, 0, :]
    shape = (len(v_nodes),) + values.shape[1:]
    return best.reshape(shape), arg.reshape(shape)


@dataclass
class LegendrePair:
    """A potential, its convex conjugate, and the Fenchel pairing residual."""

    primal: HessianPotential
    dual: HessianPotential
    pairing_residual: float
    argmax_points: np.ndarray = field(default=None, repr=False)

    def swapped(self):
        return LegendrePair(
            self.dual, self.primal, self.pairing_residual, None
        )


def gradient_image_axes(pot, size=None, margin=0.0):
    """Per-axis ranges of the discrete gradient map, as uniform v-axes."""
    grad = pot.gradient()
    axes = []
    for a in range(pot.dim):
        lo = float(np.min(grad[..., a]))
        hi = float(np.max(grad[..., a]))
        pad = margin * (hi - lo)
        n = size or len(pot.axes[a])
        axes.append(np.linspace(lo + pad, hi - pad, n))
    return axes


def legendre_transform(pot, v_axes=None, refine=True, newton_steps=40):
    """psi(v) = sup_u (<u, v> - phi(u)) on a regular v-grid.

    The sup is taken exactly over the piecewise-linear interpolant by per-axis
    conjugation; with ``refine`` the argmax is then polished by a projected
    Newton iteration on a quintic spline of phi, which restores smooth-order
    accuracy while keeping the grid values as certified starting points.
    """
    hessian_metric(pot)  # convexity is a precondition
    if v_axes is None:
        v_axes = gradient_image_axes(pot)
    v_axes = [np.asarray(ax, dtype=float) for ax in v_axes]
    m = pot.dim
    values = pot.values
    # sequential per-axis conjugation: axis a of the intermediate array is
    # v_a once processed, still u_a before
    work = values
    for a in range(m):
        moved = np.moveaxis(work, a, 0)
        conj, _ = _conjugate_axis(moved, pot.axes[a], v_axes[a])
        work = np.moveaxis(-conj, 0, a)  # keep negated until the last axis
    psi = -work
    argmax = _argmax_points(pot, v_axes)
    if refine:
        psi, argmax = _refine_conjugate(pot, v_axes, argmax)
    dual_c = None if pot.c is None else 1.0 / pot.c
    dual = HessianPotential(v_axes, psi, dual_c)
    residual = fenchel_residual(pot, dual)
    return LegendrePair(pot, dual, residual, argmax)


def _argmax_points(pot, v_axes):
    """Grid argmax of <u, v> - phi(u) for every v-node (brute force)."""
    pts = pot.points().reshape(-1, pot.dim)
    phi = pot.values.reshape(-1)
    v_mesh = np.stack(np.meshgrid(*v_axes, indexing="ij"), axis=-1)
    v_flat = v_mesh.reshape(-1, pot.dim)
    best = np.empty_like(v_flat)
    chunk = 4096
    for start in range(0, len(v_flat), chunk):
        vs = v_flat[start:start + chunk]
        scores = vs @ pts.T - phi[None, :]
        best[start:start + chunk] = pts[np.argmax(scores, axis=1)]
    return best.reshape(v_mesh.shape)


def _refine_conjugate(pot, v_axes, argmax, steps=40):
    """Projected Newton polish of the conjugate on a quintic spline of phi."""
    spl = pot.spline()
    lo = np.array([ax[0] for ax in pot.axes])
    hi = np.array([ax[-1] for ax in pot.axes])
    v_mesh = np.stack(np.meshgrid(*v_axes, indexing="ij"), axis=-1)
    v = v_mesh.reshape(-1, pot.dim)
    u = argmax.reshape(-1, pot.dim).copy()
    for _ in range(steps):
        grad = _spline_gradient(spl, u, pot.dim)
        hess = _spline_hessian(spl, u, pot.dim)
        try:
            step = np.linalg.solve(hess, (v - grad)[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        new = np.clip(u + step, lo, hi)
        if np.max(np.abs(new - u)) < 1e-14:
            u = new
            break
        u = new
    phi_u = _spline_eval(spl, u, pot.dim)
    psi = np.sum(u * v, axis=1) - phi_u
    return psi.reshape(v_mesh.shape[:-1]), u.reshape(v_mesh.shape)


def _spline_eval(spl, u, m):
    if m == 1:
        return spl(u[:, 0])
    return spl.ev(u[:, 0], u[:, 1])


def _spline_gradient(spl, u, m):
    if m == 1:
        return spl(u[:, 0], 1)[:, None]
    return np.stack([spl.ev(u[:, 0], u[:, 1], dx=1),
                     spl.ev(u[:, 0], u[:, 1], dy=1)], axis=-1)


def _spline_hessian(spl, u, m):
    if m == 1:
        return spl(u[:, 0], 2)[:, None, None]
    h11 = spl.ev(u[:, 0], u[:, 1], dx=2)
    h12 = spl.ev(u[:, 0], u[:, 1], dx=1, dy=1)
    h22 = spl.ev(u[:, 0], u[:, 1], dy=2)
    hess = np.empty((len(u), m, m))
    hess[:, 0, 0] = h11
    hess[:, 0, 1] = hess[:, 1, 0] = h12
    hess[:, 1, 1] = h22
    return hess


def fenchel_residual(primal, dual, samples=None):
    """max |phi(u) + psi(grad phi(u)) - <u, grad phi(u)>| over interior nodes.

    Only nodes whose gradient lands inside the dual grid contribute.
    """
    grad = primal.gradient()
    interior = tuple(slice(2, -2) for _ in primal.axes)
    u = primal.points()[interior].reshape(-1, primal.dim)
    v = grad[interior].reshape(-1, primal.dim)
    phi = primal.values[interior].reshape(-1)
    lo = np.array([ax[0] for ax in dual.axes])
    hi = np.array([ax[-1] for ax in dual.axes])
    inside = np.all((v >= lo) & (v <= hi), axis=1)
    if not np.any(inside):
        return float("nan")
    spl = dual.spline()
    psi = _spline_eval(spl, v[inside], dual.dim)
    gap = phi[inside] + psi - np.sum(u[inside] * v[inside], axis=1)
    return float(np.max(np.abs(gap)))


def interpolation_tolerance(pot, dual_axes=None):
    """Error scale of the piecewise-linear conjugation route.

    Classical bound: the PL interpolant deviates by M h^2 / 8 with M the
    curvature; conjugation maps curvature M to 1/M, so both grids contribute.
    """
    hess = hessian_metric(pot)
    interior = tuple(slice(2, -2) for _ in pot.axes)
    eigs = np.linalg.eigvalsh(hess[interior])
    m_max = float(np.max(eigs))
    m_min = float(np.min(eigs))
    h_u = max(pot.spacings)
    if dual_axes is None:
        dual_axes = gradient_image_axes(pot)
    h_v = max(float(ax[1] - ax[0]) for ax in dual_axes)
    return (m_max * h_u ** 2 + h_v ** 2 / m_min) / 8.0


def mirror_swap(obj):
    """Exchange (u, lambda, phi) with (v, mu, psi); an involution."""
    if isinstance(obj, LegendrePair):
        return obj.swapped()
    if hasattr(obj, "swap"):
        return obj.swap()
    raise InputError(f"mirror_swap does not apply to {type(obj).__name__}")


def partial_legendre_2d(pot, trim=3):
    """Per-slice Legendre transform in u_1 and the Laplace residual of h.

    Coordinates (s, u_2) with s = d phi / d u_1 and h = u_1 s - phi.  For a
    unit-determinant potential h is harmonic; in general
    h_ss + h_{u2 u2} = (1 - det Hess phi) / phi_11, which bounds the residual
    away from zero for non-Monge-Ampere input.  The target constant is
    normalized to 1 by rescaling phi with c^{1/2} first.
    """
    if pot.dim != 2:
        raise InputError("partial Legendre reduction is specific to m = 2")
    values = pot.values
    if pot.c is not None and abs(pot.c - 1.0) > 1e-14:
        if pot.c <= 0:
            raise InputError("Monge-Ampere constant must be positive")
        values = values / np.sqrt(pot.c)
    work = HessianPotential(pot.axes, values)
    slopes = apply_diff(values, 0, work.spacings[0], 1)
    if np.min(apply_diff(values, 0, work.spacings[0], 2)) <= 0:
        raise ConvexityError("a u_1 slice fails strict convexity")
    h_nodes = work.axes[0][:, None] * slopes - values
    s_lo = float(np.max(slopes[0, :]))
    s_hi = float(np.min(slopes[-1, :]))
    if s_hi <= s_lo:
        raise DomainError("slices have no common slope interval")
    s_axis = np.linspace(s_lo, s_hi, len(work.axes[0]))
    h = np.empty((len(s_axis), len(work.axes[1])))
    for j in range(len(work.axes[1])):
        h[:, j] = make_interp_spline(slopes[:, j], h_nodes[:, j], k=5)(s_axis)
    ds = float(s_axis[1] - s_axis[0])
    laplacian = apply_diff(h, 0, ds, 2) + apply_diff(h, 1, work.spacings[1], 2)
    core = laplacian[trim:-trim, trim:-trim] if trim else laplacian
    return {
        "s_axis": s_axis,
        "u2_axis": work.axes[1],
        "h": h,
        "laplacian": laplacian,
        "laplace_residual": float(np.max(np.abs(core))),
    }


def _clamped_cofactors(hess, clamp):
    """Cofactor coefficients of det for 2x2 Hessians, eigenvalue-clamped."""
    eigval, eigvec = np.linalg.eigh(hess)
    eigval = np.maximum(eigval, clamp)
    clamped = np.einsum("...ab,...b,...cb->...ac", eigvec, eigval, eigvec)
    return clamped[..., 1, 1], clamped[..., 0, 0], clamped[..., 0, 1]


def solve_ma_dirichlet(axes, boundary, c=1.0, tol=1e-8, max_iter=50,
                       damping=1.0, clamp=1e-6):
    """Damped Newton for det(Hess phi) = c with Dirichlet boundary data.

    ``boundary`` is a callable (u1, u2) -> value or a full grid array whose
    boundary ring is used.  The linearization clamps Hessian eigenvalues from
    below so that the cofactor operator stays elliptic away from convexity.
    """
    axes = [np.asarray(ax, dtype=float) for ax in axes]
    if len(axes) != 2:
        raise InputError("the Monge-Ampere solver is restricted to m = 2")
    shape = (len(axes[0]), len(axes[1]))
    mesh = np.meshgrid(*axes, indexing="ij")
    if callable(boundary):
        bvals = boundary(*mesh)
    else:
        bvals = np.asarray(boundary, dtype=float)
        if bvals.shape != shape:
            raise InputError("boundary array must cover the full grid")
    mask = np.zeros(shape, dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    interior = ~mask

    spacings = (float(axes[0][1] - axes[0][0]), float(axes[1][1] - axes[1][0]))
    n0, n1 = shape
    d1x = sparse.csr_matrix(diff_matrix(n0, spacings[0], 1))
    d2x = sparse.csr_matrix(diff_matrix(n0, spacings[0], 2))
    d1y = sparse.csr_matrix(diff_matrix(n1, spacings[1], 1))
    d2y = sparse.csr_matrix(diff_matrix(n1, spacings[1], 2))
    eye0 = sparse.identity(n0, format="csr")
    eye1 = sparse.identity(n1, format="csr")
    op11 = sparse.kron(d2x, eye1, format="csr")
    op22 = sparse.kron(eye0, d2y, format="csr")
    op12 = sparse.kron(d1x, d1y, format="csr")
    idx = np.arange(n0 * n1).reshape(shape)
    int_idx = idx[interior]

    # initial guess: Poisson solve Laplace(phi) = 2 sqrt(c) with the given
    # Dirichlet data, which matches the boundary without introducing kinks
    lap = (op11 + op22).tocsr()
    phi = np.zeros(shape)
    phi[mask] = bvals[mask]
    rhs0 = np.full(int_idx.size, 2.0 * np.sqrt(c)) - (lap @ phi.ravel())[int_idx]
    phi.ravel()[int_idx] = spsolve(lap[int_idx][:, int_idx].tocsc(), rhs0)

    def residual_of(p):
        hess = hessian_field(p, spacings)
        return np.linalg.det(hess) - c, hess

    res, hess = residual_of(phi)
    history = [float(np.max(np.abs(res[interior])))]
    for iteration in range(max_iter):
        if history[-1] < tol:
            info = {"iterations": iteration, "residuals": history}
            pot = HessianPotential(axes, phi, c)
            pot.info = info
            return pot
        c11, c22, c12 = _clamped_cofactors(hess, clamp)
        jac = (
            sparse.diags(c11.ravel()) @ op11
            + sparse.diags(c22.ravel()) @ op22
            - 2.0 * sparse.diags(c12.ravel()) @ op12
        ).tocsr()
        jac_ii = jac[int_idx][:, int_idx]
        rhs = -res[interior]
        delta = np.zeros(n0 * n1)
        delta[int_idx] = spsolve(jac_ii.tocsc(), rhs)
        alpha = damping
        base = history[-1]
        while True:
            trial = phi + alpha * delta.reshape(shape)
            trial_res, trial_hess = residual_of(trial)
            norm = float(np.max(np.abs(trial_res[interior])))
            if norm < base:
                break
            if alpha < 1e-3:
                raise ConvergenceError(
                    f"line search failed at residual {base:.3e}", history
                )
            alpha *= 0.5
        phi, res, hess = trial, trial_res, trial_hess
        history.append(norm)
        if len(history) > 5 and norm > 0.999 * history[-5]:
            raise ConvergenceError(
                f"Newton stagnation at residual {norm:.3e}", history
            )
    if history[-1] < tol:
        pot = HessianPotential(axes, phi, c)
        pot.info = {"iterations": max_iter, "residuals": history}
        return pot
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations "
        f"(residual {history[-1]:.3e})",
        history,
    )


def gradient_monotonicity(pot, rng=None, trials=100):
    """min of <grad phi(a) - grad phi(b), a - b> over random node pairs."""
    rng = rng or np.random.default_rng(0)
    grad = pot.gradient().reshape(-1, pot.dim)
    pts = pot.points().reshape(-1, pot.dim)
    worst = np.inf
    for _ in range(trials):
        i, j = rng.integers(0, len(pts), size=2)
        if i == j:
            continue
        worst = min(worst, float(np.dot(grad[i] - grad[j], pts[i] - pts[j])))
    return worst


def save_potential(pot, path):
    """CSV grid dump: header rows (m, axes, c), then one node value per row."""
    with open(path, "w") as fh:
        fh.write(f"m,{pot.dim}\n")
        for ax in pot.axes:
            fh.write(f"axis,{float(ax[0])!r},{float(ax[-1])!r},{len(ax)}\n")
        if pot.c is not None:
            fh.write(f"c,{float(pot.c)!r}\n")
        for value in pot.values.ravel():
            fh.write(f"{float(value)!r}\n")


def load_potential(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        m = int(lines[0].split(",")[1])
        axes = []
        cursor = 1
        for _ in range(m):
            _, lo, hi, n = lines[cursor].split(",")
            axes.append(np.linspace(float(lo), float(hi), int(n)))
            cursor += 1
        c = None
        if lines[cursor].startswith("c,"):
            c = float(lines[cursor].split(",")[1])
            cursor += 1
        values = np.array([float(ln) for ln in lines[cursor:]])
        shape = tuple(len(ax) for ax in axes)
        return HessianPotential(axes, values.reshape(shape), c)
    except (IndexError, ValueError) as exc:
        raise InputError(f"malformed potential file {path}: {exc}") from exc
