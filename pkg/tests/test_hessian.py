"""Hessian potentials: metric, Legendre duality, partial reduction, solver."""

import numpy as np
import pytest

from slmoduli.errors import (
    ConvergenceError,
    ConvexityError,
    DomainError,
    InputError,
)
from slmoduli.fd import richardson_tolerance
from slmoduli.hessian import (
    HessianPotential,
    fenchel_residual,
    gradient_image_axes,
    gradient_monotonicity,
    hessian_metric,
    interpolation_tolerance,
    legendre_transform,
    load_potential,
    ma_residual,
    mirror_swap,
    partial_legendre_2d,
    save_potential,
    solve_ma_dirichlet,
)


def _quadratic(axes, mat):
    mat = np.asarray(mat, dtype=float)

    def fn(*mesh):
        u = np.stack(mesh, axis=-1)
        return 0.5 * np.einsum("...a,ab,...b->...", u, mat, u)

    return HessianPotential.from_function(axes, fn)


def test_hessian_of_quadratic_is_exact():
    mat = np.array([[2.0, 0.5], [0.5, 1.0]])
    pot = _quadratic([np.linspace(-1, 1, 33)] * 2, mat)
    hess = hessian_metric(pot)
    assert np.max(np.abs(hess - mat)) < 1e-10


def test_convexity_violation_reports_node():
    pot = HessianPotential.from_function(
        [np.linspace(-1, 1, 33)], lambda u: -(u ** 2)
    )
    with pytest.raises(ConvexityError) as err:
        hessian_metric(pot)
    assert err.value.node is not None


def test_nonuniform_axes_rejected():
    with pytest.raises(InputError):
        HessianPotential([np.array([0.0, 0.1, 0.3])], np.zeros(3))


def test_ma_residual_closed_form():
    # phi = u1^4/12 + u1^2/2 + u2^2/2: det Hess = 1 + u1^2
    axes = [np.linspace(-1, 1, 33)] * 2
    pot = HessianPotential.from_function(
        axes, lambda a, b: a ** 4 / 12 + a ** 2 / 2 + b ** 2 / 2
    )
    res = ma_residual(pot, 1.0)
    u1 = axes[0][:, None] * np.ones_like(axes[1])[None, :]
    assert np.max(np.abs(res - u1 ** 2)) < 1e-8


def test_self_dual_quadratic():
    pot = _quadratic([np.linspace(-1, 1, 33)] * 2, np.eye(2))
    pair = legendre_transform(pot, v_axes=pot.axes)
    assert np.max(np.abs(pair.dual.values - pot.values)) < 1e-10
    assert pair.pairing_residual < 1e-10


def test_legendre_quadratic_inverse_matrix():
    mat = np.array([[2.0, 0.5], [0.5, 1.5]])
    pot = _quadratic([np.linspace(-1, 1, 33)] * 2, mat)
    # shrink the dual box into the gradient image (a sheared parallelogram)
    v_axes = gradient_image_axes(pot, margin=0.25)
    pair = legendre_transform(pot, v_axes=v_axes)
    inv = np.linalg.inv(mat)
    dual_hess = hessian_metric(pair.dual)
    assert np.max(np.abs(dual_hess - inv)) < 1e-7


def test_legendre_involution_smooth_potential():
    axes = [np.linspace(-1, 1, 33)] * 2
    pot = HessianPotential.from_function(
        axes, lambda a, b: 0.5 * (a ** 2 + b ** 2) + 0.1 * np.cosh(a + 0.5 * b)
    )
    pair = legendre_transform(pot)
    back = legendre_transform(pair.dual, v_axes=pot.axes)
    err = np.max(np.abs(back.dual.values - pot.values))
    assert err < 10.0 * interpolation_tolerance(pot)


def test_legendre_1d():
    axes = [np.linspace(-1, 1, 65)]
    pot = HessianPotential.from_function(axes, lambda u: np.cosh(u))
    pair = legendre_transform(pot)
    # psi(v) = v arcsinh(v) - sqrt(1 + v^2)
    v = pair.dual.axes[0]
    exact = v * np.arcsinh(v) - np.sqrt(1.0 + v ** 2)
    assert np.max(np.abs(pair.dual.values - exact)) < 1e-6


def test_fenchel_residual_detects_wrong_dual():
    pot = _quadratic([np.linspace(-1, 1, 33)] * 2, np.eye(2))
    wrong = HessianPotential(pot.axes, 2.0 * pot.values)
    assert fenchel_residual(pot, wrong) > 0.1


def test_gradient_image_axes_cover_range():
    pot = _quadratic([np.linspace(-1, 1, 33)] * 2, 2.0 * np.eye(2))
    axes = gradient_image_axes(pot)
    assert np.isclose(axes[0][0], -2.0, atol=1e-8)
    assert np.isclose(axes[0][-1], 2.0, atol=1e-8)


def test_gradient_monotonicity_positive_for_convex():
    pot = _quadratic([np.linspace(-1, 1, 17)] * 2, np.eye(2))
    assert gradient_monotonicity(pot) >= 0.0


def test_mirror_swap_pair_involution():
    pot = _quadratic([np.linspace(-1, 1, 33)] * 2, np.array([[2.0, 0.0], [0.0, 1.0]]))
    pair = legendre_transform(pot)
    double = mirror_swap(mirror_swap(pair))
    assert np.max(np.abs(double.primal.values - pair.primal.values)) < 1e-15
    assert np.max(np.abs(mirror_swap(pair).primal.values - pair.dual.values)) < 1e-15
    with pytest.raises(InputError):
        mirror_swap(3.0)


def test_partial_legendre_quadratic_harmonic():
    pot = _quadratic([np.linspace(-1, 1, 65)] * 2, np.eye(2))
    result = partial_legendre_2d(pot)
    assert result["laplace_residual"] < 1e-8


def test_partial_legendre_rescales_constant():
    # det Hess = 4; after rescaling by sqrt(c) the reduction is harmonic
    pot = _quadratic([np.linspace(-1, 1, 65)] * 2, 2.0 * np.eye(2))
    pot.c = 4.0
    result = partial_legendre_2d(pot)
    assert result["laplace_residual"] < 1e-8


def test_partial_legendre_detects_non_ma():
    axes = [np.linspace(-1, 1, 65)] * 2
    pot = HessianPotential.from_function(
        axes, lambda a, b: a ** 4 / 12 + a ** 2 / 2 + b ** 2 / 2, c=1.0
    )
    result = partial_legendre_2d(pot)
    # closed form: h_ss + h_u2u2 = -u1^2 / (1 + u1^2), max magnitude 1/2
    assert 0.3 < result["laplace_residual"] < 0.6


def test_partial_legendre_requires_2d():
    pot = HessianPotential.from_function([np.linspace(-1, 1, 33)], lambda u: u ** 2)
    with pytest.raises(InputError):
        partial_legendre_2d(pot)


def test_solver_recovers_quadratic_exactly():
    axes = [np.linspace(0.0, 1.0, 65)] * 2
    pot = solve_ma_dirichlet(axes, lambda a, b: 0.5 * (a ** 2 + b ** 2), c=1.0)
    mesh = np.meshgrid(*axes, indexing="ij")
    exact = 0.5 * (mesh[0] ** 2 + mesh[1] ** 2)
    assert np.max(np.abs(pot.values - exact)) < 1e-6
    assert pot.info["iterations"] <= 15


def test_solver_quadratic_convergence_on_cosh_data():
    axes = [np.linspace(0.0, 1.0, 65)] * 2
    pot = solve_ma_dirichlet(axes, lambda a, b: np.cosh(a) + np.cosh(b), c=1.0)
    hist = pot.info["residuals"]
    assert pot.info["iterations"] <= 10
    assert hist[-1] < 1e-8
    # quadratic tail: the last full step squares the residual scale
    assert hist[-1] < hist[-2] ** 1.5


def test_solver_respects_max_iter():
    axes = [np.linspace(0.0, 1.0, 33)] * 2
    with pytest.raises(ConvergenceError):
        solve_ma_dirichlet(
            axes, lambda a, b: np.cosh(a) + np.cosh(b), c=1.0, max_iter=1
        )


def test_solver_rejects_bad_input():
    with pytest.raises(InputError):
        solve_ma_dirichlet([np.linspace(0, 1, 9)] * 3, lambda *m: m[0])
    with pytest.raises(InputError):
        solve_ma_dirichlet([np.linspace(0, 1, 9)] * 2, np.zeros((5, 5)))


def test_potential_csv_roundtrip(tmp_path):
    pot = _quadratic([np.linspace(-1, 1, 17), np.linspace(0, 2, 9)], np.eye(2))
    pot.c = 1.0
    path = tmp_path / "pot.csv"
    save_potential(pot, path)
    back = load_potential(path)
    assert back.c == 1.0
    assert np.max(np.abs(back.values - pot.values)) < 1e-12
    for a, b in zip(back.axes, pot.axes):
        assert np.max(np.abs(a - b)) < 1e-12


def test_malformed_potential_file(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("m,2\naxis,0,1,5\n")
    with pytest.raises(InputError):
        load_potential(path)


def test_richardson_tolerance_scaling():
    assert richardson_tolerance(16.0) == pytest.approx(1.0)
    assert richardson_tolerance(0.0) == pytest.approx(1e-12)
    assert richardson_tolerance(8.0, order=3) == pytest.approx(1.0)
