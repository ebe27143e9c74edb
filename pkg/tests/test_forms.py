"""Exterior calculus substrate: derivative, wedge, star, cycles."""

import numpy as np
import pytest

from slmoduli.errors import DegreeError, GridMismatchError, MetricError
from slmoduli.forms import (
    CycleBasis,
    FormField,
    GridTorus,
    MetricField,
    exterior_derivative,
    from_csv,
    harmonicity_residual,
    hodge_star,
    integrate_cycle,
    integrate_top,
    l2_inner,
    spectral_derivative,
    to_csv,
    wedge,
)


def test_grid_torus_geometry():
    torus = GridTorus((16, 32), (1.0, 2.0))
    assert torus.dim == 2
    assert torus.spacings == (1.0 / 16, 2.0 / 32)
    assert np.isclose(torus.cell_volume, (1.0 / 16) * (2.0 / 32))
    axes = torus.axes()
    assert axes[0][0] == 0.0 and np.isclose(axes[1][-1], 2.0 - 2.0 / 32)


def test_grid_torus_rejects_bad_input():
    with pytest.raises(GridMismatchError):
        GridTorus((4, 16))
    with pytest.raises(GridMismatchError):
        GridTorus((16,), (1.0, 1.0))
    with pytest.raises(GridMismatchError):
        GridTorus((16,), (-1.0,))


def test_spectral_derivative_exact_on_trig():
    torus = GridTorus((32,))
    (x,) = torus.meshgrid()
    f = np.sin(2 * np.pi * 3 * x) + np.cos(2 * np.pi * 5 * x)
    df = 2 * np.pi * (3 * np.cos(2 * np.pi * 3 * x) - 5 * np.sin(2 * np.pi * 5 * x))
    got = spectral_derivative(f, 0, 1.0)
    assert np.max(np.abs(got - df)) < 1e-10


def test_exterior_derivative_nilpotent():
    torus = GridTorus((16, 16, 16))
    x, y, z = torus.meshgrid()
    f = FormField.from_scalar(torus, np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
    df = exterior_derivative(f)
    ddf = exterior_derivative(df)
    assert ddf.norm_inf() < 1e-9


def test_exterior_derivative_matches_gradient():
    torus = GridTorus((32, 32))
    x, y = torus.meshgrid()
    f = FormField.from_scalar(torus, np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y))
    df = exterior_derivative(f)
    expected_x = 2 * np.pi * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)
    expected_y = 2 * np.pi * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
    assert np.max(np.abs(df.coeffs[..., 0] - expected_x)) < 1e-9
    assert np.max(np.abs(df.coeffs[..., 1] - expected_y)) < 1e-9


def test_wedge_antisymmetry_and_degree():
    torus = GridTorus((8, 8, 8))
    rng = np.random.default_rng(7)
    a = FormField(torus, 1, rng.normal(size=torus.shape + (3,)))
    b = FormField(torus, 1, rng.normal(size=torus.shape + (3,)))
    ab = wedge(a, b)
    ba = wedge(b, a)
    assert ab.degree == 2
    assert np.max(np.abs(ab.coeffs + ba.coeffs)) < 1e-12
    assert wedge(a, a).norm_inf() < 1e-12
    top = wedge(ab, a)
    with pytest.raises(DegreeError):
        wedge(top, a)


def test_hodge_star_flat_torus():
    torus = GridTorus((8, 8))
    g = MetricField.euclidean(torus)
    dx = FormField.constant(torus, 1, [1.0, 0.0])
    sdx = hodge_star(dx, g)
    assert np.allclose(sdx.coeffs[..., 1], 1.0)
    assert np.allclose(sdx.coeffs[..., 0], 0.0)


def test_hodge_star_involution_sign():
    rng = np.random.default_rng(3)
    torus = GridTorus((8, 8, 8))
    mat = rng.normal(size=(3, 3))
    g = MetricField.constant(torus, mat @ mat.T + 3 * np.eye(3))
    from math import comb

    for k in (0, 1, 2, 3):
        a = FormField(torus, k, rng.normal(size=torus.shape + (comb(3, k),)))
        ss = hodge_star(hodge_star(a, g), g)
        sign = (-1.0) ** (k * (3 - k))
        assert np.max(np.abs(ss.coeffs - sign * a.coeffs)) < 1e-10


def test_l2_inner_is_symmetric_positive():
    rng = np.random.default_rng(11)
    torus = GridTorus((8, 8))
    g = MetricField.euclidean(torus)
    a = FormField(torus, 1, rng.normal(size=torus.shape + (2,)))
    b = FormField(torus, 1, rng.normal(size=torus.shape + (2,)))
    assert np.isclose(l2_inner(a, b, g), l2_inner(b, a, g))
    assert l2_inner(a, a, g) > 0


def test_harmonicity_residual_flags_nonharmonic():
    torus = GridTorus((16, 16))
    g = MetricField.euclidean(torus)
    x, _ = torus.meshgrid()
    const = FormField.constant(torus, 1, [1.0, 0.5])
    da, dsa = harmonicity_residual(const, g)
    assert max(da, dsa) < 1e-12
    bumpy = FormField(
        torus, 1, np.stack([np.sin(2 * np.pi * x), np.zeros_like(x)], axis=-1)
    )
    da, dsa = harmonicity_residual(bumpy, g)
    assert max(da, dsa) > 1.0


def test_metric_field_validation():
    torus = GridTorus((8, 8))
    with pytest.raises(MetricError):
        MetricField.constant(torus, np.array([[1.0, 0.5], [0.2, 1.0]]))
    with pytest.raises(MetricError):
        MetricField.constant(torus, np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_cycle_basis_duality():
    torus = GridTorus((8, 8, 8), (1.0, 2.0, 3.0))
    basis = CycleBasis(torus)
    for i in range(3):
        for j in range(3):
            loop = basis.integrate_loop(basis.alphas[j], i)
            assert abs(loop - (1.0 if i == j else 0.0)) < 1e-12
            pairing = integrate_top(wedge(basis.alphas[i], basis.betas[j]))
            assert abs(pairing - (1.0 if i == j else 0.0)) < 1e-12
            slab = basis.integrate_slab(basis.betas[j], i)
            assert abs(slab - (1.0 if i == j else 0.0)) < 1e-12


def test_integrate_cycle_dispatch():
    torus = GridTorus((8, 8))
    basis = CycleBasis(torus)
    assert integrate_cycle(basis.alphas[0], basis, "loop", 0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        integrate_cycle(basis.alphas[0], basis, "disc", 0)


def test_form_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    torus = GridTorus((8, 8))
    a = FormField(torus, 1, rng.normal(size=torus.shape + (2,)))
    path = tmp_path / "form.csv"
    to_csv(a, path)
    back = from_csv(torus, 1, path)
    assert np.max(np.abs(back.coeffs - a.coeffs)) < 1e-15
