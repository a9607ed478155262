"""Kolmogorov-forward application: operator algebra, oracles, invariants.

The drift rewrite is checked against a finite-difference expansion of the raw
second-order form, so any error in the divergence bookkeeping shows up as an
O(1) residual instead of an O(grid^2) one.
"""
import math
import warnings

import numpy as np
import pytest

from dcgm.fem import assemble_mass, assemble_stiffness, interpolate
from dcgm.heston import (HestonParams, TensorField, assemble_tensor_stiffness,
                         boundary_mass, expectation, heston_operator,
                         heston_run, put_price)
from dcgm.mesh import build_rect_mesh
from dcgm.quadrature import nine_point_rule
from scipy.stats import norm


def test_params_validation():
    with pytest.raises(ValueError):
        HestonParams(kappa=-1.0)
    with pytest.raises(ValueError):
        HestonParams(rho=-1.5)
    with pytest.raises(ValueError):
        HestonParams(T=0.0)


def test_offdiag_coeff_switch():
    assert HestonParams().offdiag_coeff == pytest.approx(0.2)
    assert HestonParams(offdiag_rho=True).offdiag_coeff == pytest.approx(-0.1)


def test_diffusion_at_point():
    tf = heston_operator(HestonParams())
    D = tf.diffusion(np.array([1.0]), np.array([1.0]))[0]
    assert np.allclose(D, [[0.5, 0.1], [0.1, 0.02]], atol=1e-15)
    assert np.allclose(D, D.T)


def test_diffusion_vanishing_lambda():
    tf = heston_operator(HestonParams(lam=1e-300))
    D = tf.diffusion(np.array([2.0]), np.array([0.5]))[0]
    assert D[0, 0] == pytest.approx(1.0)
    assert abs(D[0, 1]) < 1e-250
    assert abs(D[1, 1]) < 1e-250


def test_drift_jacobian_matches_fd():
    tf = heston_operator(HestonParams())
    x = np.array([37.0]); y = np.array([0.6])
    J = tf.drift.jacobian(x, y)[0]
    h = 1e-6
    for i, (dx, dy) in enumerate([(h, 0.0), (0.0, h)]):
        ap = np.array(tf.drift.value(x + dx, y + dy)).ravel()
        am = np.array(tf.drift.value(x - dx, y - dy)).ravel()
        fd = (ap - am) / (2.0 * h)
        assert np.allclose(J[i], fd, atol=1e-5)


def test_divergence_form_identity():
    # raw: div(b u) - 0.5 sum_ij d_i d_j (A_ij u); rewritten: div(bt u) - div(D grad u)
    p = HestonParams()
    lam, r, kap, th, c = p.lam, p.r, p.kappa, p.theta, p.offdiag_coeff
    h = 1e-3
    xs = np.linspace(20.0, 60.0, 7); ys = np.linspace(0.3, 0.9, 7)
    X, Y = np.meshgrid(xs, ys)
    u = lambda x, y: np.sin(x / 17.0) * np.cos(3.0 * y) + 2.0
    A11 = lambda x, y: x * x * y
    A12 = lambda x, y: lam * x * y
    A22 = lambda x, y: lam * lam * y

    def dx(f, x, y):
        return (f(x + h, y) - f(x - h, y)) / (2.0 * h)

    def dy(f, x, y):
        return (f(x, y + h) - f(x, y - h)) / (2.0 * h)

    def dxx(f, x, y):
        return (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / h ** 2

    def dyy(f, x, y):
        return (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / h ** 2

    def dxy(f, x, y):
        return dy(lambda a, b: dx(f, a, b), x, y)

    raw = (dx(lambda x, y: r * x * u(x, y), X, Y)
           + dy(lambda x, y: kap * (th - y) * u(x, y), X, Y)
           - 0.5 * (dxx(lambda x, y: A11(x, y) * u(x, y), X, Y)
                    + 2.0 * dxy(lambda x, y: A12(x, y) * u(x, y), X, Y)
                    + dyy(lambda x, y: A22(x, y) * u(x, y), X, Y)))

    bt1 = lambda x, y: x * (r - y - c / 2.0)
    bt2 = lambda x, y: kap * (th - y) - (c * y + lam * lam) / 2.0

    def flux1(x, y):
        return 0.5 * (A11(x, y) * dx(u, x, y) + c * x * y * dy(u, x, y))

    def flux2(x, y):
        return 0.5 * (c * x * y * dx(u, x, y) + A22(x, y) * dy(u, x, y))

    rewritten = (dx(lambda x, y: bt1(x, y) * u(x, y), X, Y)
                 + dy(lambda x, y: bt2(x, y) * u(x, y), X, Y)
                 - dx(flux1, X, Y) - dy(flux2, X, Y))
    scale = float(np.max(np.abs(raw)))
    assert float(np.max(np.abs(raw - rewritten))) <= 1e-5 * scale


def test_tensor_stiffness_identity_diffusion(unit_square):
    def eye(x, y):
        return np.broadcast_to(np.eye(2), np.shape(x) + (2, 2))

    Kt = assemble_tensor_stiffness(unit_square, eye)
    K = assemble_stiffness(unit_square)
    assert np.max(np.abs((Kt - K).toarray())) < 1e-13


def test_tensor_stiffness_quadratic_form(unit_square):
    D = np.diag([2.0, 3.0])

    def const(x, y):
        return np.broadcast_to(D, np.shape(x) + (2, 2))

    K = assemble_tensor_stiffness(unit_square, const)
    f = interpolate(unit_square, lambda x, y: np.asarray(x))
    assert f.coeffs @ (K @ f.coeffs) == pytest.approx(2.0, rel=1e-12)
    ones = np.ones(unit_square.nv)
    assert np.max(np.abs(K @ ones)) < 1e-13


def test_price_oracle_tiny_horizon():
    p = HestonParams(T=1e-4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u, steps, price = heston_run(p, 60, 60, 1)
    d = (p.strike - p.mu) / p.sigma
    exact = (p.strike - p.mu) * norm.cdf(d) + p.sigma * norm.pdf(d)
    assert price == pytest.approx(exact, rel=0.01)
    assert steps[-1].price == pytest.approx(price, rel=1e-12)


def test_mass_and_conservation_short_run():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u, steps, _ = heston_run(HestonParams(T=1.0), 40, 40, 20)
    masses = np.array([s.diag.mass for s in steps])
    assert np.max(np.abs(masses - 1.0)) <= 1e-8


def test_price_monotone_in_spot():
    prices = []
    for mu in (50.0, 55.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, _, price = heston_run(HestonParams(mu=mu, T=1.0), 40, 40, 15)
        prices.append(price)
    assert prices[1] < prices[0]


def test_thin_strip_mean_growth():
    # freeze the variance coordinate; the spot mean must compound at the rate
    p = HestonParams(kappa=1e-8, theta=0.05, lam=1e-8, mu=50.0, sigma=10.0,
                     mu_v=0.05, sigma_v=0.01, T=1.0, x_max=150.0, y_max=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u, steps, _ = heston_run(p, 60, 40, 20)
    mean_x = expectation(u, lambda x, y: np.asarray(x), nine_point_rule())
    assert mean_x == pytest.approx(math.exp(0.03) * 50.0, rel=0.05)


def test_put_price_functional(unit_square):
    # density concentrated on the unit square, strike beyond it: price = K - E[x]
    mesh = build_rect_mesh(15, 15, 1.0, 1.0)
    u = interpolate(mesh, lambda x, y: np.ones_like(np.asarray(x)))
    assert put_price(u, 2.0, nine_point_rule()) == pytest.approx(1.5, rel=1e-12)


def test_boundary_mass_diagnostic():
    mesh = build_rect_mesh(15, 15, 1.0, 1.0)
    M = assemble_mass(mesh)
    interior = interpolate(mesh, lambda x, y: np.exp(
        -40.0 * ((np.asarray(x) - 0.5) ** 2 + (np.asarray(y) - 0.5) ** 2)))
    rim = interpolate(mesh, lambda x, y: np.ones_like(np.asarray(x)))
    assert boundary_mass(interior, M) < 0.01 * boundary_mass(rim, M)


def test_step_rows_format():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, steps, _ = heston_run(HestonParams(T=0.1), 20, 20, 2)
    row = steps[0].csv_row(1)
    assert row.startswith("1,")
    assert row.count(",") == 4
