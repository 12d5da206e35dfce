import math

import numpy as np
import pytest

from relu_approx.errors import BoundError, DomainError, EvaluationError
from relu_approx.taylor import (
    TargetFunction, constant, cusp, evaluate_taylor, exponents_for, gaussian, grid, parse_function, polynomial,
    stencil_weights, taylor_coefficient_matrix, taylor_coefficients, taylor_remainder_check, trig_product,
)


def plain(fn, d, beta, bound=10.0, name="f"):
    """Target without a derivative oracle, forcing finite differences."""
    return TargetFunction(name, d, beta, bound, fn)


def test_square_coefficients():
    f = polynomial(1, [0, 0, 1], 2.5, 1.0)
    assert taylor_coefficients(f, [0.0]) == {(0,): 0.0, (1,): 0.0, (2,): 1.0}
    fd = taylor_coefficients(plain(lambda x: x[:, 0] ** 2, 1, 2.5), [0.0])
    assert fd[(0,)] == 0.0
    assert fd[(1,)] == pytest.approx(0.0, abs=1e-10)
    assert fd[(2,)] == pytest.approx(1.0, abs=1e-8)


def test_constant_coefficients():
    f = constant(2, 0.3, 3.0, 1.0)
    coeffs = taylor_coefficients(f, [0.1, 0.2])
    assert coeffs[(0, 0)] == 0.3
    assert all(v == 0.0 for a, v in coeffs.items() if any(a))


def test_finite_differences_match_analytic_sin():
    f = plain(lambda x: np.sin(2 * math.pi * x[:, 0]), 2, 3.0)
    c = np.array([0.1, -0.2])
    coeffs = taylor_coefficients(f, c)
    w = 2 * math.pi
    exact = {
        (0, 0): math.sin(w * c[0]), (1, 0): w * math.cos(w * c[0]), (2, 0): -w * w * math.sin(w * c[0]) / 2,
    }
    for a, v in coeffs.items():
        ref = exact.get(a, 0.0)
        assert abs(v - ref) <= 1e-4 * max(abs(ref), 1.0)


def test_fd_near_boundary_shifts_stencil():
    f = trig_product(2, 1.0, 3.0, 1.0)
    fd = plain(f.evaluator, 2, 3.0)
    centers = np.array([[0.49, -0.49], [-0.499, 0.0]])
    np.testing.assert_allclose(taylor_coefficient_matrix(fd, centers), taylor_coefficient_matrix(f, centers),
                               atol=1e-5)


def test_fd_convergence_order():
    f = gaussian(1, 0.1, 0.3, 2.5, 2.0)
    fd = plain(f.evaluator, 1, 2.5)
    center = np.array([[0.05]])
    exact = taylor_coefficient_matrix(f, center)[0]
    # For beta = 2.5 the step scales as eps**0.4, so eps * 2**-2.5 halves it.
    errs = []
    for k in range(3):
        eps = 2.0**-6 * 2.0 ** (-2.5 * k)
        errs.append(np.abs(taylor_coefficient_matrix(fd, center, eps_target=eps, accuracy_order=2)[0] - exact)[1:])
    # The first derivative uses a 3-point stencil (order h**2); the second a
    # symmetric 5-point one, whose odd error terms cancel (order h**4).
    expected = np.array([4.0, 16.0])
    for r in (errs[0] / errs[1], errs[1] / errs[2]):
        assert np.all(np.abs(r / expected - 1) < 0.25)


def test_stencil_weights_central():
    np.testing.assert_allclose(stencil_weights([-1, 0, 1], 1), [-0.5, 0, 0.5], atol=1e-14)
    np.testing.assert_allclose(stencil_weights([-1, 0, 1], 2), [1, -2, 1], atol=1e-14)


def test_polynomial_fixed_point():
    rng = np.random.default_rng(0)
    f = polynomial(2, [0.2, -0.4, 0.3, 0.1], 4.0, 5.0)
    center = np.array([0.1, -0.3])
    coeffs = taylor_coefficients(f, center)
    x = rng.uniform(-0.5, 0.5, (500, 2))
    np.testing.assert_allclose(evaluate_taylor(coeffs, center, x), f(x), atol=1e-10)


def test_remainder_linear_is_zero():
    f = polynomial(2, [0.5, 0.7], 1.0, 2.0)
    coeffs = {(0, 0): 0.5 + 0.7 * 0.1, (1, 0): 0.0, (0, 1): 0.0}
    # beta = 1 keeps only the constant; add the exact gradient by hand.
    coeffs[(1, 0)] = coeffs[(0, 1)] = 0.7
    assert taylor_remainder_check(f, [0.1, 0.0], coeffs, 200) <= 1e-12


def test_remainder_cusp():
    f = cusp(1, 0.0, 1.5, 1.5, 1.0)
    coeffs = taylor_coefficients(f, [0.0])
    assert taylor_remainder_check(f, [0.0], coeffs, 1000) <= 1 + 1e-6


def test_remainder_cube():
    f = polynomial(1, [0, 0, 0, 1], 2.0, 1.0)
    coeffs = taylor_coefficients(f, [0.0])
    assert coeffs == {(0,): 0.0, (1,): 0.0}
    assert taylor_remainder_check(f, [0.0], coeffs, 100) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        taylor_remainder_check(f, [0.0], coeffs, 10)


def test_center_must_be_interior():
    f = trig_product(1, 1.0, 2.0, 1.0)
    with pytest.raises(DomainError):
        taylor_coefficients(f, [0.5])


def test_non_evaluable_function():
    f = plain(lambda x: np.log(x[:, 0] - 0.2), 1, 2.0)
    with np.errstate(all="ignore"), pytest.raises(EvaluationError):
        taylor_coefficients(f, [0.2])


def test_check_bound():
    rng = np.random.default_rng(0)
    assert trig_product(2, 1.0, 2.0, 1.0).check_bound(rng) <= 1.0
    with pytest.raises(BoundError):
        constant(1, 3.0, 1.0, 1.0).check_bound(rng)


def test_exponents_graded():
    assert exponents_for(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(exponents_for(3, 3)) == math.comb(6, 3)


def test_registry_parsing(tmp_path):
    assert parse_function("zero", 2, 1.0, 1.0)(np.zeros((1, 2)))[0] == 0.0
    f = parse_function("trig-product(2)", 2, 2.0, 1.0)
    x = np.array([[0.1, 0.2]])
    assert f(x)[0] == pytest.approx(math.sin(0.2 * math.pi) * math.cos(0.4 * math.pi))
    g = parse_function("gaussian(0.1:0.0,0.3)", 2, 2.0, 1.0)
    assert g(np.array([[0.1, 0.0]]))[0] == 1.0
    c = parse_function("cusp(0.1)", 2, 0.75, 1.0)
    assert c(np.array([[0.1, 0.1]]))[0] == 0.0
    assert parse_function("polynomial(1,2)", 1, 2.0, 5.0)(np.array([[0.25]]))[0] == 1.5
    np.save(tmp_path / "g.npy", np.array([[0.0, 1.0], [1.0, 2.0]]))
    h = parse_function(f"grid({tmp_path / 'g.npy'})", 2, 1.0, 3.0)
    assert h(np.array([[0.0, 0.0]]))[0] == pytest.approx(1.0)
    for bad in ("nope", "polynomial()", "cusp(0:0:0)"):
        with pytest.raises(ValueError):
            parse_function(bad, 2, 1.0, 1.0)


def test_grid_beta_limit():
    with pytest.raises(ValueError):
        grid(1, np.array([0.0, 1.0]), 1.5, 1.0)


def test_oracles_match_finite_differences():
    for f in (trig_product(2, 1.5, 3.0, 1.0), gaussian(2, [0.1, -0.1], 0.3, 3.0, 1.0),
              polynomial(2, [0.1, 0.2, -0.3, 0.4], 3.0, 1.0)):
        centers = np.array([[0.05, 0.1], [-0.3, 0.25]])
        fd = plain(f.evaluator, 2, f.beta)
        np.testing.assert_allclose(taylor_coefficient_matrix(fd, centers), taylor_coefficient_matrix(f, centers),
                                   atol=1e-6)
