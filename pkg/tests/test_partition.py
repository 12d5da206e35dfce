import math

import numpy as np
import pytest

from relu_approx.errors import DomainError, MeasureError
from relu_approx.measures import discrete, uniform
from relu_approx.partition import (
    PERTURBATION, DyadicPartition, active_cubes, decay_slope, draw_offset, in_shell, locate, shell_decay,
    shell_exponent, shell_mass,
)


def test_draw_offset_range_and_determinism():
    for seed in range(50):
        a = draw_offset(3, seed)
        assert np.all((a > -1.5) & (a <= -0.5))
        assert np.all(a <= -0.5 + 1e-300) and np.all(a + 2 > 0.5)
    np.testing.assert_array_equal(draw_offset(2, 42), draw_offset(2, 42))
    assert not np.array_equal(draw_offset(2, 1), draw_offset(2, 2))


def test_index_set_size():
    for d in (1, 2, 3):
        for n in (1, 2, 3):
            assert DyadicPartition(np.full(d, -1.0), n, 4.0).index_count == (2 ** (n + 1)) ** d


def test_locate_example():
    part = DyadicPartition(np.array([-1.0, -1.0]), 1, 4.0)
    assert locate(part, [0.0, 0.0]).tolist() == [2, 2]
    # Half-open convention: a point on a lower face belongs to that cube.
    assert locate(part, [-0.5, 0.0]).tolist() == [1, 2]


def test_locate_out_of_domain():
    part = DyadicPartition(np.array([-1.0]), 2, 4.0)
    with pytest.raises(DomainError):
        locate(part, [1.0])
    with pytest.raises(DomainError):
        locate(part, [-1.5])


@pytest.mark.parametrize("d,n", [(1, 3), (2, 4), (3, 2)])
def test_locate_membership(d, n):
    rng = np.random.default_rng(d * 10 + n)
    part = DyadicPartition(draw_offset(d, rng), n, 3.0)
    x = rng.uniform(-0.5, 0.5, (10_000, d))
    omega = locate(part, x)
    assert np.all((omega >= 0) & (omega < part.per_axis))
    lo, hi = part.lower(omega), part.upper(omega)
    assert np.all((x >= lo) & (x < hi))
    # Exactly one cube: neighbours in every axis direction do not contain x.
    for i in range(d):
        for step in (-1, 1):
            nb = omega.copy()
            nb[:, i] += step
            assert not np.any(np.all((x >= part.lower(nb)) & (x < part.upper(nb)), axis=1))


def test_endpoint_formulas_bitwise():
    a = draw_offset(2, 3)
    part = DyadicPartition(a, 3, 4.0)
    w = np.array([5, 11])
    assert part.lower(w).tobytes() == (a + w / 2**3).tobytes()
    assert part.upper(w).tobytes() == (a + (w + 1) / 2**3).tobytes()


def test_nesting():
    rng = np.random.default_rng(9)
    a = draw_offset(2, rng)
    fine, coarse = DyadicPartition(a, 4, 3.0), DyadicPartition(a, 3, 3.0)
    x = rng.uniform(-0.5, 0.5, (5000, 2))
    np.testing.assert_array_equal(locate(fine, x) // 2, locate(coarse, x))
    # Each fine cube lies inside its parent.
    omega = locate(fine, x)
    assert np.all(coarse.lower(omega // 2) <= fine.lower(omega))
    assert np.all(fine.upper(omega) <= coarse.upper(omega // 2))


def test_active_cubes_d1_example():
    a = np.array([-1.0 - PERTURBATION])
    part = DyadicPartition(a, 1, 4.0)
    omegas, anchors = active_cubes(part)
    expected = [w for w in range(4) if part.lower(w)[0] <= 0.5 and part.upper(w)[0] > -0.5]
    assert omegas[:, 0].tolist() == expected
    assert len(expected) in (2, 3)


@pytest.mark.parametrize("d,n", [(1, 1), (1, 4), (2, 2), (2, 5), (3, 2)])
def test_active_cubes_oracle(d, n):
    rng = np.random.default_rng(d + 7 * n)
    part = DyadicPartition(draw_offset(d, rng), n, 3.0)
    omegas, anchors = active_cubes(part)
    assert len(omegas) <= (2 * 2**n) ** d
    assert np.all(np.abs(anchors) < 0.5)
    np.testing.assert_array_equal(locate(part, anchors), omegas)
    # Exhaustive intersection test over the index set.
    grid = np.stack(np.meshgrid(*[np.arange(part.per_axis)] * d, indexing="ij"), -1).reshape(-1, d)
    hit = np.all((part.lower(grid) < 0.5) & (part.upper(grid) > -0.5), axis=1)
    assert {tuple(w) for w in grid[hit]} == {tuple(w) for w in omegas}
    # Every point of Q is in an active cube.
    x = rng.uniform(-0.5, 0.5, (2000, d))
    assert {tuple(w) for w in locate(part, x)} <= {tuple(w) for w in omegas}


def test_active_cubes_rejects_face_on_boundary():
    with pytest.raises(DomainError):
        active_cubes(DyadicPartition(np.array([-1.0]), 1, 4.0))


def test_shell_mass_lebesgue_closed_form():
    rng = np.random.default_rng(0)
    part = DyadicPartition(draw_offset(1, rng), 3, 4.0)
    omegas, _ = active_cubes(part)
    w = part.shell_width
    # Shell of each active cube intersected with Q, in closed form.
    exact = 0.0
    for om in omegas:
        lo, hi = part.lower(om)[0], part.upper(om)[0]
        for s0, s1 in ((lo, lo + w), (hi - w, hi)):
            exact += max(0.0, min(s1, 0.5) - max(s0, -0.5))
    assert exact == pytest.approx(len(omegas) * 2 * 2.0**-12, rel=0.5)
    est = shell_mass(part, uniform(1), 400_000, np.random.default_rng(1))
    assert est.ci_low <= exact <= est.ci_high or abs(est.estimate - exact) <= 3 * math.sqrt(exact / 400_000)


def test_shell_mass_point_mass_at_anchor():
    part = DyadicPartition(draw_offset(2, 5), 3, 4.0)
    _, anchors = active_cubes(part)
    mu = discrete(anchors[:1], np.array([1.0]))
    assert not in_shell(part, anchors[:1])[0]
    est = shell_mass(part, mu, 1000, np.random.default_rng(0))
    assert est.estimate == 0.0 and est.hits == 0


def test_shell_mass_validation():
    part = DyadicPartition(np.array([-1.0]), 1, 4.0)
    with pytest.raises(ValueError):
        shell_mass(part, uniform(1), 10, np.random.default_rng(0))
    with pytest.raises((MeasureError, ValueError)):
        shell_mass(part, discrete(np.zeros((1, 1)), np.array([0.0])), 1000, np.random.default_rng(0))


def test_shell_width_sanity():
    for d in (1, 2, 3):
        for p in (1.0, 2.0):
            for gamma in (0.5, 1.0, 3.0):
                k = shell_exponent(d, p, gamma)
                assert k >= 2
                for n in range(1, 8):
                    assert DyadicPartition(np.full(d, -1.0), n, k).shell_width < 2.0 ** (-n - 1)


@pytest.mark.parametrize("d", [1, 2])
def test_decay_uniform(d):
    diag = shell_decay(draw_offset(d, 11), uniform(d), 2.0, 1.0, np.random.default_rng(2))
    assert diag.passed
    assert diag.slope <= -2.0 * 0.7
    assert diag.levels == (2, 3, 4, 5, 6)


def test_decay_slope_fit():
    assert decay_slope([2, 3, 4], [2.0**-4, 2.0**-6, 2.0**-8]) == pytest.approx(-2.0)
    assert decay_slope([2, 3, 4], [1e-3, 0.0, 0.0]) == -math.inf


def test_partition_json_round_trip():
    part = DyadicPartition(draw_offset(3, 1), 4, 5.5)
    back = DyadicPartition.from_dict(part.to_dict())
    assert back.offset.tobytes() == part.offset.tobytes()
    assert (back.level, back.shell_exponent) == (4, 5.5)
