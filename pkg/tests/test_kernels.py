import itertools

import numpy as np
import pytest
from scipy.special import beta as beta_function
from scipy.special import comb

from skdelay.error import ArgumentError, DimensionError
from skdelay.kernels import (
    AssumptionInput,
    MonomialSpec,
    SimplexSpec,
    admissible_horizon,
    check_assumptions,
    compute_Aj,
    default_beta,
    double_shuffle_check,
    double_shuffle_index,
    h_kernel,
    h_tilde_kernel,
    holder_double_integral,
    l1_ceiling,
    malliavin_bounds,
    shuffle_product_check,
    shuffles,
    simplex_gauss_legendre,
    simplex_integral_closed,
    simplex_integral_recursive,
)
from skdelay.segment_space import build_basis

UNIT_A = 96 * np.sqrt(2)


def assumption_input(**kwargs) -> AssumptionInput:
    params = dict(
        eps=1.0,
        delta_H=0.5,
        delta_T=0.25,
        r=1.0,
        H=(0.1,),
        w=(1.0,),
        l1_norms=(0.5 / UNIT_A,),
        C=(1.0,),
    )
    params.update(kwargs)
    return AssumptionInput(**params)


def test_shuffles_are_lexicographic():
    assert tuple(shuffles(1, 2)) == ((1, 2, 3), (2, 1, 3), (3, 1, 2))
    assert len(shuffles(3, 4)) == comb(7, 3, exact=True)
    with pytest.raises(ArgumentError):
        shuffles(6, 7)
    with pytest.raises(ArgumentError):
        shuffles(0, 2)


def test_shuffles_preserve_block_order():
    for sigma in shuffles(3, 2):
        assert sorted(sigma) == [1, 2, 3, 4, 5]
        assert list(sigma[:3]) == sorted(sigma[:3])
        assert list(sigma[3:]) == sorted(sigma[3:])


def test_double_shuffle_index_is_a_permutation():
    assert double_shuffle_index((1, 2), (1, 2), 1, 1) == (1, 3, 2, 4)
    m, n = 2, 1
    for sigma, tau in itertools.product(shuffles(m, m), shuffles(n, n)):
        index = double_shuffle_index(sigma, tau, m, n)
        assert sorted(index) == list(range(1, 2 * m + 2 * n + 1))
    with pytest.raises(DimensionError):
        double_shuffle_index((1, 2, 3), (1, 2), 1, 1)


def test_simplex_rule_volume():
    points, weights = simplex_gauss_legendre(3, 0.0, 2.0, 0)
    assert weights.sum() == pytest.approx(8 / 6, rel=1e-13)
    assert np.all(np.diff(points, axis=1) <= 0)
    assert np.all((points >= 0) & (points <= 2))


@pytest.mark.parametrize(
    "f,g",
    [
        (MonomialSpec.one(1), MonomialSpec.one(1)),
        (MonomialSpec((1, 0)), MonomialSpec((2,))),
        (MonomialSpec((0, 1, 1), 2.0), MonomialSpec((1, 0))),
        (MonomialSpec.one(2), MonomialSpec.one(4)),
    ],
)
def test_shuffle_product(f, g):
    assert shuffle_product_check(f, g, 0.1, 0.9) < 1e-10


def test_shuffle_product_limits():
    with pytest.raises(ArgumentError):
        shuffle_product_check(MonomialSpec.one(3), MonomialSpec.one(4), 0, 1)
    with pytest.raises(ArgumentError):
        shuffle_product_check(MonomialSpec.one(1), MonomialSpec.one(1), 1, 1)


@pytest.mark.parametrize(
    "f,m,n",
    [
        (MonomialSpec.one(2), 1, 1),
        (MonomialSpec((1, 1)), 1, 1),
        (MonomialSpec((0, 1, 2)), 2, 1),
    ],
)
def test_double_shuffle_product(f, m, n):
    assert double_shuffle_check(f, m, n, 0.1, 0.4, 0.8) < 1e-10


def test_double_shuffle_arguments():
    with pytest.raises(DimensionError):
        double_shuffle_check(MonomialSpec.one(3), 1, 1, 0.1, 0.4, 0.8)
    with pytest.raises(ArgumentError):
        double_shuffle_check(MonomialSpec.one(2), 1, 1, 0.4, 0.1, 0.8)
    with pytest.raises(ArgumentError):
        double_shuffle_check(MonomialSpec.one(4), 2, 2, 0.1, 0.4, 0.8)


def test_simplex_integrals():
    assert simplex_integral_closed(SimplexSpec(0, 1, (0, 0))) == pytest.approx(
        0.5
    )
    inverse_root = SimplexSpec(0.2, 0.7, (-0.5,))
    assert simplex_integral_closed(inverse_root) == pytest.approx(
        2 * np.sqrt(0.5), rel=1e-13
    )
    spec = SimplexSpec(0.1, 0.9, (-0.5, 0.3, 1.2))
    closed = simplex_integral_closed(spec)
    assert simplex_integral_recursive(spec) == pytest.approx(closed, rel=1e-8)
    assert simplex_integral_closed(spec, fault=1e-3) == pytest.approx(
        1.001 * closed, rel=1e-13
    )


def test_simplex_spec_validation():
    with pytest.raises(ArgumentError):
        SimplexSpec(0, 1, (-1.0,))
    with pytest.raises(ArgumentError):
        SimplexSpec(1, 1, (0.0,))
    with pytest.raises(ArgumentError):
        SimplexSpec(0, 1, ())


def test_h_kernels():
    basis = build_basis(0.5, 4, 20)
    assert h_kernel((1,), (0.3,), 0.1, basis) == pytest.approx(1.0)
    assert h_kernel((1, 1), (0.6, 0.3), 0.1, basis) == pytest.approx(1.0)
    assert h_tilde_kernel((3, 2), (0.6, 0.3), 0.2, 0.2, basis) == 0.0
    with pytest.raises(ArgumentError):
        h_kernel((1, 2), (0.2, 0.5), 0.1, basis)
    with pytest.raises(ArgumentError):
        h_kernel((1,), (0.05,), 0.1, basis)
    with pytest.raises(DimensionError):
        h_kernel((1, 2), (0.3,), 0.1, basis)


def test_h_kernel_is_bounded(rng):
    r = 0.5
    basis = build_basis(r, 4, 20)
    indices = (2, 3, 4)
    bound = (1 + r) ** (len(indices) / 2)
    for _ in range(200):
        s = np.sort(rng.uniform(0, 2, size=3))[::-1]
        assert abs(h_kernel(indices, s, 0.0, basis)) <= bound + 1e-12


def test_constants_A():
    value = compute_Aj(assumption_input(l1_norms=(1.0,)), 1)
    assert value == pytest.approx(UNIT_A, rel=1e-13)
    double = compute_Aj(assumption_input(l1_norms=(2.0,)), 1)
    assert double == pytest.approx(2 * UNIT_A, rel=1e-13)
    light = compute_Aj(assumption_input(l1_norms=(1.0,), w=(0.5,)), 1)
    assert light == pytest.approx(8 * UNIT_A, rel=1e-13)
    spread = compute_Aj(assumption_input(l1_norms=(1.0,), C=(4.0,)), 1)
    assert spread == pytest.approx(UNIT_A / 8, rel=1e-13)
    with pytest.raises(ArgumentError):
        compute_Aj(assumption_input(), 2)


def test_ceiling_makes_A_geometric():
    for j in (1, 2, 5):
        ceiling = l1_ceiling(j, 0.5, 0.5, 0.8, 0.7)
        input = assumption_input(
            r=0.5,
            H=(0.1,) * j,
            w=(0.7,) * j,
            C=(0.8,) * j,
            l1_norms=(ceiling,) * j,
        )
        assert compute_Aj(input, j) == pytest.approx(2.0**-j, rel=1e-12)


def test_admissible_horizon():
    assert admissible_horizon(1.0, 0.25, 0.5) == pytest.approx(0.5625)
    assert admissible_horizon(1.0, 0.5, 0.5) == pytest.approx(0.25)
    assert admissible_horizon(1.0, 1.0, 0.5) is None


def test_admissible_parameters_pass():
    report = check_assumptions(assumption_input())
    assert report.passed
    assert report.A[0] == pytest.approx(0.5)
    assert report.T_max == pytest.approx(0.5625)
    assert report.horizon == pytest.approx(0.5625)
    assert report.to_dict()["passed"]


def test_failing_conditions_are_named():
    assert set(check_assumptions(assumption_input(H=(0.2,))).failures) == {
        "H",
        "H'",
    }
    heavy = check_assumptions(assumption_input(l1_norms=(1.2 / UNIT_A,)))
    assert set(heavy.failures) == {"A", "A'"}
    assert not check_assumptions(
        assumption_input(l1_norms=(1.4 / UNIT_A,))
    ).verdicts["TA"]
    late = check_assumptions(assumption_input(delta_T=1.0))
    assert set(late.failures) == {"T", "TA"}
    assert not late.delta_T_in_stated_range
    beyond = check_assumptions(assumption_input(T=0.6))
    assert beyond.failures == ["T"]


def test_truncated_conditions():
    input = assumption_input(
        H=(0.1, 0.1),
        w=(1.0, 1.0),
        C=(1.0, 1.0),
        l1_norms=(0.5 / UNIT_A, 1.2 / UNIT_A),
    )
    first = check_assumptions(input, d=1)
    assert first.verdicts["A"]
    assert not first.verdicts["A'"]
    assert check_assumptions(input).A_sum == pytest.approx(1.7)
    with pytest.raises(ArgumentError):
        check_assumptions(input, d=0)


def test_assumption_input_validation():
    with pytest.raises(ArgumentError):
        assumption_input(eps=1.5)
    with pytest.raises(ArgumentError):
        assumption_input(delta_T=0.0)
    with pytest.raises(DimensionError):
        assumption_input(l1_norms=(0.1, 0.1))
    with pytest.raises(DimensionError):
        assumption_input(C=(1.0, 1.0))


def test_geometric_bound_at_ratio_one_half():
    input = assumption_input(delta_T=0.1, l1_norms=(0.8 / UNIT_A,), T=0.6)
    bounds = malliavin_bounds(
        input, t=0.5, theta=0.109375, theta_prime=0.5, M=0
    )
    assert bounds.finite
    assert bounds.ratio == pytest.approx(0.5)
    assert bounds.geometric == pytest.approx(1.0)
    series = sum(0.5**k for k in range(1, 61)) ** 2
    assert bounds.geometric == pytest.approx(series, rel=1e-12)
    assert bounds.pointwise == pytest.approx(10 * 0.390625)


def test_bounds_vanish_at_the_observation_time():
    input = assumption_input(delta_T=0.1, l1_norms=(0.8 / UNIT_A,), T=0.6)
    bounds = malliavin_bounds(input, t=0.5, theta=0.5, theta_prime=0.5, M=1.0)
    assert bounds.pointwise == 0.0
    assert bounds.geometric == 0.0
    assert bounds.difference == 0.0


def test_inadmissible_bounds_are_infinite():
    bounds = malliavin_bounds(
        assumption_input(delta_T=1.0), t=0.3, theta=0.1, theta_prime=0.2, M=1
    )
    assert not bounds.finite
    assert bounds.geometric == np.inf
    assert bounds.double_integral == np.inf
    assert bounds.to_dict()["finite"] is False


def test_bound_arguments():
    input = assumption_input()
    with pytest.raises(ArgumentError):
        malliavin_bounds(input, t=0.3, theta=0.4, theta_prime=0.1, M=0)
    with pytest.raises(ArgumentError):
        malliavin_bounds(input, 0.3, 0.1, 0.2, 0, beta=0.6)
    assert default_beta(0.5) == pytest.approx(0.45)
    assert default_beta(0.2) == pytest.approx(0.18)


def test_holder_double_integral():
    t, delta_H, beta, r, delta_T, prefactor = 0.5, 0.5, 0.3, 1.0, 0.2, 2.0
    p = 2 * delta_H - 2 * beta

    def beta_integral(alpha, gamma):
        return t ** (alpha + gamma + 1) * beta_function(gamma + 1, alpha + 1)

    expected = (
        6
        * prefactor
        * (
            t ** (p + 1) / ((p + 1) * p)
            + beta_integral(2 * delta_H, 1 - 2 * beta)
            / ((1 - 2 * beta) * (1 + r) ** 2)
            + delta_T ** (-2 * delta_H) * beta_integral(2 * delta_H, p) / p
        )
    )
    value = holder_double_integral(prefactor, delta_T, delta_H, r, t, beta)
    assert value == pytest.approx(expected, rel=1e-8)
