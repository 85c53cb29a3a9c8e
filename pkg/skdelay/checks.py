"""
Verification suite of exact identities. Every check is registered in
registry.checks under "<group>.<name>" and returns a CheckResult; failed
checks are reported, never raised.
"""
import itertools
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import mpmath
import numpy as np
from confection import registry

from skdelay.error import ArgumentError
from skdelay.kernels import (
    AssumptionInput,
    MonomialSpec,
    SimplexSpec,
    check_assumptions,
    compute_Aj,
    double_shuffle_check,
    double_shuffle_index,
    h_kernel,
    h_tilde_kernel,
    shuffle_product_check,
    shuffles,
    simplex_integral_closed,
    simplex_integral_recursive,
)
from skdelay.noise import estimate_sln_constant, fbm_covariance
from skdelay.segment_space import build_basis, gram_deviation

logger = logging.getLogger(__name__)

GROUPS = ("shuffle", "simplex", "kernels", "sln", "assumptions")
IDENTITY_TOLERANCE = 1e-10
SIMPLEX_TOLERANCE = 1e-6
CONSTANT_TOLERANCE = 1e-12
KERNEL_PROBES = 2000


@dataclass
class CheckResult:
    name: str
    group: str
    value: float
    tolerance: float
    passed: bool

    def to_dict(self) -> Dict:
        return asdict(self)


def _register(group: str, name: str):
    def decorator(func: Callable):
        full_name = f"{group}.{name}"

        def check(fault: float = 0.0) -> CheckResult:
            value, tolerance = func(fault)
            return CheckResult(
                full_name,
                group,
                float(value),
                float(tolerance),
                bool(value <= tolerance),
            )

        check.__doc__ = func.__doc__
        registry.checks.register(full_name, func=check)
        return check

    return decorator


def available_checks() -> List[str]:
    return sorted(registry.checks.get_all())


def select_checks(suite: Optional[Sequence[str]] = None) -> List[str]:
    """
    Names of the checks in a suite. Entries are group names or full check
    names; None selects every check and an empty suite selects none.
    """
    names = available_checks()
    if suite is None:
        return names
    selected = []
    for entry in suite:
        matches = [
            name
            for name in names
            if name == entry or name.split(".", 1)[0] == entry
        ]
        if not matches:
            raise ArgumentError(
                f"Unknown check or group {entry}, available groups:"
                f" {', '.join(GROUPS)}."
            )
        selected.extend(m for m in matches if m not in selected)
    return selected


def run_checks(
    suite: Optional[Sequence[str]] = None, fault: float = 0.0
) -> List[CheckResult]:
    """Runs the selected checks in a fixed order."""
    results = []
    for name in select_checks(suite):
        result = registry.checks.get(name)(fault=fault)
        if not result.passed:
            logger.warning(
                "Check %s failed: %.3g > %.3g.",
                name,
                result.value,
                result.tolerance,
            )
        results.append(result)
    logger.info(
        "%d of %d checks passed.",
        sum(r.passed for r in results),
        len(results),
    )
    return results


@_register("shuffle", "counts")
def _shuffle_counts(fault: float):
    """|S(m, n)| = binomial(m + n, m) for m + n <= 8."""
    worst = 0
    for m in range(1, 8):
        for n in range(1, 9 - m):
            worst = max(worst, abs(len(shuffles(m, n)) - math.comb(m + n, m)))
    return worst, 0


@_register("shuffle", "brute_force")
def _shuffle_brute_force(fault: float):
    """S(m, n) agrees with filtering all permutations by monotonicity."""
    mismatches = 0
    for m, n in [(1, 1), (1, 2), (2, 2), (2, 3)]:
        size = m + n
        expected = set()
        for perm in itertools.permutations(range(1, size + 1)):
            if list(perm[:m]) == sorted(perm[:m]) and list(perm[m:]) == sorted(
                perm[m:]
            ):
                expected.add(perm)
        mismatches += len(expected.symmetric_difference(shuffles(m, n)))
    return mismatches, 0


def _monomial_cases():
    for m in range(1, 6):
        for n in range(1, 7 - m):
            f = MonomialSpec(tuple(1 if l == 0 else 0 for l in range(m)))
            g = MonomialSpec(tuple(l % 2 for l in range(n)), coefficient=2.0)
            yield f, g
            yield MonomialSpec.one(m), MonomialSpec.one(n)


@_register("shuffle", "product")
def _shuffle_product(fault: float):
    """Product of simplex integrals equals the shuffle sum, m + n <= 6."""
    worst = 0.0
    for f, g in _monomial_cases():
        worst = max(worst, shuffle_product_check(f, g, 0.0, 1.0))
        worst = max(worst, shuffle_product_check(f, g, 0.2, 0.9))
    return worst, IDENTITY_TOLERANCE


@_register("shuffle", "double_product")
def _double_shuffle_product(fault: float):
    """Squared integral over a product of simplices as a double shuffle sum."""
    worst = 0.0
    for f, m, n in [
        (MonomialSpec.one(2), 1, 1),
        (MonomialSpec((1, 0)), 1, 1),
        (MonomialSpec((0, 1, 1)), 2, 1),
        (MonomialSpec((1, 0, 0)), 1, 2),
    ]:
        worst = max(worst, double_shuffle_check(f, m, n, 0.1, 0.4, 0.8))
    return worst, IDENTITY_TOLERANCE


@_register("shuffle", "double_index")
def _double_index(fault: float):
    """Every (sigma, tau) index map is a permutation and distinct pairs give
    distinct maps."""
    defects = 0
    for m, n in [(1, 1), (1, 2), (2, 1), (2, 2)]:
        seen = set()
        for sigma in shuffles(m, m):
            for tau in shuffles(n, n):
                index = double_shuffle_index(sigma, tau, m, n)
                if sorted(index) != list(range(1, 2 * m + 2 * n + 1)):
                    defects += 1
                seen.add(index)
        defects += len(shuffles(m, m)) * len(shuffles(n, n)) - len(seen)
    return defects, 0


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


@_register("simplex", "quadrature")
def _simplex_quadrature(fault: float):
    """Closed form against recursive quadrature, m <= 4."""
    worst = 0.0
    exponents = [
        (0.0,),
        (-0.5,),
        (-0.3, -0.3, -0.3),
        (-0.9, 2.0),
        (1.5, -0.6, 0.3, -0.3),
        (-0.3, -0.3, -0.3, -0.3),
    ]
    for a in exponents:
        spec = SimplexSpec(0.1, 0.7, a)
        worst = max(
            worst,
            _relative(
                simplex_integral_closed(spec, fault),
                simplex_integral_recursive(spec),
            ),
        )
    return worst, SIMPLEX_TOLERANCE


@_register("simplex", "volume")
def _simplex_volume(fault: float):
    """a = 0 gives the volume (t - theta)^m/m!."""
    worst = 0.0
    for m in range(1, 6):
        spec = SimplexSpec(0.25, 1.5, (0.0,) * m)
        worst = max(
            worst,
            _relative(
                simplex_integral_closed(spec, fault),
                1.25**m / math.factorial(m),
            ),
        )
    return worst, CONSTANT_TOLERANCE


@_register("simplex", "inverse_root")
def _simplex_inverse_root(fault: float):
    """int_0^1 s^-1/2 ds = 2."""
    spec = SimplexSpec(0.0, 1.0, (-0.5,))
    return _relative(simplex_integral_closed(spec, fault), 2.0), (
        CONSTANT_TOLERANCE
    )


def _random_simplex_point(rng: np.random.Generator, m, lower, upper):
    return np.sort(rng.uniform(lower, upper, m))[::-1]


@_register("kernels", "bounds")
def _kernel_bounds(fault: float):
    """|H| <= (1 + r)^m and |H~| <= (1 + r)^(m-1) |theta - theta'|^1/2 on
    random probes; reports the largest ratio to the bound minus one."""
    r = 0.5
    basis = build_basis(r, 5, 50)
    rng = np.random.default_rng(0)
    worst = -1.0
    for _ in range(KERNEL_PROBES):
        m = int(rng.integers(1, 5))
        indices = tuple(int(j) for j in rng.integers(1, len(basis) + 1, m))
        theta, theta_prime = np.sort(rng.uniform(0.0, 0.6, 2))
        s = _random_simplex_point(rng, m, theta_prime, 1.0)
        value = abs(h_kernel(indices, s, theta, basis))
        worst = max(worst, value / (1 + r) ** m - 1)
        if theta_prime > theta:
            difference = abs(
                h_tilde_kernel(indices, s, theta, theta_prime, basis)
            )
            bound = (1 + r) ** (m - 1) * np.sqrt(theta_prime - theta)
            worst = max(worst, difference / bound - 1)
    return max(worst, 0.0), CONSTANT_TOLERANCE


@_register("kernels", "gram")
def _gram(fault: float):
    """The cosine family is orthonormal under the grid inner product."""
    return gram_deviation(build_basis(0.5, 8, 40)), CONSTANT_TOLERANCE


@_register("sln", "brownian")
def _sln_brownian(fault: float):
    """Independent increments give the constant 1."""
    worst = 0.0
    for m in (2, 5, 9):
        worst = max(worst, abs(estimate_sln_constant(0.5, m).C_hat - 1))
    return worst, CONSTANT_TOLERANCE


@_register("sln", "covariance")
def _fbm_brownian_covariance(fault: float):
    """The fBm covariance at H = 1/2 is min(s, t)."""
    times = np.linspace(0.0, 2.0, 11)
    deviation = fbm_covariance(0.5, times) - np.minimum.outer(times, times)
    return float(np.max(np.abs(deviation))), CONSTANT_TOLERANCE


@_register("sln", "positive")
def _sln_positive(fault: float):
    """The constant lies in (0, 1] for rough fBm; reports violations."""
    violations = 0
    for H in (0.1, 0.25, 0.45):
        C = estimate_sln_constant(H, 8).C_hat
        violations += not 0 < C <= 1
    return violations, 0


@_register("assumptions", "horizon")
def _assumption_horizon(fault: float):
    """T_max = 0.5 at eps = 1, delta_H = 1, delta_T = 0.5."""
    report = check_assumptions(
        AssumptionInput(1.0, 1.0, 0.5, 1.0, (0.0,), (1.0,), (0.0,), (1.0,))
    )
    return abs(report.T_max - 0.5), CONSTANT_TOLERANCE


@_register("assumptions", "constant")
def _assumption_constant(fault: float):
    """A_1 = 96 sqrt(2) at r = 1, delta_H = 1/2 and unit C, w, L1 norm."""
    value = compute_Aj(
        AssumptionInput(1.0, 0.5, 0.5, 1.0, (0.1,), (1.0,), (1.0,), (1.0,)),
        1,
    )
    with mpmath.workdps(40):
        reference = float(96 * mpmath.sqrt(2))
    return _relative(value, reference), CONSTANT_TOLERANCE


@_register("assumptions", "hurst")
def _assumption_hurst(fault: float):
    """H = 0.4 at delta_H = 1/2 violates (H), H = 0.1 satisfies it."""
    failing = check_assumptions(
        AssumptionInput(1.0, 0.5, 0.25, 0.5, (0.4,), (1.0,), (0.0,), (1.0,))
    )
    passing = check_assumptions(
        AssumptionInput(1.0, 0.5, 0.25, 0.5, (0.1,), (1.0,), (0.0,), (1.0,))
    )
    defects = int(failing.verdicts["H"]) + int(not passing.verdicts["H"])
    return defects, 0
