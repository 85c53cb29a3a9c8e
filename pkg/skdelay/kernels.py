"""
Exact identities and explicit constants of the compactness argument:
shuffle permutations, integrals over simplices, the kernels built from
chi_j, the constants A_j, the admissibility conditions and the resulting
bounds on the first variation.
"""
import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import scipy.integrate
import scipy.special

from skdelay.error import ArgumentError, DimensionError
from skdelay.noise import estimate_sln_constant
from skdelay.segment_space import BasisSet, chi

logger = logging.getLogger(__name__)

MAX_SHUFFLE_SIZE = 12
MAX_CHECK_SIZE = 6
MAX_DOUBLE_CHECK_SIZE = 3


@dataclass(frozen=True)
class ShuffleSet:
    """All shuffles of two blocks of sizes m and n, as one-based index maps
    (sigma(1), ..., sigma(m + n))."""

    m: int
    n: int
    permutations: Tuple[Tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.permutations)

    def __iter__(self):
        return iter(self.permutations)


def shuffles(m: int, n: int) -> ShuffleSet:
    """
    Enumerates S(m, n) in lexicographic order.

    Parameters
    ----------
    m: int
        Size of the first block.
    n: int
        Size of the second block.
    """
    if m < 1 or n < 1:
        raise ArgumentError(f"Block sizes must be positive, got ({m}, {n}).")
    if m + n > MAX_SHUFFLE_SIZE:
        raise ArgumentError(
            f"Shuffles are enumerated up to m + n = {MAX_SHUFFLE_SIZE},"
            f" got {m + n}."
        )
    positions = range(1, m + n + 1)
    permutations = []
    for first in itertools.combinations(positions, m):
        chosen = set(first)
        second = tuple(p for p in positions if p not in chosen)
        permutations.append(first + second)
    return ShuffleSet(m, n, tuple(permutations))


def double_shuffle_index(
    sigma: Sequence[int], tau: Sequence[int], m: int, n: int
) -> Tuple[int, ...]:
    """
    Index map (sigma, tau) on {1, ..., 2m + 2n} for sigma in S(m, m) and
    tau in S(n, n), which interleaves the two copies of a function on
    Delta^m x Delta^n.
    """
    if len(sigma) != 2 * m or len(tau) != 2 * n:
        raise DimensionError(
            f"Expected shuffles of sizes {2 * m} and {2 * n},"
            f" got {len(sigma)} and {len(tau)}."
        )
    index = []
    for i in range(1, 2 * m + 2 * n + 1):
        if i <= m:
            index.append(sigma[i - 1])
        elif i <= m + n:
            index.append(2 * m + tau[i - m - 1])
        elif i <= 2 * m + n:
            index.append(sigma[i - n - 1])
        else:
            index.append(2 * m + tau[i - 2 * m - 1])
    return tuple(index)


@dataclass(frozen=True)
class MonomialSpec:
    """Monomial coefficient * prod_l s_l^exponents[l] in simplex variables."""

    exponents: Tuple[int, ...]
    coefficient: float = 1.0

    def __post_init__(self):
        exponents = tuple(int(p) for p in self.exponents)
        if any(p < 0 for p in exponents):
            raise ArgumentError("Monomial exponents must be nonnegative.")
        object.__setattr__(self, "exponents", exponents)

    def __len__(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    def __call__(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != len(self):
            raise DimensionError(
                f"Monomial in {len(self)} variables got {s.shape[-1]}."
            )
        return self.coefficient * np.prod(
            s ** np.asarray(self.exponents, dtype=float), axis=-1
        )

    @classmethod
    def one(cls, m: int) -> "MonomialSpec":
        return cls((0,) * m)


def simplex_gauss_legendre(
    m: int, lower: float, upper: float, degree: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature on Delta^m = {lower <= s_m < ... < s_1 <= upper}, exact for
    polynomials of total degree up to degree.

    The cube [0, 1]^m is mapped onto the simplex by
    s_l = lower + (upper - lower) u_1 ... u_l and every axis carries a
    Gauss-Legendre rule.

    Returns
    ----------
    points: ndarray of shape (n_points, m)
    weights: ndarray of shape (n_points,)
    """
    n_nodes = (degree + m) // 2 + 1
    nodes, node_weights = np.polynomial.legendre.leggauss(n_nodes)
    nodes = (nodes + 1) / 2
    node_weights = node_weights / 2
    grids = np.meshgrid(*([nodes] * m), indexing="ij")
    cube = np.stack([g.ravel() for g in grids], axis=-1)
    weight_grids = np.meshgrid(*([node_weights] * m), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in weight_grids], -1), -1)
    length = upper - lower
    points = lower + length * np.cumprod(cube, axis=1)
    powers = np.arange(m - 1, -1, -1, dtype=float)
    jacobian = length**m * np.prod(cube**powers, axis=1)
    return points, weights * jacobian


def _product_rule(parts):
    """Tensor product of quadrature rules on consecutive blocks."""
    points, weights = parts[0]
    for other_points, other_weights in parts[1:]:
        points = np.concatenate(
            [
                np.repeat(points, len(other_points), axis=0),
                np.tile(other_points, (len(points), 1)),
            ],
            axis=1,
        )
        weights = np.outer(weights, other_weights).ravel()
    return points, weights


def shuffle_product_check(
    f: MonomialSpec, g: MonomialSpec, theta: float, t: float
) -> float:
    """
    |int_{Delta^m} f int_{Delta^n} g - sum_{sigma in S(m, n)}
    int_{Delta^{m+n}} f(s_sigma(1..m)) g(s_sigma(m+1..m+n))| on [theta, t].
    """
    m, n = len(f), len(g)
    if m + n > MAX_CHECK_SIZE:
        raise ArgumentError(
            f"Shuffle checks are limited to m + n <= {MAX_CHECK_SIZE}."
        )
    if not theta < t:
        raise ArgumentError(f"Need theta < t, got [{theta}, {t}].")
    degree = f.degree + g.degree
    points, weights = simplex_gauss_legendre(m, theta, t, degree)
    lhs = weights @ f(points)
    points, weights = simplex_gauss_legendre(n, theta, t, degree)
    lhs *= weights @ g(points)
    points, weights = simplex_gauss_legendre(m + n, theta, t, degree)
    rhs = 0.0
    for sigma in shuffles(m, n):
        index = np.asarray(sigma) - 1
        rhs += weights @ (f(points[:, index[:m]]) * g(points[:, index[m:]]))
    return float(abs(lhs - rhs))


def double_shuffle_check(
    f: MonomialSpec, m: int, n: int, theta: float, theta_prime: float, t: float
) -> float:
    """
    Residual of the squared integral over Delta^m_{theta',t} x
    Delta^n_{theta,theta'} against the sum over (sigma, tau) in
    S(m, m) x S(n, n) of the integral of the interleaved product.
    """
    if len(f) != m + n:
        raise DimensionError(f"f needs {m + n} variables, has {len(f)}.")
    if m + n > MAX_DOUBLE_CHECK_SIZE:
        raise ArgumentError(
            f"Double shuffle checks are limited to m + n <="
            f" {MAX_DOUBLE_CHECK_SIZE}."
        )
    if not theta < theta_prime < t:
        raise ArgumentError("Need theta < theta' < t.")
    degree = 2 * f.degree
    points, weights = _product_rule(
        [
            simplex_gauss_legendre(m, theta_prime, t, degree),
            simplex_gauss_legendre(n, theta, theta_prime, degree),
        ]
    )
    lhs = float(weights @ f(points)) ** 2
    points, weights = _product_rule(
        [
            simplex_gauss_legendre(2 * m, theta_prime, t, degree),
            simplex_gauss_legendre(2 * n, theta, theta_prime, degree),
        ]
    )
    rhs = 0.0
    for sigma in shuffles(m, m):
        for tau in shuffles(n, n):
            index = np.asarray(double_shuffle_index(sigma, tau, m, n)) - 1
            first = f(points[:, index[: m + n]])
            second = f(points[:, index[m + n :]])
            rhs += weights @ (first * second)
    return float(abs(lhs - rhs))


@dataclass(frozen=True)
class SimplexSpec:
    """Integral of prod_j (s_j - s_{j+1})^a_j over Delta^m_{theta,t},
    with s_{m+1} = theta."""

    theta: float
    t: float
    a: Tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if not a:
            raise ArgumentError("Need at least one exponent.")
        if any(x <= -1 for x in a):
            raise ArgumentError(f"Exponents must be larger than -1, got {a}.")
        if not self.theta < self.t:
            raise ArgumentError(
                f"Need theta < t, got [{self.theta}, {self.t}]."
            )
        object.__setattr__(self, "a", a)

    @property
    def m(self) -> int:
        return len(self.a)


def simplex_integral_closed(spec: SimplexSpec, fault: float = 0.0) -> float:
    """
    prod_l Gamma(a_l + 1) / Gamma(sum_l a_l + m + 1)
    * (t - theta)^(sum_l a_l + m)

    Parameters
    ----------
    spec: SimplexSpec
        Interval and exponents.
    fault: float, default 0.0
        Relative perturbation of the result, used by the verification
        suite to make sure the simplex checks can fail.
    """
    a = np.asarray(spec.a)
    exponent = a.sum() + spec.m
    log_value = (
        np.sum(scipy.special.gammaln(a + 1))
        - scipy.special.gammaln(exponent + 1)
        + exponent * np.log(spec.t - spec.theta)
    )
    return float(np.exp(log_value) * (1 + fault))


def simplex_integral_recursive(spec: SimplexSpec) -> float:
    """
    Integrates the innermost variable first with algebraic-weight
    quadrature; the inner integral over [theta, s] is c (s - theta)^e, so
    every level reduces to a one-dimensional integral on [theta, theta + 1].
    """
    a = spec.a
    constant = 1.0
    exponent = a[-1]
    for j in range(spec.m - 2, -1, -1):
        value, _ = scipy.integrate.quad(
            lambda _: 1.0,
            0.0,
            1.0,
            weight="alg",
            wvar=(exponent, a[j]),
            epsabs=1e-14,
            epsrel=1e-12,
        )
        constant *= value
        exponent = exponent + a[j] + 1
    value, _ = scipy.integrate.quad(
        lambda _: 1.0,
        spec.theta,
        spec.t,
        weight="alg",
        wvar=(exponent, 0.0),
        epsabs=1e-14,
        epsrel=1e-12,
    )
    return float(constant * value)


def _check_simplex_point(s: np.ndarray, lower: float) -> None:
    if s.ndim != 1 or s.size < 1:
        raise DimensionError("Simplex points are nonempty vectors.")
    if np.any(np.diff(s) > 0) or s[-1] < lower:
        raise ArgumentError(
            f"Point {s} is not ordered as {lower} <= s_m <= ... <= s_1."
        )


def _chi_clamped(j: int, z: float, basis: BasisSet) -> float:
    return chi(j, max(z, -basis.r), basis)


def h_kernel(
    indices: Sequence[int], s: Sequence[float], theta: float, basis: BasisSet
) -> float:
    """chi_{j_m}(theta - s_m) prod_{l<m} chi_{j_l}(s_{l+1} - s_l); arguments
    below -r use the indicator of the whole interval [-r, 0]."""
    s = np.asarray(s, dtype=float)
    if len(indices) != s.size:
        raise DimensionError("Need one basis index per simplex variable.")
    _check_simplex_point(s, theta)
    value = _chi_clamped(indices[-1], theta - s[-1], basis)
    for l in range(s.size - 1):
        value *= _chi_clamped(indices[l], s[l + 1] - s[l], basis)
    return float(value)


def h_tilde_kernel(
    indices: Sequence[int],
    s: Sequence[float],
    theta: float,
    theta_prime: float,
    basis: BasisSet,
) -> float:
    """Same as h_kernel with the last factor replaced by
    chi_{j_m}(theta - s_m) - chi_{j_m}(theta' - s_m)."""
    s = np.asarray(s, dtype=float)
    if len(indices) != s.size:
        raise DimensionError("Need one basis index per simplex variable.")
    _check_simplex_point(s, max(theta, theta_prime))
    value = _chi_clamped(indices[-1], theta - s[-1], basis) - _chi_clamped(
        indices[-1], theta_prime - s[-1], basis
    )
    for l in range(s.size - 1):
        value *= _chi_clamped(indices[l], s[l + 1] - s[l], basis)
    return float(value)


@dataclass(frozen=True)
class AssumptionInput:
    """Parameters entering the admissibility conditions.

    Parameters
    ----------
    eps: float
        Perturbation scale in (0, 1].
    delta_H: float
        Exponent delta_H in (0, 1].
    delta_T: float
        Margin delta_T > 0 of the time condition.
    r: float
        Delay.
    H: tuple of float
        Hurst parameters of the perturbation.
    w: tuple of float
        Weights of the perturbation.
    l1_norms: tuple of float
        ||b_j||_L1 of the drift components, at most as many as weights.
    C: tuple of float
        Local non-determinism constants C_j, one per Hurst parameter.
    T: float, optional
        Horizon; when missing the largest admissible horizon is used.
    """

    eps: float
    delta_H: float
    delta_T: float
    r: float
    H: Tuple[float, ...]
    w: Tuple[float, ...]
    l1_norms: Tuple[float, ...]
    C: Tuple[float, ...]
    T: Optional[float] = None

    def __post_init__(self):
        for name in ("H", "w", "l1_norms", "C"):
            object.__setattr__(
                self, name, tuple(float(v) for v in getattr(self, name))
            )
        if not 0 < self.eps <= 1:
            raise ArgumentError(f"eps must be in (0, 1], got {self.eps}.")
        if not 0 < self.delta_H <= 1:
            raise ArgumentError(
                f"delta_H must be in (0, 1], got {self.delta_H}."
            )
        if not self.delta_T > 0:
            raise ArgumentError(
                f"delta_T must be positive, got {self.delta_T}."
            )
        if not self.r > 0:
            raise ArgumentError(f"Delay must be positive, got {self.r}.")
        if not len(self.H) == len(self.w) == len(self.C):
            raise DimensionError(
                "Hurst parameters, weights and constants differ in length."
            )
        if len(self.l1_norms) > len(self.w):
            raise DimensionError(
                f"{len(self.l1_norms)} drift components but only"
                f" {len(self.w)} perturbation terms."
            )
        if any(v < 0 for v in self.l1_norms):
            raise ArgumentError("L1 norms cannot be negative.")
        if self.T is not None and not self.T > 0:
            raise ArgumentError(f"Horizon must be positive, got {self.T}.")

    @classmethod
    def with_estimated_constants(
        cls,
        eps: float,
        delta_H: float,
        delta_T: float,
        r: float,
        H: Sequence[float],
        w: Sequence[float],
        l1_norms: Sequence[float],
        T: Optional[float] = None,
        sln_increments: int = 8,
    ) -> "AssumptionInput":
        """Fills C_j with the estimated local non-determinism constants."""
        C = tuple(estimate_sln_constant(h, sln_increments).C_hat for h in H)
        return cls(
            eps, delta_H, delta_T, r, tuple(H), tuple(w), tuple(l1_norms), C, T
        )


def _a_prefactor(r: float, delta_H: float) -> mpmath.mpf:
    return (
        48 * mpmath.sqrt(2) * (1 + mpmath.mpf(r)) * mpmath.gamma(delta_H)
    ) / mpmath.sqrt(mpmath.pi)


def compute_Aj(input: AssumptionInput, j: int) -> float:
    """A_j = 48 sqrt(2) (1 + r) Gamma(delta_H)/sqrt(pi) C_j^-3/2 |w_j|^-3
    ||b_j||_L1, evaluated with 30 significant digits."""
    if not 1 <= j <= len(input.l1_norms):
        raise ArgumentError(
            f"Index {j} outside of 1..{len(input.l1_norms)}."
        )
    C, w = input.C[j - 1], input.w[j - 1]
    if C <= 0 or w == 0:
        raise ArgumentError(f"C_{j} and w_{j} must be nonzero, got {C}, {w}.")
    with mpmath.workdps(30):
        value = (
            _a_prefactor(input.r, input.delta_H)
            * mpmath.mpf(C) ** mpmath.mpf(-1.5)
            * abs(mpmath.mpf(w)) ** -3
            * mpmath.mpf(input.l1_norms[j - 1])
        )
        return float(value)


def l1_ceiling(j: int, r: float, delta_H: float, C: float, w: float) -> float:
    """Largest ||b_j||_L1 with A_j <= 2^-j, which makes sum_j A_j < 1."""
    if C <= 0 or w == 0:
        raise ArgumentError(f"C and w must be nonzero, got {C}, {w}.")
    with mpmath.workdps(30):
        value = (
            mpmath.mpf(2) ** (-j)
            * mpmath.mpf(C) ** mpmath.mpf(1.5)
            * abs(mpmath.mpf(w)) ** 3
            / _a_prefactor(r, delta_H)
        )
        return float(value)


def admissible_horizon(
    eps: float, delta_T: float, delta_H: float
) -> Optional[float]:
    """(eps^3 - delta_T)^(1/delta_H), or None when eps^3 <= delta_T."""
    gap = eps**3 - delta_T
    if gap <= 0:
        return None
    return float(gap ** (1 / delta_H))


@dataclass
class AssumptionReport:
    A: Tuple[float, ...]
    A_sum: float
    A_sum_all: float
    T_max: Optional[float]
    horizon: Optional[float]
    verdicts: Dict[str, bool]
    delta_T_in_stated_range: bool
    l1_ceilings: Tuple[float, ...]
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        res = asdict(self)
        res["passed"] = self.passed
        return res


def check_assumptions(
    input: AssumptionInput, d: Optional[int] = None
) -> AssumptionReport:
    """
    Evaluates the time condition (T), the Hurst conditions (H) and (H'),
    the summability conditions (A) and (A') and their combination
    eps^-3 T^delta_H sum_j A_j < 1.

    (H) and (A) use the first d terms, (H') and (A') every term that was
    given. Failed conditions are listed in the report, nothing is raised.
    """
    d = len(input.l1_norms) if d is None else d
    if not 1 <= d <= len(input.l1_norms):
        raise ArgumentError(
            f"d must be in 1..{len(input.l1_norms)}, got {d}."
        )
    A = tuple(compute_Aj(input, j) for j in range(1, len(input.l1_norms) + 1))
    A_sum = float(sum(A[:d]))
    A_sum_all = float(sum(A))
    bound = (1 - input.delta_H) / 3
    T_max = admissible_horizon(input.eps, input.delta_T, input.delta_H)
    horizon = input.T if input.T is not None else T_max
    time_ok = T_max is not None and (input.T is None or input.T < T_max)
    combined = (
        horizon is not None
        and input.eps**-3 * horizon**input.delta_H * A_sum < 1
    )
    verdicts = {
        "T": bool(time_ok),
        "H": all(h < bound for h in input.H[:d]),
        "A": A_sum < 1,
        "H'": all(h < bound for h in input.H),
        "A'": A_sum_all < 1,
        "TA": bool(combined),
    }
    failures = [name for name, ok in verdicts.items() if not ok]
    ceilings = tuple(
        l1_ceiling(j, input.r, input.delta_H, input.C[j - 1], input.w[j - 1])
        for j in range(1, len(input.l1_norms) + 1)
    )
    report = AssumptionReport(
        A=A,
        A_sum=A_sum,
        A_sum_all=A_sum_all,
        T_max=T_max,
        horizon=horizon,
        verdicts=verdicts,
        delta_T_in_stated_range=input.delta_T
        < input.eps ** (3 / input.delta_H),
        l1_ceilings=ceilings,
        failures=failures,
    )
    if failures:
        logger.info("Assumptions failing: %s.", ", ".join(failures))
    return report


@dataclass
class BoundReport:
    """Theoretical bounds on the first variation of the mollified solution."""

    ratio: float
    geometric: float
    simplified_series: float
    pointwise: float
    I1: float
    I2: float
    I3: float
    difference: float
    integrated: float
    double_integral: float
    beta: float
    T_max: Optional[float]
    failures: List[str] = field(default_factory=list)

    @property
    def finite(self) -> bool:
        return not self.failures

    def to_dict(self) -> Dict:
        res = asdict(self)
        res["finite"] = self.finite
        return res


def default_beta(delta_H: float) -> float:
    return 0.9 * min(delta_H, 0.5)


def _beta_integral(t: float, alpha: float, gamma: float) -> float:
    """int_0^t (t - b)^alpha b^gamma db by algebraic-weight quadrature."""
    value, _ = scipy.integrate.quad(
        lambda _: 1.0,
        0.0,
        t,
        weight="alg",
        wvar=(gamma, alpha),
        epsabs=1e-14,
        epsrel=1e-12,
    )
    return float(value)


def holder_double_integral(
    prefactor: float,
    delta_T: float,
    delta_H: float,
    r: float,
    t: float,
    beta: float,
) -> float:
    """
    3 int_0^t int_0^t (I1 + I2 + I3)/|theta - theta'|^(1 + 2 beta), where
    prefactor = e^{M^2 T/2} delta_T^(-2 delta_H). The integrand is symmetric,
    the inner integral over the earlier time has a closed form and the outer
    one is done by quadrature.
    """
    p = 2 * delta_H - 2 * beta
    first = _beta_integral(t, 0.0, p) / p
    second = _beta_integral(t, 2 * delta_H, 1 - 2 * beta) / (
        (1 - 2 * beta) * (1 + r) ** 2
    )
    third = delta_T ** (-2 * delta_H) * _beta_integral(t, 2 * delta_H, p) / p
    return float(6 * prefactor * (first + second + third))


def malliavin_bounds(
    input: AssumptionInput,
    t: float,
    theta: float,
    theta_prime: float,
    M: float,
    horizon: Optional[float] = None,
    beta: Optional[float] = None,
) -> BoundReport:
    """
    Bounds on E|D_theta x(t) - 1|^2 and E|D_theta x(t) - D_theta' x(t)|^2.

    Parameters
    ----------
    input: AssumptionInput
        Admissibility parameters.
    t: float
        Observation time.
    theta, theta_prime: float
        Differentiation times, both at most t; theta' is the later one
        in the difference terms.
    M: float
        Bound on the drift, sum_i ||b_i||_inf.
    horizon: float, optional
        T in e^{M^2 T/2}; defaults to input.T, then to t.
    beta: float, optional
        Hoelder exponent of the double integral, defaults to
        0.9 min(delta_H, 1/2).
    """
    if not (0 <= theta <= t and 0 <= theta_prime <= t):
        raise ArgumentError("Need 0 <= theta, theta' <= t.")
    if horizon is None:
        horizon = input.T if input.T is not None else t
    beta = default_beta(input.delta_H) if beta is None else beta
    if not 0 < beta < min(input.delta_H, 0.5):
        raise ArgumentError(
            f"beta must be in (0, min(delta_H, 1/2)), got {beta}."
        )
    report = check_assumptions(input)
    failures = list(report.failures)
    if report.T_max is not None and t > report.T_max:
        failures.append("t")
    eps, dH, dT = input.eps, input.delta_H, input.delta_T
    growth = float(np.exp(M**2 * horizon / 2))
    prefactor = growth * dT ** (-2 * dH)
    ratio = eps**-3 * (t - theta) ** dH * report.A_sum
    if ratio < 1:
        geometric = growth * (ratio / (1 - ratio)) ** 2
    else:
        geometric = np.inf
        failures.append("series")
    gap = eps**3 - (t - theta) ** dH
    simplified = (
        growth * (t - theta) ** (2 * dH) / gap**2 if gap > 0 else np.inf
    )
    later, earlier = max(theta, theta_prime), min(theta, theta_prime)
    I1 = prefactor * (later - earlier) ** (2 * dH)
    I2 = (
        prefactor
        * (t - later) ** (2 * dH)
        * (later - earlier)
        / (1 + input.r) ** 2
    )
    I3 = prefactor * dT ** (-2 * dH) * (t - later) ** (2 * dH) * (
        later - earlier
    ) ** (2 * dH)
    bound = BoundReport(
        ratio=float(ratio),
        geometric=float(geometric),
        simplified_series=float(simplified),
        pointwise=float(prefactor * (t - theta) ** (2 * dH)),
        I1=float(I1),
        I2=float(I2),
        I3=float(I3),
        difference=float(3 * (I1 + I2 + I3)),
        integrated=float(prefactor * t ** (2 * dH + 1) / (2 * dH + 1)),
        double_integral=holder_double_integral(
            prefactor, dT, dH, input.r, t, beta
        ),
        beta=float(beta),
        T_max=report.T_max,
        failures=failures,
    )
    if failures:
        for name in (
            "geometric",
            "simplified_series",
            "pointwise",
            "I1",
            "I2",
            "I3",
            "difference",
            "integrated",
            "double_integral",
        ):
            setattr(bound, name, np.inf)
    return bound
