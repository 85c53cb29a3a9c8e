"""
Changes of measure for the delay equation: stochastic exponentials,
reweighting checks, the Wiener transform and the weak solution obtained
from a Brownian motion by removing the drift.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from skdelay.drifts import DriftSpec, MollifiedDrift
from skdelay.error import (
    ArgumentError,
    DimensionError,
    NumericalError,
    UnboundedPayoffError,
)
from skdelay.noise import GaussianPathSet
from skdelay.segment_space import (
    M2Element,
    segment_extract,
    segment_functional_F,
)
from skdelay.solver import SolverConfig, TrajectoryResult, euler_solve
from skdelay.utils import grid_index, left_point_log_exponential, mean_and_se

logger = logging.getLogger(__name__)

SE_TOLERANCE = 3.0


@dataclass(frozen=True, eq=False)
class RNWeight:
    """Log Radon-Nikodym densities per path with the integrand that made
    them."""

    log_value: np.ndarray
    integrand: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.log_value)):
            raise NumericalError("Log density is not finite.")

    @property
    def value(self) -> np.ndarray:
        return np.exp(self.log_value)


def doleans_exp(
    u: np.ndarray, W: np.ndarray, dt: float, t: Optional[float] = None
) -> RNWeight:
    """
    Stochastic exponential exp(int_0^t u dW - 1/2 int_0^t u^2 ds) with
    left-point sums.

    Parameters
    ----------
    u: ndarray of shape (n_paths, M) or (M,)
        Integrand at the left end points t_0, ..., t_{M-1}.
    W: ndarray of shape (n_paths, M + 1) or (M + 1,)
        Brownian paths on the grid.
    dt: float
        Grid step.
    t: float, optional
        Upper limit, defaults to the end of the grid.
    """
    u = np.asarray(u, dtype=float)
    W = np.asarray(W, dtype=float)
    if u.shape[-1] + 1 != W.shape[-1]:
        raise DimensionError(
            f"Integrand with {u.shape[-1]} steps does not fit a path with"
            f" {W.shape[-1]} nodes."
        )
    if t is not None:
        k = grid_index(t, dt)
        if not 0 <= k < W.shape[-1]:
            raise ArgumentError(f"Time {t} is outside of the grid.")
        u, W = u[..., :k], W[..., : k + 1]
    return RNWeight(left_point_log_exponential(u, W, dt), u)


def reciprocal_log_weight(
    u: np.ndarray, W_bar: np.ndarray, dt: float
) -> np.ndarray:
    """
    log dP/dP_bar = int u dW_bar - 1/2 int u^2 ds, the reverse direction of
    the density exp(-int u dW - 1/2 int u^2 ds) when W_bar = W + int u ds.
    """
    return left_point_log_exponential(u, W_bar, dt)


def novikov_bound(
    drift: Union[DriftSpec, MollifiedDrift], T: float, alpha: float
) -> float:
    """exp(|alpha| T sum_i ||b_i||_inf^2), which dominates
    E exp(alpha^2/2 int_0^T |b|^2 ds)."""
    return float(np.exp(abs(alpha) * T * np.sum(drift.sup_norms**2)))


@dataclass(frozen=True)
class Payoff:
    """Functional of a path on the grid, vectorised over paths."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    bounded: bool = True

    def __call__(self, paths: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(paths), dtype=float) * np.ones(
            paths.shape[0]
        )


PAYOFFS: Dict[str, Payoff] = {
    "one": Payoff("one", lambda w: np.ones(w.shape[0])),
    "terminal": Payoff("terminal", lambda w: w[:, -1], bounded=False),
    "terminal_squared": Payoff(
        "terminal_squared", lambda w: w[:, -1] ** 2, bounded=False
    ),
    "cos_terminal": Payoff("cos_terminal", lambda w: np.cos(w[:, -1])),
}


def _compare(name: str, base: np.ndarray, reweighted: np.ndarray) -> Dict:
    base_mean, base_se = mean_and_se(base)
    new_mean, new_se = mean_and_se(reweighted)
    difference = float(new_mean - base_mean)
    se = float(np.hypot(base_se, new_se))
    return {
        "payoff": name,
        "base": float(base_mean),
        "base_se": float(base_se),
        "reweighted": float(new_mean),
        "reweighted_se": float(new_se),
        "difference": difference,
        "difference_se": se,
        "passed": bool(abs(difference) <= SE_TOLERANCE * se),
    }


@dataclass
class GirsanovReport:
    rows: List[Dict] = field(default_factory=list)
    weight_mean: float = 1.0
    weight_se: float = 0.0

    @property
    def passed(self) -> bool:
        return all(row["passed"] for row in self.rows)

    def to_dict(self) -> Dict:
        res = asdict(self)
        res["passed"] = self.passed
        return res


def _check_payoffs(payoffs: Sequence[Payoff], allow_unbounded: bool) -> None:
    for payoff in payoffs:
        if payoff.bounded:
            continue
        if not allow_unbounded:
            raise UnboundedPayoffError(
                f"Payoff {payoff.name} is unbounded, pass allow_unbounded"
                " to compare it anyway."
            )
        logger.warning("Comparing unbounded payoff %s.", payoff.name)


def girsanov_identity_check(
    drift: MollifiedDrift,
    config: SolverConfig,
    payoffs: Sequence[Payoff],
    paths: GaussianPathSet,
    allow_unbounded: bool = False,
) -> GirsanovReport:
    """
    Compares E[f(W_bar) dP_bar/dP] with E[f(W)] for every payoff, where
    W_bar = W + int b^n ds is taken along the Euler solution and
    dP_bar/dP = exp(-int b^n dW - 1/2 int |b^n|^2 ds).
    """
    _check_payoffs(payoffs, allow_unbounded)
    traj = euler_solve(drift, paths, config)
    u = traj.drift_trace[:, :-1]
    W_bar = paths.W + np.concatenate(
        [np.zeros((paths.n_paths, 1)), np.cumsum(u * config.dt, axis=1)],
        axis=1,
    )
    weight = doleans_exp(-u, paths.W, config.dt).value
    weight_mean, weight_se = mean_and_se(weight)
    report = GirsanovReport(
        weight_mean=float(weight_mean), weight_se=float(weight_se)
    )
    for payoff in payoffs:
        report.rows.append(
            _compare(payoff.name, payoff(paths.W), payoff(W_bar) * weight)
        )
    logger.info(
        "Girsanov check on %d paths: %d of %d payoffs agree.",
        paths.n_paths,
        sum(row["passed"] for row in report.rows),
        len(report.rows),
    )
    return report


@dataclass(frozen=True)
class WienerTestFunction:
    """
    Step function phi on [0, t] and simple functions alpha_i.

    Parameters
    ----------
    t: float
        Upper end of the time interval.
    phi_breaks: tuple of float
        0 = tau_0 < ... < tau_L = t.
    phi_values: tuple of float
        Value of phi on [tau_l, tau_{l+1}).
    alpha: tuple of (times, coefficients)
        For component i, times t_{i,0} < ... < t_{i,J} and coefficients
        alpha_{i,1}, ..., alpha_{i,J}; may be shorter than the number of
        noise components.
    """

    t: float
    phi_breaks: Tuple[float, ...]
    phi_values: Tuple[float, ...]
    alpha: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...] = ()

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.phi_breaks)
        values = tuple(float(v) for v in self.phi_values)
        if len(breaks) != len(values) + 1:
            raise DimensionError("phi needs one more break than values.")
        if breaks[0] != 0 or not np.isclose(breaks[-1], self.t):
            raise ArgumentError("phi breaks must span [0, t].")
        if np.any(np.diff(breaks) <= 0):
            raise ArgumentError("phi breaks must be increasing.")
        alpha = []
        for times, coefficients in self.alpha:
            times = tuple(float(s) for s in times)
            coefficients = tuple(float(c) for c in coefficients)
            if len(times) != len(coefficients) + 1:
                raise DimensionError("alpha needs one more time than values.")
            increasing = np.all(np.diff(times) > 0)
            if not increasing or times[0] < 0 or times[-1] > self.t:
                raise ArgumentError(
                    "alpha times must be increasing in [0, t]."
                )
            alpha.append((times, coefficients))
        object.__setattr__(self, "phi_breaks", breaks)
        object.__setattr__(self, "phi_values", values)
        object.__setattr__(self, "alpha", tuple(alpha))

    @classmethod
    def constant(cls, t: float, value: float) -> "WienerTestFunction":
        return cls(t, (0.0, t), (value,))

    def brownian_part(self) -> "WienerTestFunction":
        return WienerTestFunction(self.t, self.phi_breaks, self.phi_values)

    def fractional_part(self) -> "WienerTestFunction":
        return WienerTestFunction(
            self.t, (0.0, self.t), (0.0,), self.alpha
        )

    def phi_on_grid(self, times: np.ndarray) -> np.ndarray:
        position = np.searchsorted(self.phi_breaks, times, side="right") - 1
        values = np.asarray(self.phi_values + (self.phi_values[-1],))
        return values[np.clip(position, 0, len(self.phi_values))]


def _exponent(test: WienerTestFunction, paths: GaussianPathSet) -> np.ndarray:
    dt = paths.dt
    k_t = grid_index(test.t, dt)
    if k_t >= paths.times.size:
        raise ArgumentError(f"Test time {test.t} is beyond the paths.")
    phi = test.phi_on_grid(paths.times[:k_t])
    exponent = np.diff(paths.W[:, : k_t + 1], axis=1) @ phi
    if len(test.alpha) > paths.B.shape[1]:
        raise DimensionError(
            f"alpha has {len(test.alpha)} components, the noise"
            f" {paths.B.shape[1]}."
        )
    for i, (times, coefficients) in enumerate(test.alpha):
        index = [grid_index(s, dt) for s in times]
        values = paths.B[:, i, index]
        increments = np.diff(values, axis=1)
        exponent = exponent + increments @ np.asarray(coefficients)
    return exponent


def wiener_transform(
    X: np.ndarray, paths: GaussianPathSet, test: WienerTestFunction
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of E[X exp(int_0^t phi dW + sum_i sum_j alpha_{i,j}
    w_i (B^{H_i}(t_{i,j}) - B^{H_i}(t_{i,j-1})))] and its standard error.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise ArgumentError("Cannot transform an empty sample.")
    if X.shape != (paths.n_paths,):
        raise DimensionError(
            f"Need one value per path, got {X.shape}"
            f" for {paths.n_paths} paths."
        )
    mean, se = mean_and_se(X * np.exp(_exponent(test, paths)))
    return float(mean), float(se)


def probe_dictionary(
    t: float,
    levels: int = 2,
    constants: Sequence[float] = (-1.0, -0.5, 0.5, 1.0),
) -> List[WienerTestFunction]:
    """Constants and +-1 step functions with dyadic breakpoints on [0, t]."""
    probes = [WienerTestFunction.constant(t, c) for c in constants]
    for level in range(1, levels + 1):
        count = 2**level
        breaks = tuple(t * np.arange(count + 1) / count)
        signs = tuple(float((-1) ** k) for k in range(count))
        probes.append(WienerTestFunction(t, breaks, signs))
        probes.append(WienerTestFunction(t, breaks, tuple(-s for s in signs)))
    return probes


def uniqueness_probe(
    X: np.ndarray,
    Y: np.ndarray,
    paths: GaussianPathSet,
    other_paths: Optional[GaussianPathSet] = None,
    probes: Optional[Sequence[WienerTestFunction]] = None,
) -> Dict:
    """
    Largest separation, in standard errors, between the transforms of two
    samples over a dictionary of probes.
    """
    other_paths = paths if other_paths is None else other_paths
    probes = probe_dictionary(paths.horizon) if probes is None else probes
    best: Dict = {"z_score": 0.0, "probe": None}
    for position, probe in enumerate(probes):
        first, first_se = wiener_transform(X, paths, probe)
        second, second_se = wiener_transform(Y, other_paths, probe)
        se = np.hypot(first_se, second_se)
        z_score = abs(first - second) / se if se > 0 else (
            np.inf if first != second else 0.0
        )
        if z_score > best["z_score"]:
            best = {"z_score": float(z_score), "probe": position}
    best["distinguished"] = bool(best["z_score"] > SE_TOLERANCE)
    return best


@dataclass(frozen=True, eq=False)
class WeakSolution:
    """x_tilde = eta(0) + W, the Brownian motion W_tilde of the new measure
    and the density dP_tilde/dP."""

    x: np.ndarray
    W_tilde: np.ndarray
    weight: RNWeight
    drift_trace: np.ndarray
    eta0: float
    dt: float

    def reconstruction_residual(self) -> float:
        """max |x_tilde(t) - eta(0) - int_0^t b ds - W_tilde(t)|."""
        integral = np.concatenate(
            [
                np.zeros((self.x.shape[0], 1)),
                np.cumsum(self.drift_trace[:, :-1] * self.dt, axis=1),
            ],
            axis=1,
        )
        residual = self.x - self.eta0 - integral - self.W_tilde
        return float(np.max(np.abs(residual)))


def weak_solution_construct(
    drift: Union[DriftSpec, MollifiedDrift],
    paths: GaussianPathSet,
    config: SolverConfig,
) -> WeakSolution:
    """
    Takes x_tilde = eta(0) + W as the solution and moves the drift into the
    noise, W_tilde(t) = W(t) - int_0^t b(x_tilde_s + eps B(s)) ds, which is
    a Brownian motion under dP_tilde/dP = exp(int b dW - 1/2 int b^2 ds).
    The drift may be singular here.
    """
    d = len(drift)
    if d > config.d or paths.B.shape[1] < d:
        raise DimensionError(
            f"Drift with {d} components does not fit the config or noise."
        )
    M, K, dt = config.n_steps, config.K, config.dt
    a, B = config.basis.projector(d)
    eta0 = config.eta.point
    x = eta0 + paths.W
    extended = np.concatenate(
        [np.broadcast_to(config.eta.hist[:K], (paths.n_paths, K)), x], axis=1
    )
    trace = np.empty((paths.n_paths, M + 1))
    for k in range(M + 1):
        coefficients = x[:, k, None] * a + extended[:, k : k + K + 1] @ B
        trace[:, k] = drift.evaluate(
            coefficients, config.eps * paths.B[:, :d, k]
        )
    integral = np.concatenate(
        [np.zeros((paths.n_paths, 1)), np.cumsum(trace[:, :-1] * dt, axis=1)],
        axis=1,
    )
    W_tilde = paths.W - integral
    weight = doleans_exp(trace[:, :-1], paths.W, dt)
    return WeakSolution(x, W_tilde, weight, trace, eta0, dt)


def coefficient_representation_residual(
    traj: TrajectoryResult,
    paths: GaussianPathSet,
    config: SolverConfig,
    max_paths: int = 8,
) -> float:
    """
    max |<x_t, e_i> - F_i(t, W_bar_t)| over steps, coefficients and the
    first max_paths paths, with W_bar = W + int b ds = x - eta(0) the
    shifted Brownian motion along the solution.
    """
    d = traj.coeffs.shape[2]
    eta = config.eta
    origin = M2Element.constant(0.0, eta.r, eta.K)
    worst = 0.0
    for p in range(min(max_paths, traj.n_paths)):
        W_bar = traj.x[p] - eta.point
        for k, t in enumerate(traj.times):
            phi = segment_extract(W_bar, t, origin, config.dt)
            for i in range(1, d + 1):
                value = segment_functional_F(i, t, phi, eta, config.basis)
                worst = max(worst, abs(value - traj.coeffs[p, k, i - 1]))
    return float(worst)
