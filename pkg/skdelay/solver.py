"""
Euler-Maruyama scheme for the mollified delay equation

    dx(t) = sum_i b_{i,n}(<x_t, e_i> + eps w_i B^{H_i}(t)) dt + dW(t),

its first variation with respect to W, and coupled Monte Carlo ensembles
over several drift levels.
"""
import csv
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.integrate
from confection import Config
from joblib import Parallel, delayed

from skdelay.base import Serializable
from skdelay.drifts import DriftSpec, MollifiedDrift
from skdelay.error import (
    ArgumentError,
    DimensionError,
    GridAlignmentError,
    NumericalError,
    SingularDriftError,
)
from skdelay.noise import GaussianPathSet
from skdelay.segment_space import BasisSet, M2Element, build_basis
from skdelay.utils import (
    grid_index,
    left_point_log_exponential,
    mean_and_se,
    steps_per,
)

logger = logging.getLogger(__name__)

ENVELOPE_TOLERANCE = 1e-9
MAX_THETAS = 32


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Grid, delay, perturbation scale and initial segment of a solve.

    Parameters
    ----------
    T: float
        Horizon, a positive multiple of dt.
    dt: float
        Step of the solver grid.
    r: float
        Delay, a positive multiple of dt.
    eps: float
        Scale of the perturbation in (0, 1].
    eta: M2Element
        Initial segment on the grid with K = r/dt cells.
    basis: BasisSet
        Orthonormal family on the same segment grid.
    d: int
        Largest number of active coefficients.
    n: int, optional
        Mollification level, recorded for reports.
    """

    T: float
    dt: float
    r: float
    eps: float
    eta: M2Element
    basis: BasisSet
    d: int
    n: Optional[int] = None

    def __post_init__(self):
        if not self.T > 0:
            raise ArgumentError(f"Horizon must be positive, got {self.T}.")
        if not 0 < self.eps <= 1:
            raise ArgumentError(f"eps must be in (0, 1], got {self.eps}.")
        steps_per(self.T, self.dt)
        K = steps_per(self.r, self.dt)
        if self.eta.K != K or not np.isclose(self.eta.r, self.r):
            raise GridAlignmentError(
                f"Initial segment has K={self.eta.K}, the grid needs {K}."
            )
        if self.basis.K != K or not np.isclose(self.basis.r, self.r):
            raise GridAlignmentError("Basis lives on another segment grid.")
        if not 1 <= self.d <= len(self.basis):
            raise DimensionError(
                f"d must be in 1..{len(self.basis)}, got {self.d}."
            )

    @property
    def n_steps(self) -> int:
        return steps_per(self.T, self.dt)

    @property
    def K(self) -> int:
        return self.eta.K

    @classmethod
    def build(
        cls,
        T: float,
        dt: float,
        r: float,
        eps: float = 1.0,
        eta0: float = 0.0,
        d: int = 1,
        basis_size: Optional[int] = None,
        n: Optional[int] = None,
    ) -> "SolverConfig":
        """Constant initial segment eta = eta0 and the cosine basis."""
        K = steps_per(r, dt)
        basis = build_basis(r, basis_size or d, K)
        return cls(T, dt, r, eps, M2Element.constant(eta0, r, K), basis, d, n)


@dataclass(eq=False)
class TrajectoryResult:
    """Solution paths of one solve, shape (n_paths, M + 1), with segment
    coefficients (n_paths, M + 1, d) and the drift applied at every step."""

    times: np.ndarray
    x: np.ndarray
    coeffs: np.ndarray
    drift_trace: np.ndarray
    drift_increments: np.ndarray
    noise_increments: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.x.shape[0]

    def at(self, t: float) -> np.ndarray:
        return self.x[:, grid_index(t, self.times[1] - self.times[0])]

    def envelope_excess(self, paths: GaussianPathSet, eta0: float, M: float):
        """Largest |x(t_k) - eta(0) - W(t_k)| - t_k M over the ensemble."""
        deviation = np.abs(self.x - eta0 - paths.W)
        return float(np.max(deviation - self.times * M))

    def to_csv(
        self, path: Union[str, Path], manifest: str = "", path_offset: int = 0
    ) -> None:
        d = self.coeffs.shape[2]
        with open(path, "w", newline="") as out_file:
            out_file.write(f"# schema=trajectories.v1 manifest={manifest}\n")
            writer = csv.writer(out_file)
            writer.writerow(
                ["path_id", "time", "x"] + [f"c_{i}" for i in range(1, d + 1)]
            )
            for p in range(self.n_paths):
                for k, time in enumerate(self.times):
                    writer.writerow(
                        [
                            p + path_offset,
                            repr(float(time)),
                            repr(self.x[p, k]),
                        ]
                        + [repr(c) for c in self.coeffs[p, k]]
                    )


def _check_paths(paths: GaussianPathSet, config: SolverConfig, d: int) -> None:
    if paths.times.size != config.n_steps + 1 or not np.isclose(
        paths.dt, config.dt, rtol=1e-9, atol=0.0
    ):
        raise GridAlignmentError(
            f"Paths live on {paths.times.size - 1} steps of {paths.dt},"
            f" the solver needs {config.n_steps} steps of {config.dt}."
        )
    if paths.B.shape[1] < d:
        raise DimensionError(
            f"Drift uses {d} coefficients, the noise has {paths.B.shape[1]}."
        )


def _check_drift(drift, config: SolverConfig) -> int:
    if isinstance(drift, DriftSpec):
        raise SingularDriftError(
            "The Euler scheme needs a mollified drift,"
            " use mollify_drift first."
        )
    if not isinstance(drift, MollifiedDrift):
        raise ArgumentError(f"Expected a MollifiedDrift, got {type(drift)}.")
    if len(drift) > config.d:
        raise DimensionError(
            f"Drift has {len(drift)} components, config allows {config.d}."
        )
    return len(drift)


def euler_solve(
    drift: MollifiedDrift, paths: GaussianPathSet, config: SolverConfig
) -> TrajectoryResult:
    """
    Explicit Euler steps with the drift evaluated at the left end point,
    x(t_{k+1}) = eta(0) + W(t_{k+1}) + sum_{l <= k} b(t_l) dt.

    Parameters
    ----------
    drift: MollifiedDrift
        Lipschitz drift b^n.
    paths: GaussianPathSet
        Driving noises on the solver grid, one solve per path.
    config: SolverConfig
        Grid, delay, perturbation scale and initial segment.
    """
    d = _check_drift(drift, config)
    _check_paths(paths, config, d)
    M, K, dt = config.n_steps, config.K, config.dt
    n_paths = paths.n_paths
    a, B = config.basis.projector(d)
    eta0 = config.eta.point
    extended = np.empty((n_paths, K + M + 1))
    extended[:, :K] = config.eta.hist[:K]
    extended[:, K] = eta0
    coeffs = np.empty((n_paths, M + 1, d))
    trace = np.empty((n_paths, M + 1))
    accumulated = np.zeros(n_paths)
    for k in range(M + 1):
        segment = extended[:, k : k + K + 1]
        coeffs[:, k] = extended[:, k + K, None] * a + segment @ B
        shift = config.eps * paths.B[:, :d, k]
        trace[:, k] = drift.evaluate(coeffs[:, k], shift)
        if k < M:
            accumulated = accumulated + trace[:, k] * dt
            extended[:, k + K + 1] = eta0 + paths.W[:, k + 1] + accumulated
    result = TrajectoryResult(
        times=paths.times,
        x=extended[:, K:],
        coeffs=coeffs,
        drift_trace=trace,
        drift_increments=trace[:, :-1] * dt,
        noise_increments=np.diff(paths.W, axis=1),
    )
    excess = result.envelope_excess(paths, eta0, drift.sup_sum)
    if excess > ENVELOPE_TOLERANCE * max(1.0, drift.sup_sum * config.T):
        raise NumericalError(
            f"Solution left the bounded-drift envelope by {excess:.3g}."
        )
    logger.debug("Solved %d paths over %d steps.", n_paths, M)
    return result


@dataclass(eq=False)
class FirstVariationResult:
    """
    D_theta x(s) for every theta in thetas and every grid time s, shape
    (n_paths, len(thetas), M + 1); zero for s < theta.
    """

    thetas: np.ndarray
    times: np.ndarray
    values: np.ndarray
    coefficient_table: Optional[np.ndarray] = None

    def at(self, t: float) -> np.ndarray:
        """D_theta x(t) for all paths and thetas."""
        return self.values[:, :, grid_index(t, self.times[1] - self.times[0])]


def first_variation(
    drift: MollifiedDrift,
    traj: TrajectoryResult,
    paths: GaussianPathSet,
    thetas: Sequence[float],
    config: SolverConfig,
    keep_table: bool = False,
) -> FirstVariationResult:
    """
    Forward Euler for the linear delay equation of the first variation:
    D_theta x(theta) = 1 and
    D_theta x(s + dt) = D_theta x(s) + sum_i b'_{i,n}(<x_s, e_i> + shift_i)
    D_theta <x_s, e_i> dt, where
    D_theta <x_s, e_i> = D_theta x(s) e_i(0) + int 1_{s+u >= theta}
    D_theta x(s + u) e_i(u) du on the segment grid.

    Raises NumericalError when some value exceeds the discrete Groenwall
    bound exp(sum_i Lip(b_{i,n}) sqrt(1 + r) (s - theta)).
    """
    d = _check_drift(drift, config)
    M, K, dt = config.n_steps, config.K, config.dt
    theta_index = np.array([grid_index(theta, dt) for theta in thetas])
    if np.any(theta_index < 0) or np.any(theta_index > M):
        raise ArgumentError(
            f"Differentiation times must lie in [0, {config.T}]."
        )
    n_paths, n_thetas = traj.n_paths, theta_index.size
    a, B = config.basis.projector(d)
    values = np.zeros((n_paths, n_thetas, K + M + 1))
    values[:, np.arange(n_thetas), K + theta_index] = 1.0
    table = np.zeros((n_paths, n_thetas, M + 1, d)) if keep_table else None
    for k in range(M):
        active = theta_index <= k
        if not np.any(active):
            continue
        shift = config.eps * paths.B[:, :d, k]
        gradient = drift.gradient(traj.coeffs[:, k], shift)
        segment = values[:, active, k : k + K + 1]
        coefficients = values[:, active, k + K][..., None] * a + segment @ B
        if table is not None:
            table[:, active, k] = coefficients
        step = np.sum(coefficients * gradient[:, None, :], axis=-1) * dt
        values[:, active, k + K + 1] = values[:, active, k + K] + step
    if table is not None:
        segment = values[:, :, M : M + K + 1]
        table[:, :, M] = values[:, :, M + K, None] * a + segment @ B
    result = values[:, :, K:]
    lipschitz = float(np.sum(drift.lipschitz_constants))
    elapsed = traj.times[None, :] - np.asarray(thetas)[:, None]
    elapsed = np.clip(elapsed, 0, None)
    bound = np.exp(lipschitz * np.sqrt(1 + config.r) * elapsed)
    if np.any(np.abs(result) > bound[None] * (1 + 1e-9)):
        raise NumericalError(
            "First variation exceeds its Groenwall bound, the step is too"
            " coarse for the Lipschitz constant of the drift."
        )
    return FirstVariationResult(
        np.asarray(thetas, float), traj.times, result, table
    )


def malliavin_solve(
    drift: MollifiedDrift,
    traj: TrajectoryResult,
    paths: GaussianPathSet,
    theta: float,
    t: float,
    config: SolverConfig,
) -> np.ndarray:
    """D_theta x(t) per path; zero when theta > t."""
    dt = config.dt
    k_theta, k_t = grid_index(theta, dt), grid_index(t, dt)
    if not (0 <= k_theta <= config.n_steps and 0 <= k_t <= config.n_steps):
        raise ArgumentError(f"theta and t must lie in [0, {config.T}].")
    if k_theta > k_t:
        return np.zeros(traj.n_paths)
    variation = first_variation(drift, traj, paths, [theta], config)
    return variation.values[:, 0, k_t]


def theta_grid(t: float, dt: float, count: int = MAX_THETAS) -> np.ndarray:
    """At most count grid times spread evenly over [0, t], ends included."""
    k_t = grid_index(t, dt)
    if count < 2:
        raise ArgumentError(
            f"Need at least two differentiation times, got {count}."
        )
    spread = np.linspace(0, k_t, min(count, k_t + 1))
    index = np.unique(np.round(spread).astype(int))
    return index * dt


def _girsanov_log_weight(traj: TrajectoryResult, paths: GaussianPathSet):
    """log dP_bar/dP = -int b dW - 1/2 int b^2 ds along the solution."""
    return left_point_log_exponential(
        -traj.drift_trace[:, :-1], paths.W, paths.dt
    )


def _solve_chunk(
    drifts: Sequence[MollifiedDrift],
    paths: GaussianPathSet,
    config: SolverConfig,
    t: float,
    thetas: Optional[np.ndarray],
) -> Dict[str, np.ndarray]:
    k_t = grid_index(t, config.dt)
    x_t, variations, log_weights = [], [], []
    for drift in drifts:
        traj = euler_solve(drift, paths, config)
        x_t.append(traj.x[:, k_t])
        log_weights.append(_girsanov_log_weight(traj, paths))
        if thetas is not None:
            variation = first_variation(drift, traj, paths, thetas, config)
            variations.append(variation.values[:, :, k_t])
    res = {"x_t": np.stack(x_t), "log_weights": np.stack(log_weights)}
    if thetas is not None:
        res["variation"] = np.stack(variations)
    return res


class EnsembleResult(Serializable):
    """
    Coupled solutions of several drift levels on shared noises.

    Attributes
    ----------
    labels: list of int
        Level labels (mollification levels or dimensions).
    x_t: ndarray of shape (n_levels, n_paths)
        Solutions at time t.
    variation: ndarray of shape (n_levels, n_paths, n_thetas), optional
        D_theta x(t) on the theta grid.
    log_weights: ndarray of shape (n_levels, n_paths)
        Log Girsanov densities of each level.
    """

    def __init__(
        self,
        labels: Sequence[int],
        t: float,
        x_t: np.ndarray,
        log_weights: np.ndarray,
        thetas: Optional[np.ndarray] = None,
        variation: Optional[np.ndarray] = None,
    ):
        self.labels = list(labels)
        self.t = t
        self.x_t = x_t
        self.log_weights = log_weights
        self.thetas = thetas
        self.variation = variation

    @property
    def n_paths(self) -> int:
        return self.x_t.shape[1]

    def _distance(self, i: int, j: int) -> Dict:
        mean, se = mean_and_se((self.x_t[i] - self.x_t[j]) ** 2)
        return {
            "level_a": self.labels[i],
            "level_b": self.labels[j],
            "mean": float(mean),
            "se": float(se),
        }

    def distances(self) -> List[Dict]:
        """E|x^a(t) - x^b(t)|^2 with its standard error, per pair of levels."""
        return [
            self._distance(i, j)
            for i, j in itertools.combinations(range(len(self.labels)), 2)
        ]

    def successive_distances(self) -> List[Dict]:
        return [self._distance(i, i + 1) for i in range(len(self.labels) - 1)]

    def is_nonincreasing(self, slack: float = 1.0) -> bool:
        """Whether successive distances decrease up to slack times the SE."""
        rows = self.successive_distances()
        return all(
            later["mean"] <= earlier["mean"] + slack * np.hypot(
                earlier["se"], later["se"]
            )
            for earlier, later in zip(rows, rows[1:])
        )

    def _require_variation(self) -> np.ndarray:
        if self.variation is None:
            raise ArgumentError(
                "The ensemble was run without first variations."
            )
        return self.variation

    def _theta_integral(self, values: np.ndarray) -> np.ndarray:
        if self.thetas.size < 2:
            return np.zeros(values.shape[:-1])
        return scipy.integrate.trapezoid(values, self.thetas, axis=-1)

    def malliavin_l2(self) -> Tuple[np.ndarray, np.ndarray]:
        """E int_0^t |D_theta x(t)|^2 dtheta per level."""
        per_path = self._theta_integral(self._require_variation() ** 2)
        return mean_and_se(per_path, axis=1)

    def malliavin_deviation(self) -> Tuple[np.ndarray, np.ndarray]:
        """E int_0^t |D_theta x(t) - 1|^2 dtheta per level."""
        per_path = self._theta_integral((self._require_variation() - 1) ** 2)
        return mean_and_se(per_path, axis=1)

    def pointwise_deviation(self) -> Tuple[np.ndarray, np.ndarray]:
        """E|D_theta x(t) - 1|^2, shape (n_levels, n_thetas)."""
        return mean_and_se((self._require_variation() - 1) ** 2, axis=1)

    def _squared_differences(self, level: int) -> np.ndarray:
        variation = self._require_variation()[level]
        return (variation[:, :, None] - variation[:, None, :]) ** 2

    def difference_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """E|D_theta x(t) - D_theta' x(t)|^2, shape (n_levels, n_thetas,
        n_thetas)."""
        stats = [
            mean_and_se(self._squared_differences(level))
            for level in range(len(self.labels))
        ]
        return np.stack([s[0] for s in stats]), np.stack([s[1] for s in stats])

    def holder_integral(self, beta: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        int_0^t int_0^t E|D_theta x(t) - D_theta' x(t)|^2 /
        |theta - theta'|^(1 + 2 beta) as a Riemann sum over the theta grid
        without its diagonal, with trapezoid weights in both variables.
        """
        self._require_variation()
        thetas = self.thetas
        cells = np.ones(1)
        if thetas.size > 1:
            gaps = np.diff(thetas)
            cells = np.zeros(thetas.size)
            cells[:-1] += gaps / 2
            cells[1:] += gaps / 2
        gap = np.abs(thetas[:, None] - thetas[None, :])
        np.fill_diagonal(gap, np.inf)
        kernel = np.outer(cells, cells) / gap ** (1 + 2 * beta)
        per_path = np.stack(
            [
                np.sum(
                    self._squared_differences(level) * kernel, axis=(-2, -1)
                )
                for level in range(len(self.labels))
            ]
        )
        return mean_and_se(per_path, axis=1)

    def weight_means(self) -> Tuple[np.ndarray, np.ndarray]:
        return mean_and_se(np.exp(self.log_weights), axis=1)

    @property
    def config(self) -> Config:
        return Config(
            {
                "ensemble": {
                    "labels": self.labels,
                    "t": self.t,
                    "n_paths": self.n_paths,
                    "n_thetas": (
                        0 if self.thetas is None else int(self.thetas.size)
                    ),
                }
            }
        )

    def distances_to_csv(
        self, path: Union[str, Path], manifest: str = ""
    ) -> None:
        with open(path, "w", newline="") as out_file:
            out_file.write(f"# schema=distances.v1 manifest={manifest}\n")
            writer = csv.writer(out_file)
            writer.writerow(["level_a", "level_b", "mean", "se"])
            for row in self.distances():
                writer.writerow(
                    [
                        row["level_a"],
                        row["level_b"],
                        repr(row["mean"]),
                        repr(row["se"]),
                    ]
                )


def _same_noise(a: GaussianPathSet, b: GaussianPathSet) -> bool:
    return (
        np.array_equal(a.times, b.times)
        and np.array_equal(a.W, b.W)
        and np.array_equal(a.B, b.B)
    )


def mc_ensemble(
    drifts: Sequence[MollifiedDrift],
    paths: Union[GaussianPathSet, Sequence[GaussianPathSet]],
    config: SolverConfig,
    t: Optional[float] = None,
    theta_count: Optional[int] = MAX_THETAS,
    labels: Optional[Sequence[int]] = None,
    n_jobs: int = 1,
    chunk_size: int = 2048,
) -> EnsembleResult:
    """
    Solves every drift level on the same noises (common random numbers).

    Parameters
    ----------
    drifts: sequence of MollifiedDrift
        At least two levels.
    paths: GaussianPathSet or sequence of GaussianPathSet
        Shared noises; a sequence must hold one identical set per level.
    config: SolverConfig
        Solver configuration shared by all levels.
    t: float, optional
        Observation time, defaults to the horizon.
    theta_count: int or None, default 32
        Number of differentiation times on [0, t]; None skips the first
        variation.
    labels: sequence of int, optional
        Level labels, defaults to the mollification levels.
    n_jobs: int, default 1
        Number of joblib workers over path chunks.
    chunk_size: int, default 2048
        Paths per chunk.
    """
    if len(drifts) < 2:
        raise ArgumentError(
            f"Need at least two drift levels, got {len(drifts)}."
        )
    if isinstance(paths, GaussianPathSet):
        shared = paths
    else:
        paths = list(paths)
        if len(paths) != len(drifts):
            raise DimensionError("Need one path set per drift level.")
        counts = {p.n_paths for p in paths}
        if len(counts) != 1:
            raise DimensionError(
                f"Path counts differ across levels: {counts}."
            )
        shared = paths[0]
        for other in paths[1:]:
            if not _same_noise(shared, other):
                raise ArgumentError(
                    "Levels of an ensemble must share one noise;"
                    " got path sets with different samples."
                )
    t = config.T if t is None else t
    thetas = None
    if theta_count is not None:
        thetas = theta_grid(t, config.dt, min(theta_count, MAX_THETAS))
    if labels is None:
        labels = [drift.level for drift in drifts]
    labels = list(labels)
    starts = range(0, shared.n_paths, chunk_size)
    chunks = Parallel(n_jobs=n_jobs)(
        delayed(_solve_chunk)(
            drifts, shared[start : start + chunk_size], config, t, thetas
        )
        for start in starts
    )
    logger.info(
        "Solved %d levels on %d paths in %d chunks.",
        len(drifts),
        shared.n_paths,
        len(chunks),
    )
    return EnsembleResult(
        labels,
        t,
        np.concatenate([c["x_t"] for c in chunks], axis=1),
        np.concatenate([c["log_weights"] for c in chunks], axis=1),
        thetas,
        None
        if thetas is None
        else np.concatenate([c["variation"] for c in chunks], axis=1),
    )
