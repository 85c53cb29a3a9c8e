"""
Driving noises: the Brownian motion W, independent fractional Brownian
motions B^{H_n} and the truncated perturbation sum_n w_n B^{H_n}(t) e_n.
"""
import csv
import functools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import catalogue
from confection import Config, ConfigValidationError, registry
from sklearn.base import BaseEstimator

from skdelay.base import Serializable
from skdelay.error import (
    ArgumentError,
    ConfigError,
    DimensionError,
    NumericalError,
)
from skdelay.segment_space import BasisSet, M2Element
from skdelay.utils import derive_rng, grid_step, uniform_grid

logger = logging.getLogger(__name__)

MAX_FBM_GRID = 4096
MAX_JITTER = 1e-10


@dataclass(frozen=True)
class HurstWeightSpec:
    """Hurst parameters H_n and weights w_n of the perturbation."""

    H: Tuple[float, ...]
    w: Tuple[float, ...]

    def __post_init__(self):
        H = tuple(float(h) for h in self.H)
        w = tuple(float(v) for v in self.w)
        if len(H) != len(w):
            raise DimensionError(
                f"Got {len(H)} Hurst parameters but {len(w)} weights."
            )
        if not H:
            raise ArgumentError("The perturbation needs at least one term.")
        if any(not 0 < h < 0.5 for h in H):
            raise ArgumentError(f"Hurst parameters must be in (0, 1/2): {H}.")
        if any(not 0 < v <= 1 for v in w):
            raise ArgumentError(f"Weights must be in (0, 1]: {w}.")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.H)

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.w)))

    @classmethod
    def geometric(
        cls, hurst: Union[float, Sequence[float]], count: int, ratio=0.5
    ) -> "HurstWeightSpec":
        """Weights w_n = ratio^n, the default summable sequence."""
        if np.ndim(hurst) == 0:
            hurst = [float(hurst)] * count
        return cls(tuple(hurst), tuple(ratio**n for n in range(1, count + 1)))


def sample_brownian(
    times: np.ndarray, rng: np.random.Generator, n_paths: int = 1
) -> np.ndarray:
    """Brownian paths on a uniform grid, shape (n_paths, M + 1)."""
    dt = grid_step(times)
    steps = rng.standard_normal((n_paths, len(times) - 1)) * np.sqrt(dt)
    paths = np.zeros((n_paths, len(times)))
    np.cumsum(steps, axis=1, out=paths[:, 1:])
    return paths


def fbm_covariance(H: float, times: np.ndarray) -> np.ndarray:
    s = np.asarray(times, dtype=float)
    cov = 0.5 * (
        s[:, None] ** (2 * H)
        + s[None, :] ** (2 * H)
        - np.abs(s[:, None] - s[None, :]) ** (2 * H)
    )
    return 0.5 * (cov + cov.T)


@functools.lru_cache(maxsize=32)
def _fbm_factor(H: float, horizon: float, n_steps: int) -> np.ndarray:
    times = uniform_grid(horizon, n_steps)[1:]
    cov = fbm_covariance(H, times)
    scale = float(np.max(np.diag(cov)))
    jitter = 0.0
    while True:
        try:
            factor = scipy.linalg.cholesky(
                cov + jitter * np.eye(n_steps), lower=True
            )
            break
        except np.linalg.LinAlgError:
            if jitter >= MAX_JITTER * scale:
                raise NumericalError(
                    f"fBm covariance for H={H} is not positive definite,"
                    f" even after adding jitter {jitter:.3g}."
                )
            jitter = (
                1e-16 * scale if jitter == 0.0 else min(
                    10 * jitter, MAX_JITTER * scale
                )
            )
    if jitter > 0:
        logger.warning(
            "Applied jitter %.3g to the fBm covariance (H=%s, M=%d).",
            jitter,
            H,
            n_steps,
        )
    factor.setflags(write=False)
    return factor


def sample_fbm(
    H: float, times: np.ndarray, rng: np.random.Generator, n_paths: int = 1
) -> np.ndarray:
    """
    Exact fBm paths from the Cholesky factor of the grid covariance
    R(s, t) = (s^2H + t^2H - |t - s|^2H)/2, shape (n_paths, M + 1).
    """
    if not 0 < H < 1:
        raise ArgumentError(f"Hurst parameter must be in (0, 1), got {H}.")
    dt = grid_step(times)
    n_steps = len(times) - 1
    if n_steps > MAX_FBM_GRID:
        raise ArgumentError(
            f"Exact sampling is capped at {MAX_FBM_GRID} steps,"
            f" got {n_steps}."
        )
    if times[0] != 0:
        raise ArgumentError("fBm grids have to start at 0.")
    factor = _fbm_factor(float(H), float(dt * n_steps), n_steps)
    normals = rng.standard_normal((n_paths, n_steps))
    paths = np.zeros((n_paths, n_steps + 1))
    paths[:, 1:] = normals @ factor.T
    return paths


def sample_perturbation(
    spec: HurstWeightSpec, times: np.ndarray, seed: int, n_paths: int = 1
) -> np.ndarray:
    """
    Coefficient paths t -> w_n B^{H_n}(t), shape (n_paths, N, M + 1).
    Component n draws from its own stream derived from the seed.
    """
    coefficients = np.empty((n_paths, len(spec), len(times)))
    for n, (H, w) in enumerate(zip(spec.H, spec.w), start=1):
        coefficients[:, n - 1] = w * sample_fbm(
            H, times, derive_rng(seed, n), n_paths
        )
    return coefficients


def perturbation_element(
    coefficients: np.ndarray, basis: BasisSet
) -> M2Element:
    """The segment-space element sum_n coefficients[n] e_n."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.size > len(basis):
        raise DimensionError(
            f"{coefficients.size} coefficients but only"
            f" {len(basis)} basis elements."
        )
    count = coefficients.size
    point = float(coefficients @ basis.points[:count])
    hist = coefficients @ basis.hists[:count]
    return M2Element(point, hist, basis.r)


def perturbation_tail_bound(
    weights: Sequence[float], N: int, t: float, moment: int = 1
) -> float:
    """
    Bound on E||sum_{n>N} w_n B^{H_n}(t) e_n|| (moment=1), or on the second
    moment (moment=2), from E||X_n|| <= |w_n|(1 v t) and
    E||X_n||^2 <= |w_n|^2 (1 v t^2).
    """
    tail = np.abs(np.asarray(weights, dtype=float)[N:])
    if moment == 1:
        return float(max(1.0, t) * tail.sum())
    if moment == 2:
        return float(max(1.0, t**2) * np.sum(tail**2))
    raise ArgumentError(f"moment must be 1 or 2, got {moment}.")


@dataclass(frozen=True)
class SLNEstimate:
    """Estimated strong local non-determinism constant of fBm."""

    H: float
    m: int
    C_hat: float

    def __post_init__(self):
        if not self.C_hat > 0:
            raise NumericalError(
                f"Non-positive local non-determinism constant {self.C_hat}."
            )


def increment_covariance(H: float, times: np.ndarray) -> np.ndarray:
    """Covariance matrix of the increments B^H(t_l) - B^H(t_{l-1})."""
    t = np.asarray(times, dtype=float)
    upper, lower = t[1:], t[:-1]

    def power(x):
        return np.abs(x) ** (2 * H)

    cov = 0.5 * (
        power(upper[:, None] - lower[None, :])
        + power(lower[:, None] - upper[None, :])
        - power(upper[:, None] - upper[None, :])
        - power(lower[:, None] - lower[None, :])
    )
    return 0.5 * (cov + cov.T)


def estimate_sln_constant(
    H: float,
    m: int,
    span: float = 1.0,
    times: Optional[Sequence[float]] = None,
) -> SLNEstimate:
    """
    Smallest ratio Var(sum xi_l dB_l) / sum xi_l^2 |dt_l|^2H over xi != 0,
    i.e. the smallest generalised eigenvalue of the increment covariance
    against diag(|dt_l|^2H).

    Parameters
    ----------
    H: float
        Hurst parameter.
    m: int
        Number of increments, at least 2.
    span: float, default 1.0
        Right end of the equidistant grid when times is not given.
    times: sequence of float, optional
        Explicit grid 0 = t_0 < t_1 < ... < t_m.
    """
    if m < 2:
        raise ArgumentError(f"Need at least two increments, got {m}.")
    if times is None:
        times = np.linspace(0.0, span, m + 1)
    times = np.asarray(times, dtype=float)
    if times.size != m + 1:
        raise DimensionError(
            f"Expected {m + 1} time points, got {times.size}."
        )
    variances = np.abs(np.diff(times)) ** (2 * H)
    if np.any(variances <= 0):
        raise ArgumentError("Time points must be strictly increasing.")
    scale = 1 / np.sqrt(variances)
    correlation = increment_covariance(H, times) * np.outer(scale, scale)
    smallest = float(scipy.linalg.eigvalsh(correlation)[0])
    return SLNEstimate(float(H), m, min(smallest, 1.0))


class GaussianPathSet(Serializable):
    """
    Batch of driving noises on a uniform grid: Brownian paths W of shape
    (n_paths, M + 1) and weighted fBm coefficient paths w_n B^{H_n} of shape
    (n_paths, N, M + 1).
    """

    def __init__(
        self,
        times: np.ndarray,
        W: np.ndarray,
        B: np.ndarray,
        spec: HurstWeightSpec,
        seed: Optional[int] = None,
    ):
        self.times = np.asarray(times, dtype=float)
        self.W = np.atleast_2d(np.asarray(W, dtype=float))
        B = np.asarray(B, dtype=float)
        self.B = B[None] if B.ndim == 2 else B
        self.spec = spec
        self.seed = seed
        self.dt = grid_step(self.times)
        if self.W.shape[1] != self.times.size:
            raise DimensionError("Brownian paths do not match the grid.")
        if self.B.shape != (self.W.shape[0], len(spec), self.times.size):
            raise DimensionError(
                f"fBm coefficient paths have shape {self.B.shape}, expected"
                f" {(self.W.shape[0], len(spec), self.times.size)}."
            )

    @property
    def n_paths(self) -> int:
        return self.W.shape[0]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.n_paths

    def __getitem__(self, index) -> "GaussianPathSet":
        if isinstance(index, (int, np.integer)):
            index = slice(index, index + 1)
        return GaussianPathSet(
            self.times, self.W[index], self.B[index], self.spec, self.seed
        )

    def with_brownian(self, W: np.ndarray) -> "GaussianPathSet":
        """Same fBm paths driven by another Brownian motion."""
        return GaussianPathSet(self.times, W, self.B, self.spec, self.seed)

    def perturbation_norm(self, k: int) -> np.ndarray:
        """||B(t_k)||_{M2} per path, using orthonormality of the basis."""
        return np.sqrt(np.sum(self.B[:, :, k] ** 2, axis=1))

    @property
    def config(self) -> Config:
        return Config(
            {
                "noise": {
                    "@samplers": "gaussian_paths.v1",
                    "horizon": self.horizon,
                    "n_steps": self.times.size - 1,
                    "hurst": list(self.spec.H),
                    "weights": list(self.spec.w),
                    "n_paths": self.n_paths,
                    "random_state": self.seed,
                }
            }
        )

    def to_csv(self, path: Union[str, Path], manifest: str = "") -> None:
        """Writes the ensemble with columns path_id, component, time_index,
        value; component 0 is W, component n the n-th coefficient path."""
        with open(path, "w", newline="") as out_file:
            out_file.write(f"# schema=paths.v1 manifest={manifest}\n")
            writer = csv.writer(out_file)
            writer.writerow(["path_id", "component", "time_index", "value"])
            for path_id in range(self.n_paths):
                rows = [self.W[path_id]] + list(self.B[path_id])
                for component, values in enumerate(rows):
                    for k, value in enumerate(values):
                        writer.writerow([path_id, component, k, repr(value)])


def sample_paths(
    spec: HurstWeightSpec,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
) -> GaussianPathSet:
    """Samples a batch of independent driving noises from a master seed."""
    if n_paths < 1:
        raise ArgumentError(f"Need at least one path, got {n_paths}.")
    times = uniform_grid(horizon, n_steps)
    W = sample_brownian(times, derive_rng(seed, 0), n_paths)
    B = sample_perturbation(spec, times, seed, n_paths)
    logger.info(
        "Sampled %d paths on %d steps with %d fBm components.",
        n_paths,
        n_steps,
        len(spec),
    )
    return GaussianPathSet(times, W, B, spec, seed)


class GaussianPathSampler(BaseEstimator):
    """Configurable sampler of driving noise ensembles.

    Parameters
    ----------
    horizon: float, default 1.0
        Time horizon T.
    n_steps: int, default 100
        Number of grid steps.
    hurst: list of float, default [0.1]
        Hurst parameters of the fBm components.
    weights: list of float, optional
        Weights w_n, defaults to w_n = 2^-n.
    n_paths: int, default 1000
        Number of independent paths.
    random_state: int, default 0
        Master seed, every stream is derived from it.
    """

    def __init__(
        self,
        horizon: float = 1.0,
        n_steps: int = 100,
        hurst: Sequence[float] = (0.1,),
        weights: Optional[Sequence[float]] = None,
        n_paths: int = 1000,
        random_state: int = 0,
    ):
        self.horizon = horizon
        self.n_steps = n_steps
        self.hurst = hurst
        self.weights = weights
        self.n_paths = n_paths
        self.random_state = random_state

    @property
    def spec(self) -> HurstWeightSpec:
        if self.weights is None:
            return HurstWeightSpec.geometric(list(self.hurst), len(self.hurst))
        return HurstWeightSpec(tuple(self.hurst), tuple(self.weights))

    def sample(self, n_paths: Optional[int] = None) -> GaussianPathSet:
        n_paths = self.n_paths if n_paths is None else n_paths
        return sample_paths(
            self.spec, self.horizon, self.n_steps, n_paths, self.random_state
        )

    @property
    def config(self) -> Config:
        params = self.get_params()
        params["hurst"] = list(params["hurst"])
        if params["weights"] is not None:
            params["weights"] = list(params["weights"])
        return Config({"noise": {"@samplers": "gaussian_paths.v1", **params}})

    @classmethod
    def from_config(cls, config: Config) -> "GaussianPathSampler":
        try:
            resolved = registry.resolve(config)
        except (ConfigValidationError, catalogue.RegistryError) as error:
            raise ConfigError(f"Invalid sampler config: {error}") from error
        return resolved["noise"]


@registry.samplers.register("gaussian_paths.v1")
def make_gaussian_path_sampler(
    horizon: float = 1.0,
    n_steps: int = 100,
    hurst: Sequence[float] = (0.1,),
    weights: Optional[Sequence[float]] = None,
    n_paths: int = 1000,
    random_state: int = 0,
):
    return GaussianPathSampler(
        horizon=horizon,
        n_steps=n_steps,
        hurst=hurst,
        weights=weights,
        n_paths=n_paths,
        random_state=random_state,
    )
