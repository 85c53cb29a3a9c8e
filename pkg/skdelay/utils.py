from typing import Tuple

import numpy as np

from skdelay.error import ArgumentError, GridAlignmentError

GRID_TOLERANCE = 1e-9


def trapezoid_weights(length: float, n_intervals: int) -> np.ndarray:
    """
    Weights of the composite trapezoid rule on a uniform grid.

    Parameters
    ----------
    length: float
        Length of the integration interval.
    n_intervals: int
        Number of cells, the grid has n_intervals + 1 nodes.

    Returns
    ----------
    weights: ndarray of shape (n_intervals + 1,)
        Quadrature weights, so that weights @ f approximates the integral.
    """
    h = length / n_intervals
    weights = np.full(n_intervals + 1, h)
    weights[0] = weights[-1] = h / 2
    return weights


def uniform_grid(horizon: float, n_steps: int) -> np.ndarray:
    if n_steps < 1:
        raise ArgumentError(f"Grid needs at least one step, got {n_steps}.")
    if not horizon > 0:
        raise ArgumentError(f"Horizon must be positive, got {horizon}.")
    return np.linspace(0.0, horizon, n_steps + 1)


def grid_step(times: np.ndarray) -> float:
    """Returns the step of a uniform grid, raises if it is not uniform."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ArgumentError("Time grid needs at least two nodes.")
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise GridAlignmentError("Time steps must be positive and equal.")
    return dt


def grid_index(t: float, dt: float) -> int:
    """Index of time t on a grid with step dt, raises when t is off-grid."""
    ratio = t / dt
    index = int(round(ratio))
    if abs(ratio - index) > GRID_TOLERANCE * max(1.0, abs(ratio)):
        raise GridAlignmentError(f"Time {t} is not on the grid of step {dt}.")
    return index


def steps_per(length: float, dt: float) -> int:
    """Number of grid steps in length, which has to be a positive
    integer multiple of dt."""
    n = grid_index(length, dt)
    if n < 1:
        raise GridAlignmentError(
            f"Length {length} is not a positive multiple of the step {dt}."
        )
    return n


def derive_rng(seed: int, component: int) -> np.random.Generator:
    """
    Random generator of one noise component derived from a master seed.
    Component 0 drives the Brownian motion, component n the n-th
    fractional Brownian motion.
    """
    sequence = np.random.SeedSequence(seed, spawn_key=(component,))
    return np.random.Generator(np.random.PCG64(sequence))


def mean_and_se(values: np.ndarray, axis: int = 0) -> Tuple[float, float]:
    """Sample mean and its standard error along an axis."""
    values = np.asarray(values, dtype=float)
    count = values.shape[axis]
    if count == 0:
        raise ArgumentError("Cannot average an empty sample.")
    mean = values.mean(axis=axis)
    if count == 1:
        return mean, np.zeros_like(mean)
    se = values.std(axis=axis, ddof=1) / np.sqrt(count)
    return mean, se


def left_point_log_exponential(
    integrand: np.ndarray, path: np.ndarray, dt: float
) -> np.ndarray:
    """
    sum_k u(t_k)(W(t_{k+1}) - W(t_k)) - 1/2 sum_k u(t_k)^2 dt along the last
    axis, the log of the stochastic exponential with left-point sums.
    """
    integrand = np.asarray(integrand, dtype=float)
    increments = np.diff(np.asarray(path, dtype=float), axis=-1)
    if integrand.shape[-1] != increments.shape[-1]:
        raise GridAlignmentError(
            f"Integrand has {integrand.shape[-1]} steps, the path"
            f" {increments.shape[-1]}."
        )
    return np.sum(integrand * increments, axis=-1) - 0.5 * dt * np.sum(
        integrand**2, axis=-1
    )
