"""
Mollification b_{i,n} = b_i * phi_n with the standard bump
phi(z) = exp(-1/(1 - z^2))/Z on (-1, 1) and phi_n(z) = n phi(n z).
"""
import functools
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import scipy.integrate

from skdelay.drifts._components import (
    DriftComponent,
    DriftSpec,
    _check_arguments,
)
from skdelay.error import ArgumentError

logger = logging.getLogger(__name__)

TABLE_SIZE = 2048


def _unnormalized_bump(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1
    safe = np.where(inside, 1 - z**2, 1.0)
    return np.where(inside, np.exp(-1 / safe), 0.0)


@functools.lru_cache(maxsize=1)
def bump_normalization() -> float:
    value, _ = scipy.integrate.quad(
        lambda z: float(_unnormalized_bump(z)), -1, 1, epsabs=1e-14
    )
    return value


def bump(z) -> np.ndarray:
    """Standard mollifier, smooth and supported on [-1, 1], integral 1."""
    return _unnormalized_bump(z) / bump_normalization()


def bump_derivative(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) < 1
    safe = np.where(inside, 1 - z**2, 1.0)
    return np.where(inside, -2 * z / safe**2, 0.0) * bump(z)


@dataclass(frozen=True, eq=False)
class MollifiedComponent:
    """b_{i,n} and b'_{i,n} tabulated on a uniform grid, zero outside."""

    base: DriftComponent
    level: int
    grid: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray

    def __post_init__(self):
        for table in (self.grid, self.values, self.derivatives):
            table.setflags(write=False)

    def __call__(self, z) -> np.ndarray:
        return np.interp(z, self.grid, self.values, left=0.0, right=0.0)

    def derivative(self, z) -> np.ndarray:
        return np.interp(z, self.grid, self.derivatives, left=0.0, right=0.0)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def l1_norm(self) -> float:
        return float(scipy.integrate.trapezoid(np.abs(self.values), self.grid))

    @property
    def support_radius(self) -> float:
        return float(self.grid[-1])


def _convolution_table(
    component: DriftComponent, n: int, grid: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrates y -> b(y) (phi_n(x - y), phi_n'(x - y)) over the support of b
    for every grid node x at once; between breakpoints the integrand is
    smooth in y.
    """
    radius = component.support_radius

    def integrand(y):
        shifted = n * (grid - y)
        weight = component(y)
        return np.concatenate(
            [
                weight * n * bump(shifted),
                weight * n**2 * bump_derivative(shifted),
            ]
        )

    points = [p for p in component.breakpoints if -radius < p < radius]
    table, _ = scipy.integrate.quad_vec(
        integrand,
        -radius,
        radius,
        epsabs=1e-11,
        epsrel=1e-10,
        norm="max",
        points=points or None,
        limit=20_000,
    )
    return table[: grid.size], table[grid.size :]


def mollify(component: DriftComponent, n: int) -> MollifiedComponent:
    """
    Convolves a compactly supported component with phi_n.

    Parameters
    ----------
    component: DriftComponent
        Bounded, integrable b_i with finite support radius R.
    n: int
        Mollification level, at least 1.

    Returns
    ----------
    MollifiedComponent
        Values and derivatives on 2048 nodes spanning [-R - 1/n, R + 1/n].
    """
    if n < 1:
        raise ArgumentError(
            f"Mollification level must be at least 1, got {n}."
        )
    if not component.is_compact:
        raise ArgumentError(
            "Mollification is only supported for compactly supported"
            f" components, {component.kind} has unbounded support."
        )
    reach = component.support_radius + 1 / n
    grid = np.linspace(-reach, reach, TABLE_SIZE)
    if component.sup_norm == 0 or component.support_radius == 0:
        values = np.zeros(TABLE_SIZE)
        derivatives = np.zeros(TABLE_SIZE)
    else:
        values, derivatives = _convolution_table(component, n, grid)
    logger.debug("Tabulated %s at level %d.", component.kind, n)
    return MollifiedComponent(component, n, grid, values, derivatives)


def lipschitz_estimate(component: MollifiedComponent) -> float:
    """Largest |b'_{i,n}| over the tabulation grid."""
    return float(np.max(np.abs(component.derivatives)))


@dataclass(frozen=True, eq=False)
class MollifiedDrift:
    """Mollified drift b^n(x) = sum_i b_{i,n}(<x, e_i>)."""

    base: DriftSpec
    level: int
    components: Tuple[MollifiedComponent, ...]

    def __len__(self) -> int:
        return len(self.components)

    @property
    def sup_norms(self) -> np.ndarray:
        return self.base.sup_norms

    @property
    def sup_sum(self) -> float:
        return self.base.sup_sum

    @property
    def l1_norms(self) -> np.ndarray:
        return self.base.l1_norms

    @property
    def lipschitz_constants(self) -> np.ndarray:
        return np.array([lipschitz_estimate(c) for c in self.components])

    def evaluate(self, z, shift) -> np.ndarray:
        z, shift = _check_arguments(z, shift, len(self))
        total = np.zeros(z.shape[:-1])
        for i, component in enumerate(self.components):
            total = total + component(z[..., i] + shift[..., i])
        return total

    def gradient(self, z, shift) -> np.ndarray:
        """Per-component derivatives b'_{i,n}(z_i + shift_i)."""
        z, shift = _check_arguments(z, shift, len(self))
        return np.stack(
            [
                component.derivative(z[..., i] + shift[..., i])
                for i, component in enumerate(self.components)
            ],
            axis=-1,
        )


def mollify_drift(spec: DriftSpec, n: int) -> MollifiedDrift:
    components = tuple(mollify(c, n) for c in spec.components)
    logger.info("Mollified %d drift components at level %d.", len(spec), n)
    return MollifiedDrift(spec, n, components)
