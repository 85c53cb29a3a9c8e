import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.integrate
import catalogue
from confection import Config, ConfigValidationError, registry

from skdelay.error import ArgumentError, ConfigError, DimensionError

logger = logging.getLogger(__name__)

PROBE_POINTS = 10_001
UNBOUNDED_PROBE_RADIUS = 50.0


@dataclass(frozen=True, eq=False)
class DriftComponent:
    """Bounded, integrable scalar function b_i with its norms.

    Parameters
    ----------
    evaluator: callable
        Vectorised function of a real argument.
    sup_norm: float
        ||b_i||_inf, an upper bound of |evaluator|.
    l1_norm: float
        ||b_i||_L1.
    support_radius: float
        Half-width R of an interval [-R, R] holding the support,
        np.inf when the support is not compact.
    breakpoints: tuple of float
        Points where the evaluator may jump or kink.
    kind: str
        Name of the factory in registry.drifts that built the component.
    params: dict
        Arguments of that factory.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    sup_norm: float
    l1_norm: float
    support_radius: float
    breakpoints: Tuple[float, ...] = ()
    kind: str = "custom"
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.sup_norm) and np.isfinite(self.l1_norm)):
            raise ArgumentError(
                "Drift components must be bounded and integrable."
            )
        if self.sup_norm < 0 or self.l1_norm < 0:
            raise ArgumentError("Norms cannot be negative.")
        if not self.support_radius >= 0:
            raise ArgumentError(
                "Support radius must be nonnegative,"
                f" got {self.support_radius}."
            )
        object.__setattr__(
            self,
            "breakpoints",
            tuple(sorted(float(p) for p in self.breakpoints)),
        )
        probe = self.probe_grid()
        largest = float(np.max(np.abs(self(probe)))) if probe.size else 0.0
        if largest > self.sup_norm * (1 + 1e-12) + 1e-15:
            raise ArgumentError(
                f"Component of kind {self.kind} reaches {largest} on the probe"
                f" grid, above its recorded sup norm {self.sup_norm}."
            )

    def __call__(self, z) -> np.ndarray:
        values = self.evaluator(np.asarray(z, dtype=float))
        return np.asarray(values, dtype=float)

    @property
    def is_compact(self) -> bool:
        return bool(np.isfinite(self.support_radius))

    def probe_grid(self, n_points: int = PROBE_POINTS) -> np.ndarray:
        radius = (
            self.support_radius + 1.0
            if self.is_compact
            else UNBOUNDED_PROBE_RADIUS
        )
        grid = np.linspace(-radius, radius, n_points)
        return np.union1d(grid, np.asarray(self.breakpoints, dtype=float))

    def restrict(self, radius: float) -> "DriftComponent":
        """The component multiplied by the indicator of [-radius, radius]."""
        if radius >= self.support_radius:
            return self
        evaluator = self.evaluator

        def restricted(z):
            z = np.asarray(z, dtype=float)
            return np.where(np.abs(z) <= radius, evaluator(z), 0.0)

        points = [p for p in self.breakpoints if -radius < p < radius]
        l1_norm = integrate_abs(restricted, -radius, radius, points)
        return DriftComponent(
            restricted,
            self.sup_norm,
            min(l1_norm, self.l1_norm),
            float(radius),
            tuple(points) + (-radius, radius),
            kind="restricted.v1",
            params={
                "component": {"@drifts": self.kind, **self.params},
                "radius": radius,
            },
        )


def integrate_abs(
    func: Callable, lower: float, upper: float, points: Sequence[float] = ()
) -> float:
    """L1 norm of func over [lower, upper] by adaptive quadrature."""
    if lower >= upper:
        return 0.0
    if np.isinf(lower) or np.isinf(upper):
        value, _ = scipy.integrate.quad(
            lambda z: abs(float(func(z))), lower, upper, limit=500
        )
        return float(value)
    inner = sorted(p for p in points if lower < p < upper)
    value, _ = scipy.integrate.quad(
        lambda z: abs(float(func(z))),
        lower,
        upper,
        points=inner or None,
        limit=500,
    )
    return float(value)


def piecewise_constant(
    edges: Sequence[float],
    values: Sequence[float],
    kind: str = "piecewise_constant.v1",
    params: Optional[Dict] = None,
) -> DriftComponent:
    """
    Step function equal to values[k] on [edges[k], edges[k + 1]) and 0
    outside [edges[0], edges[-1]). Norms are exact.
    """
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    if edges.ndim != 1 or edges.size != values.size + 1:
        raise DimensionError(
            f"{values.size} steps need {values.size + 1} edges,"
            f" got {edges.size}."
        )
    if np.any(np.diff(edges) <= 0):
        raise ArgumentError("Step edges must be strictly increasing.")
    padded = np.concatenate([[0.0], values, [0.0]])

    def evaluator(z):
        return padded[np.searchsorted(edges, z, side="right")]

    if params is None:
        params = {"edges": edges.tolist(), "values": values.tolist()}
    return DriftComponent(
        evaluator,
        float(np.max(np.abs(values))),
        float(np.sum(np.abs(values) * np.diff(edges))),
        float(max(abs(edges[0]), abs(edges[-1]))),
        tuple(edges.tolist()),
        kind=kind,
        params=params,
    )


def component_from_function(
    func: Callable,
    support_radius: float,
    breakpoints: Sequence[float] = (),
    kind: str = "custom",
    params: Optional[Dict] = None,
) -> DriftComponent:
    """Wraps a bounded function, its norms are computed numerically."""
    lower, upper = -support_radius, support_radius
    probe = np.linspace(
        lower if np.isfinite(lower) else -UNBOUNDED_PROBE_RADIUS,
        upper if np.isfinite(upper) else UNBOUNDED_PROBE_RADIUS,
        PROBE_POINTS,
    )
    probe = np.union1d(probe, np.asarray(breakpoints, dtype=float))
    sup_norm = float(np.max(np.abs(func(probe))))
    l1_norm = integrate_abs(func, lower, upper, breakpoints)
    logger.debug(
        "Computed norms of %s: sup %.6g, L1 %.6g.", kind, sup_norm, l1_norm
    )
    return DriftComponent(
        func,
        sup_norm,
        l1_norm,
        support_radius,
        tuple(breakpoints),
        kind=kind,
        params=dict(params or {}),
    )


def zero_component() -> DriftComponent:
    return DriftComponent(
        lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        0.0,
        0.0,
        0.0,
        kind="zero.v1",
    )


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """Additive drift b(x) = sum_i b_i(<x, e_i>)."""

    components: Tuple[DriftComponent, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ArgumentError("A drift needs at least one component.")
        if not np.isfinite(self.sup_sum):
            raise ArgumentError(
                "Sup norms of the components must be summable."
            )

    def __len__(self) -> int:
        return len(self.components)

    def __getitem__(self, i: int) -> DriftComponent:
        """One-based access, spec[1] is b_1."""
        if not 1 <= i <= len(self):
            raise ArgumentError(
                f"Component index {i} outside of 1..{len(self)}."
            )
        return self.components[i - 1]

    @property
    def sup_norms(self) -> np.ndarray:
        return np.array([c.sup_norm for c in self.components])

    @property
    def l1_norms(self) -> np.ndarray:
        return np.array([c.l1_norm for c in self.components])

    @property
    def sup_sum(self) -> float:
        return float(np.sum(self.sup_norms))

    @property
    def is_compact(self) -> bool:
        return all(c.is_compact for c in self.components)

    def evaluate(self, z, shift) -> np.ndarray:
        z, shift = _check_arguments(z, shift, len(self))
        total = np.zeros(z.shape[:-1])
        for i, component in enumerate(self.components):
            total = total + component(z[..., i] + shift[..., i])
        return total

    def append(self, *components: DriftComponent) -> "DriftSpec":
        return DriftSpec(self.components + tuple(components))

    @property
    def config(self) -> Config:
        return Config(
            {
                "drift": {
                    "components": {
                        str(i): {"@drifts": c.kind, **c.params}
                        for i, c in enumerate(self.components, start=1)
                    }
                }
            }
        )

    @classmethod
    def from_config(cls, config: Config) -> "DriftSpec":
        """Resolves the numbered components of the drift section."""
        if "drift" not in config or "components" not in config["drift"]:
            raise ConfigError("Drift config needs a drift.components section.")
        section = Config({"components": dict(config["drift"]["components"])})
        try:
            resolved = registry.resolve(section)["components"]
        except (ConfigValidationError, catalogue.RegistryError) as error:
            raise ConfigError(f"Invalid drift component: {error}") from error
        try:
            order = sorted(resolved, key=int)
        except ValueError as error:
            raise ConfigError(
                "Drift components have to be numbered 1, 2, ..."
            ) from error
        if [int(key) for key in order] != list(range(1, len(order) + 1)):
            raise ConfigError(
                f"Drift components have to be numbered 1..{len(order)}."
            )
        return cls(tuple(resolved[key] for key in order))


def _check_arguments(z, shift, dimension: int):
    z = np.asarray(z, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if z.shape != shift.shape:
        raise DimensionError(
            f"Coefficients {z.shape} and shifts {shift.shape} differ in shape."
        )
    if z.ndim == 0 or z.shape[-1] != dimension:
        raise DimensionError(
            f"Drift has {dimension} components,"
            f" got vectors of shape {z.shape}."
        )
    return z, shift


def truncate_dimension(spec: DriftSpec, d: int) -> DriftSpec:
    """b^d: keeps b_1, ..., b_d, each cut off outside of [-d, d]."""
    if d < 1:
        raise ArgumentError(f"Truncation level must be at least 1, got {d}.")
    return DriftSpec(tuple(c.restrict(d) for c in spec.components[:d]))


def tail_sup_bound(spec: DriftSpec, d: int) -> float:
    """sum_{i > d} ||b_i||_inf, the distance between b and b^d far inside
    the truncation box."""
    return float(np.sum(spec.sup_norms[d:]))
