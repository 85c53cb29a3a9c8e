"""
Discretised Delfour-Mitter space M2 = R x L2([-r, 0]).

Every element is a point value together with a grid function sampled at
K + 1 uniform nodes -r + k r/K, k = 0..K. Integrals over [-r, 0] use the
trapezoid rule on that grid.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from skdelay.error import ArgumentError, DimensionError, GridAlignmentError
from skdelay.utils import grid_index, steps_per, trapezoid_weights


@dataclass(frozen=True, eq=False)
class M2Element:
    """Element (x(0), x(.)) of the segment space.

    Parameters
    ----------
    point: float
        The R component, x(0).
    hist: ndarray of shape (K + 1,)
        The L2 component sampled at the nodes -r + k r/K.
    r: float
        Delay length.
    """

    point: float
    hist: np.ndarray
    r: float

    def __post_init__(self):
        hist = np.array(self.hist, dtype=float)
        if hist.ndim != 1 or hist.size < 3:
            raise DimensionError(
                "The history needs at least three grid samples (K >= 2)."
            )
        if not self.r > 0:
            raise ArgumentError(f"Delay r must be positive, got {self.r}.")
        if not (np.isfinite(self.point) and np.all(np.isfinite(hist))):
            raise ArgumentError("M2 elements must have finite entries.")
        hist.setflags(write=False)
        object.__setattr__(self, "hist", hist)
        object.__setattr__(self, "point", float(self.point))

    @property
    def K(self) -> int:
        return self.hist.size - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.r, 0.0, self.K + 1)

    @classmethod
    def constant(cls, value: float, r: float, K: int) -> "M2Element":
        """Element of a path that sat at value for the whole past."""
        return cls(value, np.full(K + 1, float(value)), r)

    @classmethod
    def from_function(cls, func, r: float, K: int) -> "M2Element":
        """Samples an initial segment u -> func(u) on [-r, 0]."""
        nodes = np.linspace(-r, 0.0, K + 1)
        hist = np.asarray(func(nodes), dtype=float) * np.ones_like(nodes)
        return cls(float(hist[-1]), hist, r)

    def __add__(self, other: "M2Element") -> "M2Element":
        _check_same_grid(self, other)
        return M2Element(
            self.point + other.point, self.hist + other.hist, self.r
        )

    def __mul__(self, scalar: float) -> "M2Element":
        return M2Element(scalar * self.point, scalar * self.hist, self.r)

    __rmul__ = __mul__


def _check_same_grid(x: M2Element, y: M2Element) -> None:
    if x.K != y.K or not np.isclose(x.r, y.r, rtol=1e-12, atol=0.0):
        raise DimensionError(
            f"Elements live on different grids: (r={x.r}, K={x.K})"
            f" and (r={y.r}, K={y.K})."
        )


def m2_inner(x: M2Element, y: M2Element) -> float:
    """Scalar product x(0)y(0) + int_{-r}^0 x(u)y(u)du of the segment space."""
    _check_same_grid(x, y)
    weights = trapezoid_weights(x.r, x.K)
    return float(x.point * y.point + np.dot(weights, x.hist * y.hist))


def m2_norm(x: M2Element) -> float:
    return float(np.sqrt(m2_inner(x, x)))


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Ordered orthonormal family e_1, ..., e_D of the segment space."""

    elements: Tuple[M2Element, ...]
    r: float
    K: int
    points: np.ndarray = field(init=False, repr=False)
    hists: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.elements:
            raise ArgumentError("A basis needs at least one element.")
        for element in self.elements:
            if element.K != self.K or element.r != self.r:
                raise DimensionError("Basis elements must share r and K.")
        points = np.array([e.point for e in self.elements])
        hists = np.stack([e.hist for e in self.elements])
        points.setflags(write=False)
        hists.setflags(write=False)
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "hists", hists)

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, j: int) -> M2Element:
        """One-based access, basis[1] is e_1."""
        return self.elements[_basis_position(j, len(self))]

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.r, self.K)

    def gram(self) -> np.ndarray:
        return np.outer(self.points, self.points) + (
            self.hists * self.weights
        ) @ self.hists.T

    def projector(
        self, d: Optional[int] = None
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns the point weights and the history weights of the first d
        basis elements, so that the coefficients of segments (point, hist)
        are point[:, None] * a + hist @ B.
        """
        d = len(self) if d is None else d
        if d > len(self):
            raise DimensionError(
                f"Asked for {d} coefficients but the basis has {len(self)}."
            )
        return self.points[:d].copy(), (self.hists[:d] * self.weights).T

    def coefficients(
        self, point: np.ndarray, hist: np.ndarray, d: Optional[int] = None
    ) -> np.ndarray:
        """Vectorised <x, e_i>, i <= d, for a batch of segments."""
        a, B = self.projector(d)
        point = np.asarray(point, dtype=float)
        return point[..., None] * a + np.asarray(hist, dtype=float) @ B


def _basis_position(j: int, count: int) -> int:
    if not 1 <= j <= count:
        raise ArgumentError(f"Basis index {j} outside of 1..{count}.")
    return j - 1


def build_basis(r: float, count: int, K: int) -> BasisSet:
    """
    Orthonormal basis e_1 = (1, 0), e_{k+1} = (0, psi_k) with the cosine
    family psi_1 = 1/sqrt(r), psi_k(u) = sqrt(2/r) cos((k-1) pi (u+r)/r).

    The trapezoid rule reproduces the orthogonality of the cosines exactly
    as long as the largest frequency stays below K.
    """
    if count < 1:
        raise ArgumentError(f"count must be at least 1, got {count}.")
    if K < 2:
        raise ArgumentError(f"K must be at least 2, got {K}.")
    if count - 2 >= K:
        raise ArgumentError(
            f"{count} basis elements alias on a grid with K={K} cells."
        )
    if not r > 0:
        raise ArgumentError(f"Delay r must be positive, got {r}.")
    nodes = np.linspace(-r, 0.0, K + 1)
    elements = [M2Element(1.0, np.zeros(K + 1), r)]
    for k in range(1, count):
        if k == 1:
            psi = np.full(K + 1, 1 / np.sqrt(r))
        else:
            psi = np.sqrt(2 / r) * np.cos((k - 1) * np.pi * (nodes + r) / r)
        elements.append(M2Element(0.0, psi, r))
    return BasisSet(tuple(elements), r, K)


def indicator_segment(z, r: float, K: int) -> np.ndarray:
    """
    Grid version of the indicator of [z, 0] on [-r, 0].

    Nodes u >= z get 1, the node just below z gets the covered fraction of
    its cell, so the result is continuous in z. Accepts an array of z and
    returns one row per value.
    """
    z = np.asarray(z, dtype=float)
    h = r / K
    nodes = np.linspace(-r, 0.0, K + 1)
    upper = nodes[None, :] + h
    fraction = np.clip((upper - z.reshape(-1, 1)) / h, 0.0, 1.0)
    res = np.where(nodes[None, :] >= z.reshape(-1, 1), 1.0, fraction)
    return res.reshape(z.shape + (K + 1,))


def _check_chi_argument(z: np.ndarray, r: float) -> None:
    tol = 1e-12 * max(1.0, r)
    if np.any(z < -r - tol) or np.any(z > tol):
        raise ArgumentError(f"chi is defined for z in [-{r}, 0].")


def chi(j: int, z, basis: BasisSet):
    """chi_j(z) = <(1, 1_[z,0]), e_j>; z may be an array."""
    element = basis[j]
    z_arr = np.asarray(z, dtype=float)
    _check_chi_argument(z_arr, basis.r)
    clipped = np.clip(z_arr, -basis.r, 0.0)
    indicator = indicator_segment(clipped, basis.r, basis.K)
    res = element.point + indicator @ (basis.weights * element.hist)
    if np.ndim(z) == 0:
        return float(res)
    return res


def segment_extract(
    path: np.ndarray, t: float, eta: M2Element, dt: float
) -> M2Element:
    """
    Segment x_t = (x(t), u -> x(t+u)) of a path on the solver grid, where
    the path is prolonged into the past by the initial segment eta.
    """
    path = np.asarray(path, dtype=float)
    K = eta.K
    if not np.isclose(K * dt, eta.r, rtol=1e-9, atol=0.0):
        raise GridAlignmentError(
            f"Segment grid (r={eta.r}, K={K}) does not match step {dt}."
        )
    k = grid_index(t, dt)
    if k < 0 or k >= path.size:
        raise ArgumentError(
            f"Time {t} is outside of [0, {(path.size - 1) * dt}]."
        )
    extended = np.concatenate([eta.hist[:K], path])
    return M2Element(path[k], extended[k : k + K + 1], eta.r)


def extend_with_history(paths: np.ndarray, eta: M2Element) -> np.ndarray:
    """Prepends the K history samples of eta to a batch of paths, so that
    the segment at step k is the slice [k, k + K]."""
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    history = np.broadcast_to(eta.hist[: eta.K], (paths.shape[0], eta.K))
    return np.concatenate([history, paths], axis=1)


def segment_functional_F(
    i: int, t: float, phi: M2Element, eta: M2Element, basis: BasisSet
) -> float:
    """
    F_i(t, phi) = eta(0)e_i(0) + int (1_{t+u<0} eta(t+u) + 1_{t+u>=0} eta(0))
    e_i(u) du + phi(0)e_i(0) + int 1_{t+u>=0} phi(u) e_i(u) du.

    Represents <x_t, e_i> through the segment phi of the driving path when
    x = eta(0) + phi on [0, T].
    """
    _check_same_grid(phi, eta)
    _check_same_grid(phi, basis[1])
    element = basis[i]
    K = eta.K
    dt = eta.r / K
    k = grid_index(t, dt)
    j = np.arange(K + 1)
    past = k + j < K
    eta_part = np.where(past, eta.hist[np.minimum(k + j, K)], eta.point)
    phi_part = np.where(past, 0.0, phi.hist)
    weights = basis.weights
    return float(
        eta.point * element.point
        + np.dot(weights, eta_part * element.hist)
        + phi.point * element.point
        + np.dot(weights, phi_part * element.hist)
    )


def segment_grid(dt: float, r: float) -> int:
    """Number of segment cells K = r/dt, which has to be an integer."""
    return steps_per(r, dt)


@dataclass(frozen=True)
class SegmentGridConfig:
    """Solver step, delay and segment resolution, kept aligned."""

    dt: float
    r: float
    K: int
    strict: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ArgumentError(f"Step must be positive, got {self.dt}.")
        if self.strict and segment_grid(self.dt, self.r) != self.K:
            raise GridAlignmentError(
                f"r/dt = {self.r / self.dt} does not equal K = {self.K}."
            )

    @classmethod
    def from_step(cls, dt: float, r: float) -> "SegmentGridConfig":
        return cls(dt, r, segment_grid(dt, r))


def gram_deviation(basis: BasisSet) -> float:
    """Largest entry of |<e_i, e_j> - delta_ij|."""
    return float(np.max(np.abs(basis.gram() - np.eye(len(basis)))))


