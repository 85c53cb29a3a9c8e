import json
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from confection import Config, registry

from skdelay.drifts._components import (
    DriftComponent,
    DriftSpec,
    component_from_function,
    piecewise_constant,
    tail_sup_bound,
    truncate_dimension,
    zero_component,
)
from skdelay.drifts._mollify import (
    MollifiedComponent,
    MollifiedDrift,
    bump,
    lipschitz_estimate,
    mollify,
    mollify_drift,
)
from skdelay.error import ArgumentError
from skdelay.kernels import l1_ceiling
from skdelay.noise import estimate_sln_constant


def eval_drift(drift: Union[DriftSpec, MollifiedDrift], z, shift):
    """sum_i b_i(z_i + shift_i) for one coefficient vector or a batch."""
    res = drift.evaluate(z, shift)
    if np.ndim(res) == 0:
        return float(res)
    return res


def load_drift(path: Union[str, Path]) -> DriftSpec:
    """Reads a drift description from a .json or .cfg file."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as in_file:
            config = Config(json.load(in_file))
    else:
        config = Config().from_disk(path)
    return DriftSpec.from_config(config)


@registry.drifts.register("zero.v1")
def make_zero():
    return zero_component()


@registry.drifts.register("constant.v1")
def make_constant(value: float = 1.0, radius: float = 10.0):
    return piecewise_constant(
        [-radius, radius],
        [value],
        kind="constant.v1",
        params={"value": value, "radius": radius},
    )


@registry.drifts.register("indicator_step.v1")
def make_indicator_step(
    left: float = 0.0, right: float = 1.0, height: float = 1.0
):
    return piecewise_constant(
        [left, right],
        [height],
        kind="indicator_step.v1",
        params={"left": left, "right": right, "height": height},
    )


@registry.drifts.register("piecewise_constant.v1")
def make_piecewise_constant(edges: List[float], values: List[float]):
    return piecewise_constant(edges, values)


@registry.drifts.register("signed_comb.v1")
def make_signed_comb(
    n_teeth: int = 4,
    width: float = 0.25,
    height: float = 1.0,
    start: float = 0.0,
):
    """Steps of alternating sign +height, -height, ... of equal width."""
    if n_teeth < 1 or width <= 0:
        raise ArgumentError(
            "A comb needs at least one tooth of positive width."
        )
    edges = start + width * np.arange(n_teeth + 1)
    values = height * (-1.0) ** np.arange(n_teeth)
    return piecewise_constant(
        edges,
        values,
        kind="signed_comb.v1",
        params={
            "n_teeth": n_teeth,
            "width": width,
            "height": height,
            "start": start,
        },
    )


@registry.drifts.register("smooth_bump.v1")
def make_smooth_bump(
    height: float = 1.0, center: float = 0.0, radius: float = 1.0
):
    """Lipschitz test drift height * phi((z - center)/radius)/phi(0)."""
    if radius <= 0:
        raise ArgumentError(f"Bump radius must be positive, got {radius}.")
    peak = float(bump(0.0))

    def evaluator(z):
        return height * bump((np.asarray(z) - center) / radius) / peak

    return component_from_function(
        evaluator,
        abs(center) + radius,
        (center - radius, center, center + radius),
        kind="smooth_bump.v1",
        params={"height": height, "center": center, "radius": radius},
    )


@registry.drifts.register("admissible_step.v1")
def make_admissible_step(
    index: int = 1,
    hurst: float = 0.1,
    weight: float = 1.0,
    delay: float = 0.5,
    delta_H: float = 0.5,
    height: float = 5e-4,
    left: float = -0.5,
    sln_constant: Optional[float] = None,
    sln_increments: int = 8,
):
    """
    Step of the given height whose L1 norm equals the largest value that
    keeps A_index <= 2^-index, so that any drift built from such steps
    satisfies sum_j A_j < 1. The budget is spread over a low plateau
    starting at left.
    """
    if sln_constant is None:
        sln_constant = estimate_sln_constant(hurst, sln_increments).C_hat
    ceiling = l1_ceiling(index, delay, delta_H, sln_constant, weight)
    params: Dict = {
        "index": index,
        "hurst": hurst,
        "weight": weight,
        "delay": delay,
        "delta_H": delta_H,
        "height": height,
        "left": left,
        "sln_constant": sln_constant,
        "sln_increments": sln_increments,
    }
    return piecewise_constant(
        [left, left + ceiling / abs(height)],
        [height],
        kind="admissible_step.v1",
        params=params,
    )


@registry.drifts.register("restricted.v1")
def make_restricted(component: DriftComponent, radius: float):
    return component.restrict(radius)


__all__ = [
    "DriftComponent",
    "DriftSpec",
    "MollifiedComponent",
    "MollifiedDrift",
    "component_from_function",
    "eval_drift",
    "lipschitz_estimate",
    "load_drift",
    "mollify",
    "mollify_drift",
    "piecewise_constant",
    "tail_sup_bound",
    "truncate_dimension",
]
