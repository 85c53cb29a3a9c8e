import json

import numpy as np
import pytest
from confection import Config

from skdelay.drifts import (
    DriftComponent,
    DriftSpec,
    component_from_function,
    eval_drift,
    lipschitz_estimate,
    load_drift,
    make_admissible_step,
    make_constant,
    make_indicator_step,
    make_signed_comb,
    make_smooth_bump,
    mollify,
    mollify_drift,
    piecewise_constant,
    tail_sup_bound,
    truncate_dimension,
)
from skdelay.drifts._components import zero_component
from skdelay.drifts._mollify import bump
from skdelay.error import ArgumentError, ConfigError, DimensionError
from skdelay.kernels import l1_ceiling


def test_indicator_step_values_and_norms():
    step = make_indicator_step(0.0, 1.0, 2.0)
    np.testing.assert_array_equal(
        step(np.array([-0.1, 0.0, 0.5, 1.0, 3.0])), [0, 2, 2, 0, 0]
    )
    assert step.sup_norm == 2.0
    assert step.l1_norm == 2.0
    assert step.support_radius == 1.0
    assert step.is_compact


def test_piecewise_constant_checks():
    with pytest.raises(DimensionError):
        piecewise_constant([0, 1], [1, 2])
    with pytest.raises(ArgumentError):
        piecewise_constant([1, 0], [1])


def test_signed_comb():
    comb = make_signed_comb(n_teeth=4, width=0.25, height=1.0)
    assert comb.l1_norm == pytest.approx(1.0)
    assert comb.sup_norm == 1.0
    np.testing.assert_array_equal(comb([0.1, 0.3, 0.6, 0.9]), [1, -1, 1, -1])
    with pytest.raises(ArgumentError):
        make_signed_comb(n_teeth=0)


def test_smooth_bump_norms():
    component = make_smooth_bump(height=2.0, center=1.0, radius=0.5)
    assert component.sup_norm == pytest.approx(2.0, rel=1e-6)
    expected = 2.0 * 0.5 / float(bump(0.0))
    assert component.l1_norm == pytest.approx(expected, rel=1e-7)
    assert component.support_radius == 1.5


def test_recorded_sup_norm_is_checked():
    with pytest.raises(ArgumentError):
        DriftComponent(lambda z: 2 * np.ones_like(z), 1.0, 1.0, 1.0)
    with pytest.raises(ArgumentError):
        DriftComponent(lambda z: np.zeros_like(z), np.inf, 1.0, 1.0)


def test_component_from_function_computes_norms():
    component = component_from_function(
        lambda z: np.where(np.abs(z) <= 1, 1 - np.abs(z), 0.0),
        1.0,
        breakpoints=(-1.0, 0.0, 1.0),
    )
    assert component.sup_norm == pytest.approx(1.0)
    assert component.l1_norm == pytest.approx(1.0, rel=1e-10)


def test_spec_access_and_evaluation():
    spec = DriftSpec((make_indicator_step(0, 1, 1.0), make_constant(0.5, 2.0)))
    assert len(spec) == 2
    assert spec[2].sup_norm == 0.5
    with pytest.raises(ArgumentError):
        spec[0]
    np.testing.assert_allclose(spec.sup_norms, [1.0, 0.5])
    assert spec.sup_sum == 1.5
    value = eval_drift(spec, [0.2, 0.0], [0.3, 10.0])
    assert isinstance(value, float)
    assert value == 1.0
    batch = spec.evaluate(np.zeros((5, 2)), np.full((5, 2), 0.5))
    np.testing.assert_array_equal(batch, 1.5)
    with pytest.raises(DimensionError):
        spec.evaluate(np.zeros(3), np.zeros(3))
    with pytest.raises(DimensionError):
        spec.evaluate(np.zeros(2), np.zeros(3))
    with pytest.raises(ArgumentError):
        DriftSpec(())


def test_config_round_trip():
    spec = DriftSpec(
        (
            make_indicator_step(-1.0, 0.5, 3.0),
            piecewise_constant([0.0, 0.5, 2.0], [1.0, -2.0]),
            make_signed_comb(3, 0.5, 0.25),
            make_smooth_bump(1.0, 0.0, 2.0),
        )
    )
    restored = DriftSpec.from_config(spec.config)
    np.testing.assert_allclose(restored.l1_norms, spec.l1_norms)
    np.testing.assert_allclose(restored.sup_norms, spec.sup_norms)
    z = np.linspace(-3, 3, 41)
    for i in range(1, 5):
        np.testing.assert_array_equal(restored[i](z), spec[i](z))


def test_config_needs_numbered_components():
    with pytest.raises(ConfigError):
        DriftSpec.from_config(Config({"drift": {}}))
    config = Config(
        {"drift": {"components": {"2": {"@drifts": "zero.v1"}}}}
    )
    with pytest.raises(ConfigError):
        DriftSpec.from_config(config)


def test_load_drift(tmp_path):
    document = {
        "drift": {
            "components": {
                "1": {"@drifts": "indicator_step.v1", "height": 0.5},
                "2": {"@drifts": "zero.v1"},
            }
        }
    }
    path = tmp_path / "drift.json"
    path.write_text(json.dumps(document))
    spec = load_drift(path)
    assert len(spec) == 2
    np.testing.assert_allclose(spec.l1_norms, [0.5, 0.0])
    spec.config.to_disk(tmp_path / "drift.cfg")
    assert len(load_drift(tmp_path / "drift.cfg")) == 2


def test_truncation_and_tail():
    spec = DriftSpec(
        tuple(make_constant(2.0 ** -i, radius=10.0) for i in range(1, 5))
    )
    truncated = truncate_dimension(spec, 2)
    assert len(truncated) == 2
    assert truncated[1].support_radius == 2.0
    assert truncated[1].l1_norm == pytest.approx(0.5 * 4.0)
    assert truncated[1](np.array([2.5]))[0] == 0.0
    assert truncated[1].kind == "restricted.v1"
    assert tail_sup_bound(spec, 2) == pytest.approx(0.125 + 0.0625)
    assert tail_sup_bound(spec, 4) == 0.0
    restored = DriftSpec.from_config(truncated.config)
    assert restored[2].l1_norm == pytest.approx(truncated[2].l1_norm)
    with pytest.raises(ArgumentError):
        truncate_dimension(spec, 0)


def test_wide_truncation_keeps_the_component():
    component = make_indicator_step(0.0, 1.0)
    assert component.restrict(5.0) is component


def test_mollified_indicator():
    step = make_indicator_step(0.0, 1.0, 1.0)
    smooth = mollify(step, 8)
    assert smooth(0.5) == pytest.approx(1.0, abs=1e-7)
    assert smooth(-0.5) == 0.0
    assert smooth(0.0) == pytest.approx(0.5, abs=1e-3)
    assert smooth.l1_norm == pytest.approx(1.0, abs=1e-3)
    assert smooth.sup_norm <= 1.0 + 1e-8
    peak = 4 * float(bump(0.0))
    estimate = lipschitz_estimate(mollify(step, 4))
    assert estimate == pytest.approx(peak, rel=1e-3)


def test_mollify_arguments():
    step = make_indicator_step()
    with pytest.raises(ArgumentError):
        mollify(step, 0)
    unbounded = DriftComponent(
        lambda z: np.exp(-np.asarray(z) ** 2), 1.0, np.sqrt(np.pi), np.inf
    )
    with pytest.raises(ArgumentError):
        mollify(unbounded, 2)
    zero = mollify(zero_component(), 3)
    assert zero(0.0) == 0.0
    assert lipschitz_estimate(zero) == 0.0


def test_mollified_drift_keeps_base_norms():
    spec = DriftSpec((make_indicator_step(0, 1, 1.0), make_constant(0.5, 1.0)))
    drift = mollify_drift(spec, 4)
    assert len(drift) == 2
    assert drift.level == 4
    assert drift.sup_sum == spec.sup_sum
    np.testing.assert_allclose(drift.l1_norms, spec.l1_norms)
    gradient = drift.gradient(np.zeros((3, 2)), np.zeros((3, 2)))
    assert gradient.shape == (3, 2)
    assert np.all(drift.lipschitz_constants > 0)


def test_admissible_step_meets_its_ceiling():
    component = make_admissible_step(index=2, sln_constant=0.8, height=2.0)
    expected = l1_ceiling(2, 0.5, 0.5, 0.8, 1.0)
    assert component.l1_norm == pytest.approx(expected, rel=1e-12)
    assert component.sup_norm == 2.0
    assert component.params["sln_constant"] == 0.8


def test_admissible_step_defaults_to_a_low_plateau():
    component = make_admissible_step(sln_constant=0.8)
    expected = l1_ceiling(1, 0.5, 0.5, 0.8, 1.0)
    assert component.l1_norm == pytest.approx(expected, rel=1e-12)
    assert component.sup_norm == 5e-4
    assert component.breakpoints[0] == -0.5
    assert component.breakpoints[-1] - component.breakpoints[0] > 0.1


def test_unknown_factories_and_arguments_are_config_errors():
    misspelled = Config(
        {
            "drift": {
                "components": {
                    "1": {"@drifts": "indicator_step.v1", "heigth": 0.5}
                }
            }
        }
    )
    with pytest.raises(ConfigError):
        DriftSpec.from_config(misspelled)
    unknown = Config(
        {"drift": {"components": {"1": {"@drifts": "no_such.v1"}}}}
    )
    with pytest.raises(ConfigError):
        DriftSpec.from_config(unknown)


def test_mollification_converges_pointwise():
    step = make_indicator_step(0.0, 1.0, 1.0)
    z = np.array([-0.2, 0.3, 0.8, 1.2])
    errors = [
        float(np.max(np.abs(mollify(step, n)(z) - step(z))))
        for n in (2, 4, 8, 16, 32)
    ]
    assert errors[0] > 1e-3
    assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))
    assert errors[-1] <= 1e-8


def test_lipschitz_estimate_grows_with_the_level():
    step = make_indicator_step(0.0, 1.0, 1.0)
    levels = (2, 4, 8, 16)
    estimates = [lipschitz_estimate(mollify(step, n)) for n in levels]
    assert all(b > a for a, b in zip(estimates, estimates[1:]))
    for n, estimate in zip(levels, estimates):
        assert estimate == pytest.approx(n * float(bump(0.0)), rel=1e-2)


def test_mollification_contracts_the_norms(rng):
    for _ in range(10):
        edges = np.sort(rng.uniform(-2.0, 2.0, 4))
        component = piecewise_constant(edges, rng.uniform(-1.0, 1.0, 3))
        smooth = mollify(component, 4)
        assert smooth.sup_norm <= component.sup_norm + 1e-9
        assert smooth.l1_norm <= component.l1_norm * (1 + 1e-3) + 1e-9


def _mixed_spec(count: int) -> DriftSpec:
    components = []
    for i in range(1, count + 1):
        if i % 2:
            components.append(make_indicator_step(-1.0, 1.0, 2.0**-i))
        else:
            components.append(make_smooth_bump(2.0**-i, 0.0, 1.0))
    return DriftSpec(tuple(components))


def test_appended_zero_components_do_not_change_the_drift(rng):
    spec = _mixed_spec(2)
    padded = spec.append(zero_component(), zero_component())
    z = rng.normal(size=(50, 4))
    shift = rng.normal(size=(50, 4))
    np.testing.assert_array_equal(
        eval_drift(padded, z, shift), eval_drift(spec, z[:, :2], shift[:, :2])
    )
    smooth, smooth_padded = mollify_drift(spec, 4), mollify_drift(padded, 4)
    np.testing.assert_array_equal(
        eval_drift(smooth_padded, z, shift),
        eval_drift(smooth, z[:, :2], shift[:, :2]),
    )


def test_drift_is_bounded_by_the_sup_sum(rng):
    spec = _mixed_spec(5)
    z = 2 * rng.normal(size=(1000, 5))
    values = eval_drift(spec, z, np.zeros_like(z))
    assert np.all(np.abs(values) <= spec.sup_sum + 1e-12)


def test_truncation_error_is_bounded_by_the_tail(rng):
    spec = _mixed_spec(6)
    z = rng.normal(size=(500, 6)) * 2.0 ** -np.arange(6)
    full = eval_drift(spec, z, np.zeros_like(z))
    for d in range(1, 6):
        truncated = truncate_dimension(spec, d)
        inner = z[:, :d]
        approximation = eval_drift(truncated, inner, np.zeros_like(inner))
        error = np.abs(full - approximation)
        assert np.all(error <= tail_sup_bound(spec, d) + 1e-12)
