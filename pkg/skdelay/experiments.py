"""
Experiment pipelines: configuration, manifests and the simulate, verify,
check, converge and malliavin runs.
"""
import configparser
import contextlib
import copy
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from confection import Config, ConfigValidationError

import skdelay
from skdelay.checks import run_checks
from skdelay.drifts import (
    DriftSpec,
    mollify_drift,
    tail_sup_bound,
    truncate_dimension,
)
from skdelay.error import ArgumentError, AssumptionError, ConfigError
from skdelay.kernels import (
    AssumptionInput,
    check_assumptions,
    default_beta,
    malliavin_bounds,
)
from skdelay.noise import GaussianPathSampler, GaussianPathSet
from skdelay.solver import SolverConfig, euler_solve, mc_ensemble
from skdelay.utils import steps_per

logger = logging.getLogger(__name__)

MODES = ("simulate", "verify", "check", "converge", "malliavin")
SE_TOLERANCE = 3.0
MONOTONE_SLACK = 1.0

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "experiment": {
        "mode": "verify",
        "seed": 0,
        "n_paths": 1000,
        "out": "runs",
        "levels": [2, 4, 8, 16],
        "dims": [],
        "t": None,
        "theta_count": 16,
        "n_jobs": 1,
        "chunk_size": 2048,
        "beta": None,
    },
    "solver": {
        "T": 0.5,
        "dt": 0.015625,
        "r": 0.5,
        "eps": 1.0,
        "eta0": 0.0,
        "basis_size": None,
    },
    "noise": {"hurst": [0.1], "weights": [1.0]},
    "assumptions": {
        "delta_H": 0.5,
        "delta_T": 0.25,
        "sln_constants": None,
        "sln_increments": 8,
    },
    "verify": {"suite": None, "fault": 0.0},
    "drift": {
        "components": {
            "1": {
                "@drifts": "admissible_step.v1",
                "index": 1,
                "hurst": 0.1,
                "weight": 1.0,
                "delay": 0.5,
                "delta_H": 0.5,
                "height": 0.0005,
                "left": -0.5,
            }
        }
    },
}


def _to_plain(value):
    if isinstance(value, dict):
        return {str(k): _to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    return value


@dataclass
class ExperimentConfig:
    """
    Validated experiment document with the sections experiment, solver,
    noise, drift, assumptions and verify. Missing keys take the canonical
    admissible defaults.
    """

    sections: Dict[str, Dict[str, Any]]

    def __post_init__(self):
        merged = copy.deepcopy(DEFAULTS)
        for name, section in self.sections.items():
            if name not in DEFAULTS:
                raise ConfigError(
                    f"Unknown section [{name}], expected one of"
                    f" {', '.join(DEFAULTS)}."
                )
            if not isinstance(section, dict):
                raise ConfigError(f"Section [{name}] must be a table.")
            unknown = set(section) - set(DEFAULTS[name])
            if unknown:
                raise ConfigError(
                    f"Unknown keys in [{name}]: {', '.join(sorted(unknown))}."
                )
            merged[name].update(_to_plain(section))
        self.sections = merged
        self._validate()

    def _validate(self) -> None:
        experiment = self.experiment
        if experiment["mode"] not in MODES:
            raise ConfigError(
                f"Unknown mode {experiment['mode']}, expected one of"
                f" {', '.join(MODES)}."
            )
        if int(experiment["n_paths"]) < 1:
            raise ConfigError("n_paths must be at least 1.")
        for key in ("levels", "dims"):
            values = list(experiment[key])
            if any(int(v) < 1 for v in values):
                raise ConfigError(f"{key} must be positive integers.")
            if values != sorted(values):
                raise ConfigError(f"{key} must be sorted ascending.")
        if not experiment["levels"]:
            raise ConfigError("Need at least one mollification level.")
        solver = self.solver
        try:
            steps_per(solver["T"], solver["dt"])
            steps_per(solver["r"], solver["dt"])
        except ArgumentError as error:
            raise ConfigError(str(error)) from error

    @property
    def experiment(self) -> Dict[str, Any]:
        return self.sections["experiment"]

    @property
    def solver(self) -> Dict[str, Any]:
        return self.sections["solver"]

    @property
    def noise(self) -> Dict[str, Any]:
        return self.sections["noise"]

    @property
    def assumptions(self) -> Dict[str, Any]:
        return self.sections["assumptions"]

    @property
    def verify(self) -> Dict[str, Any]:
        return self.sections["verify"]

    @property
    def mode(self) -> str:
        return self.experiment["mode"]

    @property
    def seed(self) -> int:
        return int(self.experiment["seed"])

    @property
    def n_paths(self) -> int:
        return int(self.experiment["n_paths"])

    @property
    def levels(self) -> List[int]:
        return [int(n) for n in self.experiment["levels"]]

    @property
    def dims(self) -> List[int]:
        return [int(d) for d in self.experiment["dims"]]

    @property
    def t(self) -> float:
        t = self.experiment["t"]
        return float(self.solver["T"] if t is None else t)

    @property
    def out(self) -> Path:
        return Path(self.experiment["out"])

    @property
    def config(self) -> Config:
        return Config(copy.deepcopy(self.sections))

    @classmethod
    def from_config(cls, config: Union[Config, Dict]) -> "ExperimentConfig":
        return cls(_to_plain(dict(config)))

    @classmethod
    def from_disk(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """Reads a .json document or a confection .cfg file."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"No config file at {path}.")
        try:
            if path.suffix == ".json":
                with open(path) as in_file:
                    document = json.load(in_file)
            else:
                document = Config().from_disk(path, interpolate=False)
        except (
            json.JSONDecodeError,
            configparser.Error,
            ConfigValidationError,
        ) as error:
            raise ConfigError(f"Cannot read {path}: {error}") from error
        return cls.from_config(document)

    def override(self, **overrides) -> "ExperimentConfig":
        """New config with experiment or verify keys replaced; None values
        are ignored."""
        sections = copy.deepcopy(self.sections)
        for key, value in overrides.items():
            if value is None:
                continue
            section = "verify" if key in DEFAULTS["verify"] else "experiment"
            if key not in DEFAULTS[section]:
                raise ConfigError(f"Cannot override unknown key {key}.")
            sections[section][key] = value
        return ExperimentConfig(sections)

    def digest(self) -> str:
        payload = json.dumps(self.sections, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def drift_spec(self) -> DriftSpec:
        return DriftSpec.from_config(
            Config({"drift": copy.deepcopy(self.sections["drift"])})
        )

    def solver_config(self, d: int, n: Optional[int] = None) -> SolverConfig:
        solver = self.solver
        return SolverConfig.build(
            T=float(solver["T"]),
            dt=float(solver["dt"]),
            r=float(solver["r"]),
            eps=float(solver["eps"]),
            eta0=float(solver["eta0"]),
            d=d,
            basis_size=solver["basis_size"],
            n=n,
        )

    def sampler(self) -> GaussianPathSampler:
        solver = self.solver
        return GaussianPathSampler(
            horizon=float(solver["T"]),
            n_steps=steps_per(solver["T"], solver["dt"]),
            hurst=list(self.noise["hurst"]),
            weights=self.noise["weights"],
            n_paths=self.n_paths,
            random_state=self.seed,
        )

    def sample_paths(self) -> GaussianPathSet:
        return self.sampler().sample()

    def assumption_input(self, drift: DriftSpec) -> AssumptionInput:
        spec = self.sampler().spec
        assumptions = self.assumptions
        common = dict(
            eps=float(self.solver["eps"]),
            delta_H=float(assumptions["delta_H"]),
            delta_T=float(assumptions["delta_T"]),
            r=float(self.solver["r"]),
            H=spec.H,
            w=spec.w,
            l1_norms=tuple(drift.l1_norms),
            T=float(self.solver["T"]),
        )
        if assumptions["sln_constants"] is None:
            return AssumptionInput.with_estimated_constants(
                sln_increments=int(assumptions["sln_increments"]), **common
            )
        return AssumptionInput(C=tuple(assumptions["sln_constants"]), **common)


@dataclass
class RunManifest:
    """Provenance of a run; config_hash identifies its inputs."""

    mode: str
    config_hash: str
    seed: int
    version: str
    started: str = ""
    wall_clock: float = 0.0
    timings: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)

    @classmethod
    def start(cls, config: ExperimentConfig) -> "RunManifest":
        payload = f"{config.digest()}:{config.seed}:{skdelay.__version__}"
        return cls(
            mode=config.mode,
            config_hash=hashlib.sha256(payload.encode("utf-8")).hexdigest(),
            seed=config.seed,
            version=skdelay.__version__,
            started=datetime.now(timezone.utc).isoformat(),
        )

    @contextlib.contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            self.wall_clock += elapsed
            logger.info("Stage %s took %.2fs.", name, elapsed)

    def to_dict(self) -> Dict:
        return asdict(self)


def _write_json(path: Path, payload: Dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as out_file:
        json.dump(payload, out_file, indent=2, sort_keys=True, default=float)
        out_file.write("\n")


def _finish(
    config: ExperimentConfig,
    manifest: RunManifest,
    summary: Dict,
    write: bool,
) -> Dict:
    summary["manifest"] = manifest.config_hash
    summary["mode"] = manifest.mode
    if write:
        out = config.out
        _write_json(out / "summary.json", summary)
        manifest.outputs.append("summary.json")
        _write_json(out / "manifest.json", manifest.to_dict())
        logger.info("Wrote results to %s.", out)
    return summary


def run_verify(config: ExperimentConfig, write: bool = True) -> Dict:
    """Runs the exact-identity suite; passes iff every selected check does."""
    manifest = RunManifest.start(config)
    suite = config.verify["suite"]
    with manifest.stage("checks"):
        results = run_checks(suite, fault=float(config.verify["fault"]))
    summary = {
        "checks": [r.to_dict() for r in results],
        "n_checks": len(results),
        "failed": [r.name for r in results if not r.passed],
        "passed": all(r.passed for r in results),
    }
    return _finish(config, manifest, summary, write)


def run_check(config: ExperimentConfig, write: bool = True) -> Dict:
    """Evaluates the admissibility conditions of the configured drift."""
    manifest = RunManifest.start(config)
    with manifest.stage("assumptions"):
        drift = config.drift_spec()
        report = check_assumptions(config.assumption_input(drift))
    summary = report.to_dict()
    return _finish(config, manifest, summary, write)


def run_simulate(
    config: ExperimentConfig, write: bool = True, level: Optional[int] = None
) -> Dict:
    """
    Solves the finest mollification level (or the given one) on the
    configured ensemble and writes trajectories.csv.
    """
    manifest = RunManifest.start(config)
    level = config.levels[-1] if level is None else level
    with manifest.stage("sample"):
        paths = config.sample_paths()
    with manifest.stage("solve"):
        spec = config.drift_spec()
        drift = mollify_drift(spec, level)
        solver_config = config.solver_config(len(spec), level)
        traj = euler_solve(drift, paths, solver_config)
    if write:
        config.out.mkdir(parents=True, exist_ok=True)
        traj.to_csv(config.out / "trajectories.csv", manifest.config_hash)
        manifest.outputs.append("trajectories.csv")
    summary = {
        "level": level,
        "n_paths": traj.n_paths,
        "n_steps": solver_config.n_steps,
        "terminal_mean": float(np.mean(traj.x[:, -1])),
        "envelope_excess": traj.envelope_excess(
            paths, solver_config.eta.point, drift.sup_sum
        ),
        "passed": True,
    }
    return _finish(config, manifest, summary, write)


def _converge_drifts(config: ExperimentConfig, spec: DriftSpec):
    dims, levels = config.dims, config.levels
    if len(dims) >= 2:
        n = levels[-1]
        drifts = [mollify_drift(truncate_dimension(spec, d), n) for d in dims]
        return drifts, dims, max(len(drift) for drift in drifts), "d"
    if len(levels) < 2:
        raise ArgumentError(
            "A convergence study needs at least two mollification levels"
            " or two dimensions."
        )
    drifts = [mollify_drift(spec, n) for n in levels]
    return drifts, levels, len(spec), "n"


def run_converge(config: ExperimentConfig, write: bool = True) -> Dict:
    """
    E|x^a(t) - x^b(t)|^2 over the level lattice on common noises, with the
    successive distances checked for a nonincreasing trend.
    """
    manifest = RunManifest.start(config)
    spec = config.drift_spec()
    with manifest.stage("mollify"):
        drifts, labels, d, axis = _converge_drifts(config, spec)
    with manifest.stage("sample"):
        paths = config.sample_paths()
    with manifest.stage("ensemble"):
        ensemble = mc_ensemble(
            drifts,
            paths,
            config.solver_config(d),
            t=config.t,
            theta_count=None,
            labels=labels,
            n_jobs=int(config.experiment["n_jobs"]),
            chunk_size=int(config.experiment["chunk_size"]),
        )
    if write:
        config.out.mkdir(parents=True, exist_ok=True)
        ensemble.distances_to_csv(
            config.out / "distances.csv", manifest.config_hash
        )
        manifest.outputs.append("distances.csv")
    successive = ensemble.successive_distances()
    nonincreasing = ensemble.is_nonincreasing(MONOTONE_SLACK)
    within_envelope = True
    if axis == "d":
        # |x^d - x^d'| <= t sum_{i > d} ||b_i||_inf, compared squared
        for row in successive:
            envelope = (tail_sup_bound(spec, row["level_a"]) * config.t) ** 2
            row["tail_envelope"] = envelope
            row["within_envelope"] = not _exceeds(
                row["mean"], row["se"], envelope
            )
            within_envelope = within_envelope and row["within_envelope"]
    weight_means, weight_se = ensemble.weight_means()
    summary = {
        "axis": axis,
        "labels": labels,
        "t": config.t,
        "n_paths": ensemble.n_paths,
        "distances": ensemble.distances(),
        "successive": successive,
        "nonincreasing": nonincreasing,
        "within_envelope": within_envelope,
        "weight_means": weight_means.tolist(),
        "weight_se": weight_se.tolist(),
        "passed": nonincreasing and within_envelope,
    }
    return _finish(config, manifest, summary, write)


def _exceeds(value: float, se: float, bound: float) -> bool:
    return bool(value > bound + SE_TOLERANCE * se)


def run_malliavin(config: ExperimentConfig, write: bool = True) -> Dict:
    """
    Empirical first-variation statistics of every mollification level next
    to their theoretical bounds; refuses inadmissible configurations.
    """
    manifest = RunManifest.start(config)
    spec = config.drift_spec()
    with manifest.stage("assumptions"):
        input = config.assumption_input(spec)
        report = check_assumptions(input)
    if not report.passed:
        raise AssumptionError(report.failures)
    if len(config.levels) < 2:
        raise ArgumentError("A Malliavin study needs at least two levels.")
    beta = config.experiment["beta"]
    beta = default_beta(input.delta_H) if beta is None else float(beta)
    t, M = config.t, spec.sup_sum
    with manifest.stage("sample"):
        paths = config.sample_paths()
    with manifest.stage("ensemble"):
        drifts = [mollify_drift(spec, n) for n in config.levels]
        ensemble = mc_ensemble(
            drifts,
            paths,
            config.solver_config(len(spec)),
            t=t,
            theta_count=int(config.experiment["theta_count"]),
            labels=config.levels,
            n_jobs=int(config.experiment["n_jobs"]),
            chunk_size=int(config.experiment["chunk_size"]),
        )
    thetas = ensemble.thetas
    with manifest.stage("bounds"):
        bounds = {
            (q, p): malliavin_bounds(
                input, t, thetas[q], thetas[p], M, beta=beta
            )
            for q in range(thetas.size)
            for p in range(q, thetas.size)
        }
    l2_mean, l2_se = ensemble.malliavin_l2()
    dev_mean, dev_se = ensemble.malliavin_deviation()
    point_mean, point_se = ensemble.pointwise_deviation()
    diff_mean, diff_se = ensemble.difference_table()
    holder_mean, holder_se = ensemble.holder_integral(beta)
    levels = []
    violations = []
    for i, label in enumerate(ensemble.labels):
        rows = []
        for q, theta in enumerate(thetas):
            pointwise = bounds[q, q].pointwise
            rows.append(
                {
                    "theta": float(theta),
                    "deviation": float(point_mean[i, q]),
                    "se": float(point_se[i, q]),
                    "bound": pointwise,
                }
            )
            if _exceeds(point_mean[i, q], point_se[i, q], pointwise):
                violations.append(f"n={label} pointwise theta={theta:.4g}")
            for p in range(q + 1, thetas.size):
                difference = bounds[q, p].difference
                if _exceeds(diff_mean[i, q, p], diff_se[i, q, p], difference):
                    violations.append(
                        f"n={label} difference theta={theta:.4g}"
                        f" theta'={thetas[p]:.4g}"
                    )
        integrated = bounds[0, 0].integrated
        double_integral = bounds[0, 0].double_integral
        if _exceeds(dev_mean[i], dev_se[i], integrated):
            violations.append(f"n={label} integrated")
        if _exceeds(holder_mean[i], holder_se[i], double_integral):
            violations.append(f"n={label} double integral")
        levels.append(
            {
                "level": label,
                "malliavin_l2": float(l2_mean[i]),
                "malliavin_l2_se": float(l2_se[i]),
                "deviation_integral": float(dev_mean[i]),
                "deviation_integral_se": float(dev_se[i]),
                "deviation_bound": integrated,
                "holder_integral": float(holder_mean[i]),
                "holder_integral_se": float(holder_se[i]),
                "holder_bound": double_integral,
                "pointwise": rows,
                "max_difference": float(np.max(diff_mean[i])),
            }
        )
    summary = {
        "t": t,
        "beta": beta,
        "M": M,
        "assumptions": report.to_dict(),
        "thetas": thetas.tolist(),
        "levels": levels,
        "violations": violations,
        "passed": not violations,
    }
    return _finish(config, manifest, summary, write)


RUNNERS = {
    "simulate": run_simulate,
    "verify": run_verify,
    "check": run_check,
    "converge": run_converge,
    "malliavin": run_malliavin,
}


def run(config: ExperimentConfig, write: bool = True) -> Dict:
    return RUNNERS[config.mode](config, write=write)


def parse_suite(suite: Optional[str]) -> Optional[Sequence[str]]:
    """Comma separated check names or groups; an empty string selects no
    checks."""
    if suite is None:
        return None
    return [entry.strip() for entry in suite.split(",") if entry.strip()]
