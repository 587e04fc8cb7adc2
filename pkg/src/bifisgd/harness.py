"""Experiment runner: config parsing, trace CSVs, replication, verify suites.

A run is fully described by a JSON config object with exactly the keys
``problem``, ``algorithm``, ``params`` (flat name/value map), ``seed`` and
``output``.  Identical (config, seed) pairs produce byte-identical CSVs.

The per-iteration objective reported in traces is estimated on a fixed
held-out validation set of realizations (drawn once per run from a dedicated
seed stream and reused across iterations), so curves are comparable across
algorithms on the same problem and seed.  Validation evaluations are
instrumentation and never enter the cost ledger.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import cost_bfsag, cost_bfsvrg
from .errors import ConfigFault, InsufficientData, NumericalFault
from .fem2d import density_to_csv
from .optimizers import (
    OptimizerTrace,
    bfsag_run,
    bfsvrg_run,
    measure_linear_rate,
    sag_run,
    sgd_run,
    svrg_run,
)
from .oracle import HIGH, DesignVector
from .problems import PolyRegressionOracle, TopOptProblem, quadratic_oracle, topopt_oracle

TRACE_COLUMNS = ("iter", "objective", "mass_ratio", "cum_cost_hf", "high_calls", "low_calls")

PROBLEM_NAMES = ("example1", "topopt-a", "topopt-b", "topopt-c", "quadratic")
ALGORITHM_NAMES = ("sgd", "sag", "svrg", "bfsag", "bfsvrg")

_EXAMPLE1_THETA0 = (1.5, 4.0, 1.0, 4.0, 5.0)


@dataclass
class ProblemBundle:
    """Everything the runner needs to drive one problem."""

    oracle: object
    theta0: DesignVector
    theta_star: np.ndarray | None
    metrics_fn: object = None
    default_validation: int = 256
    is_topopt: bool = False


@dataclass
class ExperimentConfig:
    problem: str
    algorithm: str
    params: dict
    seed: int
    output: str = "out"

    @staticmethod
    def from_dict(raw):
        if not isinstance(raw, dict):
            raise ConfigFault("config must be a JSON object")
        allowed = {"problem", "algorithm", "params", "seed", "output"}
        unknown = set(raw) - allowed
        if unknown:
            raise ConfigFault(f"unknown config keys: {sorted(unknown)}")
        for key in ("problem", "algorithm", "seed"):
            if key not in raw:
                raise ConfigFault(f"config key {key!r} is required")
        config = ExperimentConfig(
            problem=raw["problem"],
            algorithm=raw["algorithm"],
            params=dict(raw.get("params", {})),
            seed=raw["seed"],
            output=raw.get("output", "out"),
        )
        config.validate()
        return config

    @staticmethod
    def from_file(path):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigFault(f"cannot read config {path}: {exc}") from exc
        return ExperimentConfig.from_dict(raw)

    def validate(self):
        if self.problem not in PROBLEM_NAMES:
            raise ConfigFault(f"unknown problem {self.problem!r}; choose from {PROBLEM_NAMES}")
        if self.algorithm not in ALGORITHM_NAMES:
            raise ConfigFault(
                f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHM_NAMES}")
        if not isinstance(self.params, dict):
            raise ConfigFault("params must be a flat JSON object")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigFault(f"seed must be a non-negative integer, got {self.seed!r}")
        known = _PROBLEM_PARAMS[self.problem] | _ALGORITHM_PARAMS[self.algorithm] | _RUN_PARAMS
        unknown = set(self.params) - known
        if unknown:
            raise ConfigFault(f"unknown params for {self.problem}/{self.algorithm}: "
                              f"{sorted(unknown)}")
        _require_positive_counts(self.params)
        eta = self.params.get("eta")
        if eta is not None and eta <= 0:
            raise ConfigFault(f"eta must be positive, got {eta}")


_RUN_PARAMS = {"validation_size", "theta0"}

_PROBLEM_PARAMS = {
    "example1": {"n_obs", "obs_seed", "gamma"},
    "quadratic": {"dim", "mu", "lipschitz", "noise_add", "noise_mult", "rho",
                  "low_scale", "low_bias", "matrix_seed", "gamma", "init_offset"},
    "topopt-a": {"nelx", "nely", "lam", "gamma", "p0", "theta0_fill", "beta_p",
                 "rf_factor", "theta_min", "solver_rtol"},
}
_PROBLEM_PARAMS["topopt-b"] = _PROBLEM_PARAMS["topopt-a"]
_PROBLEM_PARAMS["topopt-c"] = _PROBLEM_PARAMS["topopt-a"] | {"n_modes", "sigma"}

_ALGORITHM_PARAMS = {
    "sgd": {"eta", "iters", "batch"},
    "sag": {"eta", "iters", "n", "n_h"},
    "svrg": {"eta", "outer", "m", "n_h"},
    "bfsag": {"eta", "iters", "n", "n_l", "n_h"},
    "bfsvrg": {"eta", "outer", "m", "n_l", "n_h", "alpha_mode", "exact_anchor"},
}

_COUNT_PARAMS = ("iters", "batch", "n", "n_h", "n_l", "outer", "m",
                 "n_obs", "dim", "nelx", "nely", "n_modes", "validation_size")


def _require_positive_counts(params):
    for key in _COUNT_PARAMS:
        value = params.get(key)
        if value is None:
            continue
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigFault(f"param {key!r} must be a positive integer, got {value!r}")


def build_problem(config: ExperimentConfig) -> ProblemBundle:
    params = config.params
    name = config.problem
    if name == "example1":
        oracle = PolyRegressionOracle.from_seed(
            params.get("obs_seed", 0), params.get("n_obs", 1000),
            gamma=params.get("gamma", 0.2))
        theta0 = np.asarray(params.get("theta0", _EXAMPLE1_THETA0), dtype=float)
        return ProblemBundle(oracle, DesignVector(theta0), oracle.theta_star)
    if name == "quadratic":
        oracle = quadratic_oracle(
            n=params.get("dim", 4),
            mu=params.get("mu", 1.0),
            lipschitz=params.get("lipschitz", 4.0),
            seed=params.get("matrix_seed", 0),
            noise_add=params.get("noise_add", 0.0),
            noise_mult=params.get("noise_mult", 0.0),
            low_noise_rho=params.get("rho", 1.0),
            low_scale=params.get("low_scale", 1.0),
            low_bias=None if params.get("low_bias") is None
            else np.full(params.get("dim", 4), params["low_bias"]),
            gamma=params.get("gamma", 0.2),
        )
        if "theta0" in params:
            theta0 = np.asarray(params["theta0"], dtype=float)
        else:
            theta0 = oracle.theta_star + params.get("init_offset", 1.0)
        return ProblemBundle(oracle, DesignVector(theta0), oracle.theta_star)
    variant = name.split("-")[1]
    problem = TopOptProblem(
        variant=variant,
        nelx=params.get("nelx", 120),
        nely=params.get("nely", 40),
        beta_p=params.get("beta_p", 3.0),
        rf_factor=params.get("rf_factor", 1.5),
        theta_min=params.get("theta_min", 1e-3),
        lam=params.get("lam"),
        p0=params.get("p0", 1.0),
        gamma=params.get("gamma", 0.096),
        n_modes=params.get("n_modes", 100),
        sigma=params.get("sigma", 2.0),
        solver_rtol=params.get("solver_rtol", 1e-8),
    )
    oracle = topopt_oracle(problem)
    theta0 = oracle.default_theta0(params.get("theta0_fill", 0.5))
    metrics_fn = lambda theta: {"mass_ratio": oracle.mass_ratio(theta)}  # noqa: E731
    return ProblemBundle(oracle, theta0, None, metrics_fn=metrics_fn,
                         default_validation=4, is_topopt=True)


def validation_objective(oracle, seed, size):
    """Mean high-fidelity objective over a fixed held-out realization set."""
    rng = np.random.default_rng([seed, 1])
    draws = [oracle.sample(rng) for _ in range(size)]

    def estimate(theta):
        return float(np.mean([oracle.objective(theta, xi, HIGH) for xi in draws]))

    return estimate


def run_algorithm(config: ExperimentConfig, bundle: ProblemBundle, *,
                  objective_fn, theta_ref=None) -> OptimizerTrace:
    params = config.params
    rng = np.random.default_rng([config.seed, 0])
    common = dict(objective_fn=objective_fn, metrics_fn=bundle.metrics_fn,
                  theta_ref=theta_ref)
    oracle, theta0 = bundle.oracle, bundle.theta0
    algo = config.algorithm
    eta = params.get("eta", 0.1)
    if algo == "sgd":
        return sgd_run(oracle, theta0, eta, params.get("iters", 100),
                       batch=params.get("batch", 1), rng=rng, **common)
    if algo == "sag":
        return sag_run(oracle, theta0, eta, params.get("iters", 100),
                       params.get("n", 100), params.get("n_h", 1), rng=rng, **common)
    if algo == "bfsag":
        return bfsag_run(oracle, theta0, eta, params.get("iters", 100),
                         params.get("n", 100), params.get("n_l", 1),
                         params.get("n_h", 1), rng=rng, **common)
    if algo == "svrg":
        return svrg_run(oracle, theta0, eta, params.get("outer", 10),
                        params.get("m", 5), params.get("n_h", 10), rng=rng, **common)
    return bfsvrg_run(oracle, theta0, eta, params.get("outer", 10),
                      params.get("m", 5), params.get("n_l", 10),
                      params.get("n_h", 2), rng=rng,
                      alpha_mode=params.get("alpha_mode", "diagonal"),
                      exact_anchor=bool(params.get("exact_anchor", False)), **common)


def write_trace_csv(trace: OptimizerTrace, path, *, topopt=False):
    """Frozen schema: iter, objective, mass_ratio, cum_cost_hf, high_calls, low_calls."""
    lines = [",".join(TRACE_COLUMNS)]
    for rec in trace.records:
        mass = f"{rec.metrics['mass_ratio']:.9g}" if topopt else ""
        lines.append(",".join([
            str(rec.iteration),
            f"{rec.objective:.9g}",
            mass,
            f"{rec.cum_cost:.9g}",
            str(rec.high_calls),
            str(rec.low_calls),
        ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class RunArtifacts:
    trace: OptimizerTrace
    summary: dict
    trace_path: Path | None = None
    summary_path: Path | None = None


def predicted_run_cost(config: ExperimentConfig, trace: OptimizerTrace, gamma):
    """Closed-form cost for the bi-fidelity algorithms, None otherwise."""
    p = config.params
    if config.algorithm == "bfsag":
        return cost_bfsag(len(trace), p.get("n_h", 1), p.get("n_l", 1), gamma)
    if config.algorithm == "bfsvrg" and not p.get("exact_anchor", False):
        return cost_bfsvrg(p.get("outer", 10), p.get("n_l", 10),
                           p.get("m", 5), p.get("n_h", 2), gamma)
    return None


def run_experiment(config: ExperimentConfig, out_dir=None, *, write=True) -> RunArtifacts:
    """Execute one configured run and emit trace CSV plus summary JSON."""
    bundle = build_problem(config)
    size = config.params.get("validation_size", bundle.default_validation)
    objective_fn = validation_objective(bundle.oracle, config.seed, size)
    trace = run_algorithm(config, bundle, objective_fn=objective_fn,
                          theta_ref=bundle.theta_star)

    summary = {
        "problem": config.problem,
        "algorithm": config.algorithm,
        "seed": config.seed,
        "iterations": len(trace),
        "status": trace.status,
        "final_objective": trace.records[-1].objective if trace.records else math.nan,
        "final_cost": trace.records[-1].cum_cost if trace.records else 0.0,
        "high_calls": trace.records[-1].high_calls if trace.records else 0,
        "low_calls": trace.records[-1].low_calls if trace.records else 0,
    }
    predicted = predicted_run_cost(config, trace, bundle.oracle.gamma)
    if predicted is not None:
        summary["predicted_cost"] = predicted
    if bundle.theta_star is not None and trace.records:
        distances = trace.ref_distances()
        if np.all(distances > 0):
            try:
                rate, quality = measure_linear_rate(distances, tail_fraction=0.5)
                summary["measured_rate"] = rate
                summary["rate_fit_quality"] = quality
            except InsufficientData:
                pass

    artifacts = RunArtifacts(trace=trace, summary=summary)
    if write:
        out = Path(out_dir if out_dir is not None else config.output)
        out.mkdir(parents=True, exist_ok=True)
        artifacts.trace_path = out / "trace.csv"
        artifacts.summary_path = out / "summary.json"
        write_trace_csv(trace, artifacts.trace_path, topopt=bundle.is_topopt)
        with open(artifacts.summary_path, "w", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if bundle.is_topopt and trace.theta_final is not None:
            density_to_csv(bundle.oracle.density(trace.theta_final),
                           bundle.oracle.fine, out / "design.csv")
    return artifacts


def _reference_theta(config: ExperimentConfig, bundle: ProblemBundle):
    """Long surrogate run standing in for an unknown optimum.

    Ten times the configured iteration budget with four times the batch-like
    sample counts, run on a fixed offset of the experiment seed.
    """
    params = dict(config.params)
    for key in ("n_h", "n_l", "batch"):
        if key in params:
            params[key] = 4 * params[key]
    if "n" in params:
        params["n"] = 4 * params["n"]
    for key in ("iters", "outer"):
        if key in params:
            params[key] = 10 * params[key]
    ref_config = ExperimentConfig(config.problem, config.algorithm, params,
                                  seed=config.seed + 999_983, output=config.output)
    trace = run_algorithm(ref_config, bundle, objective_fn=None)
    return trace.theta_final


def replicate(config: ExperimentConfig, n_runs, out_dir=None, *, write=True):
    """Aggregate relative parameter error over independently seeded runs.

    Returns a dict with per-iteration mean and standard deviation of
    ||theta_k - theta*|| / ||theta*|| across runs, and writes them as
    ``aggregate.csv`` (columns iter, mean_rel_err, std_rel_err).
    """
    if n_runs < 2:
        raise ConfigFault(f"replication needs at least 2 runs, got {n_runs}")
    bundle = build_problem(config)
    theta_star = bundle.theta_star
    if theta_star is None:
        theta_star = _reference_theta(config, bundle)
    norm = float(np.linalg.norm(theta_star))
    if norm == 0.0:
        raise NumericalFault("reference optimum has zero norm")

    distances = []
    for run in range(n_runs):
        run_config = ExperimentConfig(config.problem, config.algorithm,
                                      dict(config.params), seed=config.seed + run,
                                      output=config.output)
        trace = run_algorithm(run_config, bundle, objective_fn=None,
                              theta_ref=theta_star)
        distances.append(trace.ref_distances())
    distances = np.array(distances) / norm
    result = {
        "n_runs": n_runs,
        "mean_rel_err": distances.mean(axis=0),
        "std_rel_err": distances.std(axis=0, ddof=1),
    }
    if write:
        out = Path(out_dir if out_dir is not None else config.output)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "aggregate.csv"
        lines = ["iter,mean_rel_err,std_rel_err"]
        for k, (m, s) in enumerate(zip(result["mean_rel_err"], result["std_rel_err"]), 1):
            lines.append(f"{k},{m:.9g},{s:.9g}")
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        result["path"] = path
    return result
