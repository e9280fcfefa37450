"""Notional scenarios, synthetic data and end-to-end experiments.

Three decision problems are provided (disaster triage casualty states, UAV
vehicle classes, the two-outcome box game) plus a plain label-matching
classification task where actions are labels. Logits come from a synthetic
generator with a known miscalibration temperature instead of a trained model.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .core import (
    ActionSpace,
    CostMatrix,
    Distribution,
    LabeledDataset,
    LabelSpace,
    PredictionSet,
    ScalarConfidence,
    check_probs,
    check_stochastic,
    expected_cost,
    softmax,
)
from .decision import BayesOptimal, ConfusionHuman, ModeledHuman, Threshold
from .errors import ConfigError, ParameterError
from .metrics import CalibrationReport, SetReport, calibration_metrics, decision_calibration_error, set_metrics
from .sea import (
    TemperatureModel,
    conformal_decision_errors,
    fit_conformal,
    fit_decision_calibration,
    fit_histogram_binning,
    fit_temperature_nll,
    search_conformal_alpha,
    temperature_grid,
)

BOX_WALK_PAYOFF = 20.0
BOX_OPEN_PAYOFF = 80.0


@dataclass(frozen=True)
class SyntheticGeneratorSpec:
    """Gaussian logit generator with a known miscalibration temperature.

    Base logits put mean ``separation`` on a latent class and add
    ``noise_sd`` Gaussian noise; the recorded label is sampled from
    ``softmax(base)``, so the base logits are calibrated by construction. The
    stored logits are ``base * true_temperature``, hence
    ``softmax(z / true_temperature)`` is the calibrated distribution.
    """

    k: int
    separation: float = 2.0
    noise_sd: float = 1.0
    true_temperature: float = 1.0
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ParameterError("generator needs k >= 2 classes")
        for name in ("separation", "noise_sd", "true_temperature"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"generator {name} must be positive, got {value}")
        if int(self.n) != self.n or self.n < 0:
            raise ParameterError("generator n must be a non-negative integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError("generator seed must be a non-negative integer")


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    name: str
    label_space: LabelSpace
    action_space: ActionSpace
    cost: CostMatrix
    class_priors: np.ndarray
    generator: SyntheticGeneratorSpec

    def __post_init__(self):
        priors = check_probs(self.class_priors)
        if priors.shape != (self.label_space.k,):
            raise ConfigError("class priors must cover every label")
        if self.cost.labels != self.label_space or self.cost.actions != self.action_space:
            raise ConfigError("cost matrix spaces do not match the scenario")
        object.__setattr__(self, "class_priors", priors)

    @property
    def actions_are_labels(self) -> bool:
        return self.action_space.names == self.label_space.names


def _scenario(name, labels, actions, costs, priors, true_temperature):
    labels, actions = LabelSpace(labels), ActionSpace(actions)
    gen = SyntheticGeneratorSpec(k=labels.k, true_temperature=true_temperature)
    return ScenarioSpec(name, labels, actions, CostMatrix(labels, actions, costs), np.asarray(priors, float), gen)


def triage_scenario() -> ScenarioSpec:
    """Casualty triage: 4 injury states, 3 response actions."""
    return _scenario(
        "triage",
        ("healthy", "delayed", "immediate", "expectant"),
        ("no action", "deploy medical personnel", "evacuate"),
        [[0, 30, 100],
         [50, 0, 30],
         [100, 5, 0],
         [50, 10, 20]],
        [0.25, 0.25, 0.25, 0.25],
        2.5,
    )


def uav_scenario() -> ScenarioSpec:
    """UAV surveillance: follow or keep scanning depending on the vehicle class."""
    return _scenario(
        "uav",
        ("friendly military", "adversary military", "civilian"),
        ("Follow", "Scan Area"),
        [[50, 0],
         [0, 100],
         [75, 0]],
        [1 / 3, 1 / 3, 1 / 3],
        2.5,
    )


def box_game_scenario(walk_payoff=BOX_WALK_PAYOFF, open_payoff=BOX_OPEN_PAYOFF) -> ScenarioSpec:
    """The box game with costs equal to negative profit.

    Label ``prize`` means the box holds the money; opening then nets
    ``open_payoff``, opening an empty box nets 0, walking away always keeps
    ``walk_payoff``.
    """
    return _scenario(
        "box_game",
        ("empty", "prize"),
        ("open", "walk"),
        [[0.0, -walk_payoff],
         [-open_payoff, -walk_payoff]],
        [0.5, 0.5],
        1.0,
    )


def classification_scenario(k: int = 3) -> ScenarioSpec:
    """Label-matching task with 0-1 loss (actions are the labels)."""
    names = tuple(f"class_{i}" for i in range(k))
    return _scenario("classification", names, names, 1.0 - np.eye(k), np.full(k, 1.0 / k), 2.5)


SCENARIOS = {
    "triage": triage_scenario,
    "uav": uav_scenario,
    "box_game": box_game_scenario,
    "classification": classification_scenario,
}


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; valid names: {sorted(SCENARIOS)}") from None


def box_game_policy_threshold(walk_payoff=BOX_WALK_PAYOFF, open_payoff=BOX_OPEN_PAYOFF) -> float:
    """Break-even confidence for opening the box: ``walk_payoff / open_payoff``."""
    if not open_payoff > 0:
        raise ParameterError("open payoff must be positive")
    return walk_payoff / open_payoff


def box_game_policy(walk_payoff=BOX_WALK_PAYOFF, open_payoff=BOX_OPEN_PAYOFF) -> Threshold:
    """Open (action 0) when the confidence reaches the break-even point, else walk (action 1)."""
    return Threshold(box_game_policy_threshold(walk_payoff, open_payoff), 0, 1)


def generate_dataset(
    spec: SyntheticGeneratorSpec,
    priors=None,
    label_space: LabelSpace | None = None,
    split: str = "calibration",
    id_prefix: str | None = None,
) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    k, n = spec.k, spec.n
    priors = np.full(k, 1.0 / k) if priors is None else check_probs(priors)
    if priors.shape != (k,):
        raise ParameterError(f"priors must have {k} entries")
    if label_space is None:
        label_space = LabelSpace(tuple(f"class_{i}" for i in range(k)))
    latent = rng.choice(k, size=n, p=priors)
    base = spec.noise_sd * rng.standard_normal((n, k))
    base[np.arange(n), latent] += spec.separation
    cdf = np.cumsum(softmax(base), axis=1) if n else np.zeros((0, k))
    u = rng.random(n)
    labels = np.minimum((u[:, None] >= cdf).sum(axis=1), k - 1)
    prefix = id_prefix or split[:3]
    ids = [f"{prefix}-{i:06d}" for i in range(n)]
    return LabeledDataset(label_space, ids, base * spec.true_temperature, labels, [split] * n)


def derive_seed(master: int, stream: int) -> int:
    """Independent 63-bit seed for sub-stream ``stream`` of a master seed."""
    state = np.random.SeedSequence([int(master), int(stream)]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


# -- experiments -------------------------------------------------------------


@dataclass
class ExperimentResult:
    method: str
    policy: str
    params: dict[str, Any]
    expected_cost: float
    seed: int
    calibration: CalibrationReport | None = None
    sets: SetReport | None = None
    details: dict[str, Any] = field(default_factory=dict)
    evaluated_on: str = "test"

    def to_dict(self):
        return {
            "method": self.method,
            "policy": self.policy,
            "params": self.params,
            "expected_cost": self.expected_cost,
            "seed": self.seed,
            "calibration": None if self.calibration is None else self.calibration.to_dict(),
            "sets": None if self.sets is None else self.sets.to_dict(),
            "details": self.details,
            "evaluated_on": self.evaluated_on,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            method=str(d["method"]),
            policy=str(d["policy"]),
            params=dict(d["params"]),
            expected_cost=float(d["expected_cost"]),
            seed=int(d["seed"]),
            calibration=None if d["calibration"] is None else CalibrationReport.from_dict(d["calibration"]),
            sets=None if d["sets"] is None else SetReport.from_dict(d["sets"]),
            details=dict(d["details"]),
            evaluated_on=str(d["evaluated_on"]),
        )


def temperature_output_for(policy) -> str:
    """Scalar confidence when the policy takes one, else the full distribution."""
    if ScalarConfidence in policy.accepts:
        return "confidence"
    if Distribution in policy.accepts:
        return "distribution"
    raise ConfigError(f"{type(policy).__name__} cannot consume temperature-scaled outputs")


def tune_temperature_for_decisions(
    scenario: ScenarioSpec, policy, cal: LabeledDataset, grid=None
) -> ExperimentResult:
    """Temperature minimizing the policy's expected cost on ``cal``.

    ``T = 1`` is always added to the grid; ties go to the smallest ``T``.
    The returned result is evaluated on the calibration split and carries the
    full objective trace in ``details["trace"]``.
    """
    grid = temperature_grid() if grid is None else np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ParameterError("temperature grid must not be empty")
    grid = np.unique(np.append(grid, 1.0))
    output = temperature_output_for(policy)
    objective = np.array([
        expected_cost(policy, TemperatureModel(float(t), output), cal, scenario.cost) for t in grid
    ])
    best = int(np.argmin(objective))
    baseline = float(objective[int(np.searchsorted(grid, 1.0))])
    return ExperimentResult(
        method="decision_temperature",
        policy=type(policy).__name__,
        params={"T": float(grid[best]), "output": output},
        expected_cost=float(objective[best]),
        seed=0,
        details={
            "trace": [[float(t), float(c)] for t, c in zip(grid, objective)],
            "baseline_T1": baseline,
        },
        evaluated_on="calibration",
    )


METHOD_OUTPUTS = {
    "softmax": Distribution,
    "temperature": Distribution,
    "temperature_confidence": ScalarConfidence,
    "histogram_binning": ScalarConfidence,
    "conformal": PredictionSet,
    "decision_calibration": Distribution,
    "decision_temperature": None,
}
POLICY_NAMES = ("bayes", "threshold", "modeled_human", "confusion_human")
POLICY_PARAM_KEYS = {
    "bayes": set(),
    "threshold": {"cutoff", "above", "below"},
    "modeled_human": {"rationality", "trust"},
    "confusion_human": {"confusion"},
}


def _strict(d, allowed, where):
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}; allowed: {sorted(allowed)}")


def _choose(names, valid, what):
    names = tuple(names)
    bad = [n for n in names if n not in valid]
    if bad:
        raise ConfigError(f"unknown {what} {bad}; valid names: {sorted(valid)}")
    return names


@dataclass(frozen=True)
class GeneratorConfig:
    separation: float = 2.0
    noise_sd: float = 1.0
    true_temperature: float | None = None
    n_calibration: int = 2000
    n_test: int = 2000


@dataclass(frozen=True)
class MethodParams:
    n_bins: int = 15
    alpha: float = 0.1
    epsilon: float = 0.5
    max_iter: int = 100
    temperature_grid: tuple[float, ...] | None = None


@dataclass(frozen=True)
class OptimizeConfig:
    target: str = "temperature"
    policy: str = "modeled_human"
    alpha_grid: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3)
    confusion: tuple[tuple[float, ...], ...] | None = None


def _section(cls, d, where):
    names = {f.name for f in dataclasses.fields(cls)}
    _strict(d, names, where)
    return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; every name is resolved at construction."""

    scenario: str
    methods: tuple[str, ...] = ()
    policies: tuple[str, ...] = ("bayes",)
    seeds: tuple[int, ...] = (0,)
    generator: GeneratorConfig = GeneratorConfig()
    method_params: MethodParams = MethodParams()
    policy_params: dict = field(default_factory=dict)
    optimize: OptimizeConfig | None = None

    def __post_init__(self):
        spec = get_scenario(self.scenario)
        set_ = object.__setattr__
        set_(self, "methods", _choose(self.methods, METHOD_OUTPUTS, "method(s)"))
        set_(self, "policies", _choose(self.policies, POLICY_NAMES, "policy(ies)"))
        seeds = tuple(int(s) for s in self.seeds)
        if any(s < 0 or s >= 2**64 for s in seeds):
            raise ConfigError("seeds must be 64-bit unsigned integers")
        set_(self, "seeds", seeds)
        _strict(self.policy_params, POLICY_NAMES, "policy_params")
        for name, params in self.policy_params.items():
            _strict(params, POLICY_PARAM_KEYS[name], f"policy_params.{name}")
        if self.optimize is not None:
            if self.optimize.target not in ("temperature", "conformal_alpha"):
                raise ConfigError(
                    f"unknown optimize target {self.optimize.target!r}; "
                    "valid names: ['conformal_alpha', 'temperature']"
                )
            _choose([self.optimize.policy], POLICY_NAMES, "optimize policy")
        # resolve every component now so bad configs fail before any compute
        policies = {p: build_policy(p, spec, self.policy_params.get(p, {})) for p in self.policies}
        for m in self.methods:
            for p, policy in policies.items():
                if not method_compatible(m, policy):
                    raise ConfigError(f"method {m!r} cannot feed policy {p!r}")
        if self.optimize is not None and self.optimize.target == "temperature":
            temperature_output_for(build_policy(self.optimize.policy, spec, self.policy_params.get(self.optimize.policy, {})))
        if self.optimize is not None and self.optimize.target == "conformal_alpha":
            default_confusion(spec, self.optimize.confusion)
        mp = self.method_params
        if int(mp.n_bins) != mp.n_bins or mp.n_bins < 1:
            raise ConfigError("method_params.n_bins must be a positive integer")
        if not 0 < mp.alpha < 1:
            raise ConfigError("method_params.alpha must lie in (0, 1)")
        if not mp.epsilon > 0 or int(mp.max_iter) != mp.max_iter or mp.max_iter < 0:
            raise ConfigError("method_params.epsilon must be positive and max_iter a non-negative integer")
        if mp.temperature_grid is not None and (
            not mp.temperature_grid or any(not t > 0 for t in mp.temperature_grid)
        ):
            raise ConfigError("method_params.temperature_grid must be a non-empty list of positive values")
        if self.optimize is not None and any(not 0 < a < 1 for a in self.optimize.alpha_grid):
            raise ConfigError("optimize.alpha_grid values must lie in (0, 1)")
        g = self.generator
        for n in (g.n_calibration, g.n_test):
            if int(n) != n or n < 1:
                raise ConfigError("generator split sizes must be positive integers")
        try:
            dataclasses.replace(spec.generator, **self.generator_overrides(spec))
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None

    def generator_overrides(self, spec: ScenarioSpec) -> dict:
        g = self.generator
        t = spec.generator.true_temperature if g.true_temperature is None else g.true_temperature
        return {"separation": g.separation, "noise_sd": g.noise_sd, "true_temperature": t}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        _strict(d, names, "config")
        if "scenario" not in d:
            raise ConfigError("config must name a scenario")
        d = dict(d)
        try:
            if "generator" in d:
                d["generator"] = _section(GeneratorConfig, d["generator"], "generator")
            if "method_params" in d:
                mp = dict(d["method_params"])
                if mp.get("temperature_grid") is not None:
                    mp["temperature_grid"] = tuple(float(t) for t in mp["temperature_grid"])
                d["method_params"] = _section(MethodParams, mp, "method_params")
            if d.get("optimize") is not None:
                op = dict(d["optimize"])
                if "alpha_grid" in op:
                    op["alpha_grid"] = tuple(float(a) for a in op["alpha_grid"])
                if op.get("confusion") is not None:
                    op["confusion"] = tuple(tuple(float(x) for x in row) for row in op["confusion"])
                d["optimize"] = _section(OptimizeConfig, op, "optimize")
            for key in ("methods", "policies", "seeds"):
                if key in d:
                    if isinstance(d[key], (str, bytes)) or not hasattr(d[key], "__iter__"):
                        raise ConfigError(f"{key} must be a list")
                    d[key] = tuple(d[key])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config value: {exc}") from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("methods", "policies", "seeds"):
            d[key] = list(d[key])
        mp = d["method_params"]
        if mp["temperature_grid"] is not None:
            mp["temperature_grid"] = list(mp["temperature_grid"])
        if d["optimize"] is not None:
            d["optimize"]["alpha_grid"] = list(d["optimize"]["alpha_grid"])
            if d["optimize"]["confusion"] is not None:
                d["optimize"]["confusion"] = [list(r) for r in d["optimize"]["confusion"]]
        return d

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return dataclasses.replace(self, seeds=tuple(seeds))


def _action_index(spec: ScenarioSpec, value) -> int:
    if isinstance(value, str):
        try:
            return spec.action_space.index(value)
        except ValueError:
            raise ConfigError(f"unknown action {value!r}; valid: {list(spec.action_space.names)}") from None
    return int(value)


def default_confusion(spec: ScenarioSpec, confusion=None, accuracy: float = 0.8) -> np.ndarray:
    k = spec.label_space.k
    if confusion is None:
        c = np.full((k, k), (1.0 - accuracy) / (k - 1))
        np.fill_diagonal(c, accuracy)
        return c
    try:
        return check_stochastic(confusion, k=k)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_policy(name: str, spec: ScenarioSpec, params: Mapping | None = None):
    params = dict(params or {})
    try:
        if name == "bayes":
            return BayesOptimal(spec.cost)
        if name == "threshold":
            if spec.name == "box_game":
                defaults = {"cutoff": box_game_policy_threshold(), "above": "open", "below": "walk"}
            else:
                defaults = {"cutoff": 0.5, "above": 0, "below": spec.action_space.m - 1}
            defaults.update(params)
            return Threshold(
                float(defaults["cutoff"]), _action_index(spec, defaults["above"]),
                _action_index(spec, defaults["below"]), spec.action_space.m,
            )
        if name == "modeled_human":
            return ModeledHuman(
                float(params.get("rationality", 5.0)), float(params.get("trust", 0.8)), spec.cost
            )
        if name == "confusion_human":
            if not spec.actions_are_labels:
                raise ConfigError(
                    f"confusion_human needs actions equal to labels; scenario {spec.name!r} differs"
                )
            return ConfusionHuman(default_confusion(spec, params.get("confusion")))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid parameters for policy {name!r}: {exc}") from None
    raise ConfigError(f"unknown policy {name!r}; valid names: {sorted(POLICY_NAMES)}")


def method_compatible(method: str, policy) -> bool:
    out = METHOD_OUTPUTS[method]
    if out is None:
        return ScalarConfidence in policy.accepts or Distribution in policy.accepts
    return out in policy.accepts


def model_key(method: str, policy_name: str) -> str:
    """File-safe identifier of a fitted model; policy-specific only where fitting uses the policy."""
    return f"{method}@{policy_name}" if method == "decision_temperature" else method


def simulate_splits(config: ExperimentConfig, seed: int):
    """Calibration and test datasets for one master seed."""
    spec = get_scenario(config.scenario)
    base = dataclasses.replace(spec.generator, **config.generator_overrides(spec))
    out = []
    for stream, (split, n) in enumerate(
        (("calibration", config.generator.n_calibration), ("test", config.generator.n_test))
    ):
        gen = dataclasses.replace(base, n=int(n), seed=derive_seed(seed, stream))
        out.append(generate_dataset(gen, spec.class_priors, spec.label_space, split))
    return tuple(out)


def fit_method(method: str, config: ExperimentConfig, cal: LabeledDataset, policy_name: str | None = None):
    spec = get_scenario(config.scenario)
    mp = config.method_params
    if method == "softmax":
        return TemperatureModel(1.0)
    if method == "temperature":
        return fit_temperature_nll(cal)
    if method == "temperature_confidence":
        return TemperatureModel(fit_temperature_nll(cal).T, "confidence")
    if method == "histogram_binning":
        return fit_histogram_binning(cal, mp.n_bins)
    if method == "conformal":
        return fit_conformal(cal, mp.alpha)
    if method == "decision_calibration":
        return fit_decision_calibration(cal, spec.cost, mp.epsilon, mp.max_iter)
    if method == "decision_temperature":
        if policy_name is None:
            raise ConfigError("decision_temperature is fitted against a specific policy")
        policy = build_policy(policy_name, spec, config.policy_params.get(policy_name, {}))
        tuned = tune_temperature_for_decisions(spec, policy, cal, mp.temperature_grid)
        return TemperatureModel(tuned.params["T"], tuned.params["output"])
    raise ConfigError(f"unknown method {method!r}; valid names: {sorted(METHOD_OUTPUTS)}")


def _model_params(method, model) -> dict:
    d = model.to_dict()
    if method == "decision_calibration":
        return {"epsilon": model.epsilon, "iterations_used": model.iterations_used,
                "converged": model.converged}
    if method == "histogram_binning":
        return {"n_bins": model.n_bins, "bin_values": d["bin_values"]}
    return d


def evaluate_method(
    method: str,
    policy_name: str,
    model,
    config: ExperimentConfig,
    cal: LabeledDataset,
    test: LabeledDataset,
    seed: int,
) -> ExperimentResult:
    """Expected cost and applicable metrics of one fitted model on the test split."""
    spec = get_scenario(config.scenario)
    policy = build_policy(policy_name, spec, config.policy_params.get(policy_name, {}))
    cost = expected_cost(policy, model, test, spec.cost, seed)
    labels = test.labels
    calibration = sets = None
    details = {}
    if isinstance(model, TemperatureModel):
        calibration = calibration_metrics(softmax(test.logits, model.T), labels, config.method_params.n_bins)
    elif method == "decision_calibration":
        g = model.assess(test.logits)[1].probs
        calibration = calibration_metrics(g, labels, config.method_params.n_bins)
        details = {
            "dce_before": model.dce_trace[0],
            "dce_after": model.dce_trace[-1],
            "dce_trace": list(model.dce_trace),
            "test_dce_before": decision_calibration_error(softmax(test.logits), labels, spec.cost),
            "test_dce_after": decision_calibration_error(g, labels, spec.cost),
        }
    elif method == "conformal":
        sets = set_metrics(model.assess(test.logits)[1].mask, labels)
    return ExperimentResult(method, policy_name, _model_params(method, model), cost, seed,
                            calibration, sets, details)


def run_experiment(config: ExperimentConfig) -> list[ExperimentResult]:
    """Fit and evaluate every (method, policy, seed) cell, in declaration order."""
    if not config.methods or not config.policies:
        return []
    data = {seed: simulate_splits(config, seed) for seed in config.seeds}
    fitted = {}
    results = []
    for method in config.methods:
        for policy_name in config.policies:
            for seed in config.seeds:
                cal, test = data[seed]
                key = (model_key(method, policy_name), seed)
                if key not in fitted:
                    fitted[key] = fit_method(method, config, cal, policy_name)
                results.append(evaluate_method(method, policy_name, fitted[key], config, cal, test, seed))
    return results


def run_optimize(config: ExperimentConfig, seed: int) -> dict:
    """Tune the configured design parameter and report it against its default."""
    if config.optimize is None:
        raise ConfigError("config has no 'optimize' section")
    spec = get_scenario(config.scenario)
    opt = config.optimize
    cal, test = simulate_splits(config, seed)
    if opt.target == "temperature":
        policy = build_policy(opt.policy, spec, config.policy_params.get(opt.policy, {}))
        tuned = tune_temperature_for_decisions(spec, policy, cal, config.method_params.temperature_grid)
        T = tuned.params["T"]
        output = tuned.params["output"]
        return {
            "target": "temperature",
            "policy": opt.policy,
            "seed": seed,
            "value": T,
            "objective": tuned.expected_cost,
            "baseline_value": 1.0,
            "baseline_objective": tuned.details["baseline_T1"],
            "test_objective": expected_cost(policy, TemperatureModel(T, output), test, spec.cost),
            "test_baseline_objective": expected_cost(policy, TemperatureModel(1.0, output), test, spec.cost),
            "trace": tuned.details["trace"],
        }
    confusion = default_confusion(spec, opt.confusion)
    alpha, error = search_conformal_alpha(cal, confusion, list(opt.alpha_grid))
    errors = conformal_decision_errors(cal, confusion, list(opt.alpha_grid))
    baseline = float(conformal_decision_errors(cal, confusion, [config.method_params.alpha])[0])
    return {
        "target": "conformal_alpha",
        "policy": "confusion_human",
        "seed": seed,
        "value": alpha,
        "objective": error,
        "baseline_value": config.method_params.alpha,
        "baseline_objective": baseline,
        "trace": [[float(a), float(e)] for a, e in zip(opt.alpha_grid, errors)],
    }
