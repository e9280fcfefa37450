"""Post-hoc self-assessment methods: fitting on a calibration split and applying.

Every fitted model is an immutable value with

* ``assess(logits) -> (predictions, output)`` giving the argmax prediction and
  the model's natural self-assessment output (batched or single), and
* ``to_dict()`` / ``from_dict()`` used by :mod:`decision_sea.data_io`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, log_softmax

from .core import (
    CostMatrix,
    Distribution,
    LabeledDataset,
    OodVerdict,
    PredictionSet,
    ScalarConfidence,
    check_logits,
    check_stochastic,
    softmax,
)
from .decision import bayes_action, confusion_choice_probs
from .errors import ConfigError, DataError, ParameterError
from .metrics import NLL_FLOOR, bin_index, decision_calibration_error, equal_width_edges

T_MIN, T_MAX = 0.05, 20.0
T_GRID_SIZE = 400
MIN_TEMPERATURE_EXAMPLES = 10


def temperature_grid(t_min=T_MIN, t_max=T_MAX, size=T_GRID_SIZE) -> np.ndarray:
    return np.geomspace(t_min, t_max, size)


def _predict(z):
    return np.argmax(z, axis=-1) if z.ndim == 2 else int(np.argmax(z))


# -- temperature scaling -----------------------------------------------------


@dataclass(frozen=True)
class TemperatureModel:
    """``sigma(z / T)``; ``output`` selects the full distribution or its top probability."""

    T: float
    output: str = "distribution"

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ParameterError(f"temperature must be positive and finite, got {self.T}")
        if self.output not in ("distribution", "confidence"):
            raise ParameterError(f"unknown temperature output {self.output!r}")

    def assess(self, logits):
        z = check_logits(logits)
        p = softmax(z, self.T)
        out = Distribution(p) if self.output == "distribution" else ScalarConfidence(p.max(axis=-1))
        return _predict(z), out

    def to_dict(self):
        return {"T": self.T, "output": self.output}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["T"]), str(d.get("output", "distribution")))


def mean_nll(logits, labels, T: float) -> float:
    """Mean negative log-likelihood of ``sigma(logits / T)`` at the true labels."""
    logp = log_softmax(logits / T, axis=1)[np.arange(len(labels)), labels]
    return float(-np.mean(np.maximum(logp, math.log(NLL_FLOOR))))


def fit_temperature_nll(cal: LabeledDataset, t_min=T_MIN, t_max=T_MAX) -> TemperatureModel:
    """Temperature minimizing calibration NLL.

    A geometric grid over ``[t_min, t_max]`` locates the basin, then a bounded
    scalar minimizer refines between the neighbours of the best grid point.
    The result is never worse than ``T = 1``.
    """
    labels = cal.require_labels(MIN_TEMPERATURE_EXAMPLES)
    z = cal.logits
    grid = temperature_grid(t_min, t_max)
    objective = np.array([mean_nll(z, labels, t) for t in grid])
    best = int(np.argmin(objective))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    refined = minimize_scalar(
        lambda t: mean_nll(z, labels, t), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-6},
    )
    candidates = [(objective[best], float(grid[best])), (mean_nll(z, labels, 1.0), 1.0)]
    if refined.success:
        candidates.append((float(refined.fun), float(refined.x)))
    return TemperatureModel(min(candidates)[1])


def apply_temperature(model: TemperatureModel, z) -> Distribution:
    return Distribution(softmax(z, model.T))


# -- histogram binning -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinningModel:
    bin_edges: np.ndarray
    bin_values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        values = np.asarray(self.bin_values, dtype=float)
        if edges.ndim != 1 or len(edges) < 2 or edges[0] != 0.0 or edges[-1] != 1.0:
            raise ParameterError("bin edges must start at 0 and end at 1")
        if np.any(np.diff(edges) <= 0):
            raise ParameterError("bin edges must be strictly increasing")
        if values.shape != (len(edges) - 1,) or np.any((values < 0) | (values > 1)):
            raise ParameterError("need one bin value in [0, 1] per bin")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "bin_values", values)

    @property
    def n_bins(self) -> int:
        return len(self.bin_values)

    def lookup(self, confidence):
        return self.bin_values[bin_index(confidence, self.bin_edges)]

    def assess(self, logits):
        z = check_logits(logits)
        return _predict(z), apply_histogram_binning(self, z)

    def __eq__(self, other):
        return (
            isinstance(other, BinningModel)
            and np.array_equal(self.bin_edges, other.bin_edges)
            and np.array_equal(self.bin_values, other.bin_values)
        )

    def to_dict(self):
        return {"bin_edges": self.bin_edges.tolist(), "bin_values": self.bin_values.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["bin_edges"], float), np.array(d["bin_values"], float))


def fit_histogram_binning(cal: LabeledDataset, n_bins: int) -> BinningModel:
    """Top-label histogram binning on equal-width bins of the max softmax probability.

    Each bin's value is the accuracy of the calibration examples falling in it;
    an empty bin takes its midpoint.
    """
    if int(n_bins) != n_bins or n_bins < 1:
        raise ParameterError(f"n_bins must be a positive integer, got {n_bins}")
    labels = cal.require_labels()
    p = softmax(cal.logits)
    conf = p.max(axis=1)
    hit = (np.argmax(p, axis=1) == labels).astype(float)
    edges = equal_width_edges(int(n_bins))
    idx = bin_index(conf, edges)
    counts = np.bincount(idx, minlength=n_bins)
    hits = np.bincount(idx, weights=hit, minlength=n_bins)
    values = (edges[:-1] + edges[1:]) / 2
    occupied = counts > 0
    values[occupied] = hits[occupied] / counts[occupied]
    return BinningModel(edges, values)


def apply_histogram_binning(model: BinningModel, z) -> ScalarConfidence:
    conf = softmax(z).max(axis=-1)
    return ScalarConfidence(model.lookup(conf))


# -- split conformal prediction ----------------------------------------------


@dataclass(frozen=True)
class ConformalModel:
    """Threshold ``tau`` on the score ``1 - sigma(z)[y]``; ``inf`` yields the full label set."""

    alpha: float
    tau: float
    n_cal: int

    def assess(self, logits):
        z = check_logits(logits)
        return _predict(z), conformal_set(self, z)

    def to_dict(self):
        return {"alpha": self.alpha, "tau": None if math.isinf(self.tau) else self.tau,
                "n_cal": self.n_cal}

    @classmethod
    def from_dict(cls, d):
        tau = math.inf if d["tau"] is None else float(d["tau"])
        return cls(float(d["alpha"]), tau, int(d["n_cal"]))


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def conformal_threshold(scores, alpha: float) -> float:
    """The ``ceil((n + 1)(1 - alpha))``-th smallest score, or ``inf`` past the end."""
    alpha = _check_alpha(alpha)
    scores = np.sort(np.asarray(scores, dtype=float))
    n = len(scores)
    if n == 0:
        raise DataError("conformal calibration needs at least one score")
    # guard against (n + 1) * (1 - alpha) landing a few ulps above an integer
    rank = math.ceil((n + 1) * (1.0 - alpha) - 1e-9)
    return math.inf if rank > n else float(scores[max(rank, 1) - 1])


def nonconformity(logits, labels) -> np.ndarray:
    p = softmax(logits)
    return 1.0 - p[np.arange(len(labels)), labels]


def fit_conformal(cal: LabeledDataset, alpha: float) -> ConformalModel:
    alpha = _check_alpha(alpha)
    labels = cal.require_labels()
    tau = conformal_threshold(nonconformity(cal.logits, labels), alpha)
    return ConformalModel(alpha, tau, len(cal))


def conformal_set(model: ConformalModel, z) -> PredictionSet:
    return PredictionSet(1.0 - softmax(z) <= model.tau)


def conformal_decision_errors(cal: LabeledDataset, dm_confusion, alpha_grid) -> np.ndarray:
    """Modeled decision-error probability of a set-consuming decision-maker per grid alpha.

    The first half of ``cal`` (in dataset order) fits each conformal model;
    the second half estimates the error of a decision-maker choosing from the
    sets as described in :func:`decision_sea.decision.confusion_choice_probs`.
    """
    confusion = check_stochastic(dm_confusion, k=cal.k)
    labels = cal.require_labels(2)
    grid = [_check_alpha(a) for a in alpha_grid]
    if not grid:
        raise ParameterError("alpha grid must not be empty")
    cut = (len(cal) + 1) // 2
    fit_half, held = cal.subset(slice(0, cut)), cal.subset(slice(cut, None))
    held_labels = labels[cut:]
    errors = []
    for alpha in grid:
        mask = conformal_set(fit_conformal(fit_half, alpha), held.logits).mask
        choose = confusion_choice_probs(mask, held_labels, confusion)
        errors.append(1.0 - choose[np.arange(len(held)), held_labels].mean())
    return np.array(errors)


def search_conformal_alpha(cal: LabeledDataset, dm_confusion, alpha_grid):
    """Grid alpha minimizing modeled decision error; ties go to the earliest grid entry.

    Returns ``(alpha, predicted_error)``.
    """
    errors = conformal_decision_errors(cal, dm_confusion, alpha_grid)
    best = int(np.argmin(errors))
    return float(alpha_grid[best]), float(errors[best])


# -- decision calibration ----------------------------------------------------


def project_to_simplex(p) -> np.ndarray:
    """Clip negative entries to zero and renormalize each row."""
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class DecisionCalibrationModel:
    """Iterative per-decision recalibration of ``sigma(z)``.

    ``corrections[t, a]`` is the additive adjustment applied at iteration
    ``t`` to every distribution whose Bayes action under the running
    distribution is ``a``; rows of actions with no members are zero.
    """

    cost: CostMatrix
    corrections: np.ndarray
    epsilon: float
    dce_trace: tuple[float, ...] = field(default=())
    converged: bool = True

    def __post_init__(self):
        c = np.asarray(self.corrections, dtype=float).reshape(-1, self.cost.m, self.cost.k)
        object.__setattr__(self, "corrections", c)
        object.__setattr__(self, "dce_trace", tuple(float(x) for x in self.dce_trace))

    @property
    def iterations_used(self) -> int:
        return len(self.corrections)

    @property
    def cumulative_corrections(self) -> np.ndarray:
        """Sum of per-iteration corrections for each induced action, shape ``(m, k)``."""
        return self.corrections.sum(axis=0) if len(self.corrections) else np.zeros((self.cost.m, self.cost.k))

    def transform(self, probs) -> np.ndarray:
        g = np.atleast_2d(np.asarray(probs, dtype=float))
        if g.shape[1] != self.cost.k:
            raise ConfigError(f"distribution over {g.shape[1]} labels, model expects {self.cost.k}")
        for step in self.corrections:
            g = project_to_simplex(g + step[bayes_action(g, self.cost)])
        return g

    def assess(self, logits):
        z = check_logits(logits)
        out = apply_decision_calibration(self, z)
        return _predict(out.probs), out

    def to_dict(self):
        return {
            "labels": list(self.cost.labels.names),
            "actions": list(self.cost.actions.names),
            "costs": self.cost.costs.tolist(),
            "corrections": self.corrections.tolist(),
            "epsilon": self.epsilon,
            "dce_trace": list(self.dce_trace),
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d):
        from .core import ActionSpace, LabelSpace

        cost = CostMatrix(LabelSpace(d["labels"]), ActionSpace(d["actions"]), np.array(d["costs"], float))
        corr = np.array(d["corrections"], float).reshape(-1, cost.m, cost.k)
        return cls(cost, corr, float(d["epsilon"]), tuple(d["dce_trace"]), bool(d["converged"]))


def decision_calibration_step(probs, labels, cost: CostMatrix) -> np.ndarray:
    """One round of per-partition corrections, shape ``(m, k)``.

    For every induced Bayes action the correction is the empirical label
    frequency minus the mean predicted distribution of its members.
    """
    actions = bayes_action(probs, cost)
    step = np.zeros((cost.m, cost.k))
    onehot = np.eye(cost.k)[labels]
    for a in np.unique(actions):
        members = actions == a
        step[a] = onehot[members].mean(axis=0) - probs[members].mean(axis=0)
    return step


MAX_HALVINGS = 8


def fit_decision_calibration(
    cal: LabeledDataset, cost: CostMatrix, epsilon: float, max_iter: int = 100
) -> DecisionCalibrationModel:
    """Recalibrate ``sigma(z)`` until the decision calibration error is at most ``epsilon``.

    A step that would increase the calibration-split error is retried at half
    the size up to ``MAX_HALVINGS`` times; if none helps, fitting stops and
    the model is marked unconverged.
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    labels = cal.require_labels()
    if cal.k != cost.k:
        raise ConfigError(f"dataset has {cal.k} labels but cost matrix has {cost.k}")
    g = softmax(cal.logits)
    trace = [decision_calibration_error(g, labels, cost)]
    steps = []
    while trace[-1] > epsilon and len(steps) < max_iter:
        step = decision_calibration_step(g, labels, cost)
        for _ in range(MAX_HALVINGS + 1):
            candidate = project_to_simplex(g + step[bayes_action(g, cost)])
            dce = decision_calibration_error(candidate, labels, cost)
            if dce <= trace[-1]:
                break
            step = step / 2
        else:
            break
        if dce == trace[-1] and np.array_equal(candidate, g):
            break
        steps.append(step)
        g = candidate
        trace.append(dce)
    corrections = np.array(steps).reshape(len(steps), cost.m, cost.k)
    return DecisionCalibrationModel(cost, corrections, float(epsilon), tuple(trace), trace[-1] <= epsilon)


def apply_decision_calibration(model: DecisionCalibrationModel, z) -> Distribution:
    z = check_logits(z)
    if z.shape[-1] != model.cost.k:
        raise ConfigError(f"logits have {z.shape[-1]} entries, model expects {model.cost.k}")
    g = model.transform(softmax(z))
    return Distribution(g if z.ndim == 2 else g[0])


# -- scalar rescalings and OOD -------------------------------------------------


@dataclass(frozen=True)
class SigmoidScalingModel:
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ParameterError("sigmoid scaling parameters must be non-negative")

    def to_dict(self):
        return {"a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["a"]), float(d["b"]))


def sigmoid_scale(A, model: SigmoidScalingModel) -> ScalarConfidence:
    """``1 / (1 + exp(-sign(A) * (a |A| + b)))`` with ``sign(0) = 0``."""
    A = np.asarray(A, dtype=float)
    return ScalarConfidence(expit(np.sign(A) * (model.a * np.abs(A) + model.b)))


@dataclass(frozen=True)
class OodThresholdModel:
    tau_ood: float

    def __post_init__(self):
        if not 0.0 <= self.tau_ood <= 1.0:
            raise ParameterError("tau_ood must lie in [0, 1]")

    def assess(self, logits):
        z = check_logits(logits)
        return _predict(z), msp_ood(z, self)

    def to_dict(self):
        return {"tau_ood": self.tau_ood}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["tau_ood"]))


def msp_ood(z, model: OodThresholdModel) -> OodVerdict:
    """Maximum-softmax-probability OOD check; in-distribution iff the score reaches ``tau_ood``."""
    score = softmax(z).max(axis=-1)
    return OodVerdict(score, score < model.tau_ood)


MODEL_KINDS = {
    "temperature": TemperatureModel,
    "histogram_binning": BinningModel,
    "conformal": ConformalModel,
    "decision_calibration": DecisionCalibrationModel,
    "sigmoid_scaling": SigmoidScalingModel,
    "msp_ood": OodThresholdModel,
}


def model_kind(model) -> str:
    for name, cls in MODEL_KINDS.items():
        if isinstance(model, cls):
            return name
    raise ConfigError(f"not a fitted self-assessment model: {type(model).__name__}")
