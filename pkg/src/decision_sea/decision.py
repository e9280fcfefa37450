"""Downstream decision policies.

A policy maps (prediction, self-assessment) to a distribution over actions.
All policies expose ``action_probs(predictions, output, labels=None)`` which
works on batches; :func:`decide` is the single-example convenience wrapper.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax as _softmax

from .core import (
    ABSTAIN,
    CostMatrix,
    Distribution,
    PredictionSet,
    ScalarConfidence,
    check_probs,
    check_stochastic,
)
from .errors import ConfigError, InputError, ParameterError


def expected_action_costs(g, cost: CostMatrix) -> np.ndarray:
    """``sum_y g(y) * cost(y, a)`` for every action, shape ``(..., m)``."""
    g = np.asarray(g, dtype=float)
    if g.shape[-1] != cost.k:
        raise ConfigError(f"distribution over {g.shape[-1]} labels, cost matrix has {cost.k}")
    return g @ cost.costs


def bayes_action(g, cost: CostMatrix):
    """Action minimizing expected cost under ``g``; ties go to the lowest action index."""
    g = check_probs(g)
    a = np.argmin(expected_action_costs(g, cost), axis=-1)
    return int(a) if g.ndim == 1 else a


def _one_hot(index, m) -> np.ndarray:
    out = np.zeros((len(index), m))
    out[np.arange(len(index)), index] = 1.0
    return out


def _check_output(policy, output):
    if not isinstance(output, policy.accepts):
        names = " or ".join(t.__name__ for t in policy.accepts)
        raise ConfigError(
            f"{type(policy).__name__} consumes {names}, got {type(output).__name__}"
        )


def confidence_to_distribution(predictions, confidence, k: int) -> np.ndarray:
    """Spread a scalar confidence into a distribution.

    The predicted label receives ``c`` and the other labels share ``1 - c``
    equally. Abstentions carry no label, so they map to the uniform distribution.
    """
    preds = np.atleast_1d(np.asarray(predictions, dtype=np.int64))
    c = np.atleast_1d(np.asarray(confidence, dtype=float))
    g = np.repeat(((1.0 - c) / (k - 1))[:, None], k, axis=1)
    labeled = preds != ABSTAIN
    g[labeled, preds[labeled]] = c[labeled]
    g[~labeled] = 1.0 / k
    return g


def confusion_choice_probs(mask, labels, confusion) -> np.ndarray:
    """Label-choice distribution of a decision-maker shown a prediction set.

    When the set contains the true label ``y`` the choice follows confusion
    row ``y`` restricted to the set (uniform over the set if that row puts no
    mass there). When the truth is excluded the choice is uniform over the set,
    and an empty set leaves the decision-maker uniform over every label.
    """
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, k = mask.shape
    confusion = np.asarray(confusion, dtype=float)
    covered = mask[np.arange(n), labels]

    uniform_in_set = mask / np.maximum(mask.sum(axis=1, keepdims=True), 1)
    uniform_in_set[mask.sum(axis=1) == 0] = 1.0 / k

    restricted = confusion[labels] * mask
    mass = restricted.sum(axis=1, keepdims=True)
    by_confusion = np.where(mass > 0, restricted / np.where(mass > 0, mass, 1.0), uniform_in_set)
    return np.where(covered[:, None], by_confusion, uniform_in_set)


@dataclass(frozen=True)
class BayesOptimal:
    cost: CostMatrix
    accepts = (Distribution,)

    @property
    def n_actions(self) -> int:
        return self.cost.m

    def action_probs(self, predictions, output, labels=None) -> np.ndarray:
        _check_output(self, output)
        g = np.atleast_2d(output.probs)
        return _one_hot(bayes_action(g, self.cost), self.cost.m)


@dataclass(frozen=True)
class Threshold:
    """Take ``action_if_above`` when the confidence is at least ``confidence_cutoff``."""

    confidence_cutoff: float
    action_if_above: int
    action_if_below: int
    n_actions: int = 2
    accepts = (ScalarConfidence,)

    def __post_init__(self):
        for a in (self.action_if_above, self.action_if_below):
            if not 0 <= a < self.n_actions:
                raise ConfigError(f"action index {a} outside 0..{self.n_actions - 1}")

    def action_probs(self, predictions, output, labels=None) -> np.ndarray:
        _check_output(self, output)
        c = np.atleast_1d(output.value)
        chosen = np.where(c >= self.confidence_cutoff, self.action_if_above, self.action_if_below)
        return _one_hot(chosen, self.n_actions)


@dataclass(frozen=True)
class ModeledHuman:
    """Softmax-rational decision-maker over a blend of AI-informed and face-value costs.

    The subjective cost of action ``a`` is
    ``trust * E_g[cost(., a)] + (1 - trust) * cost(prediction, a)``, and the
    action distribution is ``softmax(-rationality * subjective_cost)``.
    A scalar confidence is expanded with :func:`confidence_to_distribution`.
    """

    rationality: float
    trust: float
    subjective_cost: CostMatrix
    accepts = (Distribution, ScalarConfidence)

    def __post_init__(self):
        if not self.rationality > 0:
            raise ParameterError("rationality must be positive")
        if not 0.0 <= self.trust <= 1.0:
            raise ParameterError("trust must lie in [0, 1]")

    @property
    def n_actions(self) -> int:
        return self.subjective_cost.m

    def action_probs(self, predictions, output, labels=None) -> np.ndarray:
        _check_output(self, output)
        k = self.subjective_cost.k
        preds = np.atleast_1d(np.asarray(predictions, dtype=np.int64))
        if isinstance(output, Distribution):
            g = np.atleast_2d(output.probs)
        else:
            g = confidence_to_distribution(preds, output.value, k)
        informed = expected_action_costs(g, self.subjective_cost)
        point = np.where(
            (preds != ABSTAIN)[:, None],
            self.subjective_cost.costs[np.where(preds == ABSTAIN, 0, preds)],
            informed,
        )
        blended = self.trust * informed + (1.0 - self.trust) * point
        return _softmax(-self.rationality * blended, axis=1)


@dataclass(frozen=True, eq=False)
class ConfusionHuman:
    """Human picking a label from a prediction set, modeled by a confusion matrix.

    Only meaningful when actions are labels. The decision-maker looks at the
    instance itself, so the choice depends on the true label through the
    confusion row; ``labels`` is therefore required.
    """

    confusion: np.ndarray
    accepts = (PredictionSet,)

    def __post_init__(self):
        object.__setattr__(self, "confusion", check_stochastic(self.confusion))

    @property
    def n_actions(self) -> int:
        return self.confusion.shape[0]

    def action_probs(self, predictions, output, labels=None) -> np.ndarray:
        _check_output(self, output)
        if labels is None:
            raise ConfigError("ConfusionHuman needs the true labels of the examples it sees")
        mask = np.atleast_2d(output.mask)
        if mask.shape[1] != self.n_actions:
            raise ConfigError("prediction-set width does not match the confusion matrix")
        return confusion_choice_probs(mask, labels, self.confusion)


DecisionPolicy = BayesOptimal | Threshold | ModeledHuman | ConfusionHuman


def decide(policy, prediction, sea, true_label=None) -> np.ndarray:
    """Action distribution for one example."""
    labels = None if true_label is None else [true_label]
    probs = policy.action_probs([prediction], _as_batch(sea), labels=labels)[0]
    return check_probs(probs)


def _as_batch(sea):
    if isinstance(sea, ScalarConfidence):
        return ScalarConfidence(np.atleast_1d(sea.value))
    if isinstance(sea, Distribution):
        return Distribution(np.atleast_2d(sea.probs))
    if isinstance(sea, PredictionSet):
        return PredictionSet(np.atleast_2d(sea.mask))
    return sea


def combine_human_ai(human_label: int, ai_dist, confusion) -> np.ndarray:
    """Bayes-rule posterior over labels after observing a human's label.

    ``confusion[y, h]`` is the probability the human says ``h`` when the truth
    is ``y``. A zero-mass posterior falls back to ``ai_dist``.
    """
    ai = check_probs(ai_dist)
    c = check_stochastic(confusion, k=len(ai))
    if not 0 <= human_label < len(ai):
        raise InputError(f"human label {human_label} outside 0..{len(ai) - 1}")
    joint = ai * c[:, human_label]
    total = joint.sum()
    return ai if total <= 0 else joint / total
