"""Generic and decision-aware evaluation metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .core import CostMatrix, check_probs
from .decision import bayes_action, expected_action_costs
from .errors import DataError

DEFAULT_N_BINS = 15
NLL_FLOOR = 1e-12


@dataclass(frozen=True)
class CalibrationReport:
    ece: float
    mce: float
    nll: float
    brier: float
    classwise_ece: tuple[float, ...]
    n_bins: int

    def to_dict(self):
        d = asdict(self)
        d["classwise_ece"] = list(self.classwise_ece)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["ece"]), float(d["mce"]), float(d["nll"]), float(d["brier"]),
            tuple(float(x) for x in d["classwise_ece"]), int(d["n_bins"]),
        )


@dataclass(frozen=True)
class SetReport:
    picp: float
    mpiw: float

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["picp"]), float(d["mpiw"]))


def equal_width_edges(n_bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_bins + 1)


def bin_index(values, edges) -> np.ndarray:
    """Bin of each value; a value on an interior edge belongs to the upper bin, 1.0 to the last."""
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def _binned_gaps(conf, hit, n_bins):
    """Per-bin ``(count, |mean hit - mean conf|)`` over equal-width bins."""
    idx = bin_index(conf, equal_width_edges(n_bins))
    counts = np.bincount(idx, minlength=n_bins)
    conf_sum = np.bincount(idx, weights=conf, minlength=n_bins)
    hit_sum = np.bincount(idx, weights=hit, minlength=n_bins)
    occupied = counts > 0
    gaps = np.zeros(n_bins)
    gaps[occupied] = np.abs(hit_sum[occupied] - conf_sum[occupied]) / counts[occupied]
    return counts, gaps, occupied


def _ece(conf, hit, n_bins):
    counts, gaps, occupied = _binned_gaps(conf, hit, n_bins)
    return float(np.sum(counts * gaps) / counts.sum()), float(gaps[occupied].max())


def _validate(probs, labels):
    probs = np.atleast_2d(check_probs(probs)) if len(np.asarray(probs)) else None
    if probs is None:
        raise DataError("metrics need at least one example")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (len(probs),):
        raise DataError("one label is required per distribution")
    if np.any((labels < 0) | (labels >= probs.shape[1])):
        raise DataError("labels must be valid class indices")
    return probs, labels


def calibration_metrics(probs, labels, n_bins: int = DEFAULT_N_BINS) -> CalibrationReport:
    """ECE/MCE on top-label confidence, NLL, Brier score and classwise ECE.

    Parameters
    ----------
    probs : array-like, shape (n, k)
        Predicted distributions.
    labels : array-like, shape (n,)
        True class indices.
    n_bins : int
        Number of equal-width confidence bins on [0, 1].
    """
    if n_bins < 1:
        raise DataError("n_bins must be at least 1")
    probs, labels = _validate(probs, labels)
    n, k = probs.shape
    conf = probs.max(axis=1)
    hit = (np.argmax(probs, axis=1) == labels).astype(float)
    ece, mce = _ece(conf, hit, n_bins)

    p_true = probs[np.arange(n), labels]
    nll = float(-np.mean(np.log(np.maximum(p_true, NLL_FLOOR))))
    onehot = np.eye(k)[labels]
    brier = float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))
    classwise = tuple(_ece(probs[:, j], onehot[:, j], n_bins)[0] for j in range(k))
    return CalibrationReport(ece, mce, nll, brier, classwise, n_bins)


def set_metrics(masks, labels) -> SetReport:
    """Coverage (PICP) and mean set size (MPIW) of prediction sets."""
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    labels = np.asarray(labels, dtype=np.int64)
    if masks.size == 0 or len(labels) == 0:
        raise DataError("set metrics need at least one prediction set")
    covered = masks[np.arange(len(labels)), labels]
    return SetReport(float(covered.mean()), float(masks.sum(axis=1).mean()))


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(random positive outranks random negative), ties count 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC needs both positive and negative examples")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def decision_calibration_error(probs, labels, cost: CostMatrix) -> float:
    """Partition-weighted gap between predicted and realized cost of the induced decisions.

    Examples are grouped by the Bayes action their distribution induces. For
    each group the mean cost the distributions predict for that action is
    compared with the mean cost actually realized; the absolute gaps are
    averaged with weights proportional to group size.
    """
    probs, labels = _validate(probs, labels)
    actions = bayes_action(probs, cost)
    predicted = expected_action_costs(probs, cost)[np.arange(len(labels)), actions]
    realized = cost.costs[labels, actions]
    total = 0.0
    for a in np.unique(actions):
        members = actions == a
        total += members.sum() * abs(predicted[members].mean() - realized[members].mean())
    return float(total / len(labels))
