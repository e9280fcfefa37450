"""Domain types and elementary prediction/cost operations.

Arrays follow one convention throughout the package: a single example is a
1-D array over classes, a batch is a 2-D array with one row per example.
Every operation here accepts either form and returns the matching shape.

Predictions are plain integers (numpy int arrays for batches); abstention is
encoded as :data:`ABSTAIN` (``-1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.special import softmax as _softmax
from scipy.special import xlogy

from .errors import ConfigError, DataError, InputError, ParameterError

ABSTAIN = -1
SIMPLEX_TOL = 1e-6
SPLITS = ("calibration", "test")
CONFIDENCE_KINDS = ("max_prob", "top2_margin", "neg_entropy")


def _names(names, what):
    names = tuple(str(n) for n in names)
    if len(set(names)) != len(names):
        raise InputError(f"{what} names must be unique, got {names}")
    return names


@dataclass(frozen=True)
class LabelSpace:
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", _names(self.names, "label"))
        if len(self.names) < 2:
            raise InputError("a label space needs at least 2 classes")

    @property
    def k(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class ActionSpace:
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", _names(self.names, "action"))
        if len(self.names) < 1:
            raise InputError("an action space needs at least 1 action")

    @property
    def m(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Decision cost ``costs[y, a]`` of taking action ``a`` when the truth is ``y``."""

    labels: LabelSpace
    actions: ActionSpace
    costs: np.ndarray

    def __post_init__(self):
        costs = _readonly(self.costs)
        if costs.shape != (self.labels.k, self.actions.m):
            raise ConfigError(
                f"cost matrix shape {costs.shape} does not match "
                f"{self.labels.k} labels x {self.actions.m} actions"
            )
        if not np.all(np.isfinite(costs)):
            raise InputError("cost matrix entries must be finite")
        object.__setattr__(self, "costs", costs)

    @property
    def k(self) -> int:
        return self.labels.k

    @property
    def m(self) -> int:
        return self.actions.m

    def __call__(self, y, a):
        return self.costs[y, a]

    def __eq__(self, other):
        if not isinstance(other, CostMatrix):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.actions == other.actions
            and np.array_equal(self.costs, other.costs)
        )

    def transformed(self, scale, row_offsets=None) -> "CostMatrix":
        """Return ``scale * costs + row_offsets[:, None]``."""
        offsets = np.zeros(self.k) if row_offsets is None else np.asarray(row_offsets, float)
        return CostMatrix(self.labels, self.actions, scale * self.costs + offsets[:, None])


def check_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim not in (1, 2) or z.shape[-1] < 2:
        raise InputError(f"logits must have shape (k,) or (n, k) with k >= 2, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InputError("logits must be finite")
    return z


def check_probs(p, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate a probability vector (or batch of rows) and renormalize it.

    Rows whose sum is within ``tol`` of 1 are renormalized exactly; anything
    further off the simplex is rejected.
    """
    p = np.array(p, dtype=float)
    if p.ndim not in (1, 2) or p.shape[-1] < 1:
        raise InputError(f"probabilities must have shape (k,) or (n, k), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InputError("probabilities must be finite")
    if np.any(p < -tol):
        raise InputError("probabilities must be non-negative")
    sums = p.sum(axis=-1, keepdims=True)
    if np.any(np.abs(sums - 1.0) > tol):
        raise InputError("probabilities must sum to 1")
    p = np.clip(p, 0.0, None)
    sums = p.sum(axis=-1, keepdims=True)
    # rows already on the simplex up to rounding are left bit-identical
    return np.where(np.abs(sums - 1.0) > 8 * np.finfo(float).eps, p / sums, p)


def check_stochastic(matrix, k=None, what="confusion matrix") -> np.ndarray:
    c = np.asarray(matrix, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InputError(f"{what} must be square, got shape {c.shape}")
    if k is not None and c.shape[0] != k:
        raise ConfigError(f"{what} is {c.shape[0]}x{c.shape[0]} but there are {k} labels")
    try:
        return check_probs(c)
    except InputError as exc:
        raise InputError(f"{what} must be row-stochastic: {exc}") from None


def softmax(z, T: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax ``sigma(z / T)`` along the last axis."""
    T = float(T)
    if not (T > 0 and np.isfinite(T)):
        raise ParameterError(f"temperature must be a positive finite number, got {T}")
    return _softmax(check_logits(z) / T, axis=-1)


def argmax_predict(p):
    """Index of the largest probability; ties go to the lowest index."""
    p = check_probs(p)
    pred = np.argmax(p, axis=-1)
    return int(pred) if p.ndim == 1 else pred


def reject_predict(p, threshold: float):
    """Argmax prediction, or :data:`ABSTAIN` when the top probability is below ``threshold``."""
    threshold = float(threshold)
    if not 0.0 <= threshold <= 1.0:
        raise ParameterError(f"reject threshold must lie in [0, 1], got {threshold}")
    p = check_probs(p)
    pred = np.where(p.max(axis=-1) >= threshold, np.argmax(p, axis=-1), ABSTAIN)
    return int(pred) if p.ndim == 1 else pred


def scalar_confidence(p, kind: str = "max_prob"):
    """Collapse a distribution to a confidence on [0, 1].

    ``max_prob`` is the top probability, ``top2_margin`` the gap between the two
    largest entries and ``neg_entropy`` is ``1 - H(p) / ln k``.
    """
    if kind not in CONFIDENCE_KINDS:
        raise ParameterError(f"unknown confidence kind {kind!r}; expected one of {CONFIDENCE_KINDS}")
    p = check_probs(p)
    if kind == "max_prob":
        c = p.max(axis=-1)
    elif kind == "top2_margin":
        top = np.sort(p, axis=-1)
        c = top[..., -1] - top[..., -2]
    else:
        entropy = -xlogy(p, p).sum(axis=-1)
        c = 1.0 - entropy / np.log(p.shape[-1])
    c = np.clip(c, 0.0, 1.0)
    return float(c) if p.ndim == 1 else c


# -- self-assessment outputs -------------------------------------------------
#
# Each variant wraps either a single value or a batch (leading axis = examples).


@dataclass(frozen=True, eq=False)
class ScalarConfidence:
    value: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.value, dtype=float)
        if v.ndim > 1 or not np.all((v >= 0.0) & (v <= 1.0)):
            raise InputError("scalar confidence must lie in [0, 1]")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return float(self.value)

    def __len__(self):
        return len(self.value)


@dataclass(frozen=True, eq=False)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", check_probs(self.probs))

    def __len__(self):
        return len(self.probs)


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Label set stored as a boolean membership mask over the label space."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.dtype != bool:
            raise InputError("prediction-set mask must be boolean")
        if mask.ndim not in (1, 2):
            raise InputError(f"prediction-set mask must be (k,) or (n, k), got {mask.shape}")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_members(cls, members: Iterable[int], k: int) -> "PredictionSet":
        mask = np.zeros(k, dtype=bool)
        members = list(members)
        if any(not 0 <= j < k for j in members):
            raise InputError(f"set members must be label indices below {k}")
        mask[members] = True
        return cls(mask)

    @property
    def members(self) -> frozenset[int]:
        if self.mask.ndim != 1:
            raise InputError("members is only defined for a single prediction set")
        return frozenset(int(j) for j in np.flatnonzero(self.mask))

    @property
    def sizes(self) -> np.ndarray:
        return self.mask.sum(axis=-1)

    def __len__(self):
        return len(self.mask)


@dataclass(frozen=True, eq=False)
class OodVerdict:
    score: np.ndarray
    is_ood: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "score", np.asarray(self.score, dtype=float))
        object.__setattr__(self, "is_ood", np.asarray(self.is_ood, dtype=bool))

    def __len__(self):
        return len(self.score)


SelfAssessmentOutput = ScalarConfidence | Distribution | PredictionSet | OodVerdict


# -- datasets ------------------------------------------------------------------


@dataclass(frozen=True)
class LabeledExample:
    id: str
    logits: np.ndarray
    label: int | None = None
    split: str = "calibration"


@dataclass(eq=False)
class LabeledDataset:
    """Column-oriented collection of examples sharing one label space.

    ``labels`` uses ``-1`` for unlabeled examples.
    """

    label_space: LabelSpace
    ids: list[str]
    logits: np.ndarray
    labels: np.ndarray
    splits: list[str] = field(default=None)

    def __post_init__(self):
        k = self.label_space.k
        self.ids = [str(i) for i in self.ids]
        n = len(self.ids)
        logits = np.asarray(self.logits, dtype=float).reshape(n, -1) if n else np.zeros((0, k))
        if logits.shape != (n, k):
            raise DataError(f"logits must have shape ({n}, {k}), got {logits.shape}")
        if n and not np.all(np.isfinite(logits)):
            raise InputError("logits must be finite")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(n)
        if np.any((labels < -1) | (labels >= k)):
            raise DataError(f"labels must be -1 (missing) or indices below {k}")
        splits = list(self.splits) if self.splits is not None else ["calibration"] * n
        if len(splits) != n:
            raise DataError("one split tag is required per example")
        bad = set(splits) - set(SPLITS)
        if bad:
            raise DataError(f"unknown split tag(s) {sorted(bad)}; expected one of {SPLITS}")
        self.logits, self.labels, self.splits = logits, labels, splits

    @classmethod
    def from_examples(cls, label_space: LabelSpace, examples: Sequence[LabeledExample]):
        examples = list(examples)
        k = label_space.k
        for ex in examples:
            if np.shape(ex.logits) != (k,):
                raise DataError(f"example {ex.id!r} has {np.size(ex.logits)} logits, expected {k}")
        return cls(
            label_space,
            [ex.id for ex in examples],
            np.array([ex.logits for ex in examples], dtype=float).reshape(len(examples), k),
            np.array([-1 if ex.label is None else ex.label for ex in examples], dtype=np.int64),
            [ex.split for ex in examples],
        )

    def __len__(self):
        return len(self.ids)

    def __iter__(self) -> Iterator[LabeledExample]:
        for i in range(len(self)):
            label = int(self.labels[i])
            yield LabeledExample(
                self.ids[i], self.logits[i], None if label < 0 else label, self.splits[i]
            )

    @property
    def examples(self) -> list[LabeledExample]:
        return list(self)

    @property
    def k(self) -> int:
        return self.label_space.k

    def subset(self, index) -> "LabeledDataset":
        index = np.arange(len(self))[index]
        return LabeledDataset(
            self.label_space,
            [self.ids[i] for i in index],
            self.logits[index],
            self.labels[index],
            [self.splits[i] for i in index],
        )

    def split(self, name: str) -> "LabeledDataset":
        if name not in SPLITS:
            raise DataError(f"unknown split {name!r}; expected one of {SPLITS}")
        return self.subset(np.array([s == name for s in self.splits], dtype=bool))

    def require_labels(self, minimum: int = 1) -> np.ndarray:
        """Return the label array, raising if any label is missing or the set is too small."""
        if len(self) < minimum:
            raise DataError(f"need at least {minimum} labeled examples, got {len(self)}")
        if np.any(self.labels < 0):
            missing = self.ids[int(np.flatnonzero(self.labels < 0)[0])]
            raise DataError(f"example {missing!r} has no label")
        return self.labels

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.label_space == other.label_space
            and self.ids == other.ids
            and np.array_equal(self.logits, other.logits)
            and np.array_equal(self.labels, other.labels)
            and self.splits == other.splits
        )


def concat(datasets: Sequence[LabeledDataset]) -> LabeledDataset:
    first = datasets[0]
    if any(ds.label_space != first.label_space for ds in datasets):
        raise DataError("datasets must share a label space")
    return LabeledDataset(
        first.label_space,
        [i for ds in datasets for i in ds.ids],
        np.concatenate([ds.logits for ds in datasets]),
        np.concatenate([ds.labels for ds in datasets]),
        [s for ds in datasets for s in ds.splits],
    )


def expected_cost(policy, sea, dataset: LabeledDataset, cost: CostMatrix, seed: int = 0) -> float:
    """Average decision cost of ``policy`` fed by the fitted self-assessment ``sea``.

    ``sea`` is any object with an ``assess(logits) -> (predictions, output)``
    method (every fitted model in :mod:`decision_sea.sea` has one). The inner
    expectation over the policy's action distribution is computed exactly, so
    the result does not actually depend on ``seed``; it is accepted so that
    callers can thread one master seed through all evaluation entry points.
    """
    del seed
    labels = dataset.require_labels()
    if dataset.k != cost.k:
        raise ConfigError(f"dataset has {dataset.k} labels but cost matrix has {cost.k}")
    preds, out = sea.assess(dataset.logits)
    probs = policy.action_probs(preds, out, labels=labels)
    if probs.shape[-1] != cost.m:
        raise ConfigError(
            f"policy chooses among {probs.shape[-1]} actions but cost matrix has {cost.m}"
        )
    per_example = np.einsum("na,na->n", probs, cost.costs[labels])
    return float(np.clip(per_example.mean(), cost.costs.min(), cost.costs.max()))
