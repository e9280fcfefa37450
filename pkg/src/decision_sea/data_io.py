"""Persistent formats.

Every document starts with a header ``{"format_name": ..., "format_version": ..., "created_by": ...}``.

* datasets: line-delimited JSON, header on line 1 then one example per line
  (``id``, ``logits``, ``label`` or null, ``split``);
* cost matrices, fitted models, experiment configs and reports: single JSON
  documents. A report is accompanied by a ``summary.csv`` table.

Floats are written with Python's shortest round-trip ``repr``, so every
double survives a save/load cycle bit-for-bit. Writes go to a temporary file
in the target directory which is then renamed over the destination.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .core import SPLITS, ActionSpace, CostMatrix, LabeledDataset, LabelSpace
from .errors import ConfigError, ParseError, SeaError
from .scenarios import ExperimentConfig, ExperimentResult
from .sea import MODEL_KINDS, model_kind

FORMAT_VERSION = 1
CREATED_BY = f"decision_sea {__version__}"

DATASET_FORMAT = "sea-dataset"
COSTS_FORMAT = "sea-cost-matrix"
MODEL_FORMAT = "sea-model"
CONFIG_FORMAT = "sea-experiment-config"
REPORT_FORMAT = "sea-report"

SUMMARY_COLUMNS = (
    "method", "policy", "seed", "expected_cost", "ece", "mce", "nll", "brier", "picp", "mpiw", "params",
)


def header(format_name: str) -> dict:
    return {"format_name": format_name, "format_version": FORMAT_VERSION, "created_by": CREATED_BY}


def _dumps(obj, **kw) -> str:
    return json.dumps(obj, allow_nan=False, ensure_ascii=False, **kw)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_header(doc, expected: str, path, location="header"):
    if not isinstance(doc, dict):
        raise ParseError("document header must be an object", location, path)
    if doc.get("format_name") != expected:
        raise ParseError(f"expected format {expected!r}, got {doc.get('format_name')!r}", location, path)
    version = doc.get("format_version")
    if not isinstance(version, int) or isinstance(version, bool) or version < 1:
        raise ParseError(f"invalid format version {version!r}", location, path)
    if version > FORMAT_VERSION:
        raise ParseError(f"format version {version} is newer than supported ({FORMAT_VERSION})", location, path)


def _read_document(path, expected: str) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno}", path) from None
    _check_header(doc, expected, path)
    return doc


def _write_document(path, format_name: str, body: dict) -> None:
    doc = {**header(format_name), **body}
    atomic_write_text(path, _dumps(doc, indent=2, sort_keys=True) + "\n")


def _field(doc, key, path, where=None):
    if key not in doc:
        raise ParseError(f"missing field {key!r}", where or key, path)
    return doc[key]


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


# -- datasets ------------------------------------------------------------------


def dumps_dataset(dataset: LabeledDataset) -> str:
    out = io.StringIO()
    head = {**header(DATASET_FORMAT), "labels": list(dataset.label_space.names), "k": dataset.k}
    out.write(_dumps(head) + "\n")
    for ex in dataset:
        rec = {"id": ex.id, "logits": [float(v) for v in ex.logits], "label": ex.label, "split": ex.split}
        out.write(_dumps(rec) + "\n")
    return out.getvalue()


def save_dataset(dataset: LabeledDataset, path) -> None:
    atomic_write_text(path, dumps_dataset(dataset))


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing dataset header", "line 1", path)
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", "line 1", path) from None
    _check_header(head, DATASET_FORMAT, path, "line 1")
    names = _field(head, "labels", path, "line 1")
    if not isinstance(names, list):
        raise ParseError("labels must be a list", "line 1", path)
    try:
        label_space = LabelSpace(names)
    except SeaError as exc:
        raise ParseError(str(exc), "line 1", path) from None
    k = label_space.k
    if head.get("k", k) != k:
        raise ParseError(f"header declares k={head.get('k')} but lists {k} labels", "line 1", path)

    ids, logits, labels, splits = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        where = f"line {lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", where, path) from None
        if not isinstance(rec, dict):
            raise ParseError("record must be an object", where, path)
        for key in ("id", "logits", "label", "split"):
            _field(rec, key, path, where)
        z, y, split = rec["logits"], rec["label"], rec["split"]
        if not isinstance(rec["id"], str):
            raise ParseError("id must be a string", where, path)
        if not isinstance(z, list) or not all(_number(v) for v in z):
            raise ParseError("logits must be a list of finite numbers", where, path)
        if len(z) != k:
            raise ParseError(f"expected {k} logits, got {len(z)}", where, path)
        if y is not None and (not isinstance(y, int) or isinstance(y, bool) or not 0 <= y < k):
            raise ParseError(f"label must be null or an integer in [0, {k})", where, path)
        if split not in SPLITS:
            raise ParseError(f"unknown split tag {split!r}; expected one of {SPLITS}", where, path)
        ids.append(rec["id"])
        logits.append([float(v) for v in z])
        labels.append(-1 if y is None else y)
        splits.append(split)
    return LabeledDataset(label_space, ids, np.array(logits, dtype=float).reshape(len(ids), k),
                          np.array(labels, dtype=np.int64), splits)


# -- cost matrices -------------------------------------------------------------


def cost_matrix_to_dict(cost: CostMatrix) -> dict:
    return {
        "labels": list(cost.labels.names),
        "actions": list(cost.actions.names),
        "costs": cost.costs.tolist(),
    }


def save_cost_matrix(cost: CostMatrix, path) -> None:
    _write_document(path, COSTS_FORMAT, cost_matrix_to_dict(cost))


def load_cost_matrix(path) -> CostMatrix:
    doc = _read_document(path, COSTS_FORMAT)
    labels, actions, rows = (_field(doc, key, path) for key in ("labels", "actions", "costs"))
    if not isinstance(labels, list) or not isinstance(actions, list):
        raise ParseError("labels and actions must be lists", "labels", path)
    if not isinstance(rows, list) or len(rows) != len(labels):
        raise ParseError(f"expected {len(labels)} cost rows", "costs", path)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != len(actions):
            raise ParseError(f"row {i} must have {len(actions)} entries", f"costs[{i}]", path)
        for j, v in enumerate(row):
            if not _number(v):
                raise ParseError(f"cost entry {v!r} is not a finite number", f"costs[{i}][{j}]", path)
    try:
        return CostMatrix(LabelSpace(labels), ActionSpace(actions), np.array(rows, dtype=float))
    except SeaError as exc:
        raise ParseError(str(exc), "costs", path) from None


def shipped_cost_matrix(name: str) -> Path:
    """Path of a cost-matrix file bundled with the package (``triage`` or ``uav``)."""
    ref = resources.files("decision_sea") / "data" / f"{name}.costs"
    if not ref.is_file():
        raise ConfigError(f"no shipped cost matrix named {name!r}")
    return Path(str(ref))


# -- fitted models -------------------------------------------------------------


def save_model(model, path) -> None:
    _write_document(path, MODEL_FORMAT, {"kind": model_kind(model), "params": model.to_dict()})


def load_model(path):
    doc = _read_document(path, MODEL_FORMAT)
    kind = _field(doc, "kind", path)
    if kind not in MODEL_KINDS:
        raise ParseError(f"unknown model kind {kind!r}; valid: {sorted(MODEL_KINDS)}", "kind", path)
    try:
        return MODEL_KINDS[kind].from_dict(_field(doc, "params", path))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid {kind} parameters: {exc}", "params", path) from None


# -- configs -------------------------------------------------------------------


def load_config(path) -> ExperimentConfig:
    doc = _read_document(path, CONFIG_FORMAT)
    body = {k: v for k, v in doc.items() if k not in ("format_name", "format_version", "created_by")}
    try:
        return ExperimentConfig.from_dict(body)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def save_config(config: ExperimentConfig, path) -> None:
    _write_document(path, CONFIG_FORMAT, config.to_dict())


# -- reports -------------------------------------------------------------------


def summary_rows(results: Iterable[ExperimentResult]) -> list[dict]:
    rows = []
    for r in results:
        cal, sets = r.calibration, r.sets
        rows.append({
            "method": r.method,
            "policy": r.policy,
            "seed": r.seed,
            "expected_cost": r.expected_cost,
            "ece": "" if cal is None else cal.ece,
            "mce": "" if cal is None else cal.mce,
            "nll": "" if cal is None else cal.nll,
            "brier": "" if cal is None else cal.brier,
            "picp": "" if sets is None else sets.picp,
            "mpiw": "" if sets is None else sets.mpiw,
            "params": _dumps(r.params, sort_keys=True),
        })
    return rows


def dumps_summary_csv(results) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in summary_rows(results):
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return out.getvalue()


def write_report(results, path, seed=None, extra=None) -> None:
    """Write ``report.json``-style document at ``path`` and ``summary.csv`` next to it."""
    results = list(results)
    path = Path(path)
    body = {
        "master_seed": seed,
        "results": [r.to_dict() for r in results],
        "summary": summary_rows(results),
    }
    if extra:
        body["extra"] = extra
    _write_document(path, REPORT_FORMAT, body)
    atomic_write_text(path.with_name("summary.csv"), dumps_summary_csv(results))


def load_report(path) -> list[ExperimentResult]:
    doc = _read_document(path, REPORT_FORMAT)
    records = _field(doc, "results", path)
    if not isinstance(records, list):
        raise ParseError("results must be a list", "results", path)
    out = []
    for i, rec in enumerate(records):
        try:
            out.append(ExperimentResult.from_dict(rec))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"invalid result record: {exc}", f"results[{i}]", path) from None
    return out


def load_report_document(path) -> dict:
    return _read_document(path, REPORT_FORMAT)
