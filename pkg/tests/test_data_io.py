import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decision_sea import data_io
from decision_sea.core import LabeledDataset, LabelSpace
from decision_sea.errors import ConfigError, ParseError
from decision_sea.scenarios import (
    ExperimentConfig,
    GeneratorConfig,
    run_experiment,
    triage_scenario,
    uav_scenario,
)
from decision_sea.sea import (
    BinningModel,
    ConformalModel,
    DecisionCalibrationModel,
    OodThresholdModel,
    SigmoidScalingModel,
    TemperatureModel,
)

REPO = Path(__file__).resolve().parents[1]

# the two tables, entered by hand
TRIAGE = [[0, 30, 100], [50, 0, 30], [100, 5, 0], [50, 10, 20]]
UAV = [[50, 0], [0, 100], [75, 0]]


def _dataset(rng, n=20, k=3):
    ls = LabelSpace([f"c{i}" for i in range(k)])
    labels = rng.integers(-1, k, n)
    splits = rng.choice(["calibration", "test"], n).tolist()
    return LabeledDataset(ls, [f"x{i}" for i in range(n)], rng.normal(size=(n, k)) * 1e3, labels, splits)


class TestDataset:
    def test_roundtrip_bit_exact(self, tmp_path):
        ds = _dataset(np.random.default_rng(0))
        path = tmp_path / "d.jsonl"
        data_io.save_dataset(ds, path)
        back = data_io.load_dataset(path)
        assert back == ds
        assert back.logits.tobytes() == ds.logits.tobytes()

    @settings(max_examples=50)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=2, max_size=2), st.integers(0, 1))
    def test_any_double_survives(self, tmp_path_factory, logits, label):
        ds = LabeledDataset(LabelSpace("ab"), ["a"], [logits], [label], ["test"])
        path = tmp_path_factory.mktemp("h") / "d.jsonl"
        data_io.save_dataset(ds, path)
        assert data_io.load_dataset(path).logits.tobytes() == ds.logits.tobytes()

    def test_header_only(self, tmp_path):
        ds = LabeledDataset(LabelSpace("abc"), [], np.zeros((0, 3)), [], [])
        data_io.save_dataset(ds, tmp_path / "e.jsonl")
        assert len(data_io.load_dataset(tmp_path / "e.jsonl")) == 0

    def test_empty_file_reports_missing_header(self, tmp_path):
        (tmp_path / "e.jsonl").write_text("")
        with pytest.raises(ParseError, match="header"):
            data_io.load_dataset(tmp_path / "e.jsonl")

    def _write(self, tmp_path, records, k=4):
        head = {**data_io.header(data_io.DATASET_FORMAT), "labels": [str(i) for i in range(k)]}
        lines = [json.dumps(head)] + [json.dumps(r) for r in records]
        path = tmp_path / "bad.jsonl"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_ragged_logits_named_by_line(self, tmp_path):
        ok = {"id": "a", "logits": [0, 0, 0, 0], "label": 1, "split": "test"}
        bad = {"id": "b", "logits": [0, 0, 0], "label": 1, "split": "test"}
        with pytest.raises(ParseError, match="line 3") as info:
            data_io.load_dataset(self._write(tmp_path, [ok, bad]))
        assert info.value.location == "line 3"

    @pytest.mark.parametrize("record", [
        {"id": "a", "logits": [0, 0, 0, 0], "label": 1},
        {"id": "a", "logits": [0, 0, 0, 0], "label": 1, "split": "train-ish"},
        {"id": "a", "logits": [0, 0, "x", 0], "label": 1, "split": "test"},
        {"id": "a", "logits": [0, 0, 0, 0], "label": 9, "split": "test"},
        {"id": 3, "logits": [0, 0, 0, 0], "label": 1, "split": "test"},
        [1, 2, 3],
    ])
    def test_bad_records(self, tmp_path, record):
        with pytest.raises(ParseError, match="line 2"):
            data_io.load_dataset(self._write(tmp_path, [record]))

    def test_garbage_line(self, tmp_path):
        path = self._write(tmp_path, [])
        path.write_text(path.read_text() + "{not json\n")
        with pytest.raises(ParseError, match="line 2"):
            data_io.load_dataset(path)

    def test_future_version(self, tmp_path):
        head = {**data_io.header(data_io.DATASET_FORMAT), "format_version": 99, "labels": ["a", "b"]}
        (tmp_path / "f.jsonl").write_text(json.dumps(head) + "\n")
        with pytest.raises(ParseError, match="newer"):
            data_io.load_dataset(tmp_path / "f.jsonl")

    @settings(max_examples=200)
    @given(st.text(max_size=200))
    def test_adversarial_text_gives_structured_error(self, tmp_path_factory, text):
        path = tmp_path_factory.mktemp("adv") / "x.jsonl"
        path.write_text(text, encoding="utf-8")
        try:
            data_io.load_dataset(path)
        except ParseError as exc:
            assert exc.location
        else:  # only a valid document parses
            assert text.strip()


class TestCostMatrix:
    @pytest.mark.parametrize("where", [REPO / "scenarios", None])
    def test_shipped_files(self, where):
        for name, table, builder in (("triage", TRIAGE, triage_scenario), ("uav", UAV, uav_scenario)):
            path = data_io.shipped_cost_matrix(name) if where is None else where / f"{name}.costs"
            cost = data_io.load_cost_matrix(path)
            assert cost == builder().cost
            assert cost.costs.tolist() == table

    def test_roundtrip(self, tmp_path):
        cost = triage_scenario().cost.transformed(0.37, [1e-9, 2.0, -3.5, 0.1])
        data_io.save_cost_matrix(cost, tmp_path / "c.costs")
        assert data_io.load_cost_matrix(tmp_path / "c.costs") == cost

    def test_non_numeric_cell(self, tmp_path):
        data_io.save_cost_matrix(uav_scenario().cost, tmp_path / "c.costs")
        doc = json.loads((tmp_path / "c.costs").read_text())
        doc["costs"][2][1] = "lots"
        (tmp_path / "c.costs").write_text(json.dumps(doc))
        with pytest.raises(ParseError) as info:
            data_io.load_cost_matrix(tmp_path / "c.costs")
        assert info.value.location == "costs[2][1]"

    def test_row_length_mismatch(self, tmp_path):
        doc = {**data_io.header(data_io.COSTS_FORMAT), **data_io.cost_matrix_to_dict(uav_scenario().cost)}
        doc["costs"][1] = [0]
        (tmp_path / "c.costs").write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="row 1"):
            data_io.load_cost_matrix(tmp_path / "c.costs")

    def test_wrong_format(self, tmp_path):
        data_io.save_config(ExperimentConfig("uav"), tmp_path / "c.cfg")
        with pytest.raises(ParseError, match="sea-cost-matrix"):
            data_io.load_cost_matrix(tmp_path / "c.cfg")

    def test_unknown_shipped_name(self):
        with pytest.raises(ConfigError):
            data_io.shipped_cost_matrix("mars")


class TestModels:
    @pytest.mark.parametrize("model", [
        TemperatureModel(1.2345678901234567),
        TemperatureModel(0.5, output="confidence"),
        BinningModel(np.linspace(0, 1, 4), [0.1, 0.5, 0.9]),
        ConformalModel(0.1, 0.731, 1000),
        ConformalModel(0.01, np.inf, 10),
        SigmoidScalingModel(1.5, 0.2),
        OodThresholdModel(0.4),
    ])
    def test_roundtrip(self, tmp_path, model):
        data_io.save_model(model, tmp_path / "m.json")
        assert data_io.load_model(tmp_path / "m.json") == model

    def test_decision_calibration_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        model = DecisionCalibrationModel(uav_scenario().cost, rng.normal(size=(3, 2, 3)) * 0.01, 0.5,
                                         (3.0, 2.0, 1.0, 0.4), True)
        data_io.save_model(model, tmp_path / "m.json")
        back = data_io.load_model(tmp_path / "m.json")
        np.testing.assert_array_equal(back.corrections, model.corrections)
        assert back.dce_trace == model.dce_trace and back.cost == model.cost
        z = rng.normal(size=(5, 3))
        np.testing.assert_array_equal(back.assess(z)[1].probs, model.assess(z)[1].probs)

    def test_unknown_kind(self, tmp_path):
        doc = {**data_io.header(data_io.MODEL_FORMAT), "kind": "isotonic", "params": {}}
        (tmp_path / "m.json").write_text(json.dumps(doc))
        with pytest.raises(ParseError, match="kind"):
            data_io.load_model(tmp_path / "m.json")


class TestConfigAndReport:
    def test_config_roundtrip(self, tmp_path):
        cfg = ExperimentConfig.from_dict({"scenario": "triage", "methods": ["softmax", "decision_temperature"],
                                          "policies": ["modeled_human"], "seeds": [2**64 - 1],
                                          "policy_params": {"modeled_human": {"trust": 0.3}}})
        data_io.save_config(cfg, tmp_path / "c.cfg")
        assert data_io.load_config(tmp_path / "c.cfg") == cfg

    def test_shipped_configs_load(self):
        for path in sorted((REPO / "configs").glob("*.cfg")):
            assert isinstance(data_io.load_config(path), ExperimentConfig)

    def test_config_typo(self, tmp_path):
        doc = {**data_io.header(data_io.CONFIG_FORMAT), "scenario": "uav", "methods": ["temprature"]}
        (tmp_path / "c.cfg").write_text(json.dumps(doc))
        with pytest.raises(ConfigError, match="decision_temperature"):
            data_io.load_config(tmp_path / "c.cfg")

    def test_report_roundtrip(self, tmp_path):
        cfg = ExperimentConfig("uav", methods=("softmax", "decision_calibration"),
                               generator=GeneratorConfig(n_calibration=400, n_test=300))
        results = run_experiment(cfg)
        data_io.write_report(results, tmp_path / "report.json", seed=0)
        assert data_io.load_report(tmp_path / "report.json") == results
        rows = (tmp_path / "summary.csv").read_text().splitlines()
        assert rows[0].startswith("method,policy,seed,expected_cost")
        assert len(rows) == 1 + len(results)

    def test_empty_report(self, tmp_path):
        data_io.write_report([], tmp_path / "report.json", seed=5)
        doc = data_io.load_report_document(tmp_path / "report.json")
        assert doc["results"] == [] and doc["summary"] == [] and doc["master_seed"] == 5
        assert data_io.load_report(tmp_path / "report.json") == []
        assert (tmp_path / "summary.csv").read_text().count("\n") == 1

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        data_io.atomic_write_text(tmp_path / "a.txt", "x")
        data_io.atomic_write_text(tmp_path / "a.txt", "y")
        assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]
        assert (tmp_path / "a.txt").read_text() == "y"

