"""
Decision calibration for a UAV operator
=======================================

A drone either follows a vehicle or scans the area. Its classifier is
overconfident, so the costs it expects from each action are wrong. Decision
calibration reshapes the label distribution until expected and realized costs
agree within a tolerance for each induced action.
"""

import numpy as np

from decision_sea import softmax
from decision_sea.metrics import decision_calibration_error
from decision_sea.scenarios import ExperimentConfig, simulate_splits, uav_scenario
from decision_sea.sea import fit_decision_calibration

sc = uav_scenario()
cal, test = simulate_splits(ExperimentConfig("uav"), seed=7)

model = fit_decision_calibration(cal, sc.cost, epsilon=0.5, max_iter=100)
print("DCE trace on calibration data:", np.round(model.dce_trace, 3))

before = decision_calibration_error(softmax(test.logits), test.labels, sc.cost)
after = decision_calibration_error(model.assess(test.logits)[1].probs, test.labels, sc.cost)
print(f"held-out DCE  before {before:.3f}  after {after:.3f}")
