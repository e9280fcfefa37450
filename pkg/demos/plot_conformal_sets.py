"""
Conformal prediction sets and a confusable human
================================================

Sets chosen to cover the truth 1 - alpha of the time are handed to a human
who picks a label from the set. Small alpha means big sets and little help,
large alpha means frequent misses. We search alpha for the lowest error.
"""

import numpy as np

from decision_sea.metrics import set_metrics
from decision_sea.scenarios import (
    SyntheticGeneratorSpec,
    classification_scenario,
    default_confusion,
    generate_dataset,
)
from decision_sea.sea import conformal_set, fit_conformal, search_conformal_alpha

cal = generate_dataset(SyntheticGeneratorSpec(k=3, n=2000, seed=0), split="calibration")
test = generate_dataset(SyntheticGeneratorSpec(k=3, n=5000, seed=1), split="test")

for alpha in (0.05, 0.1, 0.2):
    sets = conformal_set(fit_conformal(cal, alpha), test.logits)
    r = set_metrics(sets.mask, test.labels)
    print(f"alpha={alpha:.2f}  coverage={r.picp:.3f}  mean size={r.mpiw:.2f}")

confusion = default_confusion(classification_scenario(3))
best, err = search_conformal_alpha(cal, confusion, np.array([0.02, 0.05, 0.1, 0.2, 0.3]))
print(f"decision-optimal alpha {best} with error {err:.3f}")
