"""Decision-driven self-assessment for classifiers.

Post-hoc uncertainty methods are fitted on classifier logits, fed to modeled
downstream decision policies, and tuned against the expected decision cost.
"""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ABSTAIN,
    ActionSpace,
    CostMatrix,
    Distribution,
    LabeledDataset,
    LabeledExample,
    LabelSpace,
    OodVerdict,
    PredictionSet,
    ScalarConfidence,
    argmax_predict,
    expected_cost,
    reject_predict,
    scalar_confidence,
    softmax,
)
from .decision import (  # noqa: E402
    BayesOptimal,
    ConfusionHuman,
    ModeledHuman,
    Threshold,
    bayes_action,
    combine_human_ai,
    decide,
)
from .errors import ConfigError, DataError, InputError, ParameterError, ParseError, SeaError  # noqa: E402
