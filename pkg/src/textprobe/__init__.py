"""textprobe: explain text classifiers, attack them, measure the tradeoff.

The package trains small probability classifiers behind one black-box
interface, explains their predictions with locally fitted weighted ridge
surrogates, mounts explanation-guided word-substitution attacks, and
reports accuracy, AUC, degree of explainability, adversarial robustness,
and attack resilience in reproducible, seeded runs.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    ModelFormatError,
    StageError,
    TextProbeError,
    TrainingError,
)
from .textprep import (  # noqa: F401
    RawDoc,
    TextPipeline,
    TokenizedDoc,
    Vocabulary,
    default_pipeline,
)
