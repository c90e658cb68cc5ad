"""flowsentry: flow-record intrusion detection with a from-scratch neural kernel."""

__version__ = "0.1.0"

from .flowdata import (AttackType, Dataset, DistributionReport, FlowRecord, FlowSchema, class_distribution,
                       load_flow_csv, map_labels)
from .modeling import (ModelSpec, NeuralFlowClassifier, PreprocessOptions, SoftVotingClassifier, TrainConfig,
                       TrainedModel, classify, ensemble_predict, predict)
from .optimizers import OptimizerConfig
from .preprocess import FlowPreprocessor, SMOTEResampler

__all__ = [
    "__version__",
    "AttackType", "Dataset", "DistributionReport", "FlowRecord", "FlowSchema",
    "class_distribution", "load_flow_csv", "map_labels",
    "ModelSpec", "NeuralFlowClassifier", "PreprocessOptions", "SoftVotingClassifier", "TrainConfig",
    "TrainedModel", "classify", "ensemble_predict", "predict",
    "OptimizerConfig", "FlowPreprocessor", "SMOTEResampler",
]
