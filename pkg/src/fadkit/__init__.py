"""fadkit: train small dense classifiers, attribute their predictions, and
score attribution quality with feature-dropping curves."""

__version__ = "0.1.0"

from .attribution import (AttributionVector, BaselineVector, ImportanceRanking,
                          importance_ranking, integrated_gradients,
                          make_baseline, shapley_exact, shapley_sampled)
from .errors import (ConfigError, DegenerateInputError, DivergenceError,
                     ExcludedCaseError, ShapeError)
from .fadcurve import (FADCurve, NAUCEntry, drop_features, fad_curve, n_auc,
                       trapezoid_auc)
from .losses import (IntentPrediction, SequencePrediction, intent_ce_loss,
                     joint_loss, masked_ner_nll)
from .matcher import (Assignment, EmbeddingLexicon, MentionEmbedding,
                      assign_symptom, cosine_sim)
from .nncore import (AdamState, DenseNetwork, NetSpec, TrainConfig, adam_step,
                     forward, gelu, init_network, input_gradient, train)
from .pipeline import (ClassMetrics, FADConfig, FoldPlan, TabularDataset,
                       classification_metrics, generate_vital_few,
                       run_fad_analysis, stratified_kfold)

__all__ = [
    "AdamState", "Assignment", "AttributionVector", "BaselineVector",
    "ClassMetrics", "ConfigError", "DegenerateInputError", "DenseNetwork",
    "DivergenceError", "EmbeddingLexicon", "ExcludedCaseError", "FADConfig",
    "FADCurve", "FoldPlan", "ImportanceRanking", "IntentPrediction",
    "MentionEmbedding", "NAUCEntry", "NetSpec", "SequencePrediction",
    "ShapeError", "TabularDataset", "TrainConfig", "adam_step",
    "assign_symptom", "classification_metrics", "cosine_sim", "drop_features",
    "fad_curve", "forward", "gelu", "generate_vital_few", "importance_ranking",
    "init_network", "input_gradient", "integrated_gradients", "intent_ce_loss",
    "joint_loss", "make_baseline", "masked_ner_nll", "n_auc",
    "run_fad_analysis", "shapley_exact", "shapley_sampled", "stratified_kfold",
    "train", "trapezoid_auc",
]
