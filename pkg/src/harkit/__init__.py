"""harkit: multi-task human activity recognition from windowed sensor data.

Jointly predicts activities (multi-label), phone-placement contexts
(multi-label), and user identity (single-label) from raw sensor windows
fused with handcrafted features, with an instance-pair supervised
contrastive loss regularizing the fused representations.
"""

from .dataset import Dataset, load_prepared, save_prepared, stack_instances
from .labels import LabelSchema, LabelSet, encode_labels, pairing_vector
from .losses import (LossBreakdown, LossWeights, class_weights,
                     contrastive_loss, cross_entropy, pair_means,
                     partition_pairs, total_loss, weighted_bce)
from .metrics import (ConfusionCounts, MetricsReport, confusion_counts,
                      evaluate_head, f1_score, macro_f1, macro_mcc, mcc,
                      threshold_predictions)
from .model import (HeadLogits, ModelConfig, encode_sequence, forward, fuse,
                    init_params, load_checkpoint, predict_heads,
                    save_checkpoint)
from .pipeline import (FeatureVector, Instance, Normalizer, RawWindow,
                       SensorStream, extract_features, filter_conflicts,
                       fit_normalizer, normalize, resample_fourier,
                       segment_windows)
from .synth import SynthSpec, cross_user_benchmark, generate, generate_dataset
from .training import (RAdam, SplitSpec, TrainConfig, TrainHistory, ablate,
                       evaluate, grid_search, split_dataset, train)

__version__ = "0.1.0"
