"""Pareto-guided greybox fuzzing with a learned hot-byte model."""

from .distance import DEFAULT_K, DistanceBitmap, DistanceMode, Normalization, Relation, branch_distance
from .coverage import CoverageBitmap, edge_id
from .target import Harness, Outcome, Target, builtin_targets, get_target, make_lava_target, run
from .pareto import ScoredSeed, dominates, just_missed, min_pareto_set, pareto_boundary
from .model import Model, TrainConfig, masked_bce, train
from .mutator import havoc, mutate_hot_bytes, top
from .engine import Budget, Campaign, EngineConfig, baseline_fuzz, hot_fuzz

__version__ = "0.1.0"
