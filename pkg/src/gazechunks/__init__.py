"""Statistical discovery, manipulation, and regression over gaze-relevant latent chunks."""

from .core import (
    DEFAULT_LAYOUT,
    ConfigError,
    FormatError,
    GazeChunksError,
    GazeLabel,
    InsufficientDataError,
    LatentCode,
    LatentDataset,
    LatentLayout,
    LayoutError,
    TrainingDivergedError,
    angles_to_vector,
    angular_error,
    chunk_means,
    gaze_to_vector,
)
from .analysis import (
    AnalysisReport,
    AnalyzeConfig,
    ChunkStats,
    GroupSplit,
    SelectionMask,
    analyze,
    group_chunk_stats,
    p_value,
    rank_chunks,
    select_chunks,
    split_groups,
    t_statistic,
)
from .manipulate import ManipulationRecipe, apply_recipe, group_mean_code, replace_chunks
from .regressor import RegressorParams, TrainConfig, evaluate, forward, gradient_sensitivity, train
from .synth import DomainPairSpec, NuisanceConfound, SynthSpec, generate, generate_domain_pair, oracle_report

__version__ = "0.1.0"
