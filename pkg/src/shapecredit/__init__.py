"""Length-aware potential-based credit assignment for segmented reasoning trajectories."""

from __future__ import annotations

from .io import iter_records, load_config, loads_record, dumps_record
from .potential import OracleError, build_profile, estimate_potential, get_oracle, register_oracle
from .redistribution import entropy_weights, redistribute
from .scoring import score_records
from .segmentation import downsample, find_cutpoints, segment
from .shaping import (
    dynamic_gamma,
    grpo_advantages,
    mrt_advantages,
    shape_advantages,
    shaping_term,
    tax_decomposition,
)
from .simulator import ChainEnv, SimulatorOracle, TabularPolicy, sandbag_comparison, train
from .trajectory import (
    AdvantageSheet,
    ConfigError,
    Estimator,
    PotentialProfile,
    PotentialSource,
    SegmentPlan,
    ShapingConfig,
    ShapingTerm,
    TokenInfo,
    TrajectoryRecord,
    validate,
)

__all__ = [
    "AdvantageSheet", "ChainEnv", "ConfigError", "Estimator", "OracleError", "PotentialProfile",
    "PotentialSource", "SegmentPlan", "ShapingConfig", "ShapingTerm", "SimulatorOracle",
    "TabularPolicy", "TokenInfo", "TrajectoryRecord", "build_profile", "downsample", "dumps_record",
    "dynamic_gamma", "entropy_weights", "estimate_potential", "find_cutpoints", "get_oracle",
    "grpo_advantages", "iter_records", "load_config", "loads_record", "mrt_advantages",
    "redistribute", "register_oracle", "sandbag_comparison", "score_records", "segment",
    "shape_advantages", "shaping_term", "tax_decomposition", "train", "validate",
]
