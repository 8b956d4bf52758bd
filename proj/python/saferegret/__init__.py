"""Finite-horizon system level synthesis with safety constraints."""

from ._sls import (
    BenchmarkConfig,
    ClosedLoopResponse,
    ConfigError,
    ContractViolation,
    CostWeights,
    DigestMismatchError,
    DimensionError,
    Error,
    InvalidSetError,
    InvalidSystemError,
    LtvSystem,
    NotPsdError,
    PolytopeSet,
    SafetySpec,
    SynthesisResult,
    achievability_residual,
    clairvoyant,
    disturbance,
    load_config,
    load_controller,
    parse_config,
    regret_value,
    rollout,
    save_controller,
    synth_h2,
    synth_hinf,
    synth_regret,
    synth_safe_clairvoyant,
    synthesize,
    verify_safety,
    worst_disturbance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
