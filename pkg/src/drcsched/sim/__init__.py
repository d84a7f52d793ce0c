from .engine import (
    Compiled,
    DeadlockError,
    DecisionPoint,
    Flip,
    Phase,
    SimResult,
    SimState,
    TraceEvent,
    apply_flip,
    compile_instance,
    evaluate,
    setup_duration,
    simulate,
    simulate_forced,
    sort_queue,
)
from .features import N_FEATURES, extract_features

__all__ = [
    "Compiled",
    "DeadlockError",
    "DecisionPoint",
    "Flip",
    "N_FEATURES",
    "Phase",
    "SimResult",
    "SimState",
    "TraceEvent",
    "apply_flip",
    "compile_instance",
    "evaluate",
    "extract_features",
    "setup_duration",
    "simulate",
    "simulate_forced",
    "sort_queue",
]
