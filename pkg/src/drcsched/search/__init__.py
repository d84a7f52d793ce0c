from .core import (
    BudgetExhausted,
    Evaluated,
    Evaluator,
    ParetoArchive,
    SearchBudget,
    SearchResult,
    derive_seed,
    metrics_only,
    split_batches,
)
from .ga import GaConfig, baseline_of, run_ga, run_gasa, run_gasa_rl
from .local import SaConfig, TsConfig, accept, anneal, run_sars, run_ts, select_tabu_move
from .oracle import EnumerationTooLarge, OracleResult, brute_force, enumeration_size, run_dispatch_baseline
from .runner import HEURISTICS, reference_baseline, run_heuristic
