"""Deterministic DFS exploration of G(n,p) in the Bernoulli pair-query
model: a transparent reference engine, a Fenwick-indexed fast engine, and
diagnostics for the supercritical stack/frontier picture."""

__version__ = "0.1.0"

from .diagnostics import (AggregateReport, ComponentCensus, MetricSummary,
                          Moments, RunReport, TrajectorySample, aggregate,
                          component_census, default_checkpoints, excess,
                          longest_forest_path, predicted_stack_at_m1,
                          reference_moments, residual_criticality)
from .errors import ConfigError, InvariantViolation, StreamExhausted
from .fast_engine import FastResult, TIndex, checkpoint_schedule, run_fast
from .oracle import (SmallGraphEnumeration, equivalence_sweep,
                     exact_longest_path, ledger_recompute,
                     random_equivalence_trials)
from .randomness import (BitStream, FixedBits, Graph, Xoshiro256StarStar,
                         materialize_graph, pair_count, pair_from_index,
                         pair_index, read_graph_file, splitmix64,
                         write_graph_file)
from .reference_engine import (DfsState, QueryLedger, ReferenceResult,
                               first_giant_entry, ledger_at, run_reference,
                               write_event_csv)

__all__ = [
    "AggregateReport", "BitStream", "ComponentCensus", "ConfigError",
    "DfsState", "FastResult", "FixedBits", "Graph", "InvariantViolation",
    "MetricSummary", "Moments", "QueryLedger", "ReferenceResult",
    "RunReport", "SmallGraphEnumeration", "StreamExhausted", "TIndex",
    "TrajectorySample", "Xoshiro256StarStar", "aggregate",
    "checkpoint_schedule", "component_census", "default_checkpoints",
    "equivalence_sweep", "exact_longest_path", "excess",
    "first_giant_entry", "ledger_at", "ledger_recompute",
    "longest_forest_path", "materialize_graph", "pair_count",
    "pair_from_index", "pair_index", "predicted_stack_at_m1",
    "random_equivalence_trials", "read_graph_file", "reference_moments",
    "residual_criticality", "run_fast", "run_reference", "splitmix64",
    "write_event_csv", "write_graph_file",
]
