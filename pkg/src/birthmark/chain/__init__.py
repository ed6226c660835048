"""Consortium chain simulation: validators, quorum rounds, record storage."""

from .consensus import (
    FaultPlan,
    RoundOutcome,
    byzantine_bound,
    finalize_round,
    honest_stores_identical,
    quorum_size,
    run_pipeline_round,
)
from .node import Admit, AdmitResult, Candidate, Lookup, ValidatorNode
from .rpc import NodeRpcServer, rpc_call
from .store import PRUNED, RECORD_BYTES_FULL, RecordStore, projected_growth

__all__ = [
    "Admit",
    "AdmitResult",
    "Candidate",
    "FaultPlan",
    "Lookup",
    "NodeRpcServer",
    "PRUNED",
    "RECORD_BYTES_FULL",
    "RecordStore",
    "RoundOutcome",
    "ValidatorNode",
    "byzantine_bound",
    "finalize_round",
    "honest_stores_identical",
    "projected_growth",
    "quorum_size",
    "rpc_call",
    "run_pipeline_round",
]
