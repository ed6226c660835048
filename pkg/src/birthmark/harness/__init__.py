"""Adversary harness: deterministic multi-role simulation with taint tracking."""

from .attacks import (
    AttackOutcome,
    CorrelationResult,
    TimingHistogram,
    byzantine_breach,
    byzantine_run,
    correlation_attack,
    evasion_curve,
    flow_properties,
    timing_anonymity,
)
from .bus import FaultScript, MessageBus, SimClock
from .report import SecurityReport, run_suite, write_outputs
from .scenarios import ATTACKS, SUITE_ORDER, Scenario, resolve
from .taint import ATOM_DEVICE_SERIAL, ATOM_IMAGE_HASH, ATOM_NUC_HASH, TaintLedger
from .world import GroundTruth, Topology, World, track_worlds

__all__ = [
    "ATOM_DEVICE_SERIAL",
    "ATOM_IMAGE_HASH",
    "ATOM_NUC_HASH",
    "ATTACKS",
    "AttackOutcome",
    "CorrelationResult",
    "FaultScript",
    "GroundTruth",
    "MessageBus",
    "Scenario",
    "SecurityReport",
    "SimClock",
    "SUITE_ORDER",
    "TaintLedger",
    "TimingHistogram",
    "Topology",
    "World",
    "byzantine_breach",
    "byzantine_run",
    "correlation_attack",
    "evasion_curve",
    "flow_properties",
    "resolve",
    "run_suite",
    "timing_anonymity",
    "track_worlds",
    "write_outputs",
]
