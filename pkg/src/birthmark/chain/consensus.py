"""Deterministic round-based quorum finalization.

One leaderless vote round per batch: candidates are broadcast to every
validator, each honest validator votes for every candidate that passes
its local admission checks, honest votes are broadcast, and a candidate
finalizes on a validator once that validator counts ceil(0.67 * n)
distinct voters for it.

Malicious validators may vote arbitrarily and may equivocate (send
different votes to different peers).  For f <= floor((n-1)/3) the honest
supermajority n - f already meets the quorum, so every valid candidate
finalizes identically everywhere no matter what the malicious nodes do,
and invalid candidates can never collect more than f < quorum votes.
One compromised node past the bound drops the honest count below quorum,
makes malicious votes decisive, and lets equivocation finalize a record
on one honest subset but not another: the demonstrable safety break.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

from .node import Candidate, ValidatorNode


def quorum_size(n: int) -> int:
    """ceil(0.67 * n) without float error."""
    return (67 * n + 99) // 100


def byzantine_bound(n: int) -> int:
    """Largest tolerable number of compromised validators."""
    return (n - 1) // 3


@dataclass
class FaultPlan:
    """Scripted malicious behavior for one round.

    malicious_votes: malicious node id -> {recipient node id -> set of
      candidate keys endorsed toward that recipient}.  Unlisted malicious
      validators stay silent (crash/offline behavior).
    injected: structurally broadcast candidates fabricated by malicious
      validators (e.g. records with forged signatures); they reach
      everyone and are subject to honest validity checks like any other.
    """

    malicious_votes: Dict[str, Dict[str, Set[bytes]]] = field(default_factory=dict)
    injected: List[Candidate] = field(default_factory=list)


@dataclass
class RoundOutcome:
    finalized: Dict[str, List[Candidate]]  # per honest validator
    votes_seen: Dict[str, Dict[bytes, int]]
    stalled: List[Candidate] = field(default_factory=list)

    def finalized_keys(self, node_id: str) -> List[bytes]:
        return [c.key for c in self.finalized.get(node_id, [])]


def finalize_round(
    validators: List[ValidatorNode],
    candidates: List[Candidate],
    fault_plan: Optional[FaultPlan] = None,
) -> RoundOutcome:
    """Run one vote round and append quorum winners to every honest store."""
    plan = fault_plan or FaultPlan()
    n = len(validators)
    quorum = quorum_size(n)

    pool: Dict[bytes, Candidate] = {c.key: c for c in candidates}
    for injected in plan.injected:
        pool.setdefault(injected.key, injected)

    # honest votes are deterministic and broadcast identically to everyone
    honest_votes: Dict[str, Set[bytes]] = {}
    for validator in validators:
        if not validator.honest:
            continue
        honest_votes[validator.node_id] = {
            key for key, cand in pool.items() if validator.candidate_valid(cand)
        }

    finalized: Dict[str, List[Candidate]] = {}
    votes_seen: Dict[str, Dict[bytes, int]] = {}
    finalized_anywhere: Set[bytes] = set()
    for validator in validators:
        if not validator.honest:
            continue
        tally: Dict[bytes, Set[str]] = {}
        for voter_id, votes in honest_votes.items():
            for key in votes:
                tally.setdefault(key, set()).add(voter_id)
        for malicious_id, per_recipient in plan.malicious_votes.items():
            for key in per_recipient.get(validator.node_id, set()):
                tally.setdefault(key, set()).add(malicious_id)

        winners: List[Candidate] = []
        chosen_images: Set[bytes] = set()
        for key in sorted(tally):
            if len(tally[key]) < quorum or key not in pool:
                continue
            candidate = pool[key]
            image = candidate.chain_record.image_hash
            if image in chosen_images:
                continue
            winners.append(candidate)
            chosen_images.add(image)

        validator.finalize(winners)
        finalized[validator.node_id] = winners
        finalized_anywhere.update(c.key for c in winners)
        votes_seen[validator.node_id] = {k: len(v) for k, v in tally.items()}

    stalled = [c for c in candidates if c.key not in finalized_anywhere]
    return RoundOutcome(finalized=finalized, votes_seen=votes_seen, stalled=stalled)


def run_pipeline_round(
    validators: List[ValidatorNode], fault_plan: Optional[FaultPlan] = None
) -> RoundOutcome:
    """Finalize whatever the validators paired up since the last round.

    Candidates that reach quorum nowhere (liveness loss, not safety loss)
    are retained for the next round.
    """
    candidate_map: Dict[bytes, Candidate] = {}
    for validator in validators:
        for candidate in validator.take_finalizable():
            candidate_map.setdefault(candidate.key, candidate)
    outcome = finalize_round(validators, list(candidate_map.values()), fault_plan)
    if outcome.stalled:
        for validator in validators:
            if validator.honest:
                existing = {c.key for c in validator.finalizable}
                for candidate in outcome.stalled:
                    if candidate.key not in existing and not validator.store.contains(
                        candidate.chain_record.image_hash
                    ):
                        validator.finalizable.append(candidate)
    return outcome


def honest_stores_identical(validators: List[ValidatorNode]) -> bool:
    logs = [v.store.log_bytes() for v in validators if v.honest]
    return all(log == logs[0] for log in logs[1:]) if logs else True
