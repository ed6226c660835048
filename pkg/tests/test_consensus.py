"""Quorum arithmetic and Byzantine behavior of the finalization rounds."""

import pytest

from birthmark.chain import byzantine_bound, quorum_size
from birthmark.harness import Topology, World, byzantine_breach, byzantine_run
from birthmark.chain.consensus import FaultPlan, honest_stores_identical, run_pipeline_round


class TestQuorumArithmetic:
    @pytest.mark.parametrize(
        "n,quorum,bound",
        [(4, 3, 1), (7, 5, 2), (10, 7, 3), (13, 9, 4), (100, 67, 33)],
    )
    def test_thresholds(self, n, quorum, bound):
        assert quorum_size(n) == quorum
        assert byzantine_bound(n) == bound

    @pytest.mark.parametrize("n", range(4, 40))
    def test_honest_supermajority_meets_quorum_at_bound(self, n):
        # the structural reason safety holds at f <= bound
        assert n - byzantine_bound(n) >= quorum_size(n)
        assert n - (byzantine_bound(n) + 1) < quorum_size(n)


class TestRounds:
    def test_all_honest_finalize_identically(self):
        world = World(Topology(seed=3, cameras=2, servers=4, validators=4))
        for i in range(4):
            world.capture(i % 2, world.random_image())
        outcome = world.run_round()
        assert honest_stores_identical(world.validators)
        assert all(len(v) == 4 for v in outcome.finalized.values())

    def test_malicious_silence_cannot_stall_below_bound(self):
        n, f = 10, 3
        world = World(Topology(seed=5, cameras=2, servers=4, validators=n,
                               malicious_validators=f))
        world.capture(0, world.random_image())
        outcome = world.run_round(FaultPlan())  # malicious stay silent
        assert honest_stores_identical(world.validators)
        honest = [v for v in world.validators if v.honest]
        assert len(honest[0].store) == 1  # honest supermajority finalizes alone

    def test_stalled_candidates_are_retained(self):
        # one malicious node past the bound and silent: liveness loss only
        n = 4
        world = World(Topology(seed=6, cameras=1, servers=4, validators=n,
                               malicious_validators=2))
        world.capture(0, world.random_image())
        outcome = world.run_round(FaultPlan())
        assert outcome.stalled  # quorum unreachable, candidates kept
        honest = [v for v in world.validators if v.honest]
        assert all(len(v.store) == 0 for v in honest)
        assert all(v.finalizable for v in honest)  # retained for next round
        assert honest_stores_identical(world.validators)  # no divergence


class TestByzantineSweep:
    @pytest.mark.parametrize("n", [4, 10])
    def test_safety_within_bound(self, n):
        for f in range(byzantine_bound(n) + 1):
            for seed in range(5):
                result = byzantine_run(n, f, seed)
                assert result["safe"], f"n={n} f={f} seed={seed}: {result}"

    @pytest.mark.parametrize("n", [4, 10])
    def test_breach_past_bound(self, n):
        result = byzantine_breach(n, seed=0)
        assert result["f"] == byzantine_bound(n) + 1
        assert result["breach_demonstrated"]
        assert len(result["store_lengths"]) > 1  # honest stores diverged

    def test_invalid_candidates_never_finalize_within_bound(self):
        result = byzantine_run(10, 3, seed=11)
        assert not result["invalid_finalized"]
