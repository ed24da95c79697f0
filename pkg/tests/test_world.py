import numpy as np

from ringwatch.analysis import WorldSampler
from ringwatch.core.anonpath import EnvelopeKind, schedule_dummies, seed_indices


def test_dummy_schedule():
    plan = schedule_dummies(3, 4, np.random.default_rng(0))
    assert len(plan) == 7
    assert plan.count(EnvelopeKind.DUMMY) == 4
    assert schedule_dummies(2, 0, np.random.default_rng(0)) == [EnvelopeKind.TRUE] * 2


def test_seed_indices_are_deterministic():
    a = seed_indices(b"seed", 8, 6)
    assert a == seed_indices(b"seed", 8, 6)
    assert all(0 <= i < 6 for i in a)
    assert a != seed_indices(b"other", 8, 6)


def test_malicious_mask_size(ring, anon_config):
    sampler = WorldSampler(ring, anon_config)
    mask = sampler.malicious_mask(np.random.default_rng(0))
    assert mask.sum() == int(0.3 * ring.n)


def test_sampled_lookup_follows_the_trace(ring, anon_config):
    sampler = WorldSampler(ring, anon_config)
    rng = np.random.default_rng(1)
    mask = sampler.malicious_mask(rng)
    for k in range(30):
        initiator = sampler.honest_initiator(mask, rng)
        key = sampler.random_key(rng)
        transcript = sampler.sample_lookup(k, initiator, key, mask, rng)
        trace = ring.trace(initiator, key)
        assert not mask[initiator]
        assert transcript.target == trace.target
        assert tuple(q.queried for q in transcript.true_queries()) == trace.queried
        assert len(transcript.queries) == trace.hop_count + anon_config.k_dummy
        assert [q.index for q in transcript.queries] == list(range(len(transcript.queries)))
        assert len({q.relays[:2] for q in transcript.queries}) <= 1
        assert transcript.walk_relays <= set(np.flatnonzero(mask).tolist())


def test_single_exit_pair_without_multipath(ring, anon_config):
    sampler = WorldSampler(ring, anon_config.model_copy(update={"multipath": False}))
    rng = np.random.default_rng(2)
    transcript = sampler.sample_lookup(0, 1, sampler.random_key(rng), sampler.malicious_mask(rng), rng)
    assert len({q.relays for q in transcript.queries}) == 1


def test_world_has_concurrent_lookups(ring, anon_config):
    world = WorldSampler(ring, anon_config).sample(np.random.default_rng(5))
    assert len(world.transcripts) == 4
    assert world.measured.lookup == 0
