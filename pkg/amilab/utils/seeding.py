import numpy as np

# Counter-based fan-out: each named stream gets its own spawn key under the master seed, so
# consuming one stream never shifts another.
STREAMS = {
    "env": 0,
    "policy_init": 1,
    "tao": 2,
    "opponent_model": 3,
    "detector": 4,
    "adversary": 5,
    "rollout": 6,
    "eval": 7,
    "dual_mix": 8,
    "victims": 9,
    "minibatch": 10,
    "dataset": 11,
}


def stream_seed(master_seed: int, stream: str, *counter: int) -> np.random.SeedSequence:
    if stream not in STREAMS:
        raise KeyError(f"Unknown seed stream '{stream}'. Valid streams: {', '.join(sorted(STREAMS))}")
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(STREAMS[stream], *map(int, counter)))


def rng_for(master_seed: int, stream: str, *counter: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(stream_seed(master_seed, stream, *counter)))


def episode_seeds(master_seed: int, stream: str, count: int, *counter: int) -> list[int]:
    """Integer seeds for env resets, drawn from a dedicated stream."""
    seq = stream_seed(master_seed, stream, *counter)
    return [int(s) for s in seq.generate_state(count, dtype=np.uint32)]
