"""
Seed derivation. Every random stream is a pure function of the run seed and a tuple of
task coordinates, so results do not depend on scheduling.
"""
from typing import Sequence

import numpy as np

# stream ids under the run seed
INIT_STREAM = 0
TRAIN_STREAM = 1
EVAL_STREAM = 2
INFERENCE_STREAM = 3
BENCH_STREAM = 4
VERIFY_STREAM = 5


def derive_rng(*coordinates: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(c) for c in coordinates]))


def derive_seed(*coordinates: int) -> int:
    state = np.random.SeedSequence([int(c) for c in coordinates]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def sample_rng(base_seed: int, graph_id: int, sample_id: int) -> np.random.Generator:
    """Generator of one stochastic inference pass"""
    return derive_rng(base_seed, graph_id, sample_id)


def spawn(seed: int, count: int) -> Sequence[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]
