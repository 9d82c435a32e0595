"""Deterministic random-stream derivation.

Every run hangs off a single master seed. Each stage (model init, per-epoch
shuffle, per-session simulation, test-set sampling, ...) derives its own
independent generator from (seed, stream id, *indices), so adding streams or
parallelizing per-index work never perturbs the others.
"""

import numpy as np

# Stream ids. Values are part of the reproducibility contract: changing them
# changes every seeded output.
INIT = 1
SHUFFLE = 2
CORPUS = 3
SESSION = 4
GT_PAIRS = 5
TEST1 = 6
SPLIT = 7
GRADCHECK = 8


def subrng(seed: int, stream: int, *indices: int) -> np.random.Generator:
    """Generator for one (seed, stream, indices...) slot."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, indices)]))
