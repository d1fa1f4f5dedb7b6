import numpy as np


def substream(seed, *keys):
    """Generator for the substream ``keys`` of root ``seed``.

    The stream depends only on ``(seed, *keys)``, so trials can be run in
    any order or in parallel and still draw identical numbers.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
