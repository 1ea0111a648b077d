"""Shared construction helpers for continuum test fields."""

import numpy as np

from magbern.landau import LadderField


def random_ladder(rng, B=1.0, n_terms=3, max_level=2, box=1.5):
    """Random combination of chiral Landau modes with levels <= max_level."""
    terms = {}
    for _ in range(n_terms):
        y = (rng.uniform(-box, box), rng.uniform(-box, box))
        k = rng.integers(0, max_level + 1)
        c = rng.normal() + 1j * rng.normal()
        dst = terms.setdefault(y, {})
        dst[int(k)] = dst.get(int(k), 0.0) + c
    return LadderField(B, terms)


def rng_stream(seed):
    return np.random.default_rng(np.random.SeedSequence(seed))
