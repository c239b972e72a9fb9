# core/rng.py
"""
Seeded generators.

Every random draw in the lab comes from numpy's ``PCG64`` bit generator,
seeded through ``SeedSequence`` with a tuple of non-negative integers.
PCG64 output is specified bit-for-bit by numpy and does not depend on the
platform, so equal seed tuples give equal streams everywhere.
"""
import numpy as np

# Salts keep independent streams apart when they share a run seed.
SALT_PROMPTS = 1
SALT_DRAFT_POLICY = 2
SALT_SEQUENCE = 3
SALT_RANDOM_REMAP = 4


def make_rng(*seed_parts: int) -> np.random.Generator:
    """Return a PCG64 generator for the given seed tuple."""
    if not seed_parts:
        raise ValueError("make_rng needs at least one seed part")
    entropy = [int(p) for p in seed_parts]
    if any(p < 0 for p in entropy):
        raise ValueError(f"seed parts must be non-negative, got {entropy}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
