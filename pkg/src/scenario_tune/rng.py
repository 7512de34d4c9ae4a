"""Deterministic substreams keyed by (master seed, purpose tag, index...).

Every random draw in the pipeline comes from a generator built here, so a
result never depends on evaluation order or on how many workers were used.
"""

import zlib

import numpy as np

# Tags in use. Disjointness of the tags is what keeps BO samples, certification
# scenarios and validation scenarios independent of each other.
SCENARIO = "scenario"
BO = "bo"
VALIDATE = "validate"
PROPOSE = "propose"
SEEDS = "seeds"
GPFIT = "gpfit"


def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def substream(master_seed: int, tag: str, *index: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the given key."""
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    key = [int(master_seed), tag_id(tag), *(int(i) for i in index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
