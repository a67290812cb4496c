"""Reproducible random substreams for campaign runs.

Every source of randomness in a run is drawn from a named substream keyed
by (master_seed, run_index, stream_tag). Substreams are independent of
each other and of execution order, so running the campaign with any
number of workers, or re-running a single flight in isolation, produces
bit-identical samples.

The generator is Philox (counter-based); the key is derived with numpy's
SeedSequence, which hashes the (seed, run, tag) triple into the key
deterministically and platform-independently. Tags are stable CRC32
hashes of the stream name, never Python's randomized hash().
"""

from __future__ import annotations

import zlib

import numpy as np

# Stream names used by the simulator. Anything drawing randomness must
# own one of these (or register a new one) so streams never alias.
STREAM_DISPERSIONS = "dispersions"
STREAM_MOCAP = "mocap"


def _tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8")) & 0xFFFFFFFF


def substream(master_seed: int, run_index: int, tag: str) -> np.random.Generator:
    """Return the named random substream for one campaign run.

    Identical (master_seed, run_index, tag) triples yield generators that
    produce identical sample sequences, regardless of process, worker
    count, or the order runs execute in.
    """
    if run_index < 0:
        raise ValueError(f"run_index must be >= 0, got {run_index}")
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_index, _tag_id(tag)))
    return np.random.Generator(np.random.Philox(ss))
