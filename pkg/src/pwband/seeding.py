"""Deterministic derivation of independent RNG streams.

Every random quantity in the experiments draws from a stream derived from
(master seed, labels...), so reruns are bit-identical and logically distinct
randomness (data, bound draws, voting permutations) never shares a stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("seed labels must be nonnegative integers or strings")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(master_seed: int, *labels) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, labels...)."""
    entropy = [_label_entropy(master_seed)] + [_label_entropy(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def stream_seed(master_seed: int, *labels) -> int:
    """Stable integer seed for APIs that take a seed rather than a generator."""
    return int(stream(master_seed, *labels).integers(0, 2**63 - 1))
