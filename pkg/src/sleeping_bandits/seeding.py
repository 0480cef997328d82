"""Deterministic derivation of independent random streams.

Every source of randomness in a benchmark run is its own stream, derived from
``(master_seed, run_index, label)``.  Labels are hashed with SHA-256 so the
derivation is stable across machines and Python processes; the resulting
entropy list feeds ``numpy.random.SeedSequence``, whose mixing is documented
as stable across numpy versions.  Replays of the same build are therefore
exact.
"""

from __future__ import annotations

import hashlib

import numpy as np

SeedParts = int | str | tuple


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream_seed(*parts: SeedParts) -> np.random.SeedSequence:
    """Build a SeedSequence from integers and string labels.

    Tuples are flattened, strings hashed, integers used as-is (must be >= 0:
    SeedSequence entropy is unsigned).
    """
    entropy: list[int] = []
    flat: list = []
    for part in parts:
        if isinstance(part, tuple):
            flat.extend(part)
        else:
            flat.append(part)
    for part in flat:
        if isinstance(part, str):
            entropy.append(_label_entropy(part))
        elif isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError(f"seed components must be nonnegative, got {part}")
            entropy.append(int(part))
        else:
            raise TypeError(f"unsupported seed component: {part!r}")
    return np.random.SeedSequence(entropy)


def stream_rng(*parts: SeedParts) -> np.random.Generator:
    """A fresh PCG64 generator for the stream named by ``parts``."""
    return np.random.default_rng(stream_seed(*parts))
