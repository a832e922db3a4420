"""Deterministic seed derivation.

A derived seed is a pure function of a 64-bit master seed and a tuple of
labels (a module tag string followed by integer indices):

    z = mix(master)
    for label in labels:
        z = mix(z ^ hash(label))

``mix`` is the SplitMix64 finaliser (add 0x9E3779B97F4A7C15, then
xor-shift-multiply by 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB with
shifts 30, 27, 31).  ``hash`` of a string is FNV-1a 64 over its UTF-8
bytes; ``hash`` of a non-negative integer ``i`` is ``mix(i ^ INT_TAG)``.
All arithmetic is modulo 2**64.
"""
from dataclasses import dataclass

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
INT_TAG = 0xD1B54A32D192ED03
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def mix64(z):
    z = (z + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * M1) & MASK
    z = ((z ^ (z >> 27)) * M2) & MASK
    return z ^ (z >> 31)


def _fnv1a(text):
    h = FNV_OFFSET
    for b in text.encode("utf-8"):
        h = ((h ^ b) * FNV_PRIME) & MASK
    return h


def label_hash(label):
    if isinstance(label, str):
        return _fnv1a(label)
    label = int(label)
    if label < 0:
        raise ValueError("integer seed labels must be non-negative")
    return mix64((label & MASK) ^ INT_TAG)


@dataclass(frozen=True)
class SeedStream:
    master_seed: int
    labels: tuple = ()

    def child(self, *labels):
        return SeedStream(self.master_seed, self.labels + tuple(labels))


def derive_seed(stream, *labels):
    """64-bit seed for ``stream`` (optionally extended by ``labels``)."""
    if not isinstance(stream, SeedStream):
        stream = SeedStream(int(stream))
    z = mix64(int(stream.master_seed) & MASK)
    for lab in stream.labels + tuple(labels):
        z = mix64(z ^ label_hash(lab))
    return z


def _mix64_array(z):
    z = z + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(M2)
    return z ^ (z >> np.uint64(31))


def derive_seeds(stream, *index_arrays):
    """Vectorised :func:`derive_seed` over trailing integer labels.

    ``derive_seeds(s, i, j)[k] == derive_seed(s, i[k], j[k])``.
    """
    base = np.uint64(derive_seed(stream))
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=np.uint64) for a in index_arrays])
    z = np.full(arrays[0].shape, base, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for a in arrays:
            z = _mix64_array(z ^ _mix64_array(a ^ np.uint64(INT_TAG)))
    return z


def rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & MASK))
