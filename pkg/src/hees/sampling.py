"""Seedable random streams and the orthogonal mirrored-direction sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DegenerateInput, gram_schmidt

_UINT64_MAX = 2**64 - 1
# Normal variates are produced in fixed-size batches so the variate sequence
# is a function of the seed alone, independent of how callers slice it.
_POLAR_BATCH = 4096


class RngStream:
    """Counter-based (Philox) random stream with deterministic child streams.

    Gaussian variates come from the Marsaglia polar method applied to the
    stream's uniform doubles, so the output is bit-reproducible for a seed.
    """

    def __init__(self, seed: int, _path: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed <= _UINT64_MAX:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.path = tuple(_path)
        seq = np.random.SeedSequence(seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))
        self._normals = np.empty(0)
        self._pos = 0

    def split(self, index: int) -> "RngStream":
        """Independent child stream, deterministic in ``(seed, path, index)``."""
        if index < 0:
            raise ValueError("split index must be non-negative")
        return RngStream(self.seed, self.path + (int(index),))

    def uniform(self, size=None):
        return self._gen.random(size)

    def _refill(self) -> None:
        out = []
        have = 0
        while have < _POLAR_BATCH:
            u = 2.0 * self._gen.random((_POLAR_BATCH, 2)) - 1.0
            s = u[:, 0] ** 2 + u[:, 1] ** 2
            ok = (s > 0.0) & (s < 1.0)
            u, s = u[ok], s[ok]
            f = np.sqrt(-2.0 * np.log(s) / s)
            z = (u * f[:, None]).ravel()
            out.append(z)
            have += z.size
        fresh = np.concatenate(out)[:_POLAR_BATCH]
        self._normals = np.concatenate([self._normals[self._pos:], fresh])
        self._normals.setflags(write=False)
        self._pos = 0

    def normals(self, n: int) -> np.ndarray:
        """The next ``n`` standard normal variates of the stream (read-only view)."""
        while self._normals.size - self._pos < n:
            self._refill()
        z = self._normals[self._pos:self._pos + n]
        self._pos += n
        return z


def standard_normal_vector(rng: RngStream, d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return rng.normals(d)


@dataclass(frozen=True)
class OrthogonalSampleBlock:
    """Mutually orthogonal directions whose lengths are Gaussian-draw norms.

    ``directions`` holds the vectors as rows; ``norms[i]`` is the length of
    the i-th raw draw and equals ``|directions[i]|``.
    """

    directions: np.ndarray
    norms: np.ndarray

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def units(self) -> np.ndarray:
        return self.directions / self.norms[:, None]


def sample_orthogonal(rng: RngStream, d: int, count: int | None = None) -> OrthogonalSampleBlock:
    """Draw ``d`` Gaussian vectors, orthogonalize them, restore their norms.

    Always consumes a full ``d x d`` block of variates. ``count`` limits the
    output to the first ``count`` directions; since Gram-Schmidt is
    sequential these coincide with the first rows of the full block.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    k = d if count is None else int(count)
    if not 1 <= k <= d:
        raise ValueError(f"count must lie in [1, {d}]")
    while True:
        Z = rng.normals(d * d).reshape(d, d)
        norms = np.sqrt((Z[:k] * Z[:k]).sum(axis=1))
        try:
            Q = gram_schmidt(Z[:k])
        except DegenerateInput:
            continue
        return OrthogonalSampleBlock(Q * norms[:, None], norms)
