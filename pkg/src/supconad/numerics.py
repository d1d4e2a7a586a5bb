"""Dense vector/matrix helpers and the deterministic random generator.

Vectors are 1-D float64 numpy arrays, matrices 2-D float64 numpy arrays.
All randomness in the package flows through :class:`Rng`, a counter-based
splitmix64 generator that is fully specified below so that runs are
reproducible bit-for-bit and ports to other languages can match the stream.
"""

from __future__ import annotations

import numpy as np

# Norms below this are treated as degenerate rather than silently producing
# zeros or NaNs that would propagate into the loss.
NORM_EPS = 1e-12


class DegenerateVectorError(ValueError):
    """Raised when a vector with (near-)zero norm reaches a normalization."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Validate and convert to a 1-D float64 array with finite entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise ValueError(f"{name} must be 1-D and non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a 2-D float64 array with finite entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be 2-D and non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def dot(a, b) -> float:
    """Inner product of two equal-dimension vectors."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def l2_normalize(a) -> np.ndarray:
    """Scale a vector to unit Euclidean norm, preserving direction.

    Raises DegenerateVectorError when the norm is below NORM_EPS or when the
    norm computation overflows.
    """
    a = as_vector(a)
    n = float(np.linalg.norm(a))
    if n < NORM_EPS or not np.isfinite(n):
        raise DegenerateVectorError(f"cannot normalize vector with norm {n!r}")
    return a / n


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization of a 2-D array."""
    m = as_matrix(m)
    n = np.linalg.norm(m, axis=1, keepdims=True)
    if np.any(n < NORM_EPS) or not np.all(np.isfinite(n)):
        raise DegenerateVectorError("cannot normalize row with degenerate norm")
    return m / n


# splitmix64 constants (Steele, Lea & Flood 2014).  The generator is used in
# counter mode: output i of a stream seeded with s is mix(s + (i+1)*GAMMA)
# with all arithmetic modulo 2**64, which makes block generation trivially
# vectorizable while keeping a strict, documented draw sequence.
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SPAWN_SALT = np.uint64(0xD1B54A32D192ED03)

_U64_MASK = (1 << 64) - 1


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on an uint64 array (wrapping arithmetic)."""
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


class Rng:
    """Deterministic splitmix64 stream.

    Draw sequence, given seed ``s`` and a draw counter ``c`` starting at 0:

    * ``next_u64(n)`` returns ``mix64(s + (c+1..c+n) * GAMMA)`` and advances
      ``c`` by ``n``.
    * ``uniform`` maps each 64-bit output to ``[0, 1)`` via the top 53 bits:
      ``(u >> 11) * 2**-53``.
    * ``gaussian`` consumes exactly two uniforms per value using the
      Box-Muller cosine branch: ``sqrt(-2*log(1 - u1)) * cos(2*pi*u2)``.
      Batched and one-at-a-time draws therefore produce identical streams.

    Identical seeds produce identical sequences on every platform; the state
    is a single owner's to advance and must not be shared across concurrent
    tasks.
    """

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= _U64_MASK:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        self.seed = int(seed)
        self._counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        if n < 0:
            raise ValueError("n must be non-negative")
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64(np.uint64(self.seed) + idx * _GAMMA)

    def uniform(self, n: int | None = None):
        """Uniform draws in [0, 1); scalar when n is None."""
        m = 1 if n is None else n
        u = (self.next_u64(m) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return float(u[0]) if n is None else u

    def gaussian(self, mean: float = 0.0, std: float = 1.0, n: int | None = None):
        """Normal draws via Box-Muller; scalar when n is None.

        Two uniforms are consumed per value even when std == 0, so the stream
        position does not depend on parameter values.
        """
        if std < 0:
            raise ValueError("std must be non-negative")
        m = 1 if n is None else n
        u = self.uniform(2 * m)
        z = np.sqrt(-2.0 * np.log1p(-u[0::2])) * np.cos(2.0 * np.pi * u[1::2])
        out = mean + std * z
        return float(out[0]) if n is None else out

    def gaussian_array(self, shape: tuple[int, ...], mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        n = int(np.prod(shape))
        return self.gaussian(mean, std, n).reshape(shape)

    def below(self, bound: int) -> int:
        """Integer in [0, bound) via floor(uniform * bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return min(int(self.uniform() * bound), bound - 1)

    def choice_without_replacement(self, pool_size: int, k: int) -> np.ndarray:
        """k distinct indices from range(pool_size), partial Fisher-Yates order.

        Swap i uses uniform draw i: j = i + floor(u_i * (pool_size - i)).
        """
        if k > pool_size:
            raise ValueError(f"cannot draw {k} from pool of {pool_size}")
        u = self.uniform(k)
        idx = np.arange(pool_size)
        for i in range(k):
            j = i + min(int(u[i] * (pool_size - i)), pool_size - i - 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()

    def shuffled(self, n: int) -> np.ndarray:
        """A full Fisher-Yates permutation of range(n)."""
        return self.choice_without_replacement(n, n)

    def spawn(self, stream: int) -> "Rng":
        """Child generator with a seed derived from (seed, stream).

        Child seeds are mix64(seed + SPAWN_SALT + (stream+1)*GAMMA), giving
        independent streams for e.g. per-modality generation without sharing
        the parent's counter.
        """
        base = (self.seed + int(_SPAWN_SALT) + (int(stream) + 1) * int(_GAMMA)) & _U64_MASK
        child_seed = int(_mix64(np.asarray([base], dtype=np.uint64))[0])
        return Rng(child_seed)
