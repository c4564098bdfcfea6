"""Seeded generation of Gaussian data matrices.

Every replication gets its own stream, derived from ``(master_seed, index)``
with the SplitMix64 finalizer. A stream is counter based: draw ``k`` (starting
at 1) is ``mix64(state + k * GOLDEN)``, so any slice of the sequence can be
produced in one vectorized call and the result never depends on how the work
was scheduled.

Normals come from the Box-Muller transform applied to consecutive uniform
pairs ``(u1, u2)``; each pair yields ``sqrt(-2 ln u1) * cos(2 pi u2)`` followed
by ``sqrt(-2 ln u1) * sin(2 pi u2)``. Matrices are filled row-major.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(z):
    """SplitMix64 finalizer on a Python int. Bijective on 64-bit words."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z):
    # uint64 array arithmetic wraps modulo 2**64, same as mix64 above
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class MatrixParams:
    p: int
    n: int
    mu: float = 1.0
    sigma: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if int(self.p) < 1 or int(self.n) < 1:
            raise InvalidParams(f"p and n must be >= 1, got p={self.p}, n={self.n}")
        if not np.isfinite(self.mu) or not np.isfinite(self.sigma):
            raise InvalidParams("mu and sigma must be finite")
        if self.mu < 0:
            raise InvalidParams(f"mu must be >= 0, got {self.mu}")
        if self.sigma < 0:
            raise InvalidParams(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "seed", int(self.seed) & MASK64)

    @property
    def c(self):
        return self.p / self.n


@dataclass(frozen=True)
class SeedStream:
    """Immutable handle on a counter-based random sequence."""

    state: int
    origin: tuple

    def uniforms(self, count, offset=0):
        """Uniform draws on the open interval (0, 1), 53 bits each."""
        k = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
        words = _mix64_array(np.uint64(self.state) + k * np.uint64(GOLDEN))
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, count):
        """First ``count`` standard normals of the stream (Box-Muller)."""
        pairs = (count + 1) // 2
        u = self.uniforms(2 * pairs)
        radius = np.sqrt(-2.0 * np.log(u[0::2]))
        angle = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count]


def derive_stream(master, index):
    """Stream for replication ``index`` under ``master``.

    state = mix64(mix64(master + GOLDEN) XOR index), with the zero word
    remapped to GOLDEN so no stream starts from an all-zero state.
    """
    if index < 0:
        raise InvalidParams(f"replication index must be >= 0, got {index}")
    master &= MASK64
    state = mix64(mix64(master + GOLDEN) ^ (index & MASK64))
    if state == 0:
        state = GOLDEN
    return SeedStream(state=state, origin=(master, int(index)))


def sample_matrix(params, stream):
    """p x n matrix with i.i.d. N(mu, sigma^2) entries, filled row-major."""
    p, n = params.p, params.n
    if p < 1 or n < 1:
        raise InvalidParams("cannot sample an empty matrix")
    if params.sigma == 0.0:
        return np.full((p, n), params.mu)
    z = stream.normals(p * n).reshape(p, n)
    return params.mu + params.sigma * z


def center(X, mu):
    """Subtract the entry mean ``mu`` from every entry."""
    return np.asarray(X, dtype=np.float64) - mu
