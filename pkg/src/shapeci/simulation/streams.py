"""Counter-keyed random streams.

Every replication draws from its own Philox stream keyed on the master seed and
the replication's coordinates, so results do not depend on which worker ran a
replication or in which order. Variates are produced by inversion from 53-bit
uniforms, which keeps them identical across platforms.
"""

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtri

_MANTISSA = 2**53


def replication_generator(*keys: int) -> np.random.Generator:
    """Generator for the stream identified by (seed, ..., replication index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))


def uniform_variates(rng: np.random.Generator, size: int) -> NDArray[np.float64]:
    """Uniforms on the open interval (0, 1) at the midpoints of a 2^-53 grid."""
    return (rng.integers(0, _MANTISSA, size=size, dtype=np.int64) + 0.5) / _MANTISSA


def normal_variates(rng: np.random.Generator, size: int, scale: float = 1.0) -> NDArray[np.float64]:
    return scale * ndtri(uniform_variates(rng, size))
