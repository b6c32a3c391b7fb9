"""Seeded random streams and the two distribution families the samplers use."""

import numpy as np

from .errors import DomainError


class RandomStream:
    """Deterministic random stream: same seed + same call sequence gives
    identical output. Child streams are derived by seed splitting so
    per-fold / per-level sampling stays reproducible."""

    def __init__(self, seed, _seq=None):
        self.seed = seed
        self._seq = _seq if _seq is not None else np.random.SeedSequence(seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    def split(self, n):
        """Derive n independent child streams."""
        return [RandomStream(self.seed, s) for s in self._seq.spawn(n)]

    def standard_normal(self, n):
        return self._gen.standard_normal(n)

    def normal_vector(self, n, mean, variance):
        """n i.i.d. draws from Normal(mean, variance); variance 0 is the
        constant vector."""
        if variance < 0:
            raise DomainError(f"normal_vector: negative variance {variance}")
        if variance == 0:
            return np.full(n, float(mean))
        return mean + np.sqrt(variance) * self._gen.standard_normal(n)

    def gamma_sample(self, shape, rate):
        """One Gamma(shape, rate) draw, shape-rate parameterization
        (mean = shape/rate)."""
        if shape <= 0 or rate <= 0:
            raise DomainError(f"gamma_sample: shape={shape}, rate={rate}")
        return self._gen.gamma(shape, 1.0 / rate)

    def permutation(self, n):
        return self._gen.permutation(n)
