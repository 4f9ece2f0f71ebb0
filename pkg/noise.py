"""
Additive Gaussian observation noise: every evaluation returns f(x) + ε with
ε ~ N(0, λ²) drawn from the wrap's own seeded stream.
"""

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

import config

_BLOCK = 4096


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(default=config.DEFAULT_LAMBDA, ge=0, alias="lambda")
    seed: int = Field(default=0, ge=0, lt=2**64)


class NoisyObjective:
    """
    Callable wrapper drawing a fresh ε per call, keyed only by stream
    position. Not safe to share between concurrent consumers.
    """

    def __init__(self, f, spec: NoiseSpec):
        self.f = f
        self.spec = spec
        self.calls = 0
        self._rng = np.random.default_rng(spec.seed)
        self._buffer = np.empty(0)
        self._pos = 0

    def __getattr__(self, name):
        # name, dim, grad, ... of the wrapped objective
        wrapped = self.__dict__.get("f")
        if wrapped is None:
            raise AttributeError(name)
        return getattr(wrapped, name)

    def _next_normal(self) -> float:
        if self._pos >= self._buffer.size:
            self._buffer = self._rng.standard_normal(_BLOCK)
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return float(value)

    def __call__(self, x) -> float:
        self.calls += 1
        value = self.f(x)
        if self.spec.lam == 0.0:
            return value
        return value + self.spec.lam * self._next_normal()


def noisy_wrap(f, spec: NoiseSpec):
    return NoisyObjective(f, spec)
