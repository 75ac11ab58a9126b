"""Adam optimizer operating on a ParameterStore."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import FrozenStore, InvariantViolation, ShapeMismatch
from .params import ParameterStore


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not (self.learning_rate > 0.0 and math.isfinite(self.learning_rate)):
            raise InvariantViolation(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 < b < 1.0:
                raise InvariantViolation(f"{name} must lie in (0,1), got {b}")
        if self.epsilon <= 0.0:
            raise InvariantViolation(f"epsilon must be positive, got {self.epsilon}")


class AdamState:
    """First/second moment accumulators plus a shared step counter.

    The counter is shared across parameters, which matches the usual case
    of every step updating every parameter it has gradients for.
    """

    def __init__(self) -> None:
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def moments(self, name: str, shape: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        if name not in self._m:
            self._m[name] = np.zeros(shape)
            self._v[name] = np.zeros(shape)
        return self._m[name], self._v[name]


def adam_step(
    store: ParameterStore,
    gradients: dict[str, np.ndarray],
    state: AdamState,
    config: OptimizerConfig,
) -> tuple[ParameterStore, AdamState]:
    """One bias-corrected Adam update, applied in place.

    Only parameters named in ``gradients`` move; buffers (e.g. batch-norm
    running statistics) are never passed gradients and stay put.
    """
    if store.frozen:
        raise FrozenStore("adam_step called on a frozen store")
    for name in gradients:
        if name not in store:
            raise ShapeMismatch(f"gradient for unknown parameter {name!r}")
        if gradients[name].shape != store[name].shape:
            raise ShapeMismatch(
                f"gradient shape {gradients[name].shape} != parameter shape "
                f"{store[name].shape} for {name!r}"
            )

    state.step_count += 1
    t = state.step_count
    b1, b2 = config.beta1, config.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name in store.names():
        if name not in gradients:
            continue
        g = gradients[name]
        w = store[name]
        m, v = state.moments(name, w.shape)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        m_hat = m / bias1
        v_hat = v / bias2
        w -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return store, state
