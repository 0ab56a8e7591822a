"""Adam optimizer over engine tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamConfig", "Adam"]


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass
class _Slot:
    """Per-parameter first/second moment estimates and step count."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0


class Adam:
    """Adam with bias correction, updating parameters in place.

    Moment slots are keyed by tensor identity.  Parameters that received
    no gradient in a step are left untouched (their step count does not
    advance), so a partially-frozen model optimizes cleanly.
    """

    def __init__(self, params, config=None):
        self.config = config or AdamConfig()
        self.config.validate()
        self.params = list(params)
        self._slots = {
            id(p): _Slot(np.zeros_like(p.values), np.zeros_like(p.values))
            for p in self.params
        }

    def step(self, grads):
        """Apply one update from a ``Gradients`` map."""
        cfg = self.config
        for p in self.params:
            g = grads.get(p)
            if g is None:
                continue
            slot = self._slots[id(p)]
            slot.t += 1
            slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * g
            slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * (g * g)
            m_hat = slot.m / (1.0 - cfg.beta1 ** slot.t)
            v_hat = slot.v / (1.0 - cfg.beta2 ** slot.t)
            p.values = p.values - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
