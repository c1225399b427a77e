"""Adam with named parameter groups and bias correction."""

from __future__ import annotations

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when a gradient goes non-finite; training should abort."""


class Adam:
    """Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8).

    ``groups`` maps a name to ``{"params": [Tensor, ...], "lr": float}``.
    Parameters whose grad is None are treated as zero-gradient.
    """

    def __init__(self, groups: dict, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        for name, g in groups.items():
            if g["lr"] <= 0:
                raise ValueError(f"group {name!r}: learning rate must be "
                                 f"positive, got {g['lr']}")
        self.groups = groups
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {}
        self._v = {}
        for g in groups.values():
            for p in g["params"]:
                self._m[id(p)] = np.zeros_like(p.data)
                self._v[id(p)] = np.zeros_like(p.data)

    def set_lr(self, group: str, lr: float):
        self.groups[group]["lr"] = lr

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, g in self.groups.items():
            lr = g["lr"]
            for p in g["params"]:
                grad = p.grad
                if grad is None:
                    grad = 0.0
                elif not np.all(np.isfinite(grad)):
                    raise DivergenceError(f"non-finite gradient in group "
                                          f"{name!r}")
                m = self._m[id(p)]
                v = self._v[id(p)]
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * np.square(grad)
                p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for g in self.groups.values():
            for p in g["params"]:
                p.grad = None
