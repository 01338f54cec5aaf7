"""Adam with per-group L2 weight decay (the decay term is added to the gradient)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class ParamGroup:
    params: list[Tensor]
    weight_decay: float = 0.0
    name: str = ""


@dataclass
class _Moments:
    m: np.ndarray
    v: np.ndarray


class Adam:
    def __init__(self, groups: Sequence[ParamGroup], lr: float = 0.01,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        self.groups = list(groups)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.t = 0
        self.state: dict[int, _Moments] = {}
        for g in self.groups:
            for p in g.params:
                self.state[id(p)] = _Moments(np.zeros_like(p.values), np.zeros_like(p.values))

    def zero_grad(self) -> None:
        for g in self.groups:
            for p in g.params:
                p.grad = None

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.betas
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for group in self.groups:
            for p in group.params:
                grad = p.grad if p.grad is not None else np.zeros_like(p.values)
                if group.weight_decay:
                    grad = grad + group.weight_decay * p.values
                st = self.state[id(p)]
                st.m = b1 * st.m + (1.0 - b1) * grad
                st.v = b2 * st.v + (1.0 - b2) * grad * grad
                denom = np.sqrt(st.v / bc2) + self.eps
                # rebinding, not in-place: saved forward arrays stay untouched
                p.values = p.values - self.lr * (st.m / bc1) / denom
