"""Adam with bias correction, coupled L2 weight decay, and linear warm-up."""

from __future__ import annotations

import numpy as np

from .tensor import NumericError, Tensor


class Adam:
    """Standard Adam over a named parameter dict.

    Weight decay is added to the gradient (coupled form). When warm-up
    is configured, the learning rate ramps linearly from lr/warmup to lr
    over the first ``warmup`` steps and stays constant afterwards.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0, warmup: int = 0):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup = warmup
        self.step_count = 0
        self.first_moment = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.second_moment = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def lr_at(self, step: int) -> float:
        if self.warmup > 0 and step < self.warmup:
            return self.lr * (step + 1) / self.warmup
        return self.lr

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> float:
        """One update over all parameters with grads; returns the lr used.

        Any NaN gradient refuses the whole update (state untouched).
        """
        for name, p in self.params.items():
            if p.grad is not None and np.isnan(p.grad).any():
                raise NumericError(f"NaN gradient in parameter '{name}'")
        lr_t = self.lr_at(self.step_count)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            m = self.first_moment[name]
            v = self.second_moment[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= (lr_t * update).astype(p.data.dtype, copy=False)
        return lr_t
