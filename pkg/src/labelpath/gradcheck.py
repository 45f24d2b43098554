"""Central finite-difference verification of reverse-mode gradients.

Callers must disable every stochastic layer (dropout) and build the
function under test in float64; float32 round-off swamps the check.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def grad_check(f: Callable[[], Tensor], params: dict[str, Tensor],
               eps: float = 1e-6, max_coords: int = 25,
               rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and finite-difference grads.

    ``f`` rebuilds the scalar loss from the current parameter values on
    every call. Up to ``max_coords`` coordinates are probed per
    parameter (all of them when the parameter is small). The error for
    one coordinate is |fd - ad| / max(|fd|, |ad|, 1e-4).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    for p in params.values():
        p.grad = None
    loss = f()
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + eps
            up = f().item()
            flat[c] = orig - eps
            down = f().item()
            flat[c] = orig
            fd = (up - down) / (2.0 * eps)
            ad = float(analytic[name].reshape(-1)[c])
            err = abs(fd - ad) / max(abs(fd), abs(ad), 1e-4)
            worst = max(worst, err)
    return worst
