"""Central finite-difference checks against the reverse-mode gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def numeric_grad(loss_fn: Callable[[], Tensor], p: Tensor, eps: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(p.data)
    flat, gflat = p.data.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = float(loss_fn().data)
        flat[i] = old - eps
        down = float(loss_fn().data)
        flat[i] = old
        gflat[i] = (up - down) / (2 * eps)
    return g


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """max |a-b| / max(|a|, |b|, floor), taken over the whole array.

    The floor keeps gradients that are exactly zero in theory (and pure
    rounding noise numerically) from producing huge ratios.
    """
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return float(np.abs(a - b).max(initial=0.0) / scale)


def check_gradients(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
                    eps: float = 1e-5) -> dict[str, float]:
    """Relative error between analytic and numeric gradients, per parameter.

    Parameters must be float64; each gets its ``grad`` reset first.
    """
    for p in params.values():
        if p.data.dtype != np.float64:
            raise TypeError("gradient checks need float64 parameters")
        p.grad = None
    loss_fn().backward()
    analytic = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for k, p in params.items()}
    return {k: relative_error(analytic[k], numeric_grad(loss_fn, p, eps)) for k, p in params.items()}
