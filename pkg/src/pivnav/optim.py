"""Adam optimizer over leaf tensors."""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from .autodiff import Tensor

DEFAULT_LR = 0.0035
DEFAULT_BATCH = 32


class AdamState:
    """Step counter plus per-parameter moment accumulators."""

    def __init__(self, params: Sequence[Tensor], lr: float, beta1: float, beta2: float, eps: float):
        self.step_count = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self._scratch = [np.zeros_like(p.data) for p in params]


class Adam:
    """Standard Adam with bias correction; updates parameters in place."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = DEFAULT_LR,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.state = AdamState(self.params, lr, beta1, beta2, eps)

    def step(self, grads: Mapping[Tensor, Optional[Tensor]]):
        """Apply one update. Missing / None grads are treated as zero.

        Written with in-place array ops; at a few million parameters the
        temporaries of the naive form dominate a training step otherwise.
        """
        s = self.state
        s.step_count += 1
        bc1 = 1.0 - s.beta1**s.step_count
        bc2 = 1.0 - s.beta2**s.step_count
        for i, p in enumerate(self.params):
            g = grads.get(p)
            m, v, tmp = s.m[i], s.v[i], s._scratch[i]
            if g is not None:
                gd = g.data
                if gd.shape != p.data.shape:
                    raise ValueError(f"gradient shape {gd.shape} does not match parameter {p.data.shape}")
                m *= s.beta1
                np.multiply(gd, 1.0 - s.beta1, out=tmp)
                m += tmp
                v *= s.beta2
                np.multiply(gd, gd, out=tmp)
                tmp *= 1.0 - s.beta2
                v += tmp
            else:
                m *= s.beta1
                v *= s.beta2
            # p -= lr/bc1 * m / (sqrt(v/bc2) + eps)
            np.divide(v, bc2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += s.eps
            np.divide(m, tmp, out=tmp)
            tmp *= s.lr / bc1
            p.data -= tmp
