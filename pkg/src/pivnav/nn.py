"""Small fully-connected networks on top of the autodiff core."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Mlp:
    """Dense layers with Swish hidden activations and a linear head."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(ad.param(uniform_fan_in(rng, fan_in, (fan_in, fan_out))))
            self.biases.append(ad.param(uniform_fan_in(rng, fan_in, (fan_out,))))

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add(ad.matmul(h, w), b)
            if i != last:
                h = ad.swish(h)
        return h

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @property
    def n_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters()])

    def load_vector(self, vec: np.ndarray):
        if vec.size != self.n_params:
            raise ValueError(f"parameter vector has {vec.size} entries, expected {self.n_params}")
        off = 0
        for p in self.parameters():
            n = p.data.size
            p.data[...] = vec[off : off + n].reshape(p.data.shape)
            off += n


def pack_params(nets: Sequence[Mlp]) -> np.ndarray:
    return np.concatenate([net.to_vector() for net in nets])


def unpack_params(nets: Sequence[Mlp], vec: np.ndarray):
    off = 0
    for net in nets:
        n = net.n_params
        net.load_vector(vec[off : off + n])
        off += n
    if off != vec.size:
        raise ValueError(f"parameter vector has {vec.size} entries, expected {off}")
