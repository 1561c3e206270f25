"""Image feature extractors feeding the classifier head.

An extractor maps a fixed-size grayscale crop to a D-vector.  Extraction is
deterministic and each extractor declares its per-example FLOP cost so the
scaling bench can reason about head-vs-feature compute share.  The default
is a seeded random projection with a tanh nonlinearity; a one-hidden-layer
variant supports analytic backprop for joint training with the head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError


class FeatureExtractor:
    """Contract: ``dim``, ``flops``, ``input_size``, and ``extract``."""

    dim: int
    input_size: int

    @property
    def flops(self) -> float:
        raise NotImplementedError

    def extract(self, image: np.ndarray) -> np.ndarray:
        return self.extract_batch(image[None])[0]

    def extract_batch(self, images: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def trainable(self) -> bool:
        return False


def _check_input(images, input_size):
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[1] != input_size or images.shape[2] != input_size:
        raise SchemaError(
            f"expected (B, {input_size}, {input_size}) crops, got {images.shape}"
        )
    return images.reshape(images.shape[0], -1)


class RandomProjectionExtractor(FeatureExtractor):
    """Fixed seeded projection of centered pixels through tanh.

    Rows of the projection are scaled by 1/sqrt(P) so pre-activations stay
    in tanh's responsive range regardless of crop size.
    """

    def __init__(self, input_size: int = 48, dim: int = 128, seed: int = 0, gain: float = 3.0):
        self.input_size = input_size
        self.dim = dim
        self.seed = seed
        self.gain = gain
        p = input_size * input_size
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((p, dim)) * (gain / np.sqrt(p))
        self.offset = rng.uniform(-0.5, 0.5, dim)

    @property
    def flops(self) -> float:
        p = self.input_size * self.input_size
        return 2.0 * p * self.dim + 2.0 * self.dim

    def extract_batch(self, images: np.ndarray) -> np.ndarray:
        flat = _check_input(images, self.input_size)
        return np.tanh((flat - 0.5) @ self.projection + self.offset)


class TrainableMlpExtractor(FeatureExtractor):
    """One hidden tanh layer with analytic gradients.

    ``forward_batch`` caches activations; ``backward`` consumes the gradient
    of the loss w.r.t. the output features and accumulates parameter
    gradients, returning nothing (callers then invoke ``sgd_step``).
    """

    def __init__(self, input_size: int = 48, hidden: int = 256, dim: int = 128, seed: int = 0):
        self.input_size = input_size
        self.hidden = hidden
        self.dim = dim
        p = input_size * input_size
        rng = np.random.default_rng(seed)
        self.w1 = rng.standard_normal((p, hidden)) * (2.0 / np.sqrt(p))
        self.b1 = np.zeros(hidden)
        self.w2 = rng.standard_normal((hidden, dim)) * (1.0 / np.sqrt(hidden))
        self.b2 = np.zeros(dim)
        self._cache = None

    @property
    def trainable(self) -> bool:
        return True

    @property
    def flops(self) -> float:
        p = self.input_size * self.input_size
        return 2.0 * p * self.hidden + 2.0 * self.hidden * self.dim + 2.0 * self.hidden

    def extract_batch(self, images: np.ndarray) -> np.ndarray:
        flat = _check_input(images, self.input_size)
        h = np.tanh((flat - 0.5) @ self.w1 + self.b1)
        return h @ self.w2 + self.b2

    def forward_batch(self, images: np.ndarray) -> np.ndarray:
        flat = _check_input(images, self.input_size)
        h = np.tanh((flat - 0.5) @ self.w1 + self.b1)
        self._cache = (flat - 0.5, h)
        return h @ self.w2 + self.b2

    def backward(self, grad_out: np.ndarray) -> dict:
        if self._cache is None:
            raise SchemaError("backward called before forward_batch")
        x, h = self._cache
        g_w2 = h.T @ grad_out
        g_b2 = grad_out.sum(0)
        g_h = (grad_out @ self.w2.T) * (1.0 - h * h)
        g_w1 = x.T @ g_h
        g_b1 = g_h.sum(0)
        return {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}

    def sgd_step(self, grads: dict, lr: float) -> None:
        self.w1 -= lr * grads["w1"]
        self.b1 -= lr * grads["b1"]
        self.w2 -= lr * grads["w2"]
        self.b2 -= lr * grads["b2"]


class MatmulChainExtractor(FeatureExtractor):
    """Projection followed by L square tanh layers; FLOPs scale with L.

    Exists so benchmarks can dial feature-extraction compute to any multiple
    of the head's without changing the output dimension.
    """

    def __init__(self, input_size: int, dim: int, n_layers: int, width: int, seed: int = 0):
        self.input_size = input_size
        self.dim = dim
        self.n_layers = n_layers
        self.width = width
        p = input_size * input_size
        rng = np.random.default_rng(seed)
        self.entry = rng.standard_normal((p, width)) * (1.0 / np.sqrt(p))
        self.layers = [
            rng.standard_normal((width, width)) * (1.0 / np.sqrt(width)) for _ in range(n_layers)
        ]
        self.exit = rng.standard_normal((width, dim)) * (1.0 / np.sqrt(width))

    @property
    def flops(self) -> float:
        p = self.input_size * self.input_size
        return 2.0 * p * self.width + self.n_layers * 2.0 * self.width**2 + 2.0 * self.width * self.dim

    def extract_batch(self, images: np.ndarray) -> np.ndarray:
        h = _check_input(images, self.input_size) @ self.entry
        for w in self.layers:
            h = np.tanh(h @ w)
        return h @ self.exit


def sized_chain_extractor(input_size: int, dim: int, min_flops: float, seed: int = 0) -> MatmulChainExtractor:
    """Smallest matmul chain whose declared FLOPs reach ``min_flops``."""
    width = 256
    base = MatmulChainExtractor(input_size, dim, 0, width, seed)
    remaining = max(min_flops - base.flops, 0.0)
    n_layers = int(np.ceil(remaining / (2.0 * width**2)))
    return MatmulChainExtractor(input_size, dim, n_layers, width, seed)
