"""Head-scaling microbenchmark: memory is exact arithmetic, time is measured.

Parameter memory of a K-way head is exactly K*(D+1) scalars, linear in K.
Forward latency is measured per single example with a warmup and a median
over many repetitions; when the extractor's FLOPs dwarf the head's, total
latency should be nearly flat in K.
"""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .features import sized_chain_extractor

BYTES_PER_SCALAR = 8  # float64 parameters


@dataclass(frozen=True)
class BenchRow:
    k: int
    param_scalars: int
    param_bytes: int
    head_flops: float
    extractor_flops: float
    median_total_ms: float
    median_head_ms: float
    head_share: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def head_param_scalars(k: int, dim: int) -> int:
    return k * (dim + 1)


def head_flops(k: int, dim: int) -> float:
    return 2.0 * k * dim


def bench_head_scaling(
    dim: int,
    k_grid,
    extractor_flops: float,
    repeats: int = 120,
    input_size: int = 32,
    seed: int = 0,
) -> list:
    """Measure forward latency and exact head memory across a K grid.

    Timing samples for the different K values are interleaved round-robin so
    ambient load drift hits every grid point equally; the reported figure is
    the per-K median.
    """
    k_grid = list(k_grid)
    if any(b <= a for a, b in zip(k_grid, k_grid[1:])):
        raise ConfigurationError("K grid must be strictly ascending")
    extractor = sized_chain_extractor(input_size, dim, extractor_flops, seed)
    rng = np.random.default_rng(seed)
    image = rng.random((input_size, input_size))

    heads = [(rng.standard_normal((k, dim)) * 0.01, np.zeros(k)) for k in k_grid]
    feature = extractor.extract(image)
    for w, b in heads:  # warmup every head and the extractor
        for _ in range(5):
            extractor.extract(image)
            w @ feature + b

    total_s = np.empty((len(k_grid), repeats))
    head_s = np.empty((len(k_grid), repeats))
    for rep in range(repeats):
        for i, (w, b) in enumerate(heads):
            t0 = time.perf_counter()
            f = extractor.extract(image)
            w @ f + b
            total_s[i, rep] = time.perf_counter() - t0
            t0 = time.perf_counter()
            w @ feature + b
            head_s[i, rep] = time.perf_counter() - t0

    rows = []
    for i, k in enumerate(k_grid):
        total_ms = float(np.median(total_s[i]) * 1e3)
        head_ms = float(np.median(head_s[i]) * 1e3)
        rows.append(
            BenchRow(
                k=k,
                param_scalars=head_param_scalars(k, dim),
                param_bytes=head_param_scalars(k, dim) * BYTES_PER_SCALAR,
                head_flops=head_flops(k, dim),
                extractor_flops=extractor.flops,
                median_total_ms=total_ms,
                median_head_ms=min(head_ms, total_ms),
                head_share=min(head_ms / total_ms, 1.0) if total_ms > 0 else 0.0,
            )
        )
    return rows


def machine_fingerprint() -> str:
    return f"{platform.machine()}/{platform.system()}/python{platform.python_version()}"
