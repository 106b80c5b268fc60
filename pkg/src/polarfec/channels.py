"""Stochastic channel models producing decoder inputs.

BEC outputs are three-valued symbol vectors (0, 1, or 2 = erased); AWGN
outputs are LLR vectors for BPSK with the mapping 0 -> +1, 1 -> -1 and
LLR = 2y / sigma**2 (positive LLR favors bit 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ERASED",
    "ChannelOutput",
    "bec_transmit",
    "awgn_transmit",
    "ebn0_db_to_sigma",
    "bi_awgn_capacity",
    "sigma_for_capacity",
]

ERASED = np.int8(2)


@dataclass(frozen=True)
class ChannelOutput:
    """One received frame: erasure symbols or LLRs, plus the channel parameter."""

    kind: str  # "erasure" | "llr"
    data: np.ndarray
    param: float

    def __post_init__(self):
        if self.kind not in ("erasure", "llr"):
            raise ValueError(f"unknown channel output kind {self.kind!r}")

    def erasure_mask(self) -> np.ndarray:
        if self.kind != "erasure":
            raise ValueError("erasure_mask is only defined for BEC outputs")
        return self.data == ERASED


def bec_transmit(x: np.ndarray, eps: float, seed=0) -> ChannelOutput:
    """Erase each bit independently with probability eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"erasure probability must be in [0, 1], got {eps}")
    x = np.asarray(x, dtype=np.int8)
    rng = np.random.default_rng(seed)
    out = x.copy()
    out[rng.random(x.shape) < eps] = ERASED
    return ChannelOutput(kind="erasure", data=out, param=eps)


def awgn_transmit(x: np.ndarray, sigma: float, seed=0) -> ChannelOutput:
    """BPSK over AWGN with noise standard deviation sigma; returns LLRs."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=np.int8)
    rng = np.random.default_rng(seed)
    s = 1.0 - 2.0 * x.astype(np.float64)
    y = s + sigma * rng.standard_normal(x.shape)
    return ChannelOutput(kind="llr", data=2.0 * y / (sigma * sigma), param=sigma)


def ebn0_db_to_sigma(ebn0_db: float, rate_eff: float) -> float:
    """Noise standard deviation for a given Eb/N0 (dB) at effective code rate."""
    if rate_eff <= 0:
        raise ValueError("effective rate must be positive")
    return math.sqrt(1.0 / (2.0 * rate_eff * 10.0 ** (ebn0_db / 10.0)))


def bi_awgn_capacity(sigma: float, points: int = 4001) -> float:
    """Capacity (bits/use) of the binary-input AWGN channel at noise level sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    # E over y ~ N(1, sigma^2) of log2(1 + exp(-2y/sigma^2))
    y = np.linspace(1.0 - 10.0 * sigma, 1.0 + 10.0 * sigma, points)
    pdf = np.exp(-((y - 1.0) ** 2) / (2 * sigma * sigma)) / (sigma * math.sqrt(2 * math.pi))
    loss = np.logaddexp(0.0, -2.0 * y / (sigma * sigma)) / math.log(2.0)
    return 1.0 - float(np.trapezoid(pdf * loss, y))


def sigma_for_capacity(capacity: float) -> float:
    """Noise level at which the binary-input AWGN channel has the given capacity."""
    if not 0.0 < capacity < 1.0:
        raise ValueError("capacity must be in (0, 1)")
    lo, hi = 1e-2, 20.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bi_awgn_capacity(mid) > capacity:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
