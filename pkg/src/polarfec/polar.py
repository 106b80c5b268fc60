"""Polar code specification, reliability-based construction, and encoding.

Conventions used throughout the package
---------------------------------------
* All indices are 0-based.  Input bit ``i`` corresponds to row ``i`` of the
  n-th Kronecker power of the kernel ``F = [[1, 0], [1, 1]]``.
* The encoder computes ``x = u @ F^{(x)n}`` over GF(2) (no bit-reversal
  permutation).
* The factor graph joins its two half-graphs at the input side, so the
  intermediate variables next to ``u`` combine rows at distance N/2.  The
  successive cancellation decoder compatible with that realization applies
  the channel transform for bit ``k`` of an input index at recursion level
  ``k`` (least significant innermost); its decision order is the
  bit-reversal permutation, and the synthetic-channel vector follows the
  recursion z -> [2z - z**2 ; z**2] on concatenated halves.
* Frozen positions are fixed to 0 and known to the decoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CodeSpec",
    "ReliabilityProfile",
    "row_weight",
    "polar_transform",
    "encode",
    "bitrev_permutation",
    "bhattacharyya_bec",
    "awgn_reliability",
    "select_info_set",
    "select_info_set_new_rule",
    "write_spec",
    "read_spec",
]


@dataclass(frozen=True)
class CodeSpec:
    """A polar code: depth ``n``, block length ``N = 2**n`` and information set."""

    n: int
    info_set: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"depth n must be >= 1, got {self.n}")
        ordered = tuple(sorted(set(self.info_set)))
        if ordered != tuple(self.info_set):
            object.__setattr__(self, "info_set", ordered)
        if self.info_set and not (0 <= self.info_set[0] and self.info_set[-1] < self.N):
            raise ValueError("info_set indices out of range [0, N)")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def K(self) -> int:
        return len(self.info_set)

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def frozen_set(self) -> tuple[int, ...]:
        info = set(self.info_set)
        return tuple(i for i in range(self.N) if i not in info)

    def info_mask(self) -> np.ndarray:
        """Boolean mask of length N, True at information positions."""
        mask = np.zeros(self.N, dtype=bool)
        mask[list(self.info_set)] = True
        return mask


@dataclass(frozen=True)
class ReliabilityProfile:
    """Per-bit-channel quality scores; smaller is more reliable.

    For the BEC these are exact erasure probabilities of the synthetic
    channels (Bhattacharyya parameters, in [0, 1]).  For the AWGN channel
    they are Monte Carlo estimates of the genie-aided SC error probability.
    """

    values: np.ndarray
    channel_tag: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or (v.size & (v.size - 1)) != 0:
            raise ValueError("values must be a 1-D vector of power-of-two length")

    @property
    def n(self) -> int:
        return int(self.values.size).bit_length() - 1


def row_weight(i: int, n: int) -> int:
    """Hamming weight of row ``i`` of the n-th kernel power: ``2**popcount(i)``."""
    if not 0 <= i < (1 << n):
        raise ValueError(f"index {i} out of range for n={n}")
    return 1 << int(i).bit_count()


def polar_transform(u: np.ndarray) -> np.ndarray:
    """Apply the n-stage butterfly ``x = u @ F^{(x)n}`` over GF(2).

    Accepts a single block of length N or a batch shaped (B, N).  The
    transform is an involution, so the same routine inverts it.
    """
    u = np.asarray(u, dtype=np.uint8)
    single = u.ndim == 1
    x = u.reshape(1, -1).copy() if single else u.copy()
    N = x.shape[-1]
    if N & (N - 1):
        raise ValueError("block length must be a power of two")
    stride = 1
    while stride < N:
        blocks = x.reshape(x.shape[0], -1, 2, stride)
        blocks[:, :, 0, :] ^= blocks[:, :, 1, :]
        stride <<= 1
    return x[0] if single else x


def encode(spec: CodeSpec, info_bits: np.ndarray) -> np.ndarray:
    """Scatter info bits into the information set, zeros elsewhere, and transform."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    single = info_bits.ndim == 1
    batch = info_bits.reshape(1, -1) if single else info_bits
    if batch.shape[-1] != spec.K:
        raise ValueError(f"expected {spec.K} info bits, got {batch.shape[-1]}")
    u = np.zeros((batch.shape[0], spec.N), dtype=np.uint8)
    u[:, list(spec.info_set)] = batch
    x = polar_transform(u)
    return x[0] if single else x


def bitrev_permutation(n: int) -> np.ndarray:
    """The self-inverse permutation reversing the n-bit representation of indices."""
    idx = np.arange(1 << n)
    rev = np.zeros_like(idx)
    for k in range(n):
        rev |= (((idx >> k) & 1) << (n - 1 - k))
    return rev


def bhattacharyya_bec(eps: float, n: int) -> ReliabilityProfile:
    """Exact erasure probabilities of the N synthetic channels of a BEC(eps).

    One polarization step maps a channel with parameter z to the pair
    ``2z - z**2`` (degraded) and ``z**2`` (upgraded).  The step for a less
    significant bit of the index is applied closer to the raw channel, so
    each stage maps the running vector z to [2z - z**2 ; z**2] on
    concatenated halves.  Index 0 collects all degraded steps, index N-1
    all upgraded ones.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"erasure probability must be in [0, 1], got {eps}")
    z = np.array([eps], dtype=float)
    for _ in range(n):
        z = np.concatenate([2.0 * z - z * z, z * z])
    return ReliabilityProfile(values=z, channel_tag=f"bec:eps={eps}")


def _boxplus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact LLR check-node combination 2*atanh(tanh(a/2)*tanh(b/2))."""
    t = np.tanh(a / 2.0) * np.tanh(b / 2.0)
    np.clip(t, -0.9999999999999998, 0.9999999999999998, out=t)
    return 2.0 * np.arctanh(t)


def _genie_error_rates(llr: np.ndarray) -> np.ndarray:
    """Per-position decision error fractions of genie-aided SC on a batch.

    ``llr`` has shape (frames, M) and holds channel LLRs for the all-zero
    codeword.  With every preceding decision corrected by the genie, the
    feedback partial sums are all zero, so the recursion has no
    data-dependent branch and vectorizes across frames.  Positions come
    out in the bit-reversed decision order; the caller un-permutes.
    """
    M = llr.shape[1]
    if M == 1:
        col = llr[:, 0]
        return np.array([np.mean(col < 0) + 0.5 * np.mean(col == 0)])
    h = M // 2
    upper = _genie_error_rates(_boxplus(llr[:, :h], llr[:, h:]))
    lower = _genie_error_rates(llr[:, h:] + llr[:, :h])
    return np.concatenate([upper, lower])


def awgn_reliability(
    sigma: float, n: int, budget: int = 100_000, seed: int = 0
) -> ReliabilityProfile:
    """Monte Carlo genie-aided SC error estimates for a binary-input AWGN channel.

    Transmits the all-zero codeword (sufficient by channel symmetry) over
    ``budget`` frames and records, for each input position, how often the
    genie-aided SC decision LLR had the wrong sign.  Deterministic for a
    fixed seed.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    N = 1 << n
    rng = np.random.default_rng(seed)
    errs = np.zeros(N, dtype=float)
    done = 0
    chunk = max(1, min(budget, (1 << 22) // N))
    while done < budget:
        b = min(chunk, budget - done)
        y = 1.0 + sigma * rng.standard_normal((b, N))
        llr = 2.0 * y / (sigma * sigma)
        errs += b * _genie_error_rates(llr)
        done += b
    errs = errs[bitrev_permutation(n)]  # decision order -> input index order
    return ReliabilityProfile(
        values=errs / budget, channel_tag=f"awgn:sigma={sigma}:budget={budget}"
    )


def _reliability_order(profile: ReliabilityProfile) -> np.ndarray:
    """Indices from most to least reliable; ties prefer the larger index."""
    v = profile.values
    idx = np.arange(v.size)
    return np.lexsort((-idx, v))


def select_info_set(profile: ReliabilityProfile, K: int) -> CodeSpec:
    """Pick the K most reliable positions (smallest scores) as information bits."""
    N = profile.values.size
    if not 0 <= K <= N:
        raise ValueError(f"K must be in [0, {N}], got {K}")
    order = _reliability_order(profile)
    return CodeSpec(n=profile.n, info_set=tuple(sorted(int(i) for i in order[:K])))


def select_info_set_new_rule(
    profile: ReliabilityProfile,
    K: int,
    leaf_threshold: int,
    candidate_cap_ratio: float | None = 1.5,
) -> tuple[CodeSpec, int]:
    """Information-set selection that trades low-weight rows for frozen ones.

    Starts from :func:`select_info_set`.  Every chosen index whose row
    weight is below ``leaf_threshold`` is swapped for the frozen index that
    has row weight >= ``leaf_threshold`` and the best reliability score
    among the remaining candidates.  Deficient indices are processed in
    increasing row-weight order so the weakest rows are replaced first.

    A frozen index only qualifies as a candidate while its score stays
    below ``candidate_cap_ratio`` times the worst score the standard rule
    accepted: replacements materially less reliable than the code's own
    marginal channel would wreck the error rate rather than trade it for
    stopping distance.  Pass ``None`` to swap all the way down the pool.

    Returns the resulting spec together with the shortfall: the number of
    deficient indices kept because no candidate remained.
    """
    if leaf_threshold < 1 or (leaf_threshold & (leaf_threshold - 1)):
        raise ValueError("leaf_threshold must be a power of two")
    base = select_info_set(profile, K)
    n = profile.n
    chosen = set(base.info_set)
    weights = {i: row_weight(i, n) for i in range(profile.values.size)}

    cap = None
    if candidate_cap_ratio is not None and chosen:
        cap = candidate_cap_ratio * max(profile.values[i] for i in chosen)
    deficient = sorted(
        (i for i in chosen if weights[i] < leaf_threshold),
        key=lambda i: (weights[i], profile.values[i], -i),
    )
    candidates = [
        int(i)
        for i in _reliability_order(profile)
        if i not in chosen
        and weights[int(i)] >= leaf_threshold
        and (cap is None or profile.values[i] <= cap)
    ]
    shortfall = 0
    for i in deficient:
        if candidates:
            chosen.remove(i)
            chosen.add(candidates.pop(0))
        else:
            shortfall += 1
    return CodeSpec(n=n, info_set=tuple(sorted(chosen))), shortfall


def write_spec(
    path: str | Path,
    spec: CodeSpec,
    rule: str = "standard",
    channel_param: float | None = None,
    seed: int | None = None,
) -> None:
    """Serialize a CodeSpec plus construction metadata to a JSON text file."""
    if rule not in ("standard", "new"):
        raise ValueError(f"rule must be 'standard' or 'new', got {rule!r}")
    payload = {
        "n": spec.n,
        "rate": spec.rate,
        "rule": rule,
        "channel_param": channel_param,
        "seed": seed,
        "info_set": list(spec.info_set),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_spec(path: str | Path) -> tuple[CodeSpec, dict]:
    """Load a CodeSpec written by :func:`write_spec`; returns (spec, metadata)."""
    payload = json.loads(Path(path).read_text())
    spec = CodeSpec(n=int(payload["n"]), info_set=tuple(int(i) for i in payload["info_set"]))
    meta = {k: payload.get(k) for k in ("rate", "rule", "channel_param", "seed")}
    if meta["rate"] is not None and round(meta["rate"] * spec.N) != spec.K:
        raise ValueError(f"{path}: rate field inconsistent with info_set length")
    return spec, meta
