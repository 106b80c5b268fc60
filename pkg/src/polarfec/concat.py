"""Polar-outer / LDPC-inner concatenated pipeline with a configurable rate split.

Encoding feeds the polar codeword into the systematic positions of the
LDPC code.  Decoding is one-shot sequential: the LDPC decoder runs to
completion, its posterior LLRs at the systematic positions become the
channel priors of the polar BP decoder, and the polar stage finishes the
job.  There is no turbo-style iteration between the stages, and the
hand-off carries posteriors (not extrinsics): the inner decoder's full
belief is the best single-shot summary available to the outer stage.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import ChannelOutput, ERASED, sigma_for_capacity
from .decoders import DecodeResult, Quantizer, _bp_awgn_batch
from .factor_graph import FactorGraph, build_graph
from .ldpc import (
    LdpcRankError,
    OTN_DEGREE_PAIR,
    ParityCheckMatrix,
    _ldpc_bp_batch,
    construct_peg,
    ldpc_encode,
    read_alist,
    systematic_columns,
    write_alist,
)
from .polar import CodeSpec, awgn_reliability, encode, read_spec, select_info_set, write_spec

__all__ = ["ConcatSpec", "build_concat_spec", "concat_encode", "concat_decode",
           "write_concat_spec", "read_concat_spec"]


@dataclass
class ConcatSpec:
    """The two codes plus the interface between them."""

    polar: CodeSpec
    graph: FactorGraph
    ldpc: ParityCheckMatrix
    systematic_idx: np.ndarray
    target_r_eff: float = 0.93

    def __post_init__(self):
        if self.systematic_idx.size != self.polar.N:
            raise ValueError(
                f"interface width mismatch: LDPC carries {self.systematic_idx.size} "
                f"systematic bits, polar block is {self.polar.N}"
            )
        if self.graph.n != self.polar.n:
            raise ValueError("factor graph depth does not match the polar spec")
        if abs(self.r_eff - self.target_r_eff) > 1e-3:
            raise ValueError(
                f"effective rate {self.r_eff:.5f} misses target {self.target_r_eff} by > 1e-3"
            )

    @property
    def r_p(self) -> float:
        return self.polar.rate

    @property
    def r_l(self) -> float:
        return self.polar.N / self.ldpc.n_cols

    @property
    def r_eff(self) -> float:
        return self.r_p * self.r_l

    @property
    def k(self) -> int:
        return self.polar.K

    @property
    def n_channel(self) -> int:
        return self.ldpc.n_cols


def build_concat_spec(
    n: int,
    r_p: float = 0.979,
    r_l: float = 0.95,
    dist=OTN_DEGREE_PAIR,
    target_r_eff: float = 0.93,
    construction_budget: int = 50_000,
    seed: int = 0,
    max_ldpc_attempts: int = 8,
) -> ConcatSpec:
    """Assemble the two-code pipeline for a given polar depth and rate split.

    The polar code is designed for an AWGN channel whose capacity equals
    its own rate (the inner decoder's output is modeled as that channel),
    via Monte Carlo reliability estimation.  The LDPC length is the polar
    block length divided by the inner rate; rank-deficient draws are
    re-seeded.
    """
    N = 1 << n
    k_p = int(round(r_p * N))
    sigma_design = sigma_for_capacity(r_p)
    profile = awgn_reliability(sigma_design, n, budget=construction_budget, seed=seed)
    polar = select_info_set(profile, k_p)

    n_l = int(round(N / r_l))
    ldpc = None
    for attempt in range(max_ldpc_attempts):
        cand = construct_peg(dist, n_l, rate=N / n_l, seed=seed + 1000 * attempt)
        try:
            sys_idx = systematic_columns(cand)
        except LdpcRankError:
            continue
        ldpc = cand
        break
    if ldpc is None:
        raise LdpcRankError(f"no full-rank LDPC found in {max_ldpc_attempts} attempts")
    return ConcatSpec(
        polar=polar,
        graph=build_graph(n),
        ldpc=ldpc,
        systematic_idx=sys_idx,
        target_r_eff=target_r_eff,
    )


def concat_encode(cs: ConcatSpec, info: np.ndarray) -> np.ndarray:
    """Polar-encode, then LDPC-encode the polar codeword as information bits."""
    info = np.asarray(info, dtype=np.uint8)
    single = info.ndim == 1
    batch = info.reshape(1, -1) if single else info
    if batch.shape[1] != cs.k:
        raise ValueError(f"expected {cs.k} info bits, got {batch.shape[1]}")
    inner = ldpc_encode(cs.ldpc, encode(cs.polar, batch))
    return inner[0] if single else inner


def _concat_decode_batch(
    cs: ConcatSpec,
    llr: np.ndarray,
    iters: tuple[int, int] = (60, 60),
    quantizer: Quantizer | None = None,
    skip_polar: bool = False,
):
    """Two-stage decode of a batch; returns (hard, ldpc_iters, polar_iters, conv)."""
    post, ldpc_hard, ldpc_conv, ldpc_iters = _ldpc_bp_batch(
        cs.ldpc, llr, max_iter=iters[0], quantizer=quantizer
    )
    priors = post[:, cs.systematic_idx]
    if skip_polar:
        hard = ldpc_hard[:, cs.systematic_idx]
        return hard, ldpc_iters, np.zeros_like(ldpc_iters), ldpc_conv
    hard, polar_iters, polar_conv = _bp_awgn_batch(
        cs.polar, priors, max_iter=iters[1], quantizer=quantizer
    )
    return hard, ldpc_iters, polar_iters, ldpc_conv & polar_conv


def concat_decode(
    cs: ConcatSpec,
    y: ChannelOutput,
    iters: tuple[int, int] = (60, 60),
    quantizer: Quantizer | None = None,
    skip_polar: bool = False,
) -> DecodeResult:
    """LDPC BP to completion, posterior hand-off, then polar BP.

    With ``skip_polar`` the result carries the inner decoder's hard
    decisions at the systematic positions (the polar codeword estimate),
    which is bit-exactly ``ldpc_bp_decode`` restricted to those columns.
    """
    if y.kind == "llr":
        data = np.asarray(y.data, dtype=np.float64).reshape(1, -1)
    else:
        sym = np.asarray(y.data).reshape(1, -1)
        data = np.where(sym == ERASED, 0.0, 1.0 - 2.0 * sym.astype(np.float64)) * 36.0
    if data.shape[1] != cs.n_channel:
        raise ValueError(f"expected a length-{cs.n_channel} frame")
    hard, li, pi, conv = _concat_decode_batch(
        cs, data, iters=iters, quantizer=quantizer, skip_polar=skip_polar
    )
    return DecodeResult(
        info_estimate=hard[0],
        iterations_used=int(li[0] + pi[0]),
        converged=bool(conv[0]),
        stage_iterations={"ldpc": int(li[0]), "polar": int(pi[0])},
    )


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_concat_spec(
    path, cs: ConcatSpec, polar_path, ldpc_path, seed: int | None = None
) -> None:
    """Serialize by reference: component file paths plus their checksums."""
    write_spec(polar_path, cs.polar, channel_param=None, seed=seed)
    write_alist(cs.ldpc, ldpc_path)
    payload = {
        "polar_spec": str(polar_path),
        "polar_sha256": _sha256(polar_path),
        "ldpc_alist": str(ldpc_path),
        "ldpc_sha256": _sha256(ldpc_path),
        "target_r_eff": cs.target_r_eff,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_concat_spec(path) -> ConcatSpec:
    payload = json.loads(Path(path).read_text())
    base = Path(path).parent
    for key in ("polar_spec", "ldpc_alist"):
        p = Path(payload[key])
        if not p.is_absolute():
            p = base / p
        payload[key] = p
    if _sha256(payload["polar_spec"]) != payload["polar_sha256"]:
        raise ValueError("polar spec checksum mismatch")
    if _sha256(payload["ldpc_alist"]) != payload["ldpc_sha256"]:
        raise ValueError("ldpc alist checksum mismatch")
    polar, _ = read_spec(payload["polar_spec"])
    ldpc = read_alist(payload["ldpc_alist"])
    return ConcatSpec(
        polar=polar,
        graph=build_graph(polar.n),
        ldpc=ldpc,
        systematic_idx=systematic_columns(ldpc),
        target_r_eff=float(payload.get("target_r_eff", 0.93)),
    )
