"""SC and belief-propagation decoding of polar codes over the BEC and AWGN.

BP runs on the factor graph column by column.  One iteration sweeps the
check columns right to left (updating the left-going messages) and then
left to right (updating the right-going messages).  Within a column the
Z subgraphs are independent for a given sweep direction: each output
depends only on the neighboring column's messages and the previous
sweep's opposite-direction messages, so the bottom-to-top (and on the
return sweep top-to-bottom) order is realized by updating all Zs of a
column at once.  Within one Z the top (XOR) check is evaluated before
the bottom (equality) check; with these update rules the two outputs do
not feed each other, so the order is observationally fixed but harmless.

Message arrays are indexed ``L[j, r]`` (left-going message into variable
(j, r) from the check column on its right) and ``R[j, r]`` (right-going
message into (j, r) from its left).  ``L[n]`` holds the channel values
and ``R[0]`` the input priors; both stay fixed.

BEC messages use exact three-valued symbols {0, 1, 2=erased} rather than
infinite LLRs; the fixpoint is identical to erasure peeling, which
:func:`peel_fixpoint` computes directly and serves as the correctness
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ERASED, ChannelOutput
from .factor_graph import FactorGraph, _peel_batch
from .polar import CodeSpec, bitrev_permutation

__all__ = [
    "DecodeResult",
    "Quantizer",
    "sc_decode",
    "bp_decode",
    "peel_fixpoint",
    "DEFAULT_MAX_ITER",
]

DEFAULT_MAX_ITER = 60

# Internal LLR clamp for unquantized decoding: large enough to act as a
# "known" prior, small enough that tanh(x/2) stays strictly inside (-1, 1)
# in float64 so boxplus never produces infinities.
_LLR_CLAMP = 36.0


@dataclass(frozen=True)
class Quantizer:
    """Uniform midtread LLR quantizer with saturation.

    ``bits``-bit quantization over [-clamp, clamp].  Levels are the odd-
    symmetric set {-(2**(bits-1)-1)..(2**(bits-1)-1)} * step so that
    negating the input exactly negates the output; this spends one of the
    2**bits codes to keep the symmetry.
    """

    clamp: float = 20.0
    bits: int = 9

    @property
    def step(self) -> float:
        return 2.0 * self.clamp / (1 << self.bits)

    @property
    def num_levels(self) -> int:
        return (1 << self.bits) - 1

    def __call__(self, x: np.ndarray) -> np.ndarray:
        lim = (1 << (self.bits - 1)) - 1
        k = np.clip(np.round(x / self.step), -lim, lim)
        return k * self.step


@dataclass
class DecodeResult:
    """Outcome of one decoding job.

    ``info_estimate`` is over {0, 1} for LLR channels and {0, 1, 2=erased}
    for the BEC, aligned with the information set.  ``unresolved`` (BEC
    BP only) lists the variable-node ids still erased at the fixpoint.
    ``stage_iterations`` is filled by the concatenated decoder.
    """

    info_estimate: np.ndarray
    iterations_used: int
    converged: bool
    unresolved: frozenset | None = None
    stage_iterations: dict | None = None


# --------------------------------------------------------------------------
# message algebra
# --------------------------------------------------------------------------


def _boxplus(a, b):
    t = np.tanh(np.asarray(a) / 2.0) * np.tanh(np.asarray(b) / 2.0)
    np.clip(t, -0.9999999999999998, 0.9999999999999998, out=t)
    return 2.0 * np.arctanh(t)


def _bec_box(a, b):
    """Check combination over {0,1,2}: erased if either input is erased."""
    return np.where((a == ERASED) | (b == ERASED), ERASED, a ^ b).astype(np.int8)


def _bec_sum(a, b):
    """Variable combination over {0,1,2}: any known input wins."""
    return np.where(a == ERASED, b, a).astype(np.int8)


# --------------------------------------------------------------------------
# successive cancellation
# --------------------------------------------------------------------------


def _sc_awgn_batch(spec: CodeSpec, llr: np.ndarray) -> np.ndarray:
    """SC over LLRs; returns hard input estimates (B, N).

    The recursion runs in the bit-reversed domain, where the decision
    order is sequential: with ub = u o bitrev and yb = y o bitrev, the
    transform satisfies xb = ub F^{(x)n}, and the graph-compatible
    synthetic channels come out in ub order.
    """
    perm = bitrev_permutation(spec.n)
    info = spec.info_mask()[perm]
    u_hat = np.zeros(llr.shape, dtype=np.int8)

    def rec(y: np.ndarray, lo: int) -> np.ndarray:
        M = y.shape[1]
        if M == 1:
            if info[lo]:
                u_hat[:, lo] = (y[:, 0] < 0).astype(np.int8)
            return u_hat[:, lo : lo + 1].copy()
        h = M // 2
        t_up = rec(_boxplus(y[:, :h], y[:, h:]), lo)
        t_lo = rec(y[:, h:] + (1.0 - 2.0 * t_up) * y[:, :h], lo + h)
        return np.concatenate([t_up ^ t_lo, t_lo], axis=1)

    rec(np.asarray(llr, dtype=np.float64)[:, perm], 0)
    return u_hat[:, perm]


def _sc_bec_batch(spec: CodeSpec, sym: np.ndarray) -> np.ndarray:
    """SC over erasure symbols; undecidable bits stay erased (no guessing)."""
    perm = bitrev_permutation(spec.n)
    info = spec.info_mask()[perm]
    u_hat = np.zeros(sym.shape, dtype=np.int8)

    def rec(y: np.ndarray, lo: int) -> np.ndarray:
        M = y.shape[1]
        if M == 1:
            if info[lo]:
                u_hat[:, lo] = y[:, 0]
            return u_hat[:, lo : lo + 1].copy()
        h = M // 2
        t_up = rec(_bec_box(y[:, :h], y[:, h:]), lo)
        left = _bec_box(y[:, :h], t_up)
        t_lo = rec(_bec_sum(y[:, h:], left), lo + h)
        return np.concatenate([_bec_box(t_up, t_lo), t_lo], axis=1)

    rec(np.asarray(sym, dtype=np.int8)[:, perm], 0)
    return u_hat[:, perm]


def sc_decode(spec: CodeSpec, y: ChannelOutput) -> DecodeResult:
    """Successive cancellation decoding; frozen positions decode to 0."""
    data = np.asarray(y.data).reshape(1, -1)
    if data.shape[1] != spec.N:
        raise ValueError(f"expected a length-{spec.N} frame")
    idx = list(spec.info_set)
    if y.kind == "erasure":
        u = _sc_bec_batch(spec, data)[0]
        est = u[idx]
        return DecodeResult(est, 1, converged=bool(np.all(est != ERASED)))
    u = _sc_awgn_batch(spec, data)[0]
    return DecodeResult(u[idx], 1, converged=True)


# --------------------------------------------------------------------------
# belief propagation
# --------------------------------------------------------------------------


def _bp_bec_batch(
    spec: CodeSpec,
    chan: np.ndarray,
    max_iter: int = DEFAULT_MAX_ITER,
    want_residual: bool = False,
):
    """Three-valued BP on a batch of BEC frames.

    Returns (info_estimate (B, K), iters (B,), converged (B,), residual)
    where residual is an (B, num_vars) unresolved-variable mask when
    requested (None otherwise).
    """
    chan = np.asarray(chan, dtype=np.int8)
    B, N = chan.shape
    n = spec.n
    if N != spec.N:
        raise ValueError("frame length mismatch")
    L = np.full((B, n + 1, N), ERASED, dtype=np.int8)
    R = np.full((B, n + 1, N), ERASED, dtype=np.int8)
    L[:, n] = chan
    R[:, 0] = np.where(spec.info_mask(), ERASED, 0).astype(np.int8)

    def column(j):
        b = 1 << (n - 1 - j)
        shape = (B, N // (2 * b), 2, b)
        return (L[:, j].reshape(shape), L[:, j + 1].reshape(shape),
                R[:, j].reshape(shape), R[:, j + 1].reshape(shape))

    iters = np.zeros(B, dtype=np.int64)
    prev_erased = -1
    it = 0
    while it < max_iter:
        it += 1
        for j in range(n - 1, -1, -1):
            Lj, Lj1, Rj, _ = column(j)
            lt, lb = Lj1[:, :, 0], Lj1[:, :, 1]
            rt, rb = Rj[:, :, 0], Rj[:, :, 1]
            Lj[:, :, 0] = _bec_box(lt, _bec_sum(rb, lb))
            Lj[:, :, 1] = _bec_sum(_bec_box(lt, rt), lb)
        for j in range(n):
            _, Lj1, Rj, Rj1 = column(j)
            lt, lb = Lj1[:, :, 0], Lj1[:, :, 1]
            rt, rb = Rj[:, :, 0], Rj[:, :, 1]
            Rj1[:, :, 0] = _bec_box(rt, _bec_sum(rb, lb))
            Rj1[:, :, 1] = _bec_sum(rb, _bec_box(rt, lt))
        erased = int(np.sum(L == ERASED)) + int(np.sum(R == ERASED))
        still = np.any(_bec_sum(R[:, 0], L[:, 0])[:, list(spec.info_set)] == ERASED, axis=1)
        iters[(iters == 0) & ~still] = it
        if erased == prev_erased:
            break
        prev_erased = erased
    iters[iters == 0] = it

    belief0 = _bec_sum(R[:, 0], L[:, 0])
    est = belief0[:, list(spec.info_set)]
    converged = ~np.any(est == ERASED, axis=1)
    residual = None
    if want_residual:
        belief = _bec_sum(R, L)
        residual = (belief == ERASED).reshape(B, -1)
    return est, iters, converged, residual


_STABLE_STREAK = 2  # consecutive agreements of the hard decisions before stopping
_TANH_MAX = np.tanh(_LLR_CLAMP / 2.0)  # < 1 in float64


class _MessageState:
    """Message-domain BP state; used when a quantizer conditions every message."""

    def __init__(self, spec, priors, quantizer):
        B, N = priors.shape
        self.n, self.N, self.q = spec.n, N, quantizer
        self.L = np.zeros((B, self.n + 1, N), dtype=np.float64)
        self.R = np.zeros((B, self.n + 1, N), dtype=np.float64)
        self.L[:, self.n] = quantizer(priors)
        self.R[:, 0] = quantizer(
            np.broadcast_to(np.where(spec.info_mask(), 0.0, quantizer.clamp), (B, N))
        )

    def _zs(self, arr, col, j):
        """Top/bottom row views of variable column ``col`` under check column j's Z pairing."""
        b = 1 << (self.n - 1 - j)
        quad = arr.reshape(arr.shape[0], self.n + 1, self.N // (2 * b), 2, b)
        return quad[:, col, :, 0], quad[:, col, :, 1]

    @staticmethod
    def _box(a, b):
        t = np.tanh(a / 2.0) * np.tanh(b / 2.0)
        np.clip(t, -_TANH_MAX, _TANH_MAX, out=t)
        return 2.0 * np.arctanh(t)

    def sweep(self):
        n, q = self.n, self.q
        for j in range(n - 1, -1, -1):
            lt, lb = self._zs(self.L, j + 1, j)
            rt, rb = self._zs(self.R, j, j)
            ot, ob = self._zs(self.L, j, j)
            ot[...] = q(self._box(lt, rb + lb))
            ob[...] = q(self._box(lt, rt) + lb)
        for j in range(n):
            lt, lb = self._zs(self.L, j + 1, j)
            rt, rb = self._zs(self.R, j, j)
            ot, ob = self._zs(self.R, j + 1, j)
            ot[...] = q(self._box(rt, rb + lb))
            ob[...] = q(self._box(rt, lt) + rb)

    def hard(self, info_idx):
        belief = self.R[:, 0][:, info_idx] + self.L[:, 0][:, info_idx]
        return (belief < 0).astype(np.int8)

    def compact(self, keep):
        self.L, self.R = self.L[keep], self.R[keep]


class _TanhState:
    """Unquantized BP carried in the tanh half-angle domain.

    Storing t = tanh(msg / 2) turns the check combination into a product
    and the variable sum into (t1 + t2) / (1 + t1 t2), so an iteration
    costs no transcendentals.  Clipping |t| at tanh(clamp / 2) is exactly
    the wide internal message clamp, tanh being monotone.
    """

    def __init__(self, spec, priors, _quantizer_unused=None):
        B, N = priors.shape
        self.n, self.N = spec.n, N
        self.L = np.zeros((B, self.n + 1, N), dtype=np.float64)
        self.R = np.zeros((B, self.n + 1, N), dtype=np.float64)
        self.L[:, self.n] = np.tanh(np.clip(priors, -_LLR_CLAMP, _LLR_CLAMP) / 2.0)
        self.R[:, 0] = np.where(spec.info_mask(), 0.0, _TANH_MAX)

    _zs = _MessageState._zs

    @staticmethod
    def _sum(a, b):
        out = (a + b) / (1.0 + a * b)
        np.clip(out, -_TANH_MAX, _TANH_MAX, out=out)
        return out

    def sweep(self):
        n = self.n
        for j in range(n - 1, -1, -1):
            lt, lb = self._zs(self.L, j + 1, j)
            rt, rb = self._zs(self.R, j, j)
            ot, ob = self._zs(self.L, j, j)
            ot[...] = lt * self._sum(rb, lb)
            ob[...] = self._sum(lt * rt, lb)
        for j in range(n):
            lt, lb = self._zs(self.L, j + 1, j)
            rt, rb = self._zs(self.R, j, j)
            ot, ob = self._zs(self.R, j + 1, j)
            ot[...] = rt * self._sum(rb, lb)
            ob[...] = self._sum(rt * lt, rb)

    def hard(self, info_idx):
        t = self._sum(self.R[:, 0][:, info_idx], self.L[:, 0][:, info_idx])
        return (t < 0).astype(np.int8)

    compact = _MessageState.compact


def _bp_awgn_batch(
    spec: CodeSpec,
    priors: np.ndarray,
    max_iter: int = DEFAULT_MAX_ITER,
    quantizer: Quantizer | None = None,
):
    """LLR BP on a batch of frames; returns (hard info (B, K), iters, converged).

    ``priors`` are per-code-bit channel LLRs.  A frame stops early once its
    hard decisions have stayed unchanged over consecutive iterations
    (streak of ``_STABLE_STREAK``); ``iters`` reports the iteration at
    which the final decision first appeared, which is what the average-
    iteration statistic aggregates.  With a quantizer, every message and
    prior is clamped and quantized; otherwise a wide internal clamp keeps
    boxplus finite.
    """
    priors = np.asarray(priors, dtype=np.float64)
    B, N = priors.shape
    if N != spec.N:
        raise ValueError("frame length mismatch")
    info_idx = np.fromiter(spec.info_set, dtype=np.int64)
    state = (
        _MessageState(spec, priors, quantizer)
        if quantizer is not None
        else _TanhState(spec, priors)
    )

    hard_out = np.zeros((B, info_idx.size), dtype=np.int8)
    iters_out = np.full(B, max_iter, dtype=np.int64)
    conv_out = np.zeros(B, dtype=bool)

    active = np.arange(B)
    # -1 init: the first iteration can never count as an agreement
    hard_prev = np.full((active.size, info_idx.size), -1, dtype=np.int8)
    stable = np.zeros(active.size, dtype=np.int64)

    it = 0
    while it < max_iter and active.size:
        it += 1
        state.sweep()
        hard = state.hard(info_idx)
        same = np.all(hard == hard_prev, axis=1)
        stable = np.where(same, stable + 1, 0)
        hard_prev = hard
        done = stable >= _STABLE_STREAK
        hard_out[active] = hard
        if done.any() or it == max_iter:
            finished = done if it < max_iter else np.ones_like(done)
            idx = active[finished]
            iters_out[idx] = np.where(done[finished], it - stable[finished], max_iter)
            conv_out[idx] = done[finished]
            keep = ~finished
            active = active[keep]
            state.compact(keep)
            hard_prev, stable = hard_prev[keep], stable[keep]

    return hard_out, iters_out, conv_out


def bp_decode(
    spec: CodeSpec,
    g: FactorGraph,
    y: ChannelOutput,
    max_iter: int = DEFAULT_MAX_ITER,
    quantizer: Quantizer | None = None,
) -> DecodeResult:
    """Belief propagation on the factor graph with the column sweep schedule."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if g.n != spec.n:
        raise ValueError("graph depth does not match the code spec")
    data = np.asarray(y.data).reshape(1, -1)
    if data.shape[1] != spec.N:
        raise ValueError(f"expected a length-{spec.N} frame")
    if y.kind == "erasure":
        est, iters, conv, residual = _bp_bec_batch(
            spec, data, max_iter=max_iter, want_residual=True
        )
        ids = frozenset(int(v) for v in np.flatnonzero(residual[0]))
        return DecodeResult(est[0], int(iters[0]), bool(conv[0]), unresolved=ids)
    hard, iters, conv = _bp_awgn_batch(spec, data, max_iter=max_iter, quantizer=quantizer)
    return DecodeResult(hard[0], int(iters[0]), bool(conv[0]))


def peel_fixpoint(g: FactorGraph, spec: CodeSpec, erased_codebits) -> frozenset:
    """Erasure peeling residual: the maximal stopping set within the erased bits.

    Starts from the decoder's knowledge (frozen inputs and non-erased code
    bits) and repeatedly resolves any variable that is the single unknown
    neighbor of some check.  Returns the unresolved variable ids.
    """
    erased = sorted(int(i) for i in erased_codebits)
    if erased and not (0 <= erased[0] and erased[-1] < g.N):
        raise ValueError("erased code-bit index out of range")
    known = np.zeros((1, g.num_vars + 1), dtype=bool)
    known[0, -1] = True
    known[0, : g.N] = ~spec.info_mask()
    known[0, g.n * g.N : g.num_vars] = True
    known[0, [g.n * g.N + i for i in erased]] = False
    done = _peel_batch(g, known)
    return frozenset(int(v) for v in np.flatnonzero(~done[0, :-1]))
