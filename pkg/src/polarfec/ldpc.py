"""Irregular LDPC construction (progressive edge growth), BP decoding, and alist I/O.

Degree distributions are edge-perspective polynomials: ``lambda_coeffs``
lists (degree, fraction of edges) for variable nodes and ``rho_coeffs``
the same for check nodes.  Construction plans integer degree sequences
from the distribution, then places edges one at a time, each time
connecting the current variable to a check that is as far away as
possible in the graph built so far (largest local girth), preferring
low-fill checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .factor_graph import _girth_bfs

__all__ = [
    "DegreeDistribution",
    "ParityCheckMatrix",
    "LdpcDecodeResult",
    "LdpcRankError",
    "OTN_DEGREE_PAIR",
    "construct_peg",
    "ldpc_encode",
    "ldpc_bp_decode",
    "tanner_girth",
    "write_alist",
    "read_alist",
]

_LLR_CLAMP = 36.0
_TANH_FLOOR = 1e-12


class LdpcRankError(RuntimeError):
    """Parity-check matrix is rank deficient; re-seed the construction."""


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective variable/check degree distribution pair."""

    lambda_coeffs: tuple
    rho_coeffs: tuple

    def __post_init__(self):
        for name, coeffs in (("lambda", self.lambda_coeffs), ("rho", self.rho_coeffs)):
            fr = sum(f for _, f in coeffs)
            if abs(fr - 1.0) > 1e-9:
                raise ValueError(f"{name} fractions sum to {fr}, expected 1")
            for d, f in coeffs:
                if d < 2 or f < 0:
                    raise ValueError(f"bad {name} term ({d}, {f})")

    def mean_var_degree(self) -> float:
        return 1.0 / sum(f / d for d, f in self.lambda_coeffs)

    def mean_check_degree(self) -> float:
        return 1.0 / sum(f / d for d, f in self.rho_coeffs)

    def design_rate(self) -> float:
        return 1.0 - self.mean_var_degree() / self.mean_check_degree()

    @classmethod
    def regular(cls, dv: int, dc: int) -> "DegreeDistribution":
        return cls(lambda_coeffs=((dv, 1.0),), rho_coeffs=((dc, 1.0),))


# Stock AWGN-optimized pair with design rate 0.93 and BP threshold near
# sigma = 0.47; used by the bundled OTN-style concatenated configuration.
OTN_DEGREE_PAIR = DegreeDistribution(
    lambda_coeffs=(
        (2, 0.156935),
        (3, 0.138295),
        (4, 0.325131),
        (12, 0.168818),
        (13, 0.210821),
    ),
    rho_coeffs=(
        (35, 0.039239),
        (36, 0.144375),
        (71, 0.302308),
        (72, 0.514078),
    ),
)


@dataclass(eq=False)
class ParityCheckMatrix:
    """Sparse parity-check matrix: one sorted column-index array per check row."""

    n_cols: int
    rows: list
    seed: int | None = None

    def __post_init__(self):
        for r, cols in enumerate(self.rows):
            arr = np.asarray(cols, dtype=np.int64)
            if arr.size == 0 or arr.min() < 0 or arr.max() >= self.n_cols:
                raise ValueError(f"row {r}: column index out of range")
            if np.unique(arr).size != arr.size:
                raise ValueError(f"row {r}: duplicate edge")
            self.rows[r] = np.sort(arr)
        self._edges = None
        self._encoder = None

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def k(self) -> int:
        return self.n_cols - self.m

    @property
    def num_edges(self) -> int:
        return int(sum(r.size for r in self.rows))

    def var_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_cols, dtype=np.int64)
        for r in self.rows:
            deg[r] += 1
        return deg

    def check_degrees(self) -> np.ndarray:
        return np.array([r.size for r in self.rows], dtype=np.int64)

    def empirical_lambda(self) -> dict:
        """Fraction of edges attached to variables of each degree."""
        deg = self.var_degrees()
        e = self.num_edges
        return {int(d): float(deg[deg == d].sum() / e) for d in np.unique(deg[deg > 0])}

    def empirical_rho(self) -> dict:
        deg = self.check_degrees()
        e = self.num_edges
        return {int(d): float(deg[deg == d].sum() / e) for d in np.unique(deg)}

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        return np.array([bits[r].sum() % 2 for r in self.rows], dtype=np.uint8)

    def edge_arrays(self):
        """CSR-style edge layout cached for the decoder.

        Returns (check_ptr, edge_var, var_order, var_ptr): edges are
        numbered grouped by check; ``var_order`` permutes them into
        variable-grouped order with segment starts ``var_ptr``.
        """
        if self._edges is None:
            check_ptr = np.zeros(self.m + 1, dtype=np.int64)
            for r, cols in enumerate(self.rows):
                check_ptr[r + 1] = check_ptr[r] + cols.size
            edge_var = np.concatenate(self.rows).astype(np.int64)
            var_order = np.argsort(edge_var, kind="stable")
            deg = self.var_degrees()
            var_ptr = np.zeros(self.n_cols + 1, dtype=np.int64)
            np.cumsum(deg, out=var_ptr[1:])
            self._edges = (check_ptr, edge_var, var_order, var_ptr)
        return self._edges


def _largest_remainder(fractions: list, total: int) -> list:
    """Integer apportionment of ``total`` items by fractional shares."""
    raw = [f * total for f in fractions]
    counts = [int(x) for x in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:short]:
        counts[i] += 1
    return counts


def plan_degree_sequences(
    dist: DegreeDistribution, n_l: int, rate: float
) -> tuple[np.ndarray, np.ndarray]:
    """Integer variable degrees and check capacities for a target length and rate.

    Variable degrees follow the node-perspective form of ``lambda``
    exactly (up to rounding).  Check capacities start from ``rho`` and are
    then shifted uniformly so the two sides agree on the edge count; at
    the distribution's design rate the shift is zero and both sides match
    the distribution, at other rates the check degrees drift.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must be in (0, 1)")
    m = int(round(n_l * (1.0 - rate)))
    if m < 1 or m >= n_l:
        raise ValueError(f"infeasible (n_l={n_l}, rate={rate}) -> m={m}")
    lam_deg = [d for d, _ in dist.lambda_coeffs]
    lam_node = [f / d for d, f in dist.lambda_coeffs]
    s = sum(lam_node)
    var_counts = _largest_remainder([x / s for x in lam_node], n_l)
    var_degrees = np.repeat(lam_deg, var_counts)
    var_degrees.sort()
    edges = int(var_degrees.sum())

    rho_deg = [d for d, _ in dist.rho_coeffs]
    rho_node = [f / d for d, f in dist.rho_coeffs]
    s = sum(rho_node)
    chk_counts = _largest_remainder([x / s for x in rho_node], m)
    caps = np.repeat(rho_deg, chk_counts).astype(np.int64)
    caps.sort()
    diff = edges - int(caps.sum())
    q, r = divmod(diff, m)
    caps += q
    if r:  # spread the residual instead of piling it on one degree group
        caps[np.linspace(0, m - 1, r).astype(np.int64)] += 1
    if caps.min() < 2:
        raise ValueError("degree sequence infeasible: check capacity below 2")
    return var_degrees.astype(np.int64), caps


def construct_peg(
    dist: DegreeDistribution, n_l: int, rate: float, seed: int = 0
) -> ParityCheckMatrix:
    """Progressive-edge-growth placement maximizing local girth.

    For each new edge of a variable, a BFS over the current graph finds
    the checks farthest from the variable (or unreachable); among those
    with free capacity the lowest-fill one wins, with a seeded random
    tie-break.  Deterministic for a fixed seed.
    """
    var_degrees, caps = plan_degree_sequences(dist, n_l, rate)
    m = caps.size
    rng = np.random.default_rng(seed)
    tiebreak = rng.permutation(m)

    dv_max = int(var_degrees.max())
    chk_of_var = np.full((n_l, dv_max), -1, dtype=np.int64)
    var_fill = np.zeros(n_l, dtype=np.int64)
    var_of_chk: list[list[int]] = [[] for _ in range(m)]
    chk_fill = np.zeros(m, dtype=np.int64)

    def bfs_levels(v: int):
        """(unreached checks, check levels outward from v).

        Level index ell holds checks first reached after crossing ell
        variable layers; a new edge to such a check closes a cycle of
        length 2*ell + 2, so anything with ell >= 2 keeps the girth >= 6.
        """
        seen_c = np.zeros(m, dtype=bool)
        seen_v = np.zeros(n_l, dtype=bool)
        seen_v[v] = True
        frontier = chk_of_var[v, : var_fill[v]].copy()
        seen_c[frontier] = True
        levels = []
        while True:
            nxt_v = []
            for c in frontier:
                nxt_v.extend(var_of_chk[c])
            nxt_v = np.unique(np.asarray(nxt_v, dtype=np.int64)) if nxt_v else np.empty(0, np.int64)
            nxt_v = nxt_v[~seen_v[nxt_v]]
            if nxt_v.size == 0:
                break
            seen_v[nxt_v] = True
            cand = chk_of_var[nxt_v, :].ravel()
            cand = cand[cand >= 0]
            cand = np.unique(cand)
            cand = cand[~seen_c[cand]]
            if cand.size == 0:
                break
            seen_c[cand] = True
            levels.append(cand)
            frontier = cand
        return np.flatnonzero(~seen_c), levels

    def pick(cand: np.ndarray) -> int:
        order = np.lexsort((tiebreak[cand], chk_fill[cand]))
        return int(cand[order[0]])

    def attach(v: int, c: int) -> None:
        chk_of_var[v, var_fill[v]] = c
        var_fill[v] += 1
        var_of_chk[c].append(v)
        chk_fill[c] += 1

    def detach(v: int, c: int) -> None:
        slots = chk_of_var[v, : var_fill[v]]
        i = int(np.flatnonzero(slots == c)[0])
        slots[i] = slots[var_fill[v] - 1]
        chk_of_var[v, var_fill[v] - 1] = -1
        var_fill[v] -= 1
        var_of_chk[c].remove(v)
        chk_fill[c] -= 1

    def swap_in(v: int, cand: np.ndarray, wide: bool = False) -> int | None:
        """Free a slot on one of ``cand`` by relocating an edge of its owner.

        The displaced edge prefers a cycle-safe check with capacity; in
        ``wide`` mode (construction tail) it may land on a 4-cycle check
        so the capacity plan still completes exactly.
        """
        order = np.argsort(tiebreak[cand])
        for c_star in cand[order[: 32 if wide else 8]]:
            c_star = int(c_star)
            for w in list(var_of_chk[c_star])[: 64 if wide else 16]:
                detach(w, c_star)
                w_unreached, w_levels = bfs_levels(w)
                w_safe = np.concatenate([w_unreached] + w_levels[1:]) if w_levels else w_unreached
                pools = [w_safe]
                if wide and w_levels:
                    pools.append(w_levels[0])
                for pool in pools:
                    w_free = pool[(chk_fill[pool] < caps[pool]) & (pool != c_star)]
                    if w_free.size:
                        attach(w, pick(w_free))
                        return c_star
                attach(w, c_star)
        return None

    for v in range(n_l):
        for k in range(var_degrees[v]):
            if k == 0:
                c = pick(np.flatnonzero(chk_fill < caps))
            else:
                unreached, levels = bfs_levels(v)
                safe = np.concatenate([unreached] + levels[1:]) if levels else unreached
                lvl0 = levels[0] if levels else np.empty(0, np.int64)
                # cascade: cycle-safe with capacity, cycle-safe via an edge
                # relocation, then a 4-cycle with capacity, a 4-cycle via
                # relocation, and capacity overflow only as a last resort
                free = safe[chk_fill[safe] < caps[safe]]
                if free.size:
                    c = pick(free)
                else:
                    c = swap_in(v, safe) if safe.size else None
                    if c is None:
                        lvl0_free = lvl0[chk_fill[lvl0] < caps[lvl0]]
                        if lvl0_free.size:
                            c = pick(lvl0_free)
                        else:
                            c = swap_in(v, lvl0, wide=True) if lvl0.size else None
                    if c is None:
                        for pool in (safe, lvl0):
                            if pool.size:
                                c = pick(pool)
                                break
                if c is None:
                    raise RuntimeError("no candidate check; degree plan infeasible")
            attach(v, c)

    rows = [np.array(sorted(var_of_chk[c]), dtype=np.int64) for c in range(m)]
    return ParityCheckMatrix(n_cols=n_l, rows=rows, seed=seed)


# --------------------------------------------------------------------------
# systematic encoding via Gauss-Jordan elimination over GF(2)
# --------------------------------------------------------------------------


class _Encoder:
    """Back-substitution structure: parity columns and their info supports."""

    def __init__(self, H: ParityCheckMatrix):
        n = H.n_cols
        rows = []
        for cols in H.rows:
            x = 0
            for c in cols:
                x |= 1 << int(c)
            rows.append(x)
        pivots = []
        reduced = []
        for row in rows:
            for p, r in zip(pivots, reduced):
                if (row >> p) & 1:
                    row ^= r
            if row == 0:
                raise LdpcRankError("parity-check matrix is rank deficient")
            p = row.bit_length() - 1  # rightmost free column becomes the pivot
            for i, r in enumerate(reduced):
                if (r >> p) & 1:
                    reduced[i] = r ^ row
            pivots.append(p)
            reduced.append(row)
        self.pivot_cols = np.array(pivots, dtype=np.int64)
        piv_set = set(pivots)
        self.systematic_cols = np.array(
            [c for c in range(n) if c not in piv_set], dtype=np.int64
        )
        # pack each reduced row's systematic support into uint64 words
        k = self.systematic_cols.size
        pos_of_col = {int(c): i for i, c in enumerate(self.systematic_cols)}
        words = (k + 63) // 64
        supp = np.zeros((len(reduced), words), dtype=np.uint64)
        for i, r in enumerate(reduced):
            r &= ~(1 << pivots[i])
            while r:
                c = (r & -r).bit_length() - 1  # lowest set bit
                j = pos_of_col[c]
                supp[i, j >> 6] |= np.uint64(1) << np.uint64(j & 63)
                r &= r - 1
        self.support = supp
        self.words = words
        self.k = k

    def pack_info(self, info: np.ndarray) -> np.ndarray:
        bits = np.zeros(self.words * 64, dtype=np.uint64)
        bits[: self.k] = info
        shifts = np.arange(64, dtype=np.uint64)
        return (bits.reshape(self.words, 64) << shifts).sum(axis=1, dtype=np.uint64)

    def parity(self, info: np.ndarray) -> np.ndarray:
        packed = self.pack_info(info)
        return (np.bitwise_count(self.support & packed).sum(axis=1) & 1).astype(np.uint8)


def _encoder(H: ParityCheckMatrix) -> _Encoder:
    if H._encoder is None:
        H._encoder = _Encoder(H)
    return H._encoder


def ldpc_encode(H: ParityCheckMatrix, info: np.ndarray) -> np.ndarray:
    """Systematic encoding: info bits on the non-pivot columns, parity solved.

    Raises :class:`LdpcRankError` when H has dependent rows; the caller
    re-seeds the construction.
    """
    enc = _encoder(H)
    info = np.asarray(info, dtype=np.uint8)
    single = info.ndim == 1
    batch = info.reshape(1, -1) if single else info
    if batch.shape[1] != enc.k:
        raise ValueError(f"expected {enc.k} info bits, got {batch.shape[1]}")
    out = np.zeros((batch.shape[0], H.n_cols), dtype=np.uint8)
    for i, frame in enumerate(batch):
        out[i, enc.systematic_cols] = frame
        out[i, enc.pivot_cols] = enc.parity(frame)
    return out[0] if single else out


def systematic_columns(H: ParityCheckMatrix) -> np.ndarray:
    """Column indices carrying the information bits of :func:`ldpc_encode`."""
    return _encoder(H).systematic_cols.copy()


# --------------------------------------------------------------------------
# belief propagation (flooding)
# --------------------------------------------------------------------------


@dataclass
class LdpcDecodeResult:
    llr_out: np.ndarray
    hard: np.ndarray
    converged: bool
    iterations: int


def _ldpc_bp_batch(
    H: ParityCheckMatrix,
    llr_in: np.ndarray,
    max_iter: int = 60,
    quantizer=None,
    early_stop: bool = True,
):
    """Flooding BP on a batch; returns (post (B,N), hard, conv (B,), iters (B,)).

    Exact tanh product rule at the checks.  With ``early_stop`` a frame
    stops as soon as its hard decisions satisfy every parity check and
    ``iters`` records that iteration; without it every frame runs the
    full ``max_iter``, making the decoder an odd function of its input.
    Messages are conditioned (clamp or quantizer) after every update.
    """
    check_ptr, edge_var, var_order, var_ptr = H.edge_arrays()
    llr_in = np.asarray(llr_in, dtype=np.float64)
    B, N = llr_in.shape
    if N != H.n_cols:
        raise ValueError("frame length mismatch")
    cond = quantizer if quantizer is not None else (
        lambda x: np.clip(x, -_LLR_CLAMP, _LLR_CLAMP)
    )
    intr = cond(llr_in)

    post_out = intr.copy()
    hard_out = (post_out < 0).astype(np.uint8)
    iters_out = np.full(B, max_iter, dtype=np.int64)
    conv_out = np.zeros(B, dtype=bool)
    active = np.arange(B)

    m_vc = intr[:, edge_var].copy()
    seg_chk = check_ptr[:-1]
    seg_var = var_ptr[:-1]
    chk_of_edge = _check_of_edge(H)

    it = 0
    while it < max_iter and active.size:
        it += 1
        t = np.tanh(m_vc / 2.0)
        # keep |t| off zero so the leave-one-out division stays finite
        tt = np.where(np.abs(t) < _TANH_FLOOR, np.copysign(_TANH_FLOOR, t), t)
        prod = np.multiply.reduceat(tt, seg_chk, axis=1)
        m_cv = prod[:, chk_of_edge] / tt
        np.clip(m_cv, -0.9999999999999998, 0.9999999999999998, out=m_cv)
        m_cv = cond(2.0 * np.arctanh(m_cv))

        sums = np.add.reduceat(m_cv[:, var_order], seg_var, axis=1)
        post = intr[active] + sums
        m_vc = cond(post[:, edge_var] - m_cv)

        hard = (post < 0).astype(np.uint8)
        syn = np.add.reduceat(hard[:, edge_var], seg_chk, axis=1) & 1
        ok = ~np.any(syn, axis=1)
        post_out[active] = post
        hard_out[active] = hard
        finish = (ok & early_stop) | (it == max_iter)
        if finish.any():
            iters_out[active[finish]] = np.where(ok[finish], it, max_iter)
            conv_out[active[finish]] = ok[finish]
            keep = ~finish
            active = active[keep]
            m_vc = m_vc[keep]

    return post_out, hard_out, conv_out, iters_out


def _check_of_edge(H: ParityCheckMatrix) -> np.ndarray:
    check_ptr = H.edge_arrays()[0]
    out = np.zeros(check_ptr[-1], dtype=np.int64)
    out[check_ptr[1:-1]] = 1
    return np.cumsum(out)


def ldpc_bp_decode(
    H: ParityCheckMatrix,
    llr_in: np.ndarray,
    max_iter: int = 60,
    quantizer=None,
    early_stop: bool = True,
) -> LdpcDecodeResult:
    """Flooding BP; returns posterior LLRs, hard decisions and a syndrome flag."""
    data = np.asarray(llr_in, dtype=np.float64).reshape(1, -1)
    post, hard, conv, iters = _ldpc_bp_batch(
        H, data, max_iter=max_iter, quantizer=quantizer, early_stop=early_stop
    )
    return LdpcDecodeResult(
        llr_out=post[0], hard=hard[0], converged=bool(conv[0]), iterations=int(iters[0])
    )


def tanner_girth(H: ParityCheckMatrix) -> float:
    """Shortest cycle length of the Tanner graph (inf if a forest)."""
    adj: list[list[int]] = [[] for _ in range(H.n_cols + H.m)]
    for r, cols in enumerate(H.rows):
        for c in cols:
            adj[int(c)].append(H.n_cols + r)
            adj[H.n_cols + r].append(int(c))
    return _girth_bfs(adj)


# --------------------------------------------------------------------------
# alist I/O
# --------------------------------------------------------------------------


def write_alist(H: ParityCheckMatrix, path) -> None:
    """Standard alist text format (1-based, zero-padded rows); seed appended
    as a trailing comment line that plain alist readers never reach."""
    deg_v = H.var_degrees()
    deg_c = H.check_degrees()
    cols: list[list[int]] = [[] for _ in range(H.n_cols)]
    for r, row in enumerate(H.rows):
        for c in row:
            cols[int(c)].append(r + 1)
    lines = [
        f"{H.n_cols} {H.m}",
        f"{int(deg_v.max())} {int(deg_c.max())}",
        " ".join(str(int(d)) for d in deg_v),
        " ".join(str(int(d)) for d in deg_c),
    ]
    for c in range(H.n_cols):
        entries = cols[c] + [0] * (int(deg_v.max()) - len(cols[c]))
        lines.append(" ".join(str(x) for x in entries))
    for r in range(H.m):
        entries = [int(c) + 1 for c in H.rows[r]]
        entries += [0] * (int(deg_c.max()) - len(entries))
        lines.append(" ".join(str(x) for x in entries))
    if H.seed is not None:
        lines.append(f"# seed={H.seed}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_alist(path) -> ParityCheckMatrix:
    text = Path(path).read_text().split("\n")
    seed = None
    body = []
    for ln in text:
        if ln.startswith("#"):
            if "seed=" in ln:
                seed = int(ln.split("seed=")[1])
            continue
        if ln.strip():
            body.append(ln.split())
    n, m = int(body[0][0]), int(body[0][1])
    rows = []
    for r in range(m):
        entries = [int(x) - 1 for x in body[4 + n + r] if int(x) > 0]
        rows.append(np.array(sorted(entries), dtype=np.int64))
    return ParityCheckMatrix(n_cols=n, rows=rows, seed=seed)
