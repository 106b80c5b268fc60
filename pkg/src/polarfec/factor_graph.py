"""The normal-realization factor graph of a polar code and its stopping-set analysis.

The graph for depth ``n`` has ``n + 1`` columns of ``N = 2**n`` variable
nodes and ``n`` columns of ``N`` check nodes.  Within check column ``j``
(0-based), rows pair up at distance ``2**(n-1-j)`` into N/2 disjoint
Z-shaped subgraphs.  Each Z has a degree-3 check at the top tying the two
left variables to the top-right variable (an XOR constraint) and a
degree-2 check at the bottom (an equality constraint):

    var(j, r) ----[c(j, r)]---- var(j+1, r)          c(j, r):  top, degree 3
                  /
    var(j, r+b) -+--[c(j, r+b)]-- var(j+1, r+b)      c(j, r+b): bottom, degree 2

with ``b = 2**(n-1-j)`` and ``r`` ranging over rows whose bit ``n-1-j`` is 0.
Column 0 holds the input bits (frozen + information), column n the code bits.

A stopping set is a non-empty set of variable nodes such that every check
node adjacent to the set touches at least two of its members; on the BEC
these are exactly the structures on which peeling (equivalently BP) gets
stuck.  The code-bit members of a graph stopping set (GSS) form its
variable-node stopping set (VSS).
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .polar import CodeSpec, polar_transform

__all__ = [
    "FactorGraph",
    "StoppingTree",
    "GraphStoppingSet",
    "build_graph",
    "encode_on_graph",
    "stopping_tree",
    "leaf_size",
    "size_distributions",
    "girth",
    "stopping_distance",
    "mib",
    "mvss_lower_bound",
    "enumerate_gss",
    "min_vss_size",
    "mvss_search",
    "mvss_report",
    "low_weight_count",
    "is_stopping_set",
    "graph_to_text",
]

_ENUM_MAX_DEPTH = 4  # exhaustive erasure-pattern search is 2**N


@dataclass(frozen=True)
class FactorGraph:
    """Immutable wiring of the encoding graph.

    ``check_vars[c]`` lists the (up to 3) variable ids adjacent to check
    ``c``; degree-2 checks are padded with the sentinel id ``num_vars``,
    which behaves as an always-known dummy variable during peeling.
    Variable ``(col j, row r)`` has id ``j*N + r`` for ``j`` in 0..n, and
    check ``(col j, row r)`` has id ``j*N + r`` for ``j`` in 0..n-1.
    """

    n: int
    check_vars: np.ndarray
    check_degree: np.ndarray

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def num_vars(self) -> int:
        return self.N * (self.n + 1)

    @property
    def num_checks(self) -> int:
        return self.N * self.n

    def var_id(self, col: int, row: int) -> int:
        return col * self.N + row

    def var_pos(self, vid: int) -> tuple[int, int]:
        return divmod(vid, self.N)


@dataclass(frozen=True)
class StoppingTree:
    """The unique stopping set containing exactly one input bit."""

    root: int
    nodes: frozenset  # (col, row) variable positions
    leaf_set: frozenset  # code-bit rows (column n)
    f: int

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class GraphStoppingSet:
    """A graph stopping set with its input-bit and code-bit restrictions."""

    var_nodes: frozenset  # global variable ids
    info_bits: frozenset  # column-0 rows
    vss: frozenset  # column-n rows


def build_graph(n: int) -> FactorGraph:
    """Wire the factor graph for depth ``n``."""
    if n < 1:
        raise ValueError(f"depth n must be >= 1, got {n}")
    N = 1 << n
    sentinel = N * (n + 1)
    check_vars = np.full((N * n, 3), sentinel, dtype=np.int64)
    check_degree = np.empty(N * n, dtype=np.int8)
    for j in range(n):
        b = 1 << (n - 1 - j)
        rows = np.arange(N)
        top = rows[(rows >> (n - 1 - j)) & 1 == 0]
        bot = top + b
        # top check: XOR of the two left variables equals the top-right one
        check_vars[j * N + top, 0] = j * N + top
        check_vars[j * N + top, 1] = j * N + bot
        check_vars[j * N + top, 2] = (j + 1) * N + top
        check_degree[j * N + top] = 3
        # bottom check: equality pass-through
        check_vars[j * N + bot, 0] = j * N + bot
        check_vars[j * N + bot, 1] = (j + 1) * N + bot
        check_degree[j * N + bot] = 2
    return FactorGraph(n=n, check_vars=check_vars, check_degree=check_degree)


def encode_on_graph(g: FactorGraph, u: np.ndarray) -> np.ndarray:
    """Message-passing encoding: propagate column 0 values to the code bits.

    Matches :func:`polarfec.polar.polar_transform` bit for bit.
    """
    u = np.asarray(u, dtype=np.uint8)
    if u.shape[-1] != g.N:
        raise ValueError(f"expected {g.N} input bits")
    vals = u.copy()
    n = g.n
    for j in range(n):
        b = 1 << (n - 1 - j)
        nxt = vals.copy()
        rows = np.arange(g.N)
        top = rows[(rows >> (n - 1 - j)) & 1 == 0]
        nxt[..., top] = vals[..., top] ^ vals[..., top + b]
        vals = nxt
    return vals


def stopping_tree(g: FactorGraph, i: int) -> StoppingTree:
    """The unique stopping tree rooted at input bit ``i``.

    Walks right from the root.  Inside each Z, a top-left member forces
    only the top-right variable; a bottom-left member forces both the
    bottom-right variable (through the equality check) and the top-right
    variable (second member for the XOR check).
    """
    if not 0 <= i < g.N:
        raise ValueError(f"input index {i} out of range")
    n = g.n
    nodes = [(0, i)]
    rows = {i}
    for j in range(n):
        b = 1 << (n - 1 - j)
        nxt = set()
        for r in rows:
            nxt.add(r)
            if (r >> (n - 1 - j)) & 1:
                nxt.add(r - b)
        nodes.extend((j + 1, r) for r in nxt)
        rows = nxt
    return StoppingTree(
        root=i, nodes=frozenset(nodes), leaf_set=frozenset(rows), f=len(rows)
    )


def leaf_size(i: int, n: int) -> int:
    """Leaf-set size of the stopping tree rooted at input ``i`` (0-based).

    Evaluates the 1-based recursion f(2**l) = 2**l, f(2**l + m) = 2 f(m)
    at k = i + 1; equals ``2**popcount(i)``, i.e. the row weight.
    """
    if not 0 <= i < (1 << n):
        raise ValueError(f"index {i} out of range for n={n}")
    k = i + 1
    mult = 1
    while k & (k - 1):
        k -= 1 << (k.bit_length() - 1)
        mult *= 2
    return mult * k


def size_distributions(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectors of stopping-tree node counts and leaf-set sizes for all inputs.

    Both follow the doubling recursion inherited from the two half-graphs:
    node counts gain one per input for the extra leftmost column, leaf
    sizes simply double on the lower half.
    """
    if n < 1:
        raise ValueError(f"depth n must be >= 1, got {n}")
    a = np.array([1], dtype=np.int64)
    b = np.array([1], dtype=np.int64)
    for _ in range(n):
        a = np.concatenate([a, 2 * a]) + 1
        b = np.concatenate([b, 2 * b])
    return a, b


def _adjacency(g: FactorGraph) -> list[list[int]]:
    """Bipartite adjacency over nodes 0..V-1 (vars) and V..V+C-1 (checks)."""
    V = g.num_vars
    adj: list[list[int]] = [[] for _ in range(V + g.num_checks)]
    for c in range(g.num_checks):
        for k in range(g.check_degree[c]):
            v = int(g.check_vars[c, k])
            adj[v].append(V + c)
            adj[V + c].append(v)
    return adj


def _girth_bfs(adj: list[list[int]]) -> float:
    """Shortest cycle length via a depth-limited BFS from every node.

    A non-tree edge discovered from depth ``d`` closes a cycle of length
    at most ``2d + 2``; once some cycle is known, deeper exploration than
    half its length cannot improve it.
    """
    num = len(adj)
    best = math.inf
    depth = np.full(num, -1, dtype=np.int64)
    stamp = np.zeros(num, dtype=np.int64)
    for root in range(num):
        tag = root + 1
        limit = (best - 2) // 2
        q = deque([root])
        stamp[root] = tag
        depth[root] = 0
        parent = {root: -1}
        while q:
            u = q.popleft()
            du = depth[u]
            if du > limit:
                break
            for v in adj[u]:
                if v == parent[u]:
                    continue
                if stamp[v] == tag:
                    length = du + depth[v] + 1
                    if length < best:
                        best = length
                        limit = (best - 2) // 2
                else:
                    stamp[v] = tag
                    depth[v] = du + 1
                    parent[v] = u
                    q.append(v)
    return best


def girth(g: FactorGraph) -> float:
    """Length of the shortest cycle in the factor graph; inf for a forest."""
    return _girth_bfs(_adjacency(g))


def stopping_distance(spec: CodeSpec) -> int:
    """Size of the minimum variable-node stopping set: min leaf size over the info set.

    Equals the minimum distance of the code, since leaf sizes coincide
    with generator-row weights.
    """
    if not spec.info_set:
        raise ValueError("information set is empty")
    return min(leaf_size(i, spec.n) for i in spec.info_set)


def mib(spec: CodeSpec, J) -> int:
    """Minimum information bit of J: smallest leaf size, largest index on ties."""
    J = sorted(set(int(j) for j in J))
    if not J:
        raise ValueError("J is empty")
    return max(J, key=lambda j: (-leaf_size(j, spec.n), j))


def mvss_lower_bound(spec: CodeSpec, J) -> int:
    """Lower bound on the minimum VSS size for J: min leaf size over J."""
    J = set(int(j) for j in J)
    if not J:
        raise ValueError("J is empty")
    if not J <= set(spec.info_set):
        raise ValueError("J must be a subset of the information set")
    return min(leaf_size(j, spec.n) for j in J)


def low_weight_count(n: int, eps_exp: float) -> int:
    """Number of inputs whose stopping-tree leaf set is smaller than N**eps_exp."""
    if not 0.0 < eps_exp < 0.5:
        raise ValueError(f"eps_exp must be in (0, 1/2), got {eps_exp}")
    _, b = size_distributions(n)
    return int(np.sum(b < 2.0 ** (n * eps_exp)))


# --------------------------------------------------------------------------
# exhaustive stopping-set search (small n), built on batched peeling
# --------------------------------------------------------------------------


def _peel_batch(g: FactorGraph, known: np.ndarray) -> np.ndarray:
    """Run erasure peeling to its fixpoint on a batch of knowledge states.

    ``known`` is (P, num_vars + 1) boolean, last column the always-known
    sentinel.  A check with exactly one unknown neighbor resolves it; the
    fixpoint leaves exactly the maximal stopping set within the unknowns.
    """
    known = known.copy()
    cv = g.check_vars
    inc = np.zeros((g.num_checks, known.shape[1]), dtype=np.float32)
    for k in range(3):
        inc[np.arange(g.num_checks), cv[:, k]] = 1.0
    inc[:, -1] = 0.0
    while True:
        unk0 = ~known[:, cv[:, 0]]
        unk1 = ~known[:, cv[:, 1]]
        unk2 = ~known[:, cv[:, 2]]
        cnt = unk0.astype(np.int8) + unk1 + unk2
        ready = (cnt == 1).astype(np.float32)
        resolved = (ready @ inc) > 0
        new = resolved & ~known
        if not new.any():
            return known
        known |= new


def _base_known(g: FactorGraph, allowed_col0) -> np.ndarray:
    """Knowledge vector with erasable code bits still known.

    Column-0 variables outside ``allowed_col0`` are known (frozen or
    genie-disclosed); middle variables are unknown; all code bits known.
    """
    base = np.zeros(g.num_vars + 1, dtype=bool)
    base[-1] = True
    col0 = np.zeros(g.N, dtype=bool)
    if allowed_col0 is None:
        col0[:] = True
    else:
        col0[list(allowed_col0)] = True
    base[: g.N] = ~col0
    base[g.n * g.N : g.num_vars] = True
    return base


def _residuals(g: FactorGraph, patterns: np.ndarray, allowed_col0) -> np.ndarray:
    """Peel a batch of erasure patterns; returns unknown masks (P, num_vars)."""
    base = _base_known(g, allowed_col0)
    known = np.broadcast_to(base, (patterns.shape[0], base.size)).copy()
    if patterns.size:
        rows = np.repeat(np.arange(patterns.shape[0]), patterns.shape[1])
        known[rows, g.n * g.N + patterns.ravel()] = False
    return ~_peel_batch(g, known)[:, :-1]


def _residual_to_gss(g: FactorGraph, unknown: np.ndarray) -> GraphStoppingSet:
    ids = np.flatnonzero(unknown)
    return GraphStoppingSet(
        var_nodes=frozenset(int(v) for v in ids),
        info_bits=frozenset(int(v) for v in ids[ids < g.N]),
        vss=frozenset(int(v - g.n * g.N) for v in ids[ids >= g.n * g.N]),
    )


def _weight_patterns(N: int, weight: int) -> np.ndarray:
    combos = list(itertools.combinations(range(N), weight))
    return np.array(combos, dtype=np.int64).reshape(len(combos), weight)


def enumerate_gss(g: FactorGraph, column1_constraint=None) -> list[GraphStoppingSet]:
    """All minimal-under-inclusion graph stopping sets, by exhaustive search.

    Scans every code-bit erasure pattern and extracts the peeling fixpoint,
    which is the unique maximal stopping set within the erased bits.  With
    ``column1_constraint`` J, every column-0 variable outside J is treated
    as known, so the fixpoints are exactly the stopping sets whose input
    bits are drawn from J; only those using all of J are returned.

    Guarded to n <= 4: the pattern space is 2**N.
    """
    if g.n > _ENUM_MAX_DEPTH:
        raise ValueError(f"enumeration is exhaustive; n={g.n} exceeds {_ENUM_MAX_DEPTH}")
    J = None if column1_constraint is None else frozenset(int(j) for j in column1_constraint)
    found: dict[frozenset, GraphStoppingSet] = {}
    chunk = 1 << 13
    for weight in range(1, g.N + 1):
        patterns = _weight_patterns(g.N, weight)
        for lo in range(0, patterns.shape[0], chunk):
            unknown = _residuals(g, patterns[lo : lo + chunk], J)
            for row in unknown[unknown.any(axis=1)]:
                gss = _residual_to_gss(g, row)
                if J is not None and gss.info_bits != J:
                    continue
                found.setdefault(gss.var_nodes, gss)
    sets = sorted(found.values(), key=lambda s: (len(s.vss), len(s.var_nodes)))
    minimal: list[GraphStoppingSet] = []
    for cand in sets:
        if not any(kept.var_nodes < cand.var_nodes for kept in minimal):
            minimal.append(cand)
    return minimal


def min_vss_size(g: FactorGraph, info_allowed) -> tuple[int, tuple[int, ...]]:
    """Smallest number of erased code bits that stalls peeling, with a witness.

    ``info_allowed`` is the information set; frozen inputs are known.
    Scans erasure patterns in order of increasing weight, so the first
    non-empty fixpoint witnesses the minimum VSS size exactly.
    """
    if g.n > _ENUM_MAX_DEPTH:
        raise ValueError(f"exhaustive search; n={g.n} exceeds {_ENUM_MAX_DEPTH}")
    allowed = frozenset(int(i) for i in info_allowed)
    if not allowed:
        raise ValueError("information set is empty")
    chunk = 1 << 13
    for weight in range(1, g.N + 1):
        patterns = _weight_patterns(g.N, weight)
        for lo in range(0, patterns.shape[0], chunk):
            block = patterns[lo : lo + chunk]
            unknown = _residuals(g, block, allowed)
            hits = np.flatnonzero(unknown.any(axis=1))
            if hits.size:
                return weight, tuple(int(x) for x in block[hits[0]])
    raise RuntimeError("no stopping set found; unreachable for a non-empty info set")


def mvss_search(g: FactorGraph, J) -> tuple[int, tuple[int, ...]] | None:
    """Exact minimum VSS size for the set J, with a witness pattern.

    Information bits outside J are disclosed to the peeler, so the
    fixpoints found are exactly the stopping sets whose input bits are
    drawn from J; the smallest erasure weight whose fixpoint stalls all
    of J is |MVSS(J)|.  Returns None when no stopping set uses exactly J.
    """
    if g.n > _ENUM_MAX_DEPTH:
        raise ValueError(f"exhaustive search; n={g.n} exceeds {_ENUM_MAX_DEPTH}")
    J = frozenset(int(j) for j in J)
    if not J:
        raise ValueError("J is empty")
    rows = sorted(J)
    chunk = 1 << 13
    for weight in range(1, g.N + 1):
        patterns = _weight_patterns(g.N, weight)
        for lo in range(0, patterns.shape[0], chunk):
            block = patterns[lo : lo + chunk]
            unknown = _residuals(g, block, J)
            hits = np.flatnonzero(unknown[:, rows].all(axis=1))
            if hits.size:
                return weight, tuple(int(x) for x in block[hits[0]])
    return None


def mvss_report(g: FactorGraph, info_set, max_subset_size: int = 2) -> list[dict]:
    """Structured per-J records: J, |MVSS(J)|, the leaf-size bound, witness.

    Covers all subsets of the information set up to ``max_subset_size``
    members (the full subset lattice is exponential).
    """
    info = sorted(int(i) for i in info_set)
    subsets = [(i,) for i in info]
    if max_subset_size >= 2:
        subsets += list(itertools.combinations(info, 2))
    out = []
    for J in subsets:
        found = mvss_search(g, J)
        out.append({
            "J": list(J),
            "mvss": None if found is None else found[0],
            "bound": min(leaf_size(j, g.n) for j in J),
            "witness": None if found is None else list(found[1]),
        })
    return out


def is_stopping_set(g: FactorGraph, var_ids) -> bool:
    """Check the defining property: every adjacent check touches >= 2 members."""
    members = set(int(v) for v in var_ids)
    if not members:
        return False
    for c in range(g.num_checks):
        deg = int(g.check_degree[c])
        touched = sum(1 for k in range(deg) if int(g.check_vars[c, k]) in members)
        if touched == 1:
            return False
    return True


def graph_to_text(g: FactorGraph) -> str:
    """Plain-text adjacency: one line per check node listing its variable neighbors."""
    lines = [f"# factor graph n={g.n} N={g.N} vars={g.num_vars} checks={g.num_checks}"]
    for c in range(g.num_checks):
        col, row = divmod(c, g.N)
        deg = int(g.check_degree[c])
        vs = " ".join(
            "v%d,%d" % g.var_pos(int(g.check_vars[c, k])) for k in range(deg)
        )
        lines.append(f"c{col},{row}: {vs}")
    return "\n".join(lines) + "\n"
