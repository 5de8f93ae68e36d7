"""Pointwise oscillation operators with exact oracles.

Path-level routines (variation, jump counting, the dyadic jump majorant)
operate on plain real sequences; field-level routines take a martingale
and return one value per finest cell.  Every optimized routine has a
brute-force counterpart used as a testing oracle: exhaustive subsequence
search for the variation, exhaustive chain and pair-system search for
jump counts.  All functions are pure; nothing here mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .filtration import Filtration, conditional_expectation

if TYPE_CHECKING:  # pragma: no cover
    from .martingale import Martingale

__all__ = [
    "VariationCertificate",
    "JumpChain",
    "variation",
    "variation_bruteforce",
    "variation_matrix",
    "variation_pointwise",
    "jump_count_chain",
    "jump_count_chain_fast",
    "jump_count_chain_bruteforce",
    "jump_count_pairs",
    "jump_count_pairs_bruteforce",
    "jump_count_pointwise",
    "dyadic_jump_majorant",
    "c_r_constant",
    "maximal",
    "square",
    "conditional_square",
    "lp_norm",
    "distribution",
    "measure_quantiles",
]


@dataclass(frozen=True)
class VariationCertificate:
    """Optimal variation value together with the indices achieving it."""

    value: float
    indices: tuple[int, ...]

    def recompute(self, path, r: float) -> float:
        a = np.asarray(path, dtype=float)
        if len(self.indices) < 2:
            return 0.0
        idx = np.asarray(self.indices)
        return float((np.abs(np.diff(a[idx])) ** r).sum() ** (1.0 / r))


@dataclass(frozen=True)
class JumpChain:
    """Maximal jump count together with a witnessing chain of indices."""

    count: int
    indices: tuple[int, ...]

    def gaps(self, path) -> np.ndarray:
        a = np.asarray(path, dtype=float)
        if len(self.indices) < 2:
            return np.empty(0)
        return np.abs(np.diff(a[np.asarray(self.indices)]))


# ---------------------------------------------------------------------------
# r-variation


def variation(path: Sequence[float], r: float, prune: bool = False) -> VariationCertificate:
    """Exact r-variation of a sequence via dynamic programming.

    best[j] holds the largest sum of |increment|^r over increasing index
    chains ending at j; ties break toward the earliest predecessor so the
    certificate is deterministic.  With prune=True, interior points that
    are not strict local extrema are discarded first (consecutive
    duplicates add nothing and monotone interior points are dominated by
    their neighbours); certificate indices always refer to the original
    sequence.
    """
    if r < 1:
        raise ValueError(f"variation order r must be >= 1, got {r}")
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L < 1:
        raise ValueError("path must contain at least one point")
    if L == 1:
        return VariationCertificate(0.0, (0,))
    keep = _extrema_indices(a) if prune else np.arange(L)
    b = a[keep]
    n = b.shape[0]
    best = np.zeros(n)
    prev = np.full(n, -1, dtype=np.intp)
    for j in range(1, n):
        cand = best[:j] + np.abs(b[j] - b[:j]) ** r
        i = int(np.argmax(cand))  # argmax returns the first maximizer
        best[j] = cand[i]
        prev[j] = i
    j_star = int(np.argmax(best))
    if best[j_star] <= 0.0:
        return VariationCertificate(0.0, (int(keep[0]),))
    chain = []
    j = j_star
    while j >= 0:
        chain.append(int(keep[j]))
        j = prev[j]
    chain.reverse()
    return VariationCertificate(float(best[j_star] ** (1.0 / r)), tuple(chain))


def _extrema_indices(a: np.ndarray) -> np.ndarray:
    # Collapse consecutive duplicates, then keep endpoints and strict
    # direction changes; optimal chains never need the dropped points.
    first = np.concatenate(([True], np.diff(a) != 0.0))
    idx = np.flatnonzero(first)
    b = a[idx]
    if b.shape[0] <= 2:
        return idx
    turn = (b[1:-1] - b[:-2]) * (b[2:] - b[1:-1]) < 0.0
    keep = np.concatenate(([True], turn, [True]))
    return idx[keep]


def variation_bruteforce(path: Sequence[float], r: float) -> float:
    """Exhaustive maximum over all 2^L index subsequences (L <= 16)."""
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L > 16:
        raise ValueError(f"brute-force variation refused for length {L} > 16")
    if r < 1:
        raise ValueError(f"variation order r must be >= 1, got {r}")
    if L <= 1:
        return 0.0
    pair_i, pair_j, owner, n_masks = _subset_pair_table(L)
    inc = np.abs(a[pair_j] - a[pair_i]) ** r
    totals = np.zeros(n_masks)
    np.add.at(totals, owner, inc)
    return float(totals.max() ** (1.0 / r))


_PAIR_TABLE_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, int]] = {}


def _subset_pair_table(L: int):
    # For every bitmask over L indices, the consecutive (i, j) pairs of the
    # selected indices, flattened; pure combinatorics shared by all paths.
    if L not in _PAIR_TABLE_CACHE:
        pis, pjs, owner = [], [], []
        for mask in range(1 << L):
            sel = [i for i in range(L) if mask >> i & 1]
            for k in range(1, len(sel)):
                pis.append(sel[k - 1])
                pjs.append(sel[k])
                owner.append(mask)
        _PAIR_TABLE_CACHE[L] = (
            np.asarray(pis, dtype=np.intp),
            np.asarray(pjs, dtype=np.intp),
            np.asarray(owner, dtype=np.intp),
            1 << L,
        )
    return _PAIR_TABLE_CACHE[L]


def variation_matrix(paths: np.ndarray, r: float) -> np.ndarray:
    """r-variation of many equal-length paths at once.

    paths has shape (L, K): K column paths of L points each.  Same
    recurrence as `variation`, vectorized over columns; values only.
    """
    if r < 1:
        raise ValueError(f"variation order r must be >= 1, got {r}")
    a = np.asarray(paths, dtype=float)
    L, k = a.shape
    if L < 2:
        return np.zeros(k)
    best = np.zeros((L, k))
    for j in range(1, L):
        best[j] = (best[:j] + np.abs(a[j] - a[:j]) ** r).max(axis=0)
    return best.max(axis=0) ** (1.0 / r)


def variation_pointwise(f: "Martingale", r: float) -> np.ndarray:
    """Per-cell r-variation of the level path.

    Runs the chain DP down the refinement tree, so each shared path prefix
    is processed once at its own atom resolution instead of once per cell;
    rows are re-gathered through the parent maps as levels refine.  Agrees
    with `variation_matrix` on the per-cell path matrix.
    """
    if r < 1:
        raise ValueError(f"variation order r must be >= 1, got {r}")
    filt = f.filtration
    n_paths = len(filt.levels[filt.depth])
    if n_paths <= 8 * (filt.depth + 1):
        # tall, thin trees: per-level numpy overhead beats the savings,
        # one matrix DP over representative paths is faster
        reps = np.array([atom[0] for atom in filt.levels[filt.depth]], dtype=np.intp)
        return variation_matrix(f.cell_matrix()[:, reps], r)[filt.atom_index[filt.depth]]
    prior_a: list[np.ndarray] = []
    prior_best: list[np.ndarray] = []
    vmax = np.zeros(len(filt.levels[0]))
    for j in range(filt.depth + 1):
        if j > 0:
            par = filt.parent[j]
            prior_a = [row[par] for row in prior_a]
            prior_best = [row[par] for row in prior_best]
            vmax = vmax[par]
        a_j = np.asarray(f.values[j], dtype=float)
        if j == 0:
            best_j = np.zeros_like(a_j)
        else:
            best_j = np.maximum.reduce(
                [pb + np.abs(a_j - pa) ** r for pa, pb in zip(prior_a, prior_best)]
            )
            vmax = np.maximum(vmax, best_j)
        prior_a.append(a_j)
        prior_best.append(best_j)
    return (vmax ** (1.0 / r))[filt.atom_index[filt.depth]]


# ---------------------------------------------------------------------------
# lambda-jump counting


def jump_count_chain(path: Sequence[float], lam: float) -> JumpChain:
    """Maximum chain of indices with all consecutive gaps > lam (exact DP).

    cnt[j] = max(0, max over i < j with |a_i - a_j| > lam of cnt[i] + 1);
    ties break toward the earliest predecessor.  Anchor-at-first greedy is
    wrong here: on (0.3, 0, 0.6) with lam = 0.5 the only chain is (1, 2).
    """
    if lam <= 0:
        raise ValueError(f"jump threshold must be positive, got {lam}")
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L == 0:
        return JumpChain(0, ())
    cnt = np.zeros(L, dtype=np.intp)
    prev = np.full(L, -1, dtype=np.intp)
    for j in range(1, L):
        ok = np.abs(a[:j] - a[j]) > lam
        if ok.any():
            cand = np.where(ok, cnt[:j] + 1, 0)
            i = int(np.argmax(cand))
            if cand[i] > 0:
                cnt[j] = cand[i]
                prev[j] = i
    j = int(np.argmax(cnt))
    chain = []
    while j >= 0:
        chain.append(int(j))
        j = int(prev[j])
    chain.reverse()
    return JumpChain(int(cnt.max()), tuple(chain))


class _MaxSegmentTree:
    """Range-maximum tree over a fixed number of slots (ints, -1 neutral)."""

    def __init__(self, size: int):
        cap = 1
        while cap < max(size, 1):
            cap <<= 1
        self.cap = cap
        self.node = [-1] * (2 * cap)

    def insert(self, pos: int, value: int):
        i = pos + self.cap
        if self.node[i] >= value:
            return
        self.node[i] = value
        i >>= 1
        while i:
            v = max(self.node[2 * i], self.node[2 * i + 1])
            if self.node[i] == v:
                break
            self.node[i] = v
            i >>= 1

    def query(self, lo: int, hi: int) -> int:
        # max over slots [lo, hi)
        best = -1
        lo += self.cap
        hi += self.cap
        while lo < hi:
            if lo & 1:
                best = max(best, self.node[lo])
                lo += 1
            if hi & 1:
                hi -= 1
                best = max(best, self.node[hi])
            lo >>= 1
            hi >>= 1
        return best


def jump_count_chain_fast(path: Sequence[float], lam: float) -> int:
    """Chain jump count via range-maximum queries over value ranks.

    O(L log L); must agree with `jump_count_chain` exactly.  Rank cutoffs
    are refined with the exact gap predicate so borderline rounding in
    value +/- lam cannot flip a comparison.
    """
    if lam <= 0:
        raise ValueError(f"jump threshold must be positive, got {lam}")
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L == 0:
        return 0
    vals = np.unique(a)
    n = vals.shape[0]
    rank = np.searchsorted(vals, a)
    tree = _MaxSegmentTree(n)
    best = 0
    for j in range(L):
        # Ranks [0, lo) hold values v with a[j] - v > lam; the predicate is
        # monotone in v, so nudge the searchsorted cut onto the exact edge.
        lo = int(np.searchsorted(vals, a[j] - lam, side="left"))
        while lo > 0 and not a[j] - vals[lo - 1] > lam:
            lo -= 1
        while lo < n and a[j] - vals[lo] > lam:
            lo += 1
        # Ranks [hi, n) hold values v with v - a[j] > lam.
        hi = int(np.searchsorted(vals, a[j] + lam, side="right"))
        while hi > 0 and vals[hi - 1] - a[j] > lam:
            hi -= 1
        while hi < n and not vals[hi] - a[j] > lam:
            hi += 1
        low_best = tree.query(0, lo)
        high_best = tree.query(hi, n)
        cnt = max(low_best, high_best) + 1 if max(low_best, high_best) >= 0 else 0
        best = max(best, cnt)
        tree.insert(int(rank[j]), cnt)
    return best


def jump_count_chain_bruteforce(path: Sequence[float], lam: float) -> int:
    """Exhaustive maximum over all index subsets forming a valid chain."""
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L > 16:
        raise ValueError(f"brute-force chain search refused for length {L} > 16")
    best = 0
    for mask in range(1, 1 << L):
        sel = [i for i in range(L) if mask >> i & 1]
        if all(abs(a[sel[k]] - a[sel[k - 1]]) > lam for k in range(1, len(sel))):
            best = max(best, len(sel) - 1)
    return best


def jump_count_pairs(path: Sequence[float], lam: float) -> int:
    """Maximum number of consecutive pairs with gap > lam (endpoints may
    be shared).  Greedy scan tracking the running min and max since the
    last reset; the earliest feasible closing point is always optimal.
    """
    if lam <= 0:
        raise ValueError(f"jump threshold must be positive, got {lam}")
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L < 2:
        return 0
    count = 0
    lo = hi = a[0]
    for t in range(1, L):
        v = a[t]
        lo = min(lo, v)
        hi = max(hi, v)
        if v - lo > lam or hi - v > lam:
            count += 1
            lo = hi = v
    return count


def jump_count_pairs_bruteforce(path: Sequence[float], lam: float) -> int:
    """Exhaustive search over all pair systems i1<j1<=i2<j2<=..."""
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L > 16:
        raise ValueError(f"brute-force pair search refused for length {L} > 16")

    def rec(start: int) -> int:
        best = 0
        for s in range(start, L):
            for e in range(s + 1, L):
                if abs(a[e] - a[s]) > lam:
                    best = max(best, 1 + rec(e))
        return best

    return rec(0)


def jump_count_pointwise(f: "Martingale", lam: float) -> np.ndarray:
    """Per-cell chain jump count of the level path (vectorized DP)."""
    if lam <= 0:
        raise ValueError(f"jump threshold must be positive, got {lam}")
    filt = f.filtration
    reps = np.array([atom[0] for atom in filt.levels[filt.depth]], dtype=np.intp)
    a = f.cell_matrix()[:, reps]
    L, k = a.shape
    cnt = np.zeros((L, k), dtype=np.intp)
    for j in range(1, L):
        ok = np.abs(a[:j] - a[j]) > lam
        cand = np.where(ok, cnt[:j] + 1, 0)
        cnt[j] = cand.max(axis=0)
    return cnt.max(axis=0)[filt.atom_index[filt.depth]].astype(float)


# ---------------------------------------------------------------------------
# constant-explicit jump majorant for the variation


def dyadic_jump_majorant(path: Sequence[float], r: float, tolerance: float = 1e-9) -> float:
    """Upper bound for V_r(path)^r by dyadic jump-pair counts.

    Evaluates sum over l of 2^(r(l+1)) * P(2^l) where P is the pair count,
    truncated to the levels that matter: levels with 2^l at or above the
    largest gap contribute nothing, and the lower tail is replaced by its
    geometric bound (L-1) * 2^(r*l_min) / (1 - 2^-r), which is added to
    the result so the return value stays an upper bound.

    Each increment of an optimal chain with gap in (2^l, 2^(l+1)] costs at
    most 2^(r(l+1)), and the chain's pairs at that scale form a pair
    system with gap > 2^l, hence the bound.  Valid for every r >= 1;
    values at r <= 2 are diagnostics (the geometric constants blow up as
    r approaches 2 from above).
    """
    if r < 1:
        raise ValueError(f"majorant order r must be >= 1, got {r}")
    if tolerance <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    a = np.asarray(path, dtype=float)
    L = a.shape[0]
    if L < 2:
        return 0.0
    max_gap = float(a.max() - a.min())
    if max_gap == 0.0:
        return 0.0
    l_max = math.floor(math.log2(max_gap))
    while 2.0 ** l_max >= max_gap:
        l_max -= 1
    denom = 1.0 - 2.0 ** -r
    l_min = math.floor(math.log2(tolerance * denom / (L - 1)) / r)
    while (L - 1) * 2.0 ** (r * l_min) / denom >= tolerance:
        l_min -= 1
    l_min = min(l_min, l_max + 1)
    total = 0.0
    for l in range(l_max, l_min - 1, -1):
        total += 2.0 ** (r * (l + 1)) * jump_count_pairs(a, 2.0 ** l)
    return total + (L - 1) * 2.0 ** (r * l_min) / denom


def c_r_constant(r: float) -> float:
    """Closed form 2 * (1 - 2^(-(r-2)/2)) of the geometric layer constant.

    Equals the reciprocal of half the sum over l <= 0 of 2^((r-2)l/2);
    vanishes linearly as r approaches 2 from above.
    """
    if r <= 2:
        raise ValueError(f"constant defined for r > 2 only, got {r}")
    return 2.0 * (1.0 - 2.0 ** (-(r - 2.0) / 2.0))


# ---------------------------------------------------------------------------
# field-level operators and measure utilities


def maximal(f: "Martingale") -> np.ndarray:
    """Per-cell maximum of |f_n| over all levels."""
    return np.abs(f.cell_matrix()).max(axis=0)


def square(f: "Martingale") -> np.ndarray:
    """Per-cell square function: l2 norm of the difference sequence."""
    mat = f.cell_matrix()
    if mat.shape[0] < 2:
        return np.zeros(mat.shape[1])
    return np.sqrt((np.diff(mat, axis=0) ** 2).sum(axis=0))


def conditional_square(f: "Martingale") -> np.ndarray:
    """Per-cell conditional square function.

    Sums the level-(n-1) conditional averages of |d_n|^2; constant on
    level-(N-1) atoms by construction.
    """
    filt = f.filtration
    mat = f.cell_matrix()
    acc = np.zeros(filt.num_cells)
    for n in range(1, filt.depth + 1):
        d2 = (mat[n] - mat[n - 1]) ** 2
        acc += conditional_expectation(d2, n - 1, filt)
    return np.sqrt(acc)


def lp_norm(field, filtration: Filtration, p: float) -> float:
    """Measure-weighted L^p norm of a per-cell field."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    v = np.abs(np.asarray(field, dtype=float))
    return float((filtration.cell_measure * v ** p).sum() ** (1.0 / p))


def distribution(
    field,
    filtration: Filtration,
    threshold: float,
    mode: str = "strict",
    subset: np.ndarray | None = None,
) -> float:
    """Total measure of {field > threshold} (or >=), optionally within a
    boolean cell subset (joint events)."""
    v = np.asarray(field, dtype=float)
    if mode == "strict":
        mask = v > threshold
    elif mode == "non_strict":
        mask = v >= threshold
    else:
        raise ValueError(f"mode must be 'strict' or 'non_strict', got {mode!r}")
    if subset is not None:
        mask = mask & np.asarray(subset, dtype=bool)
    return float(filtration.cell_measure[mask].sum())


def measure_quantiles(field, filtration: Filtration, probs) -> np.ndarray:
    """Measure-weighted quantiles of a per-cell field.

    q(p) is the smallest field value whose cumulative measure reaches
    p * total.
    """
    v = np.asarray(field, dtype=float)
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(filtration.cell_measure[order])
    total = cum[-1]
    out = []
    for p in np.atleast_1d(np.asarray(probs, dtype=float)):
        k = int(np.searchsorted(cum, p * total, side="left"))
        out.append(v[order[min(k, len(order) - 1)]])
    return np.asarray(out)
