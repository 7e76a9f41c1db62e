"""Colinear chaining of exact anchor matches inside a region pair.

Chaining runs twice.  The first pass links k-mer anchors with a linear
gap cost using a sparse sweep: anchors enter and leave an activation
window as their distance on the first axis changes, and a segment tree
over second-axis end positions answers the best-predecessor query in
log time.  Scores are plain integers, so results are exactly
reproducible.  A second pass re-chains the resulting fragments with an
affine gap cost, which joins pieces separated by large indels without
letting small spurious matches bridge them.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from sortedcontainers import SortedList

from .sketch import pack_kmers

ANCHOR_K = 11
MAX_CHAIN_OVERLAP = 10
MATCH_UNIT = 100
GAP_UNIT = 1
CHAIN_GAP_CAP = 10_000
REFINE_GAP_OPEN = 10_000
REFINE_GAP_EXTEND = 5
REFINE_GAP_CAP = 10_000
UNIFORM_GAP_FLOOR = 50
# Longest stretch a pair inside the error model plausibly crosses without
# one exact anchor.  Anchor survival is at least e^(-11 * 0.15) ~ 0.19 per
# position, so deserts past ~150 bases essentially never happen; beyond
# this, a link that jumps on both sides is joining unrelated content.
ANCHOR_DESERT = 200
MAX_ANCHOR_OCC = 1000


@dataclass(frozen=True)
class Anchor:
    """Maximal exact match: length bases at pos1 in one region, pos2 in
    the other."""

    pos1: int
    pos2: int
    length: int

    @property
    def end1(self) -> int:
        return self.pos1 + self.length

    @property
    def end2(self) -> int:
        return self.pos2 + self.length


@dataclass
class Chain:
    anchors: list[Anchor] = field(default_factory=list)
    score: int = 0

    @property
    def start1(self) -> int:
        return self.anchors[0].pos1

    @property
    def end1(self) -> int:
        return self.anchors[-1].end1

    @property
    def start2(self) -> int:
        return self.anchors[0].pos2

    @property
    def end2(self) -> int:
        return self.anchors[-1].end2

    @property
    def span1(self) -> int:
        return self.end1 - self.start1

    @property
    def span2(self) -> int:
        return self.end2 - self.start2

    @property
    def anchor_bases(self) -> int:
        return sum(a.length for a in self.anchors)


def find_anchors(seq1: np.ndarray, seq2: np.ndarray, k: int = ANCHOR_K,
                 max_occ: int = MAX_ANCHOR_OCC) -> list[Anchor]:
    """All maximal exact matches of length >= k between two byte strings.

    K-mers touching an unknown base never match.  K-mers occurring more
    than ``max_occ`` times in ``seq2`` are skipped to keep the pair count
    bounded on low-complexity input.
    """
    if len(seq1) < k or len(seq2) < k:
        return []
    h1, v1 = pack_kmers(np.asarray(seq1, dtype=np.uint8), k)
    h2, v2 = pack_kmers(np.asarray(seq2, dtype=np.uint8), k)
    p1 = np.nonzero(v1)[0]
    p2 = np.nonzero(v2)[0]
    if p1.size == 0 or p2.size == 0:
        return []
    a = h1[p1]
    order2 = np.argsort(h2[p2], kind="stable")
    sorted2 = h2[p2][order2]
    lo = np.searchsorted(sorted2, a, side="left")
    hi = np.searchsorted(sorted2, a, side="right")
    cnt = hi - lo
    keep = (cnt > 0) & (cnt <= max_occ)
    if not keep.any():
        return []
    p1 = p1[keep]
    lo = lo[keep]
    cnt = cnt[keep]
    total = int(cnt.sum())
    starts = np.repeat(lo, cnt)
    offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    i = np.repeat(p1, cnt)
    j = p2[order2[starts + offs]]

    diag = j - i
    order = np.lexsort((i, diag))
    i = i[order]
    j = j[order]
    diag = diag[order]
    new_run = np.ones(total, dtype=bool)
    new_run[1:] = (diag[1:] != diag[:-1]) | (i[1:] != i[:-1] + 1)
    run_starts = np.nonzero(new_run)[0]
    run_lens = np.diff(np.append(run_starts, total))
    return [
        Anchor(int(i[s]), int(j[s]), int(n) + k - 1)
        for s, n in zip(run_starts, run_lens)
    ]


_NEG = (-(1 << 62), -1)


class _RangeMax:
    """Segment tree of (value, id) maxima with multiset leaves, so
    entries can be removed again."""

    def __init__(self, size: int):
        n = 1
        while n < max(1, size):
            n *= 2
        self.n = n
        self.tree = [_NEG] * (2 * n)
        self.leaves: dict[int, SortedList] = {}

    def _pull(self, leaf: int) -> None:
        pos = self.n + leaf
        bucket = self.leaves.get(leaf)
        self.tree[pos] = bucket[-1] if bucket else _NEG
        pos //= 2
        while pos:
            self.tree[pos] = max(self.tree[2 * pos], self.tree[2 * pos + 1])
            pos //= 2

    def add(self, leaf: int, item: tuple[int, int]) -> None:
        self.leaves.setdefault(leaf, SortedList()).add(item)
        self._pull(leaf)

    def remove(self, leaf: int, item: tuple[int, int]) -> None:
        self.leaves[leaf].remove(item)
        self._pull(leaf)

    def query(self, lo: int, hi: int) -> tuple[int, int]:
        """Max over leaves [lo, hi] inclusive."""
        if hi < lo:
            return _NEG
        best = _NEG
        lo += self.n
        hi += self.n + 1
        while lo < hi:
            if lo & 1:
                if self.tree[lo] > best:
                    best = self.tree[lo]
                lo += 1
            if hi & 1:
                hi -= 1
                if self.tree[hi] > best:
                    best = self.tree[hi]
            lo //= 2
            hi //= 2
        return best


def chain_scores(
    anchors: list[Anchor],
    gap_cap: int = CHAIN_GAP_CAP,
    match_unit: int = MATCH_UNIT,
    gap_unit: int = GAP_UNIT,
    max_overlap: int = MAX_CHAIN_OVERLAP,
) -> tuple[list[Anchor], list[int], list[int]]:
    """Sparse best-predecessor DP over anchors.

    Returns the anchors in sweep order together with their chain scores
    and parent indices (-1 for a chain start).  A predecessor is valid
    when both signed start-to-end distances lie in [-max_overlap,
    gap_cap]; every anchor must be longer than max_overlap so that valid
    predecessors always start strictly earlier on the first axis.
    """
    anc = sorted(anchors, key=lambda x: (x.pos1, x.pos2, x.length))
    n = len(anc)
    scores = [0] * n
    parents = [-1] * n
    if n == 0:
        return anc, scores, parents
    if min(x.length for x in anc) <= max_overlap:
        raise ValueError("anchor shorter than the allowed overlap")

    end2s = np.array(sorted({x.end2 for x in anc}), dtype=np.int64)
    leaf_of = {int(e): idx for idx, e in enumerate(end2s)}
    tree = _RangeMax(len(end2s))
    # pending[i]: computed but not yet inside the activation window
    pending: list[tuple[int, int]] = []
    active: list[tuple[int, int]] = []

    for b in range(n):
        bp1, bp2 = anc[b].pos1, anc[b].pos2
        while pending and pending[0][0] <= bp1 + max_overlap:
            _, a_idx = heapq.heappop(pending)
            item = (scores[a_idx] + gap_unit * (anc[a_idx].end1 + anc[a_idx].end2), a_idx)
            tree.add(leaf_of[anc[a_idx].end2], item)
            heapq.heappush(active, (anc[a_idx].end1, a_idx))
        while active and active[0][0] < bp1 - gap_cap:
            _, a_idx = heapq.heappop(active)
            item = (scores[a_idx] + gap_unit * (anc[a_idx].end1 + anc[a_idx].end2), a_idx)
            tree.remove(leaf_of[anc[a_idx].end2], item)

        lo = int(np.searchsorted(end2s, bp2 - gap_cap, side="left"))
        hi = int(np.searchsorted(end2s, bp2 + max_overlap, side="right")) - 1
        value, a_idx = tree.query(lo, hi)
        gain = value - gap_unit * (bp1 + bp2)
        base = match_unit * anc[b].length
        if a_idx >= 0 and gain > 0:
            scores[b] = base + gain
            parents[b] = a_idx
        else:
            scores[b] = base
        heapq.heappush(pending, (anc[b].end1, b))
    return anc, scores, parents


def best_chain_score(anchors: list[Anchor], **kwargs) -> int:
    _, scores, _ = chain_scores(anchors, **kwargs)
    return max(scores, default=0)


def sparse_chain(
    anchors: list[Anchor],
    gap_cap: int = CHAIN_GAP_CAP,
    match_unit: int = MATCH_UNIT,
    gap_unit: int = GAP_UNIT,
    max_overlap: int = MAX_CHAIN_OVERLAP,
) -> list[Chain]:
    """Extract disjoint chains greedily by descending score.

    Each anchor belongs to at most one chain; a backtrack stops when it
    reaches an anchor some higher-scoring chain already consumed.
    """
    anc, scores, parents = chain_scores(
        anchors, gap_cap=gap_cap, match_unit=match_unit,
        gap_unit=gap_unit, max_overlap=max_overlap,
    )
    n = len(anc)
    used = [False] * n
    chains: list[Chain] = []
    for b in sorted(range(n), key=lambda x: (-scores[x], x)):
        if used[b]:
            continue
        path = [b]
        used[b] = True
        cur = b
        while parents[cur] >= 0 and not used[parents[cur]]:
            cur = parents[cur]
            used[cur] = True
            path.append(cur)
        path.reverse()
        members = [anc[x] for x in path]
        score = sum(match_unit * a.length for a in members)
        for prev, nxt in zip(members, members[1:]):
            score -= gap_unit * ((nxt.pos1 - prev.end1) + (nxt.pos2 - prev.end2))
        chains.append(Chain(anchors=members, score=score))
    return chains


def split_uniform(chain: Chain, delta_gap: float,
                  floor: int = UNIFORM_GAP_FLOOR) -> list[Chain]:
    """Split a chain at links no conforming alignment could contain.

    Two kinds of link disqualify themselves.  The imbalance |d1 - d2| is
    sequence inserted on one side only, a lower bound on the gap error
    any alignment of the chain must pay; a link whose imbalance exceeds
    ``delta_gap`` times the piece span plus ``floor`` cannot sit inside
    a conforming alignment of that piece.  Bounded symmetric jumps are
    left alone (mutation-dense stretches simply lack exact anchors), but
    a link that jumps far on *both* sides is a content discontinuity:
    deserts longer than ``ANCHOR_DESERT`` do not occur inside the error
    model, and large gaps are one-sided.  Such links are what lets a
    couple of fluke anchors in flanking sequence ride into an otherwise
    clean chain, so the smaller side of the cut sets their budget.  The
    chain is cut at the worst offending link and the halves re-checked.
    """
    anchors = chain.anchors
    if len(anchors) <= 1:
        return [chain]
    span = max(chain.span1, chain.span2)
    worst, worst_g = -1, -1
    for idx, (prev, nxt) in enumerate(zip(anchors, anchors[1:])):
        g = abs((nxt.pos1 - prev.end1) - (nxt.pos2 - prev.end2))
        if g > worst_g:
            worst, worst_g = idx, g
    if worst_g <= delta_gap * span + floor:
        first, last = anchors[0], anchors[-1]
        worst, worst_x = -1, 0.0
        for idx, (prev, nxt) in enumerate(zip(anchors, anchors[1:])):
            jump = min(nxt.pos1 - prev.end1, nxt.pos2 - prev.end2)
            if jump <= ANCHOR_DESERT:
                continue
            side = min(
                max(prev.end1 - first.pos1, prev.end2 - first.pos2),
                max(last.end1 - nxt.pos1, last.end2 - nxt.pos2),
            )
            excess = jump - (delta_gap * side + ANCHOR_DESERT)
            if excess > worst_x:
                worst, worst_x = idx, excess
        if worst < 0:
            return [chain]
    left = _rescore(anchors[: worst + 1])
    right = _rescore(anchors[worst + 1 :])
    return split_uniform(left, delta_gap, floor) + split_uniform(right, delta_gap, floor)


def _rescore(members: list[Anchor], match_unit: int = MATCH_UNIT,
             gap_unit: int = GAP_UNIT) -> Chain:
    score = sum(match_unit * a.length for a in members)
    for prev, nxt in zip(members, members[1:]):
        score -= gap_unit * ((nxt.pos1 - prev.end1) + (nxt.pos2 - prev.end2))
    return Chain(anchors=members, score=score)


def refine_chains(
    chains: list[Chain],
    min_span: int,
    gap_open: int = REFINE_GAP_OPEN,
    gap_extend: int = REFINE_GAP_EXTEND,
    gap_cap: int = REFINE_GAP_CAP,
    match_unit: int = MATCH_UNIT,
) -> list[Chain]:
    """Re-chain fragments with an affine gap cost and drop short output.

    Fragments act as super-anchors valued by their matched bases.  Links
    never overlap and pay ``gap_open`` once plus ``gap_extend`` per gap
    base on both axes.  Merged chains shorter than ``min_span`` on
    either axis are discarded.
    """
    if not chains:
        return []
    frags = sorted(chains, key=lambda c: (c.start1, c.start2))
    n = len(frags)
    value = [match_unit * c.anchor_bases for c in frags]
    scores = list(value)
    parents = [-1] * n
    for b in range(n):
        for a in range(b):
            d1 = frags[b].start1 - frags[a].end1
            d2 = frags[b].start2 - frags[a].end2
            if d1 < 0 or d1 > gap_cap or d2 < 0 or d2 > gap_cap:
                continue
            gain = scores[a] - gap_open - gap_extend * (d1 + d2)
            if value[b] + gain > scores[b]:
                scores[b] = value[b] + gain
                parents[b] = a
    used = [False] * n
    merged: list[Chain] = []
    for b in sorted(range(n), key=lambda x: (-scores[x], x)):
        if used[b]:
            continue
        path = [b]
        used[b] = True
        cur = b
        while parents[cur] >= 0 and not used[parents[cur]]:
            cur = parents[cur]
            used[cur] = True
            path.append(cur)
        path.reverse()
        members: list[Anchor] = []
        for idx in path:
            members.extend(frags[idx].anchors)
        chain = _rescore(members)
        if chain.span1 >= min_span and chain.span2 >= min_span:
            merged.append(chain)
    return merged
