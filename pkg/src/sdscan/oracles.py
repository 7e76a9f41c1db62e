"""Brute-force reference implementations used only by the test suites.

Everything here favors directness over speed and shares no code with the
production modules: plain Python loops, full matrices, no incremental
state.  Each oracle refuses inputs above its documented size limit.
"""

from __future__ import annotations

from collections import Counter


class OracleLimitError(RuntimeError):
    """Raised when an oracle is asked to process more than it is sized for."""


def _check(limit: int, actual: int, what: str) -> None:
    if actual > limit:
        raise OracleLimitError(f"{what}: {actual} exceeds oracle limit {limit}")


def jaccard_brute(own_hashes, other_hashes) -> float:
    """From-scratch winnowed MinHash estimate between two minimizer sets.

    Takes the hash collections of the two windows (duplicates allowed and
    ignored), sorts the distinct union, keeps the ``s`` smallest where ``s``
    is the number of distinct own hashes, and returns the fraction of those
    that occur in both windows.  Limit: 1,000,000 hashes per side.
    """
    own = set(int(h) for h in own_hashes)
    other = set(int(h) for h in other_hashes)
    _check(1_000_000, len(own), "own hashes")
    _check(1_000_000, len(other), "other hashes")
    s = len(own)
    if s == 0:
        return 0.0
    union = sorted(own | other)
    top = union[:s]
    shared = sum(1 for h in top if h in own and h in other)
    return shared / s


def winnow_brute(bases: bytes, k: int, w: int, hash_fn) -> list[int]:
    """Per-window scan winnowing: minimal hash, rightmost on ties.

    ``hash_fn`` maps a k-mer (bytes) to an integer; k-mers containing N are
    not candidates.  Returns sorted distinct selected positions.  Limit:
    100,000 bases.
    """
    _check(100_000, len(bases), "winnow input")
    n = len(bases)
    count = n - k + 1
    if count <= 0:
        return []
    hashes = []
    for p in range(count):
        kmer = bases[p : p + k]
        hashes.append(None if b"N" in kmer else hash_fn(kmer))
    ww = min(w, count)
    chosen = set()
    for start in range(count - ww + 1):
        best_pos = None
        best_hash = None
        for p in range(start, start + ww):
            h = hashes[p]
            if h is None:
                continue
            if best_hash is None or h <= best_hash:  # <= keeps the rightmost tie
                best_hash, best_pos = h, p
        if best_pos is not None:
            chosen.add(best_pos)
    return sorted(chosen)


def qgram_brute(s1: bytes, s2: bytes, q: int) -> int:
    """Shared q-gram count with multiplicity, skipping q-grams containing N.

    Limit: 100,000 bases per string.
    """
    _check(100_000, len(s1), "q-gram string 1")
    _check(100_000, len(s2), "q-gram string 2")

    def grams(s: bytes) -> Counter:
        c: Counter = Counter()
        for i in range(len(s) - q + 1):
            g = s[i : i + q]
            if b"N" not in g:
                c[g] += 1
        return c

    c1, c2 = grams(s1), grams(s2)
    return sum(min(n, c2[g]) for g, n in c1.items() if g in c2)


def chain_brute(anchors, gap_cap: int, match_unit: int, gap_unit: int,
                max_overlap: int = 10) -> int:
    """Quadratic colinear-chaining DP; returns the best chain score.

    ``anchors`` is a list of (pos1, pos2, length) tuples.  A predecessor ``a``
    may precede ``b`` when both start-to-end distances ``b.pos - a.end`` lie
    in [-max_overlap, gap_cap]; linking costs ``gap_unit`` per distance unit
    on both axes (signed).  Anchor value is ``match_unit`` per base.  All
    arithmetic is integer.  Limit: 2,000 anchors.
    """
    _check(2000, len(anchors), "anchors")
    if not anchors:
        return 0
    anc = sorted((p1, p2, ln) for p1, p2, ln in anchors)
    n = len(anc)
    score = [0] * n
    for b in range(n):
        bp1, bp2, bln = anc[b]
        best = 0
        for a in range(n):
            if a == b:
                continue
            ap1, ap2, aln = anc[a]
            d1 = bp1 - (ap1 + aln)
            d2 = bp2 - (ap2 + aln)
            if d1 < -max_overlap or d1 > gap_cap:
                continue
            if d2 < -max_overlap or d2 > gap_cap:
                continue
            gain = score[a] - gap_unit * (d1 + d2)
            if gain > best:
                best = gain
        score[b] = match_unit * bln + best
    return max(score)


def align_brute(s1: bytes, s2: bytes, match: int, mismatch: int,
                gap_open: int, gap_extend: int) -> int:
    """Full-matrix affine-gap global alignment score (Gotoh, three tables).

    A gap of length L costs ``gap_open + gap_extend * L``; N never matches
    anything, including N.  Limit: 2,000 bases per string.
    """
    _check(2000, len(s1), "alignment string 1")
    _check(2000, len(s2), "alignment string 2")
    n, m = len(s1), len(s2)
    neg = float("-inf")
    # M ends in a diagonal step, X in a gap consuming s1, Y in a gap consuming s2
    M = [[neg] * (m + 1) for _ in range(n + 1)]
    X = [[neg] * (m + 1) for _ in range(n + 1)]
    Y = [[neg] * (m + 1) for _ in range(n + 1)]
    M[0][0] = 0
    for i in range(1, n + 1):
        X[i][0] = -gap_open - gap_extend * i
    for j in range(1, m + 1):
        Y[0][j] = -gap_open - gap_extend * j
    for i in range(1, n + 1):
        a = s1[i - 1]
        for j in range(1, m + 1):
            b = s2[j - 1]
            if a == b and a != ord("N"):
                sub = match
            else:
                sub = -mismatch
            diag = max(M[i - 1][j - 1], X[i - 1][j - 1], Y[i - 1][j - 1])
            if diag > neg:
                M[i][j] = diag + sub
            X[i][j] = max(M[i - 1][j] - gap_open - gap_extend,
                          X[i - 1][j] - gap_extend,
                          Y[i - 1][j] - gap_open - gap_extend)
            Y[i][j] = max(M[i][j - 1] - gap_open - gap_extend,
                          X[i][j - 1] - gap_open - gap_extend,
                          Y[i][j - 1] - gap_extend)
    best = max(M[n][m], X[n][m], Y[n][m])
    return int(best)


def align_enumerate(s1: bytes, s2: bytes, match: int, mismatch: int,
                    gap_open: int, gap_extend: int) -> int:
    """Exhaustive enumeration of every alignment; tiny inputs only (<= 8 bp)."""
    _check(8, len(s1), "enumeration string 1")
    _check(8, len(s2), "enumeration string 2")

    def walk(i: int, j: int, state: str) -> int:
        if i == len(s1) and j == len(s2):
            return 0
        best = float("-inf")
        if i < len(s1) and j < len(s2):
            a, b = s1[i], s2[j]
            sub = match if (a == b and a != ord("N")) else -mismatch
            best = max(best, sub + walk(i + 1, j + 1, "M"))
        if i < len(s1):
            cost = gap_extend if state == "X" else gap_open + gap_extend
            best = max(best, -cost + walk(i + 1, j, "X"))
        if j < len(s2):
            cost = gap_extend if state == "Y" else gap_open + gap_extend
            best = max(best, -cost + walk(i, j + 1, "Y"))
        return best

    return int(walk(0, 0, "start"))
