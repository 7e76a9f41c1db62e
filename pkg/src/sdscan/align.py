"""Affine-gap alignment and alignment-derived statistics.

The core is a Gotoh three-table global aligner written as a numpy row
sweep.  All scores are int64, so results are exact and comparable
against a reference implementation.  The within-row dependency of the
horizontal-gap table is resolved with a running-maximum trick: a gap
ending at column j must start right after a match or vertical-gap cell,
so its score is a prefix maximum of those cells plus a linear ramp.
Pointers are recomputed from the finished rows and packed three to a
byte.

A gap of length L costs ``gap_open + gap_extend * L``.  Switching
directly between gap directions pays the open penalty again.  The
unknown base N matches nothing, including another N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NEG = -(1 << 62)
_NEG_THRESH = -(1 << 61)
MAX_ALIGN_CELLS = 250_000_000
_N = ord("N")

_TRANSITIONS = {
    (ord("A"), ord("G")), (ord("G"), ord("A")),
    (ord("C"), ord("T")), (ord("T"), ord("C")),
}
_ACGT = frozenset(b"ACGT")


@dataclass(frozen=True)
class AlignParams:
    match: int = 5
    mismatch: int = 4
    gap_open: int = 40
    gap_extend: int = 1


@dataclass
class Alignment:
    """An alignment path anchored at (pos1, pos2) of the aligned pair."""

    score: int
    cigar: list[tuple[str, int]] = field(default_factory=list)
    pos1: int = 0
    pos2: int = 0

    @property
    def end1(self) -> int:
        return self.pos1 + sum(n for op, n in self.cigar if op in "MD")

    @property
    def end2(self) -> int:
        return self.pos2 + sum(n for op, n in self.cigar if op in "MI")

    def cigar_string(self) -> str:
        return "".join(f"{n}{op}" for op, n in self.cigar)


def cigar_lengths(cigar: list[tuple[str, int]]) -> tuple[int, int]:
    """Bases consumed on (mate1, mate2)."""
    c1 = sum(n for op, n in cigar if op in "MD")
    c2 = sum(n for op, n in cigar if op in "MI")
    return c1, c2


def compress_cigar(ops: list[tuple[str, int]]) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    for op, n in ops:
        if n <= 0:
            continue
        if out and out[-1][0] == op:
            out[-1] = (op, out[-1][1] + n)
        else:
            out.append((op, n))
    return out


def parse_cigar(text: str) -> list[tuple[str, int]]:
    out: list[tuple[str, int]] = []
    num = ""
    for ch in text:
        if ch.isdigit():
            num += ch
        else:
            if ch not in "MID" or not num:
                raise ValueError(f"bad cigar: {text!r}")
            out.append((ch, int(num)))
            num = ""
    if num:
        raise ValueError(f"bad cigar: {text!r}")
    return out


def _as_bytes(s) -> np.ndarray:
    if isinstance(s, np.ndarray):
        return s.astype(np.uint8, copy=False)
    if isinstance(s, (bytes, bytearray)):
        return np.frombuffer(bytes(s), dtype=np.uint8)
    raise TypeError(f"expected bytes or uint8 array, got {type(s)!r}")


def _argmax3(c0: np.ndarray, c1: np.ndarray, c2: np.ndarray):
    """Elementwise max of three arrays and which one won (0 beats 1
    beats 2 on ties)."""
    best = np.maximum(np.maximum(c0, c1), c2)
    ptr = np.full(c0.shape, 2, dtype=np.uint8)
    ptr[c1 >= best] = 1
    ptr[c0 >= best] = 0
    return best, ptr


def _band_rows(n: int, m: int, band: int | None):
    if band is None:
        return None
    lo = np.zeros(n + 1, dtype=np.int64)
    hi = np.full(n + 1, m, dtype=np.int64)
    for i in range(n + 1):
        center = round(i * m / n) if n else 0
        lo[i] = max(0, center - band)
        hi[i] = min(m, center + band)
    return lo, hi


def _dp_global(s1: np.ndarray, s2: np.ndarray, p: AlignParams,
               band: int | None):
    """One full sweep; returns (score, cigar, band_touched)."""
    n, m = len(s1), len(s2)
    if (n + 1) * (m + 1) > MAX_ALIGN_CELLS:
        raise ValueError(f"alignment of {n} x {m} exceeds the cell limit")
    go, ge = p.gap_open, p.gap_extend
    bounds = _band_rows(n, m, band)

    ptr = np.zeros((n + 1, m + 1), dtype=np.uint8)
    jramp = np.arange(m + 1, dtype=np.int64)
    prevM = np.full(m + 1, NEG, dtype=np.int64)
    prevM[0] = 0
    prevX = np.full(m + 1, NEG, dtype=np.int64)
    prevY = np.full(m + 1, NEG, dtype=np.int64)
    if m:
        prevY[1:] = -go - ge * jramp[1:]
    if bounds is not None:
        lo0, hi0 = int(bounds[0][0]), int(bounds[1][0])
        prevY[hi0 + 1 :] = NEG

    for i in range(1, n + 1):
        a = s1[i - 1]
        eq = (s2 == a) if a != _N else np.zeros(m, dtype=bool)
        eq &= s2 != _N
        sub = np.where(eq, p.match, -p.mismatch).astype(np.int64)

        curX, px = _argmax3(prevM - go - ge, prevX - ge, prevY - go - ge)
        diag, pm = _argmax3(prevM[:-1], prevX[:-1], prevY[:-1])
        curM = np.empty(m + 1, dtype=np.int64)
        curM[0] = NEG
        curM[1:] = diag + sub

        # masking must precede the prefix-max pass so that every stored
        # value, and therefore every recomputed pointer, reflects the
        # strictly banded recurrence
        if bounds is not None:
            lo_i, hi_i = int(bounds[0][i]), int(bounds[1][i])
            if lo_i > 0:
                curM[:lo_i] = NEG
                curX[:lo_i] = NEG
            if hi_i < m:
                curM[hi_i + 1 :] = NEG
                curX[hi_i + 1 :] = NEG

        ramp = np.maximum(curM, curX) - go + ge * jramp
        run = np.maximum.accumulate(ramp)
        curY = np.empty(m + 1, dtype=np.int64)
        curY[0] = NEG
        curY[1:] = run[:-1] - ge * jramp[1:]
        if bounds is not None:
            if lo_i > 0:
                curY[:lo_i] = NEG
            if hi_i < m:
                curY[hi_i + 1 :] = NEG

        py = np.full(m + 1, 2, dtype=np.uint8)
        py[1:][curY[1:] == curX[:-1] - go - ge] = 1
        py[1:][curY[1:] == curM[:-1] - go - ge] = 0
        ptr[i] = (np.concatenate(([0], pm)).astype(np.uint8)
                  | (px << 2) | (py << 4))
        prevM, prevX, prevY = curM, curX, curY

    finals = [int(prevM[m]), int(prevX[m]), int(prevY[m])]
    state = finals.index(max(finals))
    score = finals[state]
    if score < _NEG_THRESH:
        return score, [], True

    ops: list[tuple[str, int]] = []
    touched = False
    i, j = n, m
    while i > 0 or j > 0:
        if bounds is not None and i > 0:
            lo_i, hi_i = int(bounds[0][i]), int(bounds[1][i])
            if (j == lo_i and lo_i > 0) or (j == hi_i and hi_i < m):
                touched = True
        if i == 0:
            ops.append(("I", j))
            break
        if j == 0:
            ops.append(("D", i))
            break
        code = int(ptr[i, j])
        if state == 0:
            ops.append(("M", 1))
            state = code & 3
            i -= 1
            j -= 1
        elif state == 1:
            ops.append(("D", 1))
            state = (code >> 2) & 3
            i -= 1
        else:
            ops.append(("I", 1))
            state = (code >> 4) & 3
            j -= 1
    ops.reverse()
    return score, compress_cigar(ops), touched


def global_align(s1, s2, params: AlignParams = AlignParams(),
                 band: int | None = None) -> Alignment:
    """Optimal global alignment; mate1 is the reference for D/I.

    With ``band`` set, only cells within that distance of the straight
    end-to-end diagonal are considered; if the optimal in-band path
    presses against the band edge, the band is doubled and the sweep
    rerun, falling back to the full matrix.
    """
    a1, a2 = _as_bytes(s1), _as_bytes(s2)
    n, m = len(a1), len(a2)
    p = params
    if n == 0 and m == 0:
        return Alignment(score=0, cigar=[])
    if n == 0:
        return Alignment(score=-p.gap_open - p.gap_extend * m, cigar=[("I", m)])
    if m == 0:
        return Alignment(score=-p.gap_open - p.gap_extend * n, cigar=[("D", n)])

    while band is not None:
        if band >= max(n, m):
            band = None
            break
        score, cigar, touched = _dp_global(a1, a2, p, band)
        if not touched and score > _NEG_THRESH:
            return Alignment(score=score, cigar=cigar)
        band *= 2
    score, cigar, _ = _dp_global(a1, a2, p, None)
    return Alignment(score=score, cigar=cigar)


def best_prefix_align(s1, s2, params: AlignParams = AlignParams(),
                      xdrop: int = 500) -> Alignment:
    """Best-scoring alignment of some prefix of s1 with some prefix of s2.

    The sweep stops once every cell of a row falls ``xdrop`` below the
    best cell seen so far.  Used to extend past the last anchor of a
    chain into unanchored sequence.
    """
    a1, a2 = _as_bytes(s1), _as_bytes(s2)
    n, m = len(a1), len(a2)
    p = params
    if n == 0 or m == 0:
        return Alignment(score=0, cigar=[])
    if (n + 1) * (m + 1) > MAX_ALIGN_CELLS:
        raise ValueError(f"alignment of {n} x {m} exceeds the cell limit")
    go, ge = p.gap_open, p.gap_extend

    ptr = np.zeros((n + 1, m + 1), dtype=np.uint8)
    jramp = np.arange(m + 1, dtype=np.int64)
    prevM = np.full(m + 1, NEG, dtype=np.int64)
    prevM[0] = 0
    prevX = np.full(m + 1, NEG, dtype=np.int64)
    prevY = np.full(m + 1, NEG, dtype=np.int64)
    prevY[1:] = -go - ge * jramp[1:]

    best = (0, 0, 0)  # score, i, j; extensions always end on a match
    for i in range(1, n + 1):
        a = a1[i - 1]
        eq = (a2 == a) if a != _N else np.zeros(m, dtype=bool)
        eq &= a2 != _N
        sub = np.where(eq, p.match, -p.mismatch).astype(np.int64)

        curX, px = _argmax3(prevM - go - ge, prevX - ge, prevY - go - ge)
        diag, pm = _argmax3(prevM[:-1], prevX[:-1], prevY[:-1])
        curM = np.empty(m + 1, dtype=np.int64)
        curM[0] = NEG
        curM[1:] = diag + sub

        ramp = np.maximum(curM, curX) - go + ge * jramp
        run = np.maximum.accumulate(ramp)
        curY = np.empty(m + 1, dtype=np.int64)
        curY[0] = NEG
        curY[1:] = run[:-1] - ge * jramp[1:]

        py = np.full(m + 1, 2, dtype=np.uint8)
        py[1:][curY[1:] == curX[:-1] - go - ge] = 1
        py[1:][curY[1:] == curM[:-1] - go - ge] = 0
        ptr[i] = (np.concatenate(([0], pm)).astype(np.uint8)
                  | (px << 2) | (py << 4))

        row_best_j = int(np.argmax(curM))
        row_best = int(curM[row_best_j])
        if row_best > best[0]:
            best = (row_best, i, row_best_j)
        if row_best < best[0] - xdrop:
            break
        prevM, prevX, prevY = curM, curX, curY

    score, bi, bj = best
    state = 0
    ops: list[tuple[str, int]] = []
    i, j = bi, bj
    while i > 0 or j > 0:
        if i == 0:
            ops.append(("I", j))
            break
        if j == 0:
            ops.append(("D", i))
            break
        code = int(ptr[i, j])
        if state == 0:
            ops.append(("M", 1))
            state = code & 3
            i -= 1
            j -= 1
        elif state == 1:
            ops.append(("D", 1))
            state = (code >> 2) & 3
            i -= 1
        else:
            ops.append(("I", 1))
            state = (code >> 4) & 3
            j -= 1
    ops.reverse()
    return Alignment(score=score, cigar=compress_cigar(ops))


def replay_score(cigar: list[tuple[str, int]], s1, s2, pos1: int, pos2: int,
                 params: AlignParams = AlignParams()) -> int:
    """Score of an alignment path recomputed from its CIGAR alone."""
    a1, a2 = _as_bytes(s1), _as_bytes(s2)
    p = params
    score = 0
    i, j = pos1, pos2
    for op, n in cigar:
        if op == "M":
            b1 = a1[i : i + n]
            b2 = a2[j : j + n]
            eq = (b1 == b2) & (b1 != _N)
            score += p.match * int(eq.sum()) - p.mismatch * int(n - eq.sum())
            i += n
            j += n
        elif op == "D":
            score -= p.gap_open + p.gap_extend * n
            i += n
        elif op == "I":
            score -= p.gap_open + p.gap_extend * n
            j += n
        else:
            raise ValueError(f"bad cigar op {op!r}")
    return score


@dataclass
class AlignStats:
    """Column counts of one alignment path."""

    columns: int = 0
    matches: int = 0
    mismatches: int = 0
    transitions: int = 0
    transversions: int = 0
    gap_bases: int = 0
    gap_runs: int = 0
    small_gap_bases: int = 0  # bases in runs no longer than SMALL_GAP

    @property
    def edit_distance(self) -> int:
        return self.mismatches + self.gap_bases

    @property
    def error_total(self) -> float:
        return self.edit_distance / self.columns if self.columns else 0.0

    @property
    def error_mutation(self) -> float:
        if not self.columns:
            return 0.0
        return (self.mismatches + self.small_gap_bases) / self.columns

    @property
    def error_gap(self) -> float:
        if not self.columns:
            return 0.0
        return (self.gap_bases - self.small_gap_bases) / self.columns

    @property
    def mismatch_fraction(self) -> float:
        aligned = self.matches + self.mismatches
        return self.mismatches / aligned if aligned else 0.0


SMALL_GAP = 5


def alignment_stats(cigar: list[tuple[str, int]], s1, s2,
                    pos1: int = 0, pos2: int = 0) -> AlignStats:
    a1, a2 = _as_bytes(s1), _as_bytes(s2)
    st = AlignStats()
    i, j = pos1, pos2
    for op, n in cigar:
        if op == "M":
            b1 = a1[i : i + n]
            b2 = a2[j : j + n]
            eq = (b1 == b2) & (b1 != _N)
            st.matches += int(eq.sum())
            for x, y in zip(b1[~eq].tolist(), b2[~eq].tolist()):
                st.mismatches += 1
                if x in _ACGT and y in _ACGT:
                    if (x, y) in _TRANSITIONS:
                        st.transitions += 1
                    else:
                        st.transversions += 1
            i += n
            j += n
        elif op in ("D", "I"):
            st.gap_bases += n
            st.gap_runs += 1
            if n <= SMALL_GAP:
                st.small_gap_bases += n
            if op == "D":
                i += n
            else:
                j += n
        else:
            raise ValueError(f"bad cigar op {op!r}")
        st.columns += n
    return st


def align_chain(chain, s1, s2, params: AlignParams = AlignParams(),
                end_window: int = 2000, xdrop: int = 500,
                right_limit: int | None = None) -> Alignment:
    """Full alignment of a chained region pair.

    Anchors are exact matches, so they contribute M runs directly; the
    sequence between consecutive anchors is aligned globally with a band
    sized to the gap-length difference.  Anchors overlapping the
    previous one (the chainer allows a few bases) are trimmed at the
    front.  Finally both ends are extended past the outer anchors until
    the score drops by ``xdrop``; ``right_limit`` caps how far the right
    extension may reach (used when the pair folds back onto itself).
    The reported score is recomputed from the stitched CIGAR, so it is
    consistent with the path by construction.
    """
    a1, a2 = _as_bytes(s1), _as_bytes(s2)
    if not chain.anchors:
        raise ValueError("cannot align an empty chain")
    ops: list[tuple[str, int]] = []
    first = chain.anchors[0]
    start1, start2 = first.pos1, first.pos2
    ops.append(("M", first.length))
    e1, e2 = first.end1, first.end2
    for anchor in chain.anchors[1:]:
        p1, p2, ln = anchor.pos1, anchor.pos2, anchor.length
        t = max(0, e1 - p1, e2 - p2)
        p1 += t
        p2 += t
        ln -= t
        if ln <= 0:
            continue
        g1, g2 = p1 - e1, p2 - e2
        if g1 and g2:
            fill = global_align(a1[e1:p1], a2[e2:p2], params,
                                band=abs(g1 - g2) + 32)
            ops.extend(fill.cigar)
        elif g1:
            ops.append(("D", g1))
        elif g2:
            ops.append(("I", g2))
        ops.append(("M", ln))
        e1, e2 = p1 + ln, p2 + ln

    w1 = max(0, start1 - end_window)
    w2 = max(0, start2 - end_window)
    left = best_prefix_align(a1[w1:start1][::-1], a2[w2:start2][::-1],
                             params, xdrop)
    if left.cigar:
        c1, c2 = cigar_lengths(left.cigar)
        start1 -= c1
        start2 -= c2
        ops = list(reversed(left.cigar)) + ops
    rwin = end_window if right_limit is None else max(0, min(end_window, right_limit))
    right = best_prefix_align(a1[e1 : e1 + rwin], a2[e2 : e2 + rwin],
                              params, xdrop)
    if right.cigar:
        ops.extend(right.cigar)

    cigar = compress_cigar(ops)
    score = replay_score(cigar, a1, a2, start1, start2, params)
    return Alignment(score=score, cigar=cigar, pos1=start1, pos2=start2)


def trim_alignment(aln: Alignment, s1, s2, budget: float,
                   params: AlignParams = AlignParams()) -> Alignment:
    """Largest window of an alignment whose error rate beats ``budget``.

    Each column weighs ``budget`` on a match and ``budget - 1`` on a
    mismatch or gap, so a window sums positive exactly when its error
    rate is below the budget.  Keeping the maximum-sum window strips
    unrelated flanking sequence that over-eager chaining glued onto the
    ends, while interior gaps survive as long as the surrounding matches
    pay for them.  Returns an empty alignment when nothing qualifies.
    """
    if not aln.cigar:
        return Alignment(score=0)
    a1, a2 = _as_bytes(s1), _as_bytes(s2)
    total = sum(n for _, n in aln.cigar)
    bad = np.empty(total, dtype=bool)
    i, j, c = aln.pos1, aln.pos2, 0
    for op, n in aln.cigar:
        if op == "M":
            b1 = a1[i : i + n]
            b2 = a2[j : j + n]
            bad[c : c + n] = ~((b1 == b2) & (b1 != _N))
            i += n
            j += n
        elif op == "D":
            bad[c : c + n] = True
            i += n
        else:
            bad[c : c + n] = True
            j += n
        c += n
    weight = np.full(total, budget)
    weight[bad] -= 1.0
    prefix = np.concatenate(([0.0], np.cumsum(weight)))
    floor = np.minimum.accumulate(prefix[:-1])
    gain = prefix[1:] - floor
    hi = int(np.argmax(gain)) + 1
    if gain[hi - 1] <= 0:
        return Alignment(score=0)
    lo = int(np.argmin(prefix[:hi]))

    ops: list[tuple[str, int]] = []
    i, j, c = aln.pos1, aln.pos2, 0
    pos1 = pos2 = None
    for op, n in aln.cigar:
        take_lo = max(c, lo)
        take_hi = min(c + n, hi)
        if take_lo < take_hi:
            if pos1 is None:
                off = take_lo - c
                pos1 = i + (off if op in "MD" else 0)
                pos2 = j + (off if op in "MI" else 0)
            ops.append((op, take_hi - take_lo))
        if op in "MD":
            i += n
        if op in "MI":
            j += n
        c += n
        if c >= hi:
            break
    cigar = compress_cigar(ops)
    score = replay_score(cigar, a1, a2, pos1, pos2, params)
    return Alignment(score=score, cigar=cigar, pos1=pos1, pos2=pos2)


def kimura_distance(p_transition: float, q_transversion: float) -> float:
    """Two-parameter evolutionary distance; inf when saturated."""
    a = 1.0 - 2.0 * p_transition - q_transversion
    b = 1.0 - 2.0 * q_transversion
    if a <= 0.0 or b <= 0.0:
        return math.inf
    return -0.5 * math.log(a * math.sqrt(b))


def jukes_cantor(p_mismatch: float) -> float:
    """Single-rate evolutionary distance; inf when saturated."""
    a = 1.0 - 4.0 * p_mismatch / 3.0
    if a <= 0.0:
        return math.inf
    return -0.75 * math.log(a)
