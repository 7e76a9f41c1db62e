"""Seed detection and region extension for segmental duplication search.

Seeding slides a window of length ``n`` over the genome (stride ``n // 2``),
collects reverse-index hits of the window's minimizers, clusters the hits
into candidate intervals, and rolls the MinHash estimator across each
cluster.  Positions whose estimate clears the similarity threshold ``tau``
become seeds.  Extension then grows both windows of a seed in lockstep,
driven by minimizer entry events, until the estimate falls below ``tau`` or
a length, overlap, or sequence-boundary cap is reached.

The threshold ``tau`` is the smallest winnowed MinHash estimate a pair of
regions obeying the error model can be expected to reach: a factor
``(1 - dG) / (1 + dG)`` for the union growth caused by large gaps times the
MinHash-to-Jaccard conversion ``1 / (2 * e^(k * dM) - 1)`` of the k-mer
survival rate under point mutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .genome_io import Interval
from .sketch import MinimizerIndex, RollingEstimator

# Float comparisons against tau favor the seed by this much.
TAU_SLACK = 1e-12

MAX_REGION = 1_000_000
PAD_CAP = 5000
PAD_FRACTION = 0.25
MIN_SEED_WINDOW = 750
# During extension the estimate may sink below the floor for this many
# bases before the extent rolls back to its last healthy size.  Lets a
# pair near the detection limit ride out sampling noise and large gaps.
EXTEND_PROBE = 2000

# Extension keeps going while the estimate stays within this fraction
# below tau.  A conforming pair at the detection limit hovers around tau
# with sketch sampling noise, and a hard cutoff right at tau would
# truncate its ends; downstream alignment vets whatever extra comes in.
EXTEND_RELAX = 0.2

# A cluster whose best rolled estimate lands in [SEED_REFINE * tau, tau)
# gets re-rolled at finer query-window offsets.  The stride grid can park
# every window across a duplication boundary or a mutation cluster while
# a shifted window would clear tau; pairs near the detection limit only
# clear it on narrow ridges a few hundred bases wide.
SEED_REFINE = 0.75


@dataclass(frozen=True)
class ErrorModel:
    """Split error budget: small mutations (delta_m) plus large gaps.

    ``delta`` is the total edit error allowed for an SD pair; ``delta_g``
    is the remainder after mutations.  ``p_gap`` is the per-base
    probability that a large gap starts.
    """

    delta: float = 0.25
    delta_m: float = 0.15
    p_gap: float = 0.005

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta out of range: {self.delta}")
        dm = min(self.delta_m, self.delta)
        object.__setattr__(self, "delta_m", dm)
        if dm < 0.0:
            raise ValueError(f"delta_m out of range: {self.delta_m}")
        if not 0.0 <= self.p_gap < 1.0:
            raise ValueError(f"p_gap out of range: {self.p_gap}")

    @property
    def delta_g(self) -> float:
        return self.delta - self.delta_m


def kmer_survival(k: int, delta_m: float) -> float:
    """Probability that a k-mer straddles no point mutation."""
    return math.exp(-k * delta_m)


def tau(k: int, model: ErrorModel) -> float:
    """Seeding threshold for the winnowed MinHash estimate."""
    dg = model.delta_g
    gap_factor = (1.0 - dg) / (1.0 + dg)
    return gap_factor / (2.0 * math.exp(k * model.delta_m) - 1.0)


@dataclass(frozen=True)
class SeedSD:
    """A window pair whose MinHash estimate cleared tau.

    ``i`` and ``j`` are global window starts in the coordinate space of the
    query and target index respectively; for an inverted-copy search the
    target space is the reverse-complemented genome.
    """

    i: int
    j: int
    n: int
    m: int
    estimate: float
    strand: str = "+"


@dataclass(frozen=True)
class PotentialRegion:
    """An extended candidate pair in forward genome coordinates.

    ``estimate`` refers to the pre-padding extent.  For strand '-', the
    mate2 segment matches the reverse complement of ``region2``.
    """

    region1: Interval
    region2: Interval
    strand: str
    estimate: float
    padded: bool


def _seq_offsets(index: MinimizerIndex) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(index.seq_lengths)]).astype(np.int64)


def _eligible_j_range(
    mode: str,
    qsid: int,
    i: int,
    tsid: int,
    n: int,
    model: ErrorModel,
    q_offsets: np.ndarray,
    t_offsets: np.ndarray,
) -> tuple[int, int] | None:
    """Global window-start range on the target eligible for seeding.

    Enforces the pair overlap bound and a canonical orientation so each
    pair is reported exactly once.
    """
    ts, te = int(t_offsets[tsid]), int(t_offsets[tsid + 1])
    lo, hi = ts, te - n
    if lo > hi or tsid < qsid:
        return None
    if tsid > qsid:
        return lo, hi
    dmax = int(model.delta * n)
    if mode == "self":
        lo = max(lo, i + n - dmax)
    else:
        # target is the reverse complement of the query sequence: window j
        # maps to forward start L - j_local - n
        qs = int(q_offsets[qsid])
        i_local = i - qs
        length = te - ts
        j_local_max = length - i_local - 2 * n + dmax
        hi = min(hi, ts + j_local_max)
    if lo > hi:
        return None
    return lo, hi


def _roll_cluster(
    own_hashes: np.ndarray,
    target: MinimizerIndex,
    jlo: int,
    jhi: int,
    n: int,
) -> tuple[float, int]:
    """Slide the target window start from jlo to jhi; return the best
    (estimate, j), preferring the smallest j on plateaus."""
    k = target.params.k
    pos, hsh = target.pos, target.hashes
    t_lo = int(np.searchsorted(pos, jlo, side="left"))
    t_hi = int(np.searchsorted(pos, jlo + n - k, side="right"))
    t_end = int(np.searchsorted(pos, jhi + n - k, side="right"))

    est = RollingEstimator()
    add, remove = est.add, est.remove
    for h in own_hashes.tolist():
        add(h, "own")
    for idx in range(t_lo, t_hi):
        add(int(hsh[idx]), "other")

    best_e, best_j = -1.0, jlo
    j = jlo
    while True:
        e = est.estimate()
        if e > best_e:
            best_e, best_j = e, j
        nxt = None
        if t_lo < t_hi:
            nxt = int(pos[t_lo]) + 1  # leftmost member leaves
        if t_hi < t_end:
            enter = int(pos[t_hi]) - (n - k)
            nxt = enter if nxt is None else min(nxt, enter)
        if nxt is None or nxt > jhi:
            break
        while t_lo < t_hi and pos[t_lo] < nxt:
            remove(int(hsh[t_lo]), "other")
            t_lo += 1
        bound = nxt + n - k
        while t_hi < t_end and pos[t_hi] <= bound:
            add(int(hsh[t_hi]), "other")
            t_hi += 1
        j = nxt
    return best_e, best_j


def find_seed_pairs(
    query_index: MinimizerIndex,
    target_index: MinimizerIndex,
    model: ErrorModel,
    n: int,
    mode: str = "self",
) -> list[SeedSD]:
    """Scan query windows against a target index; general worker behind
    :func:`find_seed_sds`.  ``mode`` is "self" for a forward self-search or
    "rc" when the target index covers the reverse-complemented genome."""
    if n < MIN_SEED_WINDOW:
        raise ValueError(f"seed window {n} below minimum {MIN_SEED_WINDOW}")
    if mode not in ("self", "rc"):
        raise ValueError(f"unknown mode {mode!r}")
    k = query_index.params.k
    if target_index.params != query_index.params:
        raise ValueError("query and target index parameters differ")
    threshold = tau(k, model)
    stride = max(1, n // 2)
    q_offsets = _seq_offsets(query_index)
    t_offsets = _seq_offsets(target_index)

    seeds: list[SeedSD] = []
    strand = "+" if mode == "self" else "-"
    for qsid in range(len(query_index.seq_names)):
        qs, qe = int(q_offsets[qsid]), int(q_offsets[qsid + 1])
        if qe - qs < n:
            continue
        starts = list(range(qs, qe - n + 1, stride))
        if starts[-1] != qe - n:
            starts.append(qe - n)
        for i in starts:
            q_lo, q_hi = query_index.range_indices(i, i + n)
            if q_hi <= q_lo:
                continue
            own = query_index.hashes[q_lo:q_hi]
            uniq = np.unique(own)
            min_hits = max(1, math.ceil(threshold * len(uniq)))
            cands = target_index.positions_for_many(uniq)
            if len(cands) == 0:
                continue
            cands = np.sort(cands)
            sids = np.searchsorted(t_offsets, cands, side="right") - 1
            cuts = np.flatnonzero((np.diff(cands) > n) | (np.diff(sids) != 0)) + 1
            bounds = np.concatenate([[0], cuts, [len(cands)]])
            for c_lo, c_hi in zip(bounds[:-1], bounds[1:]):
                if c_hi - c_lo < min_hits:
                    continue
                tsid = int(sids[c_lo])
                elig = _eligible_j_range(
                    mode, qsid, i, tsid, n, model, q_offsets, t_offsets
                )
                if elig is None:
                    continue
                jlo = max(elig[0], int(cands[c_lo]) - n + k)
                jhi = min(elig[1], int(cands[c_hi - 1]))
                if jlo > jhi:
                    continue
                best_e, best_j = _roll_cluster(own, target_index, jlo, jhi, n)
                best_i = i

                def probe(ip: int) -> tuple[float, int, int] | None:
                    ip = min(max(ip, qs), qe - n)
                    p_lo, p_hi = query_index.range_indices(ip, ip + n)
                    if p_hi <= p_lo:
                        return None
                    p_elig = _eligible_j_range(
                        mode, qsid, ip, tsid, n, model, q_offsets, t_offsets
                    )
                    if p_elig is None:
                        return None
                    pjlo = max(p_elig[0], jlo + (ip - i))
                    pjhi = min(p_elig[1], jhi + (ip - i))
                    if pjlo > pjhi:
                        return None
                    e, bj = _roll_cluster(
                        query_index.hashes[p_lo:p_hi], target_index, pjlo, pjhi, n
                    )
                    return e, bj, ip

                if SEED_REFINE * threshold <= best_e < threshold - TAU_SLACK:
                    # near miss: probe off-grid query windows on the same
                    # diagonal band (the matching j shifts along with i),
                    # then bisect toward the best offset found
                    for d in (-stride // 2, -stride // 4, stride // 4, stride // 2):
                        got = probe(i + d)
                        if got and got[0] > best_e:
                            best_e, best_j, best_i = got
                    step = stride // 8
                    while best_e < threshold - TAU_SLACK and step > stride // 32:
                        for ip in (best_i - step, best_i + step):
                            got = probe(ip)
                            if got and got[0] > best_e:
                                best_e, best_j, best_i = got
                        step //= 2
                if best_e >= threshold - TAU_SLACK:
                    seeds.append(
                        SeedSD(
                            i=best_i, j=best_j, n=n, m=n, estimate=best_e, strand=strand
                        )
                    )
    seeds.sort(key=lambda s: (s.i, s.j))
    return seeds


def find_seed_sds(
    index: MinimizerIndex, model: ErrorModel, n: int
) -> list[SeedSD]:
    """Forward self-search: every window pair of one genome whose winnowed
    MinHash estimate clears tau, subject to the overlap bound."""
    return find_seed_pairs(index, index, model, n, mode="self")


# ---------------------------------------------------------------------------
# extension
# ---------------------------------------------------------------------------

@dataclass
class _Extent:
    """Mutable window pair during extension (global index-space coords)."""

    i: int
    j: int
    n: int
    m: int


def _fwd_interval(is_rc: bool, length: int, lo_local: int, span: int) -> tuple[int, int]:
    if not is_rc:
        return lo_local, lo_local + span
    return length - lo_local - span, length - lo_local


def _overlap_between(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(b[0], a[0]))


class _OverlapCap:
    """Largest joint growth the same-sequence overlap bound allows.

    Overlap of the two forward-mapped windows is piecewise linear in the
    growth: zero while they are disjoint, then increasing with slope at
    least 1 once they touch.  The allowance ``delta * (min(n, m) + d)``
    grows with slope under 1, so the set of admissible growths is a
    prefix of the integers and binary search finds its end.
    """

    def __init__(self, same_seq: bool, is_rc: bool, seq_len: int,
                 qs: int, ts: int, delta: float):
        self.same_seq = same_seq
        self.is_rc = is_rc
        self.seq_len = seq_len
        self.qs = qs
        self.ts = ts
        self.delta = delta

    def _overlap_at(self, ext: _Extent, d: int, backward: bool) -> int:
        if backward:
            w1 = (ext.i - d - self.qs, ext.i + ext.n - self.qs)
            j_lo = ext.j - d - self.ts
        else:
            w1 = (ext.i - self.qs, ext.i + ext.n + d - self.qs)
            j_lo = ext.j - self.ts
        w2 = _fwd_interval(self.is_rc, self.seq_len, j_lo, ext.m + d)
        return _overlap_between(w1, w2)

    def max_growth(self, ext: _Extent, backward: bool, limit: int,
                   need: int | None = None) -> int:
        """Largest growth in [0, limit] whose every prefix keeps the
        windows within the overlap allowance.

        Growth only expands the windows, so overlap is nondecreasing;
        past the touch point the violation margin is concave (overlap is
        a min of rising edges minus a max of falling ones).  Binary
        search finds the touch, ternary search the margin peak, then
        binary search the first violation.

        When the caller only plans to grow by ``need``, a single probe
        showing the windows still disjoint at that size settles it.
        """
        if not self.same_seq or limit <= 0:
            return limit
        if need is not None and 0 <= need <= limit \
                and self._overlap_at(ext, need, backward) <= 0:
            return need
        base = min(ext.n, ext.m)

        def over(d: int) -> int:
            return self._overlap_at(ext, d, backward)

        def margin(d: int) -> float:
            return over(d) - self.delta * (base + d)

        if over(limit) <= 0:
            return limit
        if over(0) <= 0:
            lo, hi = 0, limit
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if over(mid) > 0:
                    hi = mid
                else:
                    lo = mid
            touch = hi
        else:
            touch = 0
        if margin(touch) > 0:
            return touch - 1
        lo, hi = touch, limit
        while hi - lo > 2:
            m1 = lo + (hi - lo) // 3
            m2 = hi - (hi - lo) // 3
            if margin(m1) <= margin(m2):
                lo = m1 + 1
            else:
                hi = m2
        peak = max(range(lo, hi + 1), key=margin)
        if margin(peak) <= 0:
            return limit
        lo, hi = touch, peak
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if margin(mid) > 0:
                hi = mid
            else:
                lo = mid
        return lo


def _extend_raw(
    seed: SeedSD,
    query_index: MinimizerIndex,
    target_index: MinimizerIndex,
    model: ErrorModel,
    mode: str,
    max_region: int = MAX_REGION,
) -> tuple[_Extent, float]:
    """Grow a seed in both directions; returns the final extent and the
    estimate at that extent.

    The cumulative estimate couples the two directions: unrelated flank
    absorbed while the first side rides down toward the floor eats the
    headroom the second side needs to cross a rough patch.  Which side
    starves depends on which goes first, so the seed is grown once in
    each order and the union of the two extents kept."""
    k = query_index.params.k
    threshold = tau(k, model) * (1.0 - EXTEND_RELAX) - TAU_SLACK
    q_offsets = _seq_offsets(query_index)
    t_offsets = _seq_offsets(target_index)
    qsid = int(np.searchsorted(q_offsets, seed.i, side="right")) - 1
    tsid = int(np.searchsorted(t_offsets, seed.j, side="right")) - 1
    qs, qe = int(q_offsets[qsid]), int(q_offsets[qsid + 1])
    ts, te = int(t_offsets[tsid]), int(t_offsets[tsid + 1])

    overlap_cap = _OverlapCap(
        same_seq=(qsid == tsid), is_rc=(mode == "rc"), seq_len=te - ts,
        qs=qs, ts=ts, delta=model.delta,
    )

    q_pos, q_hash = query_index.pos, query_index.hashes
    t_pos, t_hash = target_index.pos, target_index.hashes
    q_first = int(np.searchsorted(q_pos, qs, side="left"))
    q_last = int(np.searchsorted(q_pos, qe - k, side="right"))
    t_first = int(np.searchsorted(t_pos, ts, side="left"))
    t_last = int(np.searchsorted(t_pos, te - k, side="right"))

    def estimate_extent(ext: _Extent) -> tuple[RollingEstimator, int, int, int, int]:
        q_lo = int(np.searchsorted(q_pos, ext.i, side="left"))
        q_hi = int(np.searchsorted(q_pos, ext.i + ext.n - k, side="right"))
        t_lo = int(np.searchsorted(t_pos, ext.j, side="left"))
        t_hi = int(np.searchsorted(t_pos, ext.j + ext.m - k, side="right"))
        est = RollingEstimator()
        for idx in range(q_lo, q_hi):
            est.add(int(q_hash[idx]), "own")
        for idx in range(t_lo, t_hi):
            est.add(int(t_hash[idx]), "other")
        return est, q_lo, q_hi, t_lo, t_hi

    def run(backward_first: bool) -> tuple[_Extent, float]:
        ext = _Extent(i=seed.i, j=seed.j, n=seed.n, m=seed.m)
        est, q_lo, q_hi, t_lo, t_hi = estimate_extent(ext)
        current = est.estimate()
        if current < threshold:
            # the full index disagrees with the seed-mode estimate; keep the
            # seed extent rather than growing a pair already under tau
            return ext, current

        def forward() -> None:
            # probe state: growth and estimator adds made since the estimate
            # was last at or above threshold; rolled back if it never recovers
            nonlocal q_hi, t_hi, current
            pending: list[tuple[int, str]] = []
            pend_q = pend_t = 0
            over = 0
            while True:
                d_next = None
                if q_hi < q_last:
                    d_next = int(q_pos[q_hi]) + k - (ext.i + ext.n)
                if t_hi < t_last:
                    d = int(t_pos[t_hi]) + k - (ext.j + ext.m)
                    d_next = d if d_next is None else min(d_next, d)
                d_geom = min(
                    qe - (ext.i + ext.n),
                    te - (ext.j + ext.m),
                    max_region - ext.n,
                    max_region - ext.m,
                )
                d_cap = overlap_cap.max_growth(ext, backward=False, limit=d_geom,
                                               need=d_next)
                if d_cap <= 0:
                    break
                if d_next is None or d_next > d_cap:
                    if over == 0:
                        ext.n += d_cap
                        ext.m += d_cap
                    break
                if over + d_next > EXTEND_PROBE:
                    break
                ext.n += d_next
                ext.m += d_next
                over += d_next
                while q_hi < q_last and q_pos[q_hi] + k <= ext.i + ext.n:
                    est.add(int(q_hash[q_hi]), "own")
                    pending.append((int(q_hash[q_hi]), "own"))
                    pend_q += 1
                    q_hi += 1
                while t_hi < t_last and t_pos[t_hi] + k <= ext.j + ext.m:
                    est.add(int(t_hash[t_hi]), "other")
                    pending.append((int(t_hash[t_hi]), "other"))
                    pend_t += 1
                    t_hi += 1
                e = est.estimate()
                if e >= threshold:
                    pending.clear()
                    pend_q = pend_t = over = 0
                    current = e
            if over:
                for h, side in pending:
                    est.remove(h, side)
                q_hi -= pend_q
                t_hi -= pend_t
                ext.n -= over
                ext.m -= over

        def backward() -> None:
            nonlocal q_lo, t_lo, current
            pending: list[tuple[int, str]] = []
            pend_q = pend_t = 0
            over = 0
            while True:
                d_next = None
                if q_lo > q_first:
                    d_next = ext.i - int(q_pos[q_lo - 1])
                if t_lo > t_first:
                    d = ext.j - int(t_pos[t_lo - 1])
                    d_next = d if d_next is None else min(d_next, d)
                d_geom = min(
                    ext.i - qs,
                    ext.j - ts,
                    max_region - ext.n,
                    max_region - ext.m,
                )
                d_cap = overlap_cap.max_growth(ext, backward=True, limit=d_geom,
                                               need=d_next)
                if d_cap <= 0:
                    break
                if d_next is None or d_next > d_cap:
                    if over == 0:
                        ext.i -= d_cap
                        ext.j -= d_cap
                        ext.n += d_cap
                        ext.m += d_cap
                    break
                if over + d_next > EXTEND_PROBE:
                    break
                ext.i -= d_next
                ext.j -= d_next
                ext.n += d_next
                ext.m += d_next
                over += d_next
                while q_lo > q_first and q_pos[q_lo - 1] >= ext.i:
                    q_lo -= 1
                    est.add(int(q_hash[q_lo]), "own")
                    pending.append((int(q_hash[q_lo]), "own"))
                    pend_q += 1
                while t_lo > t_first and t_pos[t_lo - 1] >= ext.j:
                    t_lo -= 1
                    est.add(int(t_hash[t_lo]), "other")
                    pending.append((int(t_hash[t_lo]), "other"))
                    pend_t += 1
                e = est.estimate()
                if e >= threshold:
                    pending.clear()
                    pend_q = pend_t = over = 0
                    current = e
            if over:
                for h, side in pending:
                    est.remove(h, side)
                q_lo += pend_q
                t_lo += pend_t
                ext.i += over
                ext.j += over
                ext.n -= over
                ext.m -= over

        if backward_first:
            backward()
            forward()
        else:
            forward()
            backward()
        return ext, current

    ext_f, cur_f = run(backward_first=False)
    ext_b, cur_b = run(backward_first=True)
    bigger, cur_big = (ext_f, cur_f) if ext_f.n >= ext_b.n else (ext_b, cur_b)
    d_left = seed.i - min(ext_f.i, ext_b.i)
    d_right = max(ext_f.i + ext_f.n, ext_b.i + ext_b.n) - (seed.i + seed.n)
    merged = _Extent(i=seed.i - d_left, j=seed.j - d_left,
                     n=seed.n + d_left + d_right, m=seed.m + d_left + d_right)
    if merged.n == bigger.n:
        # one order's extent contains the other's
        return bigger, cur_big
    if max(merged.n, merged.m) > max_region:
        return bigger, cur_big
    if overlap_cap.same_seq:
        # left growth of one run plus right growth of the other can push
        # the union past the overlap bound neither run violated alone
        allowed = model.delta * min(merged.n, merged.m)
        if overlap_cap._overlap_at(merged, 0, backward=False) > allowed:
            return bigger, cur_big
    est, _, _, _, _ = estimate_extent(merged)
    return merged, est.estimate()


def pad_amount(length: int) -> int:
    return min(PAD_CAP, math.ceil(PAD_FRACTION * length))


def region_from_extent(
    ext: _Extent,
    estimate: float,
    query_index: MinimizerIndex,
    target_index: MinimizerIndex,
    mode: str,
    pad: bool = True,
) -> PotentialRegion:
    """Package an extension result as forward-coordinate intervals."""
    q_offsets = _seq_offsets(query_index)
    t_offsets = _seq_offsets(target_index)
    qsid = int(np.searchsorted(q_offsets, ext.i, side="right")) - 1
    tsid = int(np.searchsorted(t_offsets, ext.j, side="right")) - 1
    qs = int(q_offsets[qsid])
    ts = int(t_offsets[tsid])
    L1 = int(q_offsets[qsid + 1]) - qs
    L2 = int(t_offsets[tsid + 1]) - ts

    a1, b1 = ext.i - qs, ext.i - qs + ext.n
    a2, b2 = _fwd_interval(mode == "rc", L2, ext.j - ts, ext.m)
    if pad:
        p1 = pad_amount(ext.n)
        p2 = pad_amount(ext.m)
        a1, b1 = max(0, a1 - p1), min(L1, b1 + p1)
        a2, b2 = max(0, a2 - p2), min(L2, b2 + p2)
    return PotentialRegion(
        region1=Interval(query_index.seq_names[qsid], a1, b1),
        region2=Interval(target_index.seq_names[tsid], a2, b2),
        strand="+" if mode == "self" else "-",
        estimate=estimate,
        padded=pad,
    )


def extend_seed(
    seed: SeedSD,
    query_index: MinimizerIndex,
    target_index: MinimizerIndex,
    model: ErrorModel,
    mode: str = "self",
    max_region: int = MAX_REGION,
    pad: bool = True,
) -> PotentialRegion:
    """Extend one seed into a padded potential region (forward coords)."""
    ext, estimate = _extend_raw(seed, query_index, target_index, model, mode, max_region)
    return region_from_extent(ext, estimate, query_index, target_index, mode, pad)


def seed_region(
    seed: SeedSD,
    query_index: MinimizerIndex,
    target_index: MinimizerIndex,
    mode: str = "self",
) -> PotentialRegion:
    """The unextended window pair of a seed in forward coordinates."""
    ext = _Extent(i=seed.i, j=seed.j, n=seed.n, m=seed.m)
    return region_from_extent(ext, seed.estimate, query_index, target_index, mode, pad=False)


# ---------------------------------------------------------------------------
# q-gram filter
# ---------------------------------------------------------------------------

def qgram_counts(s1: np.ndarray, s2: np.ndarray, q: int) -> int:
    """Shared q-gram count with multiplicity; q-grams containing N are
    ignored on both sides."""
    from .sketch import pack_kmers

    p1, v1 = pack_kmers(s1, q)
    p2, v2 = pack_kmers(s2, q)
    u1, c1 = np.unique(p1[v1], return_counts=True)
    u2, c2 = np.unique(p2[v2], return_counts=True)
    common, i1, i2 = np.intersect1d(u1, u2, assume_unique=True, return_indices=True)
    if len(common) == 0:
        return 0
    return int(np.minimum(c1[i1], c2[i2]).sum())


def qgram_threshold(n: int, q: int, model: ErrorModel) -> float:
    """Minimum shared q-grams a model-conforming pair must retain."""
    return n * (1.0 - model.delta_g - q * model.delta_m) - (n * model.p_gap + 1.0) * (q - 1)


def qgram_accept(
    s1: np.ndarray,
    s2: np.ndarray,
    q: int,
    model: ErrorModel,
    core: int | None = None,
) -> bool:
    """Lossless rejection test: False only when the pair cannot satisfy the
    error model.  A non-positive threshold accepts everything.

    ``core`` caps the length the threshold is computed for.  A padded
    candidate region is mostly unrelated flank around a much shorter
    duplication, so holding it to the full-length count would reject
    regions whose core is perfectly conforming; the shared count of the
    region can never be below that of a contained conforming stretch of
    ``core`` bases, so that is the right yardstick."""
    n = min(len(s1), len(s2))
    if core is not None:
        n = min(n, core)
    thr = qgram_threshold(n, q, model)
    if thr <= 0:
        return True
    return qgram_counts(s1, s2, q) >= thr
