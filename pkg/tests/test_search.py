import math

import numpy as np
import pytest

from conftest import random_dna
from sdscan.genome_io import Genome, Sequence, revcomp
from sdscan.oracles import jaccard_brute, qgram_brute
from sdscan.search import (
    ErrorModel,
    PotentialRegion,
    SeedSD,
    _eligible_j_range,
    extend_seed,
    find_seed_pairs,
    find_seed_sds,
    kmer_survival,
    pad_amount,
    qgram_accept,
    qgram_counts,
    qgram_threshold,
    tau,
)
from sdscan.sketch import SketchParams, build_index


# ---------------------------------------------------------------------------
# error model and thresholds
# ---------------------------------------------------------------------------

def test_error_model_derived_budget():
    m = ErrorModel(delta=0.25, delta_m=0.15)
    assert m.delta_g == pytest.approx(0.10)
    # delta_m never exceeds the total budget
    m2 = ErrorModel(delta=0.10, delta_m=0.15)
    assert m2.delta_m == pytest.approx(0.10)
    assert m2.delta_g == pytest.approx(0.0)


def test_error_model_validation():
    with pytest.raises(ValueError):
        ErrorModel(delta=-0.1)
    with pytest.raises(ValueError):
        ErrorModel(delta=1.5)
    with pytest.raises(ValueError):
        ErrorModel(delta=0.2, delta_m=-0.1)
    with pytest.raises(ValueError):
        ErrorModel(p_gap=1.0)


def test_kmer_survival_value():
    # k=12 at delta_m=0.15: e^-1.8
    assert kmer_survival(12, 0.15) == pytest.approx(0.16530, abs=1e-5)
    assert kmer_survival(12, 0.0) == 1.0


def test_tau_values():
    # no gap budget: 1 / (2 e^1.8 - 1)
    assert tau(12, ErrorModel(delta=0.15, delta_m=0.15)) == pytest.approx(0.09010, abs=1e-5)
    # default model: additional (1 - 0.1) / (1 + 0.1) factor
    assert tau(12, ErrorModel(delta=0.25, delta_m=0.15)) == pytest.approx(0.07372, abs=1e-5)
    # error-free model: estimate must be 1
    assert tau(12, ErrorModel(delta=0.0, delta_m=0.0)) == 1.0


def test_tau_monotonic():
    base = tau(12, ErrorModel(delta=0.10, delta_m=0.05))
    assert tau(13, ErrorModel(delta=0.10, delta_m=0.05)) < base
    assert tau(12, ErrorModel(delta=0.10, delta_m=0.08)) < base
    assert tau(12, ErrorModel(delta=0.15, delta_m=0.05)) < base


# ---------------------------------------------------------------------------
# q-gram filter
# ---------------------------------------------------------------------------

def test_qgram_threshold_example():
    m = ErrorModel(delta=0.2, delta_m=0.1)  # delta_g = 0.1
    # 1000 * (1 - 0.1 - 0.5) - (1000 * 0.005 + 1) * 4 = 400 - 24
    assert qgram_threshold(1000, 5, m) == pytest.approx(376.0)


def test_qgram_identical_strings(rng):
    s = random_dna(rng, 400)
    n = len(s)
    q = 5
    count = qgram_counts(s, s, q)
    assert count == n - (q - 1)
    assert qgram_accept(s, s, q, ErrorModel())


def test_qgram_counts_match_oracle(rng):
    for _ in range(30):
        n1 = int(rng.integers(10, 300))
        n2 = int(rng.integers(10, 300))
        s1 = bytes(rng.choice(np.frombuffer(b"ACGTN", np.uint8), n1, p=[0.24, 0.24, 0.24, 0.24, 0.04]))
        s2 = bytes(rng.choice(np.frombuffer(b"ACGTN", np.uint8), n2, p=[0.24, 0.24, 0.24, 0.24, 0.04]))
        q = int(rng.integers(2, 7))
        got = qgram_counts(np.frombuffer(s1, np.uint8), np.frombuffer(s2, np.uint8), q)
        assert got == qgram_brute(s1, s2, q)


def test_qgram_accepts_mutated_copy(rng):
    # a pair inside the error budget is never rejected
    model = ErrorModel(delta=0.25, delta_m=0.15)
    for _ in range(10):
        s1 = random_dna(rng, 1500)
        s2 = s1.copy()
        n_mut = int(0.10 * len(s2))  # inside the 0.15 budget
        sites = rng.choice(len(s2), size=n_mut, replace=False)
        s2[sites] = random_dna(rng, n_mut)
        assert qgram_accept(s1, s2, 5, model)


def test_qgram_rejects_random_under_tight_model(rng):
    # with a small budget the bound is sharp enough to reject unrelated pairs
    model = ErrorModel(delta=0.04, delta_m=0.02, p_gap=0.001)
    rejected = 0
    trials = 50
    for _ in range(trials):
        s1 = random_dna(rng, 1200)
        s2 = random_dna(rng, 1200)
        if not qgram_accept(s1, s2, 5, model):
            rejected += 1
    assert rejected >= 0.9 * trials


def test_qgram_nonpositive_threshold_accepts(rng):
    model = ErrorModel(delta=0.95, delta_m=0.15)
    assert qgram_threshold(100, 12, model) <= 0
    assert qgram_accept(random_dna(rng, 100), random_dna(rng, 100), 12, model)


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def plant_copy(rng, backbone_len=30000, seg=(5000, 8000), insert_at=20000, mutate=None):
    """Backbone with segment copied to insert_at; returns genome + truth."""
    backbone = random_dna(rng, backbone_len)
    copy = backbone[seg[0] : seg[1]].copy()
    if mutate is not None:
        n_mut = int(mutate * len(copy))
        sites = rng.choice(len(copy), size=n_mut, replace=False)
        copy[sites] = random_dna(rng, n_mut)
    bases = np.concatenate([backbone[:insert_at], copy, backbone[insert_at:]])
    g = Genome([Sequence("chr1", bases, np.zeros(len(bases), bool))])
    return g, (seg[0], seg[1]), (insert_at, insert_at + len(copy))


@pytest.fixture(scope="module")
def planted():
    rng = np.random.default_rng(99)
    g, t1, t2 = plant_copy(rng)
    model = ErrorModel(delta=0.25, delta_m=0.15)
    seed_idx = build_index(g, SketchParams(), seed_mode=True)
    full_idx = build_index(g, SketchParams(), seed_mode=False)
    return g, t1, t2, model, seed_idx, full_idx


def test_seeding_finds_planted_copy(planted):
    g, t1, t2, model, seed_idx, _ = planted
    seeds = find_seed_sds(seed_idx, model, 750)
    true_diag = t2[0] - t1[0]
    hits = [s for s in seeds if abs((s.j - s.i) - true_diag) <= 20 and s.estimate >= 0.9]
    assert hits, "no high-estimate seed on the true diagonal"
    # every seed interior to the copy pair should be near-perfect
    inside = [s for s in seeds if t1[0] <= s.i and s.i + s.n <= t1[1] and abs((s.j - s.i) - true_diag) <= 20]
    assert inside
    assert all(s.estimate >= 0.9 for s in inside)


def test_seed_estimates_recompute_exactly(planted):
    g, t1, t2, model, seed_idx, _ = planted
    seeds = find_seed_sds(seed_idx, model, 750)
    assert seeds
    for s in seeds[:40]:
        lo1, hi1 = seed_idx.range_indices(s.i, s.i + s.n)
        lo2, hi2 = seed_idx.range_indices(s.j, s.j + s.m)
        own = seed_idx.hashes[lo1:hi1].tolist()
        other = seed_idx.hashes[lo2:hi2].tolist()
        assert jaccard_brute(own, other) == s.estimate


def test_seeds_respect_overlap_bound(planted):
    g, t1, t2, model, seed_idx, _ = planted
    seeds = find_seed_sds(seed_idx, model, 750)
    for s in seeds:
        # same sequence: canonical order with overlap at most delta * n
        assert s.j >= s.i + s.n - int(model.delta * s.n)


def test_seeding_mutated_copy(rng):
    g, t1, t2 = plant_copy(rng, mutate=0.10)
    model = ErrorModel(delta=0.25, delta_m=0.15)
    idx = build_index(g, SketchParams(), seed_mode=True)
    seeds = find_seed_sds(idx, model, 750)
    true_diag = t2[0] - t1[0]
    hits = [s for s in seeds if abs((s.j - s.i) - true_diag) <= 50]
    assert hits
    thr = tau(12, model)
    assert max(s.estimate for s in hits) >= thr


def test_no_distant_seeds_on_random_genome(rng):
    g = Genome([Sequence("r", random_dna(rng, 40000), np.zeros(40000, bool))])
    idx = build_index(g, SketchParams(), seed_mode=True)
    seeds = find_seed_sds(idx, ErrorModel(), 750)
    # window pairs sharing no sequence should never clear tau; only
    # overlapping neighbours can (their shared span is a genuine match)
    distant = [s for s in seeds if s.j - s.i > s.n]
    assert distant == []


def test_seeding_across_sequences(rng):
    a = random_dna(rng, 12000)
    b = np.concatenate([random_dna(rng, 3000), a[4000:6500], random_dna(rng, 3000)])
    g = Genome([Sequence("s1", a, np.zeros(len(a), bool)), Sequence("s2", b, np.zeros(len(b), bool))])
    idx = build_index(g, SketchParams(), seed_mode=True)
    seeds = find_seed_sds(idx, ErrorModel(), 750)
    cross = [s for s in seeds if s.i < 12000 <= s.j and s.estimate > 0.9]
    assert cross


def test_find_seed_pairs_validates_inputs(planted):
    model, seed_idx = planted[3], planted[4]
    with pytest.raises(ValueError):
        find_seed_pairs(seed_idx, seed_idx, model, 400)
    with pytest.raises(ValueError):
        find_seed_pairs(seed_idx, seed_idx, model, 750, mode="bogus")
    other = build_index(
        Genome([Sequence("x", random_dna(np.random.default_rng(0), 2000), np.zeros(2000, bool))]),
        SketchParams(k=11),
    )
    with pytest.raises(ValueError):
        find_seed_pairs(seed_idx, other, model, 750)


def test_eligible_j_range_rules():
    model = ErrorModel(delta=0.25, delta_m=0.15)
    q_off = np.array([0, 10000, 25000], dtype=np.int64)
    t_off = q_off
    n = 750
    # same sequence, self mode: start beyond i + n - delta*n
    lo, hi = _eligible_j_range("self", 0, 2000, 0, n, model, q_off, t_off)
    assert lo == 2000 + n - int(model.delta * n)
    assert hi == 10000 - n
    # earlier sequence: never eligible
    assert _eligible_j_range("self", 1, 12000, 0, n, model, q_off, t_off) is None
    # later sequence: fully eligible
    assert _eligible_j_range("self", 0, 2000, 1, n, model, q_off, t_off) == (10000, 25000 - n)
    # rc mode, same sequence: upper bound keeps the mapped mate canonical
    rng_rc = _eligible_j_range("rc", 0, 2000, 0, n, model, q_off, t_off)
    assert rng_rc is not None
    lo_rc, hi_rc = rng_rc
    L = 10000
    mapped_start = L - (hi_rc - 0) - n
    assert mapped_start >= 2000 + n - int(model.delta * n)


# ---------------------------------------------------------------------------
# extension
# ---------------------------------------------------------------------------

def test_extension_covers_planted_copy(planted):
    g, t1, t2, model, seed_idx, full_idx = planted
    seeds = find_seed_sds(seed_idx, model, 750)
    best = max(seeds, key=lambda s: s.estimate)
    reg = extend_seed(best, full_idx, full_idx, model)
    assert reg.strand == "+"
    assert reg.padded
    assert reg.region1.start <= t1[0] and reg.region1.end >= t1[1]
    assert reg.region2.start <= t2[0] and reg.region2.end >= t2[1]
    ln1, ln2 = len(reg.region1), len(reg.region2)
    assert reg.region1.overlap(reg.region2) <= model.delta * min(ln1, ln2) + 2 * pad_amount(max(ln1, ln2))


def test_extension_estimate_recomputes_exactly(planted):
    g, t1, t2, model, seed_idx, full_idx = planted
    seeds = find_seed_sds(seed_idx, model, 750)
    best = max(seeds, key=lambda s: s.estimate)
    reg = extend_seed(best, full_idx, full_idx, model, pad=False)
    lo1, hi1 = full_idx.range_indices(reg.region1.start, reg.region1.end)
    lo2, hi2 = full_idx.range_indices(reg.region2.start, reg.region2.end)
    own = full_idx.hashes[lo1:hi1].tolist()
    other = full_idx.hashes[lo2:hi2].tolist()
    assert jaccard_brute(own, other) == reg.estimate


def test_extension_respects_region_cap(planted):
    g, t1, t2, model, seed_idx, full_idx = planted
    seeds = find_seed_sds(seed_idx, model, 750)
    best = max(seeds, key=lambda s: s.estimate)
    reg = extend_seed(best, full_idx, full_idx, model, max_region=2000, pad=False)
    assert len(reg.region1) <= 2000
    assert len(reg.region2) <= 2000


def test_extension_stays_inside_sequence(rng):
    # copy ends exactly at the sequence end
    backbone = random_dna(rng, 20000)
    bases = np.concatenate([backbone, backbone[2000:5000]])
    g = Genome([Sequence("chr1", bases, np.zeros(len(bases), bool))])
    model = ErrorModel()
    sidx = build_index(g, SketchParams(), seed_mode=True)
    fidx = build_index(g, SketchParams(), seed_mode=False)
    seeds = [s for s in find_seed_sds(sidx, model, 750) if s.estimate > 0.9]
    assert seeds
    for s in seeds:
        reg = extend_seed(s, fidx, fidx, model)
        assert 0 <= reg.region1.start and reg.region1.end <= len(bases)
        assert 0 <= reg.region2.start and reg.region2.end <= len(bases)


def test_pad_amount():
    assert pad_amount(1000) == 250
    assert pad_amount(100000) == 5000
    assert pad_amount(10) == 3


def test_overlap_cap_hinge_values():
    from sdscan.search import _Extent, _OverlapCap

    cap = _OverlapCap(same_seq=True, is_rc=False, seq_len=100000, qs=0, ts=0, delta=0.25)
    ext = _Extent(i=1000, j=5000, n=1000, m=1000)
    # touch at d = 3000, then overlap d - 3000 against allowance 0.25 * (1000 + d)
    assert cap.max_growth(ext, backward=False, limit=100000) == 4333
    assert cap.max_growth(ext, backward=True, limit=100000) == 4333
    # a limit short of the touch point is returned untouched
    assert cap.max_growth(ext, backward=False, limit=2500) == 2500

    rc = _OverlapCap(same_seq=True, is_rc=True, seq_len=10000, qs=0, ts=0, delta=0.25)
    ext_rc = _Extent(i=1000, j=2000, n=1000, m=1000)
    # mapped mate is [7000 - d, 8000): both edges close, overlap slope 2
    assert rc.max_growth(ext_rc, backward=False, limit=7000) == 3000


def test_extension_overlap_bound_near_adjacent_copies(rng):
    model = ErrorModel()
    for _ in range(4):
        backbone = random_dna(rng, 9000)
        src = backbone[1000:4000].copy()
        gap = int(rng.integers(0, 400))
        desert = np.full(gap, ord("N"), np.uint8)
        bases = np.concatenate([backbone[:4000], desert, src, backbone[4000:]])
        g = Genome([Sequence("chr1", bases, np.zeros(len(bases), bool))])
        sidx = build_index(g, SketchParams(), seed_mode=True)
        fidx = build_index(g, SketchParams(), seed_mode=False)
        strong = [s for s in find_seed_sds(sidx, model, 750) if s.estimate > 0.9]
        assert strong
        for s in strong[:3]:
            reg = extend_seed(s, fidx, fidx, model, pad=False)
            ov = reg.region1.overlap(reg.region2)
            assert ov <= model.delta * min(len(reg.region1), len(reg.region2)) + 1e-9


# ---------------------------------------------------------------------------
# inverted copies (reverse-complement target space)
# ---------------------------------------------------------------------------

def make_rc_genome(g: Genome) -> Genome:
    return Genome(
        [Sequence(s.name, revcomp(s.bases), s.mask[::-1].copy()) for s in g.sequences]
    )


def test_rc_seeding_and_extension(rng):
    backbone = random_dna(rng, 30000)
    src = backbone[6000:9000]
    bases = np.concatenate([backbone[:21000], revcomp(src), backbone[21000:]])
    g = Genome([Sequence("chr1", bases, np.zeros(len(bases), bool))])
    t1 = (6000, 9000)
    t2 = (21000, 24000)
    model = ErrorModel()
    params = SketchParams()
    rc = make_rc_genome(g)
    q_seed = build_index(g, params, seed_mode=True)
    t_seed = build_index(rc, params, seed_mode=True)
    q_full = build_index(g, params, seed_mode=False)
    t_full = build_index(rc, params, seed_mode=False)

    seeds = find_seed_pairs(q_seed, t_seed, model, 750, mode="rc")
    strong = [s for s in seeds if s.estimate > 0.9]
    assert strong, "no high-estimate inverted seed"
    assert all(s.strand == "-" for s in seeds)

    best = max(strong, key=lambda s: s.estimate)
    reg = extend_seed(best, q_full, t_full, model, mode="rc")
    assert reg.strand == "-"
    assert reg.region1.start <= t1[0] and reg.region1.end >= t1[1]
    assert reg.region2.start <= t2[0] and reg.region2.end >= t2[1]
