import math

import numpy as np
import pytest

from conftest import random_dna
from sdscan.align import (
    AlignParams,
    Alignment,
    align_chain,
    alignment_stats,
    best_prefix_align,
    cigar_lengths,
    compress_cigar,
    global_align,
    jukes_cantor,
    kimura_distance,
    parse_cigar,
    replay_score,
    trim_alignment,
)
from sdscan.chain import find_anchors, refine_chains, sparse_chain, split_uniform
from sdscan.oracles import align_brute, align_enumerate

P = AlignParams()  # 5 / -4 / 40 + 1 per base


# ---------------------------------------------------------------------------
# frozen small cases
# ---------------------------------------------------------------------------

def test_single_insertion():
    aln = global_align(b"AAAA", b"AATAA", P)
    assert aln.score == 4 * 5 - (40 + 1)
    assert cigar_lengths(aln.cigar) == (4, 5)
    st = alignment_stats(aln.cigar, b"AAAA", b"AATAA")
    assert st.mismatches == 0
    assert st.gap_bases == 1
    assert st.matches == 4


def test_identical():
    aln = global_align(b"ACGTACGT", b"ACGTACGT", P)
    assert aln.score == 40
    assert aln.cigar == [("M", 8)]


def test_all_mismatch_prefers_substitutions():
    aln = global_align(b"ACGT", b"TGCA", P)
    assert aln.score == -16
    assert aln.cigar == [("M", 4)]


def test_n_never_matches():
    aln = global_align(b"NNNN", b"NNNN", P)
    assert aln.score == -16
    st = alignment_stats(aln.cigar, b"NNNN", b"NNNN")
    assert st.mismatches == 4
    assert st.transitions == 0 and st.transversions == 0


def test_empty_inputs():
    assert global_align(b"", b"", P).score == 0
    aln = global_align(b"", b"ACG", P)
    assert aln.score == -(40 + 3)
    assert aln.cigar == [("I", 3)]
    aln = global_align(b"ACG", b"", P)
    assert aln.cigar == [("D", 3)]


def test_cigar_round_trip():
    aln = global_align(b"AAAA", b"AATAA", P)
    assert parse_cigar(aln.cigar_string()) == aln.cigar
    with pytest.raises(ValueError):
        parse_cigar("12Q")
    with pytest.raises(ValueError):
        parse_cigar("3M2")


def test_compress_cigar():
    assert compress_cigar([("M", 2), ("M", 3), ("D", 0), ("I", 1)]) == [
        ("M", 5),
        ("I", 1),
    ]


# ---------------------------------------------------------------------------
# oracle equality
# ---------------------------------------------------------------------------

def _random_pair(rng, related=False, with_n=False):
    n1 = int(rng.integers(1, 300))
    letters = np.frombuffer(b"ACGTN" if with_n else b"ACGT", np.uint8)
    probs = [0.23, 0.23, 0.23, 0.23, 0.08] if with_n else None
    s1 = bytes(rng.choice(letters, n1, p=probs))
    if related:
        arr = np.frombuffer(s1, np.uint8).copy()
        n_mut = int(rng.integers(0, max(1, n1 // 5)))
        if n_mut:
            sites = rng.choice(n1, size=n_mut, replace=False)
            arr[sites] = rng.choice(letters, n_mut, p=probs)
        cut = int(rng.integers(0, n1))
        keep = int(rng.integers(0, n1 - cut + 1))
        s2 = bytes(np.concatenate([arr[:cut], arr[cut + keep :]]))
        if not s2:
            s2 = b"A"
    else:
        s2 = bytes(rng.choice(letters, int(rng.integers(1, 300)), p=probs))
    return s1, s2


@pytest.mark.parametrize("params", [P, AlignParams(1, 1, 2, 1)])
def test_score_matches_oracle(rng, params):
    for trial in range(40):
        s1, s2 = _random_pair(
            rng, related=trial % 2 == 0, with_n=trial % 5 == 0
        )
        aln = global_align(s1, s2, params)
        assert aln.score == align_brute(
            s1, s2, params.match, params.mismatch,
            params.gap_open, params.gap_extend,
        )
        assert cigar_lengths(aln.cigar) == (len(s1), len(s2))
        assert replay_score(aln.cigar, s1, s2, 0, 0, params) == aln.score
        for (op1, _), (op2, _) in zip(aln.cigar, aln.cigar[1:]):
            assert op1 != op2


def test_score_matches_enumeration(rng):
    for _ in range(30):
        s1 = bytes(rng.choice(np.frombuffer(b"ACN", np.uint8), int(rng.integers(1, 8))))
        s2 = bytes(rng.choice(np.frombuffer(b"ACN", np.uint8), int(rng.integers(1, 8))))
        got = global_align(s1, s2, AlignParams(3, 2, 4, 1)).score
        assert got == align_enumerate(s1, s2, 3, 2, 4, 1)


# ---------------------------------------------------------------------------
# banding
# ---------------------------------------------------------------------------

def test_band_interior_path_matches_full(rng):
    s1 = random_dna(rng, 600)
    s2 = s1.copy()
    sites = rng.choice(600, size=40, replace=False)
    s2[sites] = random_dna(rng, 40)
    full = global_align(s1, s2, P)
    banded = global_align(s1, s2, P, band=24)
    assert banded.score == full.score


def test_band_widens_until_correct(rng):
    s1 = random_dna(rng, 400)
    s2 = np.concatenate([s1[:200], random_dna(rng, 120), s1[200:]])
    full = global_align(s1, s2, P)
    banded = global_align(s1, s2, P, band=4)
    assert banded.score == full.score
    assert cigar_lengths(banded.cigar) == (400, 520)


# ---------------------------------------------------------------------------
# prefix extension
# ---------------------------------------------------------------------------

def test_prefix_extension_stops_at_divergence(rng):
    common = random_dna(rng, 300)
    s1 = np.concatenate([common, random_dna(rng, 500)])
    s2 = np.concatenate([common, random_dna(rng, 500)])
    aln = best_prefix_align(s1, s2, P)
    c1, c2 = cigar_lengths(aln.cigar)
    assert 290 <= c1 <= 330 and 290 <= c2 <= 330
    assert aln.score >= 5 * 280
    assert replay_score(aln.cigar, s1, s2, 0, 0, P) == aln.score


def test_prefix_extension_empty_when_unrelated(rng):
    aln = best_prefix_align(random_dna(rng, 200), random_dna(rng, 200), P)
    c1, c2 = cigar_lengths(aln.cigar)
    # nothing worth keeping, or at most a trivial lucky run
    assert aln.score >= 0
    assert c1 <= 30 and c2 <= 30


# ---------------------------------------------------------------------------
# whole-chain alignment
# ---------------------------------------------------------------------------

def test_align_chain_recovers_duplication(rng):
    src = random_dna(rng, 4000)
    copy = src.copy()
    sub_sites = rng.choice(len(copy), size=240, replace=False)
    copy[sub_sites] = random_dna(rng, 240)
    copy = np.concatenate([copy[:1500], copy[1700:]])  # one 200 bp deletion
    seq1 = np.concatenate([random_dna(rng, 600), src, random_dna(rng, 600)])
    seq2 = np.concatenate([random_dna(rng, 400), copy, random_dna(rng, 800)])

    chains = refine_chains(
        [p for c in sparse_chain(find_anchors(seq1, seq2))
         for p in split_uniform(c, 0.1)],
        min_span=750,
    )
    assert len(chains) == 1
    aln = align_chain(chains[0], seq1, seq2)
    assert replay_score(aln.cigar, seq1, seq2, aln.pos1, aln.pos2) == aln.score
    # spans the duplication on both sides, within extension slack
    assert aln.pos1 <= 650 and aln.end1 >= 4550
    assert aln.pos2 <= 450 and aln.end2 >= 4150
    st = alignment_stats(aln.cigar, seq1, seq2, aln.pos1, aln.pos2)
    assert st.error_total < 0.25
    assert st.gap_bases >= 200
    large = st.gap_bases - st.small_gap_bases
    assert large >= 200


def test_align_chain_empty_raises():
    from sdscan.chain import Chain

    with pytest.raises(ValueError):
        align_chain(Chain(anchors=[]), b"ACGT", b"ACGT")


# ---------------------------------------------------------------------------
# statistics and distances
# ---------------------------------------------------------------------------

def test_alignment_stats_classification():
    s1 = b"AACCGGTT" + b"AAAA" + b"AAAAAAAA"
    s2 = b"AGCTGATT" + b"AAAA"
    cigar = [("M", 8), ("M", 4), ("D", 8)]
    st = alignment_stats(cigar, s1, s2)
    assert st.columns == 20
    assert st.matches + st.mismatches == 12
    assert st.gap_bases == 8 and st.gap_runs == 1
    assert st.small_gap_bases == 0
    assert st.error_gap == pytest.approx(8 / 20)
    assert st.edit_distance == st.mismatches + 8


def test_transition_transversion_counts():
    st = alignment_stats([("M", 4)], b"ACGT", b"GTAT")
    # A>G transition, C>T transition, G>A transition, T>T match
    assert st.transitions == 3
    assert st.transversions == 0
    assert st.matches == 1
    st = alignment_stats([("M", 2)], b"AC", b"TG")
    assert st.transversions == 2


def test_small_gap_split():
    st = alignment_stats([("M", 4), ("I", 5), ("M", 4), ("D", 6)],
                         b"AAAATTTTGGGGGG", b"AAAACCCCCTTTT")
    assert st.small_gap_bases == 5
    assert st.gap_bases == 11
    assert st.error_mutation == pytest.approx((st.mismatches + 5) / st.columns)


def test_kimura_frozen():
    assert kimura_distance(0.1, 0.05) == pytest.approx(0.17022, abs=1e-4)
    assert kimura_distance(0.0, 0.0) == 0.0
    assert math.isinf(kimura_distance(0.3, 0.4))


def test_jukes_cantor_frozen():
    assert jukes_cantor(0.1) == pytest.approx(0.10733, abs=1e-4)
    assert jukes_cantor(0.0) == 0.0
    assert math.isinf(jukes_cantor(0.8))


def test_end1_end2_properties():
    aln = Alignment(score=0, cigar=[("M", 5), ("I", 2), ("D", 3)], pos1=10, pos2=20)
    assert aln.end1 == 10 + 5 + 3
    assert aln.end2 == 20 + 5 + 2


# ---------------------------------------------------------------------------
# end trimming
# ---------------------------------------------------------------------------

def test_trim_keeps_clean_alignment(rng):
    s = random_dna(rng, 400)
    aln = Alignment(score=0, cigar=[("M", 400)], pos1=0, pos2=0)
    out = trim_alignment(aln, s, s, 0.5)
    assert out.cigar == [("M", 400)]
    assert (out.pos1, out.pos2) == (0, 0)


def test_trim_cuts_junk_prefix(rng):
    good = random_dna(rng, 300)
    junk1 = random_dna(rng, 120)
    junk2 = random_dna(rng, 120)
    s1 = np.concatenate([junk1, good])
    s2 = np.concatenate([junk2, good])
    aln = Alignment(score=0, cigar=[("M", 420)], pos1=0, pos2=0)
    out = trim_alignment(aln, s1, s2, 0.5)
    # random-vs-random runs around 75% mismatch, far above the budget
    assert out.pos1 >= 100
    assert out.end1 == 420
    st = alignment_stats(out.cigar, s1, s2, out.pos1, out.pos2)
    assert (st.mismatches + st.gap_bases) / st.columns < 0.5


def test_trim_survives_interior_gap(rng):
    left = random_dna(rng, 300)
    right = random_dna(rng, 300)
    s1 = np.concatenate([left, random_dna(rng, 80), right])
    s2 = np.concatenate([left, right])
    aln = Alignment(score=0, cigar=[("M", 300), ("D", 80), ("M", 300)])
    out = trim_alignment(aln, s1, s2, 0.5)
    # flanking matches pay for the gap, so nothing is cut
    assert out.cigar == [("M", 300), ("D", 80), ("M", 300)]


def test_trim_rejects_all_junk(rng):
    a = random_dna(rng, 200)
    b = random_dna(rng, 200)
    out = trim_alignment(Alignment(score=0, cigar=[("M", 200)]), a, b, 0.25)
    assert out.cigar == [] or len(out.cigar) == 1 and out.cigar[0][1] < 40


def test_trim_never_ends_in_gap(rng):
    s = random_dna(rng, 100)
    aln = Alignment(score=0, cigar=[("D", 30), ("M", 100), ("I", 25)])
    out = trim_alignment(aln, np.concatenate([random_dna(rng, 30), s]),
                         np.concatenate([s, random_dna(rng, 25)]), 0.5)
    assert out.cigar == [("M", 100)]
    assert out.pos1 == 30 and out.pos2 == 0
