"""Whole-genome duplication search tying the stages together.

``run`` seeds candidate window pairs on both strands, extends them into
potential regions, then processes every region independently: a shared
q-gram gate, exact anchoring, sparse chaining, gap-uniformity splitting,
affine-gap polishing, and per-record filters.  Region processing is the
heavy part and fans out across worker processes; results are merged in
region order, so output is identical for any worker count.
"""

from __future__ import annotations

import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .align import (
    AlignParams,
    align_chain,
    alignment_stats,
    cigar_lengths,
    jukes_cantor,
    kimura_distance,
    parse_cigar,
    trim_alignment,
)
from .chain import ANCHOR_K, find_anchors, refine_chains, sparse_chain, split_uniform
from .genome_io import Genome, Interval, SDRecord, Sequence, revcomp
from .search import (
    MAX_REGION,
    MIN_SEED_WINDOW,
    ErrorModel,
    PotentialRegion,
    extend_seed,
    find_seed_pairs,
    qgram_accept,
    seed_region,
)
from .sketch import MinimizerIndex, SketchParams, build_index

# q = 5 is the largest gram size whose rejection threshold stays positive
# for the default error split (needs 1 - delta_g - q*delta_m > 0).
Q_GRAM = 5
MIN_SD_LENGTH = 1_000
MIN_UNMASKED_BASES = 100
CONTAINMENT_FRACTION = 0.8
END_WINDOW = 2_000
XDROP = 1_500

# Budget for trimming alignment ends.  Unrelated sequence glued onto a
# chain aligns well above half error while genuine tails stay below it,
# so a window kept at one half sheds junk without nibbling the pair.
TRIM_BUDGET = 0.5


@dataclass(frozen=True)
class RunConfig:
    """Parameters of a whole-genome search; defaults mirror the CLI."""

    model: ErrorModel = ErrorModel()
    sketch: SketchParams = SketchParams()
    seed_window: int = MIN_SEED_WINDOW
    min_length: int = MIN_SD_LENGTH
    q: int = Q_GRAM
    max_region: int = MAX_REGION
    align: AlignParams = AlignParams()
    threads: int = 1
    min_unmasked: int = MIN_UNMASKED_BASES
    inverted: bool = True

    @property
    def min_span(self) -> int:
        """Shortest chain span worth polishing: what the shorter mate of a
        minimum-length pair can shrink to under the error budget."""
        return max(ANCHOR_K + 1, int(self.min_length * (1.0 - self.model.delta)))


def _rc_genome(genome: Genome) -> Genome:
    flipped = [
        Sequence(s.name, revcomp(s.bases), s.mask[::-1].copy())
        for s in genome.sequences
    ]
    return Genome(flipped)


# ---------------------------------------------------------------------------
# seeding and extension
# ---------------------------------------------------------------------------

class _CoveredSet:
    """Vectorized containment tests over accepted region pairs.

    Bucketed by (strand, chrom1, chrom2); a window pair is covered when
    some accepted pair contains it on both axes.
    """

    def __init__(self):
        self._buckets: dict[tuple[str, str, str], list[list[int]]] = {}

    def covered(self, strand: str, w1: Interval, w2: Interval) -> bool:
        b = self._buckets.get((strand, w1.chrom, w2.chrom))
        if not b:
            return False
        s1, e1, s2, e2 = (np.asarray(col, dtype=np.int64) for col in b)
        hit = (s1 <= w1.start) & (e1 >= w1.end) & (s2 <= w2.start) & (e2 >= w2.end)
        return bool(hit.any())

    def add(self, region: PotentialRegion) -> None:
        key = (region.strand, region.region1.chrom, region.region2.chrom)
        b = self._buckets.setdefault(key, [[], [], [], []])
        b[0].append(region.region1.start)
        b[1].append(region.region1.end)
        b[2].append(region.region2.start)
        b[3].append(region.region2.end)


def collect_regions(genome: Genome, config: RunConfig) -> list[PotentialRegion]:
    """Seed on both strands and extend, skipping seeds whose window pair is
    already inside an accepted region (the covering region keeps their
    content, so chaining still sees it)."""
    fwd_seed = build_index(genome, config.sketch, seed_mode=True)
    fwd_full = build_index(genome, config.sketch)
    seeds = [(s, "self") for s in
             find_seed_pairs(fwd_seed, fwd_seed, config.model, config.seed_window)]
    rc_full = None
    if config.inverted:
        rc = _rc_genome(genome)
        rc_seed = build_index(rc, config.sketch, seed_mode=True)
        rc_full = build_index(rc, config.sketch)
        seeds += [(s, "rc") for s in
                  find_seed_pairs(fwd_seed, rc_seed, config.model,
                                  config.seed_window, mode="rc")]
    # strongest first: their regions are the best candidates to absorb the
    # near-duplicate seeds that adjacent windows of the same pair produce
    seeds.sort(key=lambda t: (-t[0].estimate, t[1], t[0].i, t[0].j))

    seen = _CoveredSet()
    regions: list[PotentialRegion] = []
    for seed, mode in seeds:
        target = fwd_full if mode == "self" else rc_full
        win = seed_region(seed, fwd_full, target, mode)
        if seen.covered(win.strand, win.region1, win.region2):
            continue
        reg = extend_seed(seed, fwd_full, target, config.model, mode, config.max_region)
        seen.add(reg)
        regions.append(reg)
    return regions


# ---------------------------------------------------------------------------
# per-region processing
# ---------------------------------------------------------------------------

def _region_mates(region: PotentialRegion, a1: int, b1: int,
                  a2: int, b2: int) -> tuple[Interval, Interval]:
    """Map local alignment coordinates back to forward genome intervals."""
    r1, r2 = region.region1, region.region2
    m1 = Interval(r1.chrom, r1.start + a1, r1.start + b1)
    if region.strand == "+":
        m2 = Interval(r2.chrom, r2.start + a2, r2.start + b2)
    else:
        m2 = Interval(r2.chrom, r2.end - b2, r2.end - a2)
    return m1, m2


def _swap_mates_cigar(cigar: list[tuple[str, int]], strand: str) -> list[tuple[str, int]]:
    """CIGAR of the same alignment with mate roles exchanged.

    Roles swap I with D; for an inverted pair the alignment is also read
    from the other end, reversing run order.
    """
    flip = {"M": "M", "I": "D", "D": "I"}
    out = [(flip[op], n) for op, n in cigar]
    if strand == "-":
        out.reverse()
    return out


def _build_record(genome: Genome, region: PotentialRegion, aln, s1, s2,
                  config: RunConfig) -> SDRecord | None:
    if not aln.cigar:
        return None
    model = config.model
    stats = alignment_stats(aln.cigar, s1, s2, aln.pos1, aln.pos2)
    m1, m2 = _region_mates(region, aln.pos1, aln.end1, aln.pos2, aln.end2)
    ln1, ln2 = len(m1), len(m2)
    if max(ln1, ln2) < config.min_length:
        return None
    if min(ln1, ln2) < (1.0 - model.delta) * config.min_length:
        return None
    if stats.error_total > model.delta:
        return None
    if m1.chrom == m2.chrom and m1.overlap(m2) > model.delta * min(ln1, ln2):
        return None
    if (genome.unmasked_bases(m1) < config.min_unmasked
            or genome.unmasked_bases(m2) < config.min_unmasked):
        return None

    cigar = list(aln.cigar)
    if (m2.chrom, m2.start, m2.end) < (m1.chrom, m1.start, m1.end):
        m1, m2 = m2, m1
        cigar = _swap_mates_cigar(cigar, region.strand)
    aligned = stats.matches + stats.mismatches
    p = stats.transitions / aligned if aligned else 0.0
    q = stats.transversions / aligned if aligned else 0.0
    return SDRecord(
        mate1=m1,
        mate2=m2,
        strand1="+",
        strand2=region.strand,
        alignment_length=stats.columns,
        edit_distance=stats.edit_distance,
        error_total=stats.error_total,
        error_mutation=stats.error_mutation,
        error_gap=stats.error_gap,
        kimura=kimura_distance(p, q),
        jukes_cantor=jukes_cantor(stats.mismatch_fraction),
        cigar="".join(f"{n}{op}" for op, n in cigar),
        masked_fraction1=genome.masked_fraction(m1),
        masked_fraction2=genome.masked_fraction(m2),
    )


def region_records(genome: Genome, region: PotentialRegion,
                   config: RunConfig) -> list[SDRecord]:
    """Chain and polish one potential region into candidate records."""
    r1, r2 = region.region1, region.region2
    s1 = genome.seq(r1.chrom).bases[r1.start : r1.end]
    s2 = genome.seq(r2.chrom).bases[r2.start : r2.end]
    if region.strand == "-":
        s2 = revcomp(s2)
    if not qgram_accept(s1, s2, config.q, config.model, core=config.min_span):
        return []
    anchors = find_anchors(s1, s2)
    # an inverted pair on one sequence folds back onto itself: every match
    # appears twice, mirrored about the anti-diagonal a + b == fold.  Keep
    # the copy whose left mate comes first, else chains straddle the fold
    # and glue an alignment to its own mirror image.
    fold = None
    if region.strand == "-" and r1.chrom == r2.chrom:
        fold = r2.end - r1.start
        anchors = [a for a in anchors
                   if a.pos1 + a.pos2 + a.length < fold]
    if not anchors:
        return []
    chains = refine_chains(sparse_chain(anchors), min_span=ANCHOR_K + 1)
    pieces = []
    for ch in chains:
        pieces.extend(split_uniform(ch, config.model.delta_g))

    out = []
    for ch in pieces:
        if min(ch.span1, ch.span2) < config.min_span:
            continue
        # a chain that cannot satisfy the overlap bound even after end
        # trimming is a self-match artifact; drop it before the alignment
        m1, m2 = _region_mates(region, ch.start1, ch.end1, ch.start2, ch.end2)
        if m1.chrom == m2.chrom:
            slack = config.model.delta * min(ch.span1, ch.span2) + 2 * END_WINDOW
            if m1.overlap(m2) > slack:
                continue
        right_limit = None
        if fold is not None:
            right_limit = max(0, (fold - ch.end1 - ch.end2) // 2)
        aln = align_chain(ch, s1, s2, config.align,
                          end_window=END_WINDOW, xdrop=XDROP,
                          right_limit=right_limit)
        rec = _build_record(genome, region, aln, s1, s2, config)
        if rec is None:
            # A rejected alignment sometimes carries unrelated sequence
            # that chaining glued onto an end; retry without it.
            trimmed = trim_alignment(aln, s1, s2, TRIM_BUDGET, config.align)
            if trimmed.cigar and trimmed.cigar != aln.cigar:
                rec = _build_record(genome, region, trimmed, s1, s2, config)
        if rec is not None:
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# parallel driver
# ---------------------------------------------------------------------------

_WORK: tuple[Genome, RunConfig, list[PotentialRegion]] | None = None


def _init_worker(genome, config, regions):
    global _WORK
    _WORK = (genome, config, regions)


def _run_region(idx: int) -> list[SDRecord]:
    genome, config, regions = _WORK
    return region_records(genome, regions[idx], config)


def process_regions(genome: Genome, regions: list[PotentialRegion],
                    config: RunConfig) -> list[SDRecord]:
    if config.threads <= 1 or len(regions) < 2:
        out: list[SDRecord] = []
        for reg in regions:
            out.extend(region_records(genome, reg, config))
        return out
    ctx = mp.get_context("fork")
    chunk = max(1, math.ceil(len(regions) / (config.threads * 8)))
    out = []
    with ProcessPoolExecutor(max_workers=config.threads, mp_context=ctx,
                             initializer=_init_worker,
                             initargs=(genome, config, regions)) as ex:
        for batch in ex.map(_run_region, range(len(regions)), chunksize=chunk):
            out.extend(batch)
    return out


# ---------------------------------------------------------------------------
# final filtering
# ---------------------------------------------------------------------------

def dedupe_records(records: list[SDRecord]) -> list[SDRecord]:
    """Drop records mostly contained in a larger one, then name the rest.

    Overlapping regions rediscover the same pair; a record loses when both
    of its mates are at least CONTAINMENT_FRACTION covered by a kept record
    of the same orientation.
    """
    order = sorted(records, key=lambda r: (
        -(len(r.mate1) + len(r.mate2)), r.error_total, r.sort_key()))
    kept: list[SDRecord] = []
    for r in order:
        ln1, ln2 = len(r.mate1), len(r.mate2)
        dup = False
        for k in kept:
            if k.strand2 != r.strand2:
                continue
            if (r.mate1.overlap(k.mate1) >= CONTAINMENT_FRACTION * ln1
                    and r.mate2.overlap(k.mate2) >= CONTAINMENT_FRACTION * ln2):
                dup = True
                break
        if not dup:
            kept.append(r)
    kept.sort(key=SDRecord.sort_key)
    for i, r in enumerate(kept):
        r.name = f"sd{i + 1}"
    return kept


def run(genome: Genome, config: RunConfig = RunConfig()) -> list[SDRecord]:
    """Search a genome for duplication pairs; returns named, sorted records."""
    regions = collect_regions(genome, config)
    records = process_regions(genome, regions, config)
    return dedupe_records(records)


# ---------------------------------------------------------------------------
# re-validation
# ---------------------------------------------------------------------------

def validate_record(genome: Genome, rec: SDRecord,
                    config: RunConfig = RunConfig()) -> list[str]:
    """Re-check one record from the genome alone.

    Replays the CIGAR over the recorded intervals and verifies both the
    reported annotations and the duplication conditions (length, total
    error, mate overlap).  Returns human-readable problems; empty = valid.
    """
    problems: list[str] = []
    model = config.model
    m1, m2 = rec.mate1, rec.mate2
    try:
        s1 = genome.seq(m1.chrom).bases[m1.start : m1.end]
        s2 = genome.seq(m2.chrom).bases[m2.start : m2.end]
    except KeyError as e:
        return [f"unknown sequence {e.args[0]!r}"]
    if len(s1) != len(m1) or len(s2) != len(m2):
        return ["mate interval outside its sequence"]
    if rec.strand1 != "+" or rec.strand2 not in "+-":
        problems.append(f"bad strands {rec.strand1}/{rec.strand2}")
    if (m2.chrom, m2.start, m2.end) < (m1.chrom, m1.start, m1.end):
        problems.append("mates out of canonical order")
    if rec.strand2 == "-":
        s2 = revcomp(s2)
    try:
        ops = parse_cigar(rec.cigar)
    except ValueError as e:
        return problems + [str(e)]
    c1, c2 = cigar_lengths(ops)
    if c1 != len(m1) or c2 != len(m2):
        return problems + [
            f"cigar consumes {c1}/{c2} bases but mates have {len(m1)}/{len(m2)}"]
    st = alignment_stats(ops, s1, s2)
    for label, got, want in [
        ("alignment_length", rec.alignment_length, st.columns),
        ("edit_distance", rec.edit_distance, st.edit_distance),
    ]:
        if got != want:
            problems.append(f"{label} {got} != recomputed {want}")
    for label, got, want in [
        ("error_total", rec.error_total, st.error_total),
        ("error_mutation", rec.error_mutation, st.error_mutation),
        ("error_gap", rec.error_gap, st.error_gap),
        ("masked_fraction1", rec.masked_fraction1, genome.masked_fraction(m1)),
        ("masked_fraction2", rec.masked_fraction2, genome.masked_fraction(m2)),
    ]:
        # BEDPE stores six decimal places, so allow that much rounding
        if abs(got - want) > 5e-7:
            problems.append(f"{label} {got} != recomputed {want}")
    ln1, ln2 = len(m1), len(m2)
    if max(ln1, ln2) < config.min_length:
        problems.append(f"mates {ln1}/{ln2} below minimum length")
    if min(ln1, ln2) < (1.0 - model.delta) * config.min_length:
        problems.append(f"shorter mate {min(ln1, ln2)} below error-adjusted minimum")
    if st.error_total > model.delta + 1e-9:
        problems.append(f"error {st.error_total:.4f} exceeds {model.delta}")
    if m1.chrom == m2.chrom and m1.overlap(m2) > model.delta * min(ln1, ln2):
        problems.append(f"mates overlap by {m1.overlap(m2)}")
    return problems


def validate_records(genome: Genome, records: list[SDRecord],
                     config: RunConfig = RunConfig()) -> list[tuple[SDRecord, list[str]]]:
    """Validation problems per record; only failing records are returned."""
    out = []
    for rec in records:
        problems = validate_record(genome, rec, config)
        if problems:
            out.append((rec, problems))
    return out
