"""Synthetic duplication generator with replayable mutation scripts.

Pairs are conforming by construction: mutation loads are drawn as
fractions of the model budgets (small mutations against delta_m, large
gaps against delta_g, gap events against p_gap * n), so every simulated
pair satisfies the duplication error conditions without a verify loop.
The full edit script is returned and ``apply_script`` replays it
deterministically, which the tests use to pin the generator down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .genome_io import Genome, Interval, Sequence, revcomp
from .search import ErrorModel

LETTERS = np.frombuffer(b"ACGT", dtype=np.uint8)
SMALL_INDEL_MAX = 5
LARGE_GAP_MIN = 50
LARGE_GAP_MAX = 10_000


def random_dna(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.choice(LETTERS, size=n)


@dataclass(frozen=True)
class SubOp:
    pos: int
    base: int  # ASCII code of the replacement


@dataclass(frozen=True)
class DelOp:
    pos: int
    length: int


@dataclass(frozen=True)
class InsOp:
    pos: int  # bases are inserted before this source position
    seq: bytes


@dataclass
class MutationScript:
    """Edit script over a source segment, replayable bit for bit."""

    subs: list[SubOp] = field(default_factory=list)
    dels: list[DelOp] = field(default_factory=list)
    ins: list[InsOp] = field(default_factory=list)

    @property
    def small_gap_bases(self) -> int:
        return sum(d.length for d in self.dels if d.length <= SMALL_INDEL_MAX) + sum(
            len(i.seq) for i in self.ins if len(i.seq) <= SMALL_INDEL_MAX
        )

    @property
    def large_gap_bases(self) -> int:
        return sum(d.length for d in self.dels if d.length > SMALL_INDEL_MAX) + sum(
            len(i.seq) for i in self.ins if len(i.seq) > SMALL_INDEL_MAX
        )

    @property
    def large_gap_events(self) -> int:
        return sum(1 for d in self.dels if d.length > SMALL_INDEL_MAX) + sum(
            1 for i in self.ins if len(i.seq) > SMALL_INDEL_MAX
        )

    @property
    def inserted_bases(self) -> int:
        return sum(len(i.seq) for i in self.ins)

    def scripted_error(self, n: int) -> float:
        """Edit fraction of the scripted alignment path."""
        edits = len(self.subs) + sum(d.length for d in self.dels) + self.inserted_bases
        columns = n + self.inserted_bases
        return edits / columns if columns else 0.0


def apply_script(source: np.ndarray, script: MutationScript) -> np.ndarray:
    """Replay a script: substitutions, then deletions, then insertions,
    each keyed to source coordinates."""
    n = len(source)
    out = source.copy()
    for s in script.subs:
        out[s.pos] = s.base
    keep = np.ones(n, dtype=bool)
    for d in script.dels:
        keep[d.pos : d.pos + d.length] = False
    ins_at: dict[int, list[bytes]] = {}
    for i in script.ins:
        ins_at.setdefault(i.pos, []).append(i.seq)
    if not ins_at:
        return out[keep]
    pieces = []
    last = 0
    for pos in sorted(ins_at):
        pieces.append(out[last:pos][keep[last:pos]])
        for seq in ins_at[pos]:
            pieces.append(np.frombuffer(seq, dtype=np.uint8))
        last = pos
    pieces.append(out[last:][keep[last:]])
    return np.concatenate(pieces)


@dataclass
class SimulatedPair:
    source: np.ndarray
    copy: np.ndarray
    script: MutationScript
    model: ErrorModel


def _nonoverlapping_starts(rng, n, lengths, taken):
    """Greedy placement of interval lengths avoiding a shared blocklist."""
    out = []
    for ln in lengths:
        if ln > n:
            continue
        for _ in range(20):
            pos = int(rng.integers(0, n - ln + 1))
            if all(pos + ln <= a or pos >= b for a, b in taken):
                taken.append((pos, pos + ln))
                out.append(pos)
                break
    return out


def simulate_pair(
    rng: np.random.Generator,
    length: int,
    model: ErrorModel,
    mut_load: tuple[float, float] = (0.3, 0.9),
    gap_load: tuple[float, float] = (0.3, 0.9),
    source: np.ndarray | None = None,
) -> SimulatedPair:
    """One conforming duplication pair.

    ``mut_load`` and ``gap_load`` are the ranges, as fractions of the
    respective model budgets, from which the realized loads are drawn.
    """
    if length < 1:
        raise ValueError("length must be positive")
    if source is None:
        source = random_dna(rng, length)
    elif len(source) != length:
        raise ValueError("source length mismatch")
    n = length
    script = MutationScript()

    mut_budget = int(rng.uniform(*mut_load) * model.delta_m * n)
    gap_budget = int(rng.uniform(*gap_load) * model.delta_g * n)

    # 90% of the small-mutation budget as substitutions, rest as indels
    n_sub = min(n, int(round(0.9 * mut_budget)))
    if n_sub:
        sites = rng.choice(n, size=n_sub, replace=False)
        shifts = rng.integers(1, 4, size=n_sub)
        lut = np.full(256, 0, dtype=np.uint8)
        for idx, b in enumerate(LETTERS):
            lut[b] = idx
        for pos, sh in zip(sites.tolist(), shifts.tolist()):
            script.subs.append(
                SubOp(pos, int(LETTERS[(lut[source[pos]] + sh) % 4]))
            )

    taken: list[tuple[int, int]] = []
    short_left = mut_budget - n_sub
    while short_left > 0:
        b = min(short_left, int(rng.integers(1, SMALL_INDEL_MAX + 1)))
        if rng.random() < 0.5:
            start = _nonoverlapping_starts(rng, n, [b], taken)
            if start:
                script.dels.append(DelOp(start[0], b))
        else:
            pos = int(rng.integers(0, n + 1))
            script.ins.append(InsOp(pos, bytes(random_dna(rng, b))))
        short_left -= b

    max_events = max(0, int(model.p_gap * n))
    events = int(rng.integers(0, max_events + 1)) if max_events else 0
    for _ in range(events):
        if gap_budget < LARGE_GAP_MIN:
            break
        hi = min(LARGE_GAP_MAX, gap_budget)
        b = int(math.exp(rng.uniform(math.log(LARGE_GAP_MIN), math.log(hi))))
        b = max(LARGE_GAP_MIN, min(b, gap_budget))
        if rng.random() < 0.5:
            start = _nonoverlapping_starts(rng, n, [b], taken)
            if start:
                script.dels.append(DelOp(start[0], b))
                gap_budget -= b
        else:
            pos = int(rng.integers(0, n + 1))
            script.ins.append(InsOp(pos, bytes(random_dna(rng, b))))
            gap_budget -= b

    copy = apply_script(source, script)
    return SimulatedPair(source=source, copy=copy, script=script, model=model)


@dataclass(frozen=True)
class PlantedSD:
    mate1: Interval
    mate2: Interval
    strand: str


def embed_pair(
    rng: np.random.Generator,
    pair: SimulatedPair,
    backbone_len: int,
    strand: str = "+",
    name: str = "sim",
) -> tuple[Genome, PlantedSD]:
    """Insert source and copy into a fresh random backbone."""
    if strand not in "+-":
        raise ValueError(f"bad strand {strand!r}")
    backbone = random_dna(rng, backbone_len)
    p1 = int(rng.integers(0, backbone_len // 2))
    p2 = int(rng.integers(p1 + 1, backbone_len))
    copy = pair.copy if strand == "+" else revcomp(pair.copy)
    bases = np.concatenate(
        [backbone[:p1], pair.source, backbone[p1:p2], copy, backbone[p2:]]
    )
    m1 = Interval(name, p1, p1 + len(pair.source))
    c_start = p2 + len(pair.source)
    m2 = Interval(name, c_start, c_start + len(copy))
    genome = Genome([Sequence(name, bases, np.zeros(len(bases), dtype=bool))])
    return genome, PlantedSD(mate1=m1, mate2=m2, strand=strand)


def build_genome(
    rng: np.random.Generator,
    size: int,
    n_sds: int,
    model: ErrorModel,
    sd_length: tuple[int, int] = (1000, 8000),
    inverted_fraction: float = 0.5,
    name: str = "sim",
) -> tuple[Genome, list[PlantedSD]]:
    """A genome of roughly ``size`` bases with planted duplications.

    Sources are disjoint slices of a random backbone; each mutated copy
    is inserted elsewhere, so final coordinates account for the shifts
    every insertion introduces downstream.
    """
    lengths = [int(rng.integers(sd_length[0], sd_length[1] + 1)) for _ in range(n_sds)]
    backbone_len = size - sum(lengths)  # copies are inserted, sources reused
    if backbone_len < sum(lengths) * 2:
        raise ValueError("genome too small for the requested duplications")
    backbone = random_dna(rng, backbone_len)

    taken: list[tuple[int, int]] = []
    sources = _nonoverlapping_starts(rng, backbone_len, lengths, taken)
    if len(sources) < n_sds:
        raise ValueError("could not place all duplication sources")
    inserts = []
    for src_start, ln in zip(sources, lengths):
        pair = simulate_pair(
            rng, ln, model, source=backbone[src_start : src_start + ln].copy()
        )
        strand = "-" if rng.random() < inverted_fraction else "+"
        copy = pair.copy if strand == "+" else revcomp(pair.copy)
        # insertion points stay clear of every source slice
        while True:
            at = int(rng.integers(0, backbone_len + 1))
            if all(at <= a or at >= b for a, b in taken):
                break
        inserts.append((at, copy, src_start, ln, strand))

    inserts.sort(key=lambda x: x[0])
    shift_points = [at for at, *_ in inserts]
    shift_sizes = [len(c) for _, c, *_ in inserts]
    cum = np.cumsum([0] + shift_sizes)

    def final_pos(x: int) -> int:
        k = 0
        while k < len(shift_points) and shift_points[k] <= x:
            k += 1
        return x + int(cum[k])

    pieces = []
    last = 0
    truths = []
    for idx, (at, copy, src_start, ln, strand) in enumerate(inserts):
        pieces.append(backbone[last:at])
        pieces.append(copy)
        copy_start = at + int(cum[idx])
        m1 = Interval(name, final_pos(src_start), final_pos(src_start) + ln)
        m2 = Interval(name, copy_start, copy_start + len(copy))
        if m2.start < m1.start:
            m1, m2 = m2, m1
        truths.append(PlantedSD(mate1=m1, mate2=m2, strand=strand))
        last = at
    pieces.append(backbone[last:])
    bases = np.concatenate(pieces)
    genome = Genome([Sequence(name, bases, np.zeros(len(bases), dtype=bool))])
    truths.sort(key=lambda t: (t.mate1.start, t.mate2.start))
    return genome, truths


def write_truth(truths: list[PlantedSD], path) -> None:
    """Planted pairs as a 7-column TSV (both mates plus strand)."""
    close = isinstance(path, (str, bytes))
    fh = open(path, "w") if close else path
    try:
        for t in truths:
            fh.write("\t".join([
                t.mate1.chrom, str(t.mate1.start), str(t.mate1.end),
                t.mate2.chrom, str(t.mate2.start), str(t.mate2.end),
                t.strand,
            ]) + "\n")
    finally:
        if close:
            fh.close()


def read_truth(path) -> list[PlantedSD]:
    close = isinstance(path, (str, bytes))
    fh = open(path) if close else path
    out = []
    try:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            f = line.split("\t")
            if len(f) != 7:
                raise ValueError(f"bad truth row with {len(f)} columns")
            out.append(PlantedSD(
                mate1=Interval(f[0], int(f[1]), int(f[2])),
                mate2=Interval(f[3], int(f[4]), int(f[5])),
                strand=f[6],
            ))
    finally:
        if close:
            fh.close()
    return out


def _covered(rec_iv: Interval, truth_iv: Interval, min_cover: float) -> bool:
    return rec_iv.overlap(truth_iv) > min_cover * len(truth_iv)


def score_detection(truths: list[PlantedSD], records, min_cover: float = 0.95):
    """How many planted duplications some record covers well enough.

    A truth counts as found when one record covers more than
    ``min_cover`` of both its mates (either mate order) with the right
    orientation.  Returns (found count, list of missed truths).
    """
    missed = []
    found = 0
    for t in truths:
        hit = False
        for r in records:
            if r.strand2 != t.strand:
                continue
            if (_covered(r.mate1, t.mate1, min_cover)
                    and _covered(r.mate2, t.mate2, min_cover)):
                hit = True
                break
            if (_covered(r.mate1, t.mate2, min_cover)
                    and _covered(r.mate2, t.mate1, min_cover)):
                hit = True
                break
        if hit:
            found += 1
        else:
            missed.append(t)
    return found, missed
