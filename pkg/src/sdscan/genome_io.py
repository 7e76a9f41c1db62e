"""Genome input/output: FASTA parsing with soft-mask tracking and BEDPE records.

Sequences are stored as uppercase ASCII bytes in numpy arrays together with a
boolean soft-mask (True where the input base was lowercase).  Ambiguity codes
other than ACGT are normalized to N; the mask is preserved.  All coordinates
are 0-based half-open.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass, field

import numpy as np

VALID_BASES = b"ACGTN"

# Uppercase table: lowercase a-z -> A-Z, everything else unchanged.
_UPPER = np.arange(256, dtype=np.uint8)
_UPPER[ord("a") : ord("z") + 1] = np.arange(ord("A"), ord("Z") + 1, dtype=np.uint8)

# IUPAC ambiguity codes (already uppercased) that normalize to N.
_AMBIG = b"RYSWKMBDHVN"
_NORMALIZE = np.zeros(256, dtype=np.uint8)  # 0 marks an invalid character
for _b in b"ACGT":
    _NORMALIZE[_b] = _b
for _b in _AMBIG:
    _NORMALIZE[_b] = ord("N")

_COMPLEMENT = np.zeros(256, dtype=np.uint8)
for _x, _y in zip(b"ACGTN", b"TGCAN"):
    _COMPLEMENT[_x] = _y


class FastaError(ValueError):
    """Raised when a FASTA file cannot be parsed."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open interval on a named sequence."""

    chrom: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad interval {self.chrom}:{self.start}-{self.end}")

    def __len__(self) -> int:
        return self.end - self.start

    def overlap(self, other: "Interval") -> int:
        if self.chrom != other.chrom:
            return 0
        return max(0, min(self.end, other.end) - max(self.start, other.start))


@dataclass
class Sequence:
    """One FASTA entry: uppercase bases plus the soft-mask from case."""

    name: str
    bases: np.ndarray  # uint8 ASCII, uppercase ACGTN
    mask: np.ndarray  # bool, True where input was lowercase

    def __len__(self) -> int:
        return len(self.bases)


@dataclass
class Genome:
    """Ordered collection of sequences with a global coordinate layout.

    Global positions concatenate the sequences in file order; ``offsets[i]``
    is the global position of the first base of sequence i.
    """

    sequences: list[Sequence]
    _name_to_idx: dict[str, int] = field(init=False, repr=False)
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._name_to_idx = {}
        for i, seq in enumerate(self.sequences):
            if seq.name in self._name_to_idx:
                raise ValueError(f"duplicate sequence name {seq.name!r}")
            self._name_to_idx[seq.name] = i
        lengths = [len(s) for s in self.sequences]
        self.offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)

    @property
    def total_length(self) -> int:
        return int(self.offsets[-1])

    def index_of(self, name: str) -> int:
        return self._name_to_idx[name]

    def seq(self, name: str) -> Sequence:
        return self.sequences[self._name_to_idx[name]]

    def locate(self, gpos: int) -> tuple[int, int]:
        """Map a global position to (sequence index, local position)."""
        i = int(np.searchsorted(self.offsets, gpos, side="right")) - 1
        if i < 0 or gpos >= self.offsets[-1]:
            raise IndexError(f"global position {gpos} outside genome")
        return i, gpos - int(self.offsets[i])

    def seq_range(self, idx: int) -> tuple[int, int]:
        """Global [start, end) range of sequence ``idx``."""
        return int(self.offsets[idx]), int(self.offsets[idx + 1])

    def masked_fraction(self, iv: Interval) -> float:
        seq = self.seq(iv.chrom)
        if len(iv) == 0:
            return 0.0
        return float(np.count_nonzero(seq.mask[iv.start : iv.end])) / len(iv)

    def unmasked_bases(self, iv: Interval) -> int:
        seq = self.seq(iv.chrom)
        return len(iv) - int(np.count_nonzero(seq.mask[iv.start : iv.end]))


def revcomp(bases: np.ndarray) -> np.ndarray:
    """Reverse complement of an uppercase ACGTN byte array."""
    return _COMPLEMENT[bases[::-1]]


def _open_maybe_gzip(path: str, mode: str = "rt"):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def parse_fasta(path: str) -> Genome:
    """Parse a FASTA file (gzip-compressed if the name ends in .gz).

    Lowercase bases set the soft-mask.  IUPAC ambiguity codes map to N with
    the mask unchanged.  Any other character, a record with no sequence, or
    sequence data before the first header is an error naming the line.
    """
    names: list[str] = []
    header_lines: list[int] = []
    chunks: list[list[bytes]] = []
    with _open_maybe_gzip(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(b">"):
                name = line[1:].split()[0].decode() if line[1:].split() else ""
                if not name:
                    raise FastaError(str(path), lineno, "empty sequence name")
                names.append(name)
                header_lines.append(lineno)
                chunks.append([])
            else:
                if not names:
                    raise FastaError(str(path), lineno, "sequence data before first header")
                chunks[-1].append(line)

    if not names:
        raise FastaError(str(path), 0, "no sequences found")

    sequences = []
    for name, header_line, parts in zip(names, header_lines, chunks):
        raw = np.frombuffer(b"".join(parts), dtype=np.uint8)
        if raw.size == 0:
            raise FastaError(str(path), header_line, f"record {name!r} has no sequence")
        upper = _UPPER[raw]
        mask = upper != raw
        bases = _NORMALIZE[upper]
        if np.any(bases == 0):
            bad = int(np.flatnonzero(bases == 0)[0])
            raise FastaError(
                str(path),
                header_line,
                f"record {name!r}: invalid character {chr(int(raw[bad]))!r} at base {bad}",
            )
        sequences.append(Sequence(name=name, bases=bases, mask=mask))
    return Genome(sequences)


def write_fasta(genome: Genome, path: str, width: int = 80) -> None:
    """Write a genome back to FASTA, lowercasing soft-masked bases."""
    with _open_maybe_gzip(path, "wt") as fh:
        for seq in genome.sequences:
            out = seq.bases.copy()
            lower = out[seq.mask]
            out[seq.mask] = lower + 32  # A-Z -> a-z
            text = out.tobytes().decode()
            fh.write(f">{seq.name}\n")
            for i in range(0, len(text), width):
                fh.write(text[i : i + width] + "\n")


# ---------------------------------------------------------------------------
# SD records and BEDPE serialization
# ---------------------------------------------------------------------------

BEDPE_COLUMNS = [
    "chrom1", "start1", "end1", "chrom2", "start2", "end2",
    "name", "score", "strand1", "strand2",
    "alignment_length", "edit_distance",
    "error_total", "error_mutation", "error_gap",
    "kimura", "jukes_cantor", "cigar",
    "masked_fraction1", "masked_fraction2",
]


@dataclass
class SDRecord:
    """One detected segmental duplication pair with alignment annotations.

    ``cigar`` uses ops M/I/D where mate1 is the reference (M and D consume
    mate1, M and I consume mate2).  For strand2 == '-', the CIGAR describes
    mate1 aligned against the reverse complement of mate2.
    """

    mate1: Interval
    mate2: Interval
    strand1: str
    strand2: str
    alignment_length: int
    edit_distance: int
    error_total: float
    error_mutation: float
    error_gap: float
    kimura: float
    jukes_cantor: float
    cigar: str
    masked_fraction1: float = 0.0
    masked_fraction2: float = 0.0
    name: str = ""

    @property
    def score(self) -> int:
        return int(round(1000 * (1.0 - self.error_total)))

    def sort_key(self):
        return (self.mate1, self.mate2, self.strand2)


def _fmt_float(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.6f}"


def write_bedpe(records: list[SDRecord], path, header: bool = True) -> None:
    """Write records as tab-separated BEDPE, sorted by (mate1, mate2)."""
    ordered = sorted(records, key=SDRecord.sort_key)
    close = False
    if isinstance(path, (str, bytes)):
        fh = open(path, "w")
        close = True
    else:
        fh = path
    try:
        if header:
            fh.write("#" + "\t".join(BEDPE_COLUMNS) + "\n")
        for i, rec in enumerate(ordered):
            name = rec.name or f"sd{i + 1}"
            row = [
                rec.mate1.chrom, str(rec.mate1.start), str(rec.mate1.end),
                rec.mate2.chrom, str(rec.mate2.start), str(rec.mate2.end),
                name, str(rec.score), rec.strand1, rec.strand2,
                str(rec.alignment_length), str(rec.edit_distance),
                _fmt_float(rec.error_total), _fmt_float(rec.error_mutation),
                _fmt_float(rec.error_gap), _fmt_float(rec.kimura),
                _fmt_float(rec.jukes_cantor), rec.cigar,
                _fmt_float(rec.masked_fraction1), _fmt_float(rec.masked_fraction2),
            ]
            fh.write("\t".join(row) + "\n")
    finally:
        if close:
            fh.close()


def read_bedpe(path) -> list[SDRecord]:
    """Read records written by :func:`write_bedpe`."""
    records = []
    close = False
    if isinstance(path, (str, bytes)):
        fh = open(path)
        close = True
    else:
        fh = path
    try:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            f = line.split("\t")
            if len(f) < 18:
                raise ValueError(f"bad BEDPE row with {len(f)} columns")
            rec = SDRecord(
                mate1=Interval(f[0], int(f[1]), int(f[2])),
                mate2=Interval(f[3], int(f[4]), int(f[5])),
                name=f[6],
                strand1=f[8],
                strand2=f[9],
                alignment_length=int(f[10]),
                edit_distance=int(f[11]),
                error_total=float(f[12]),
                error_mutation=float(f[13]),
                error_gap=float(f[14]),
                kimura=float(f[15]),
                jukes_cantor=float(f[16]),
                cigar=f[17],
                masked_fraction1=float(f[18]) if len(f) > 18 else 0.0,
                masked_fraction2=float(f[19]) if len(f) > 19 else 0.0,
            )
            records.append(rec)
    finally:
        if close:
            fh.close()
    return records
