"""Winnowed k-mer sketching: hashing, minimizer selection, genome index,
and the rolling set-intersection estimator used for seeding and extension.

A k-mer is hashed by packing its bases into 2 bits each and mixing the
packed value with an invertible 64-bit finalizer, so distinct k-mers of the
same length never collide.  Winnowing selects, for every window of ``w``
consecutive k-mers, the k-mer with the minimal hash (rightmost on ties);
the expected number of selected positions on random sequence is
``2 * len / (w + 1)``.  K-mers containing N are never candidates.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from sortedcontainers import SortedList

DEFAULT_K = 12
DEFAULT_W = 16
DEFAULT_SEED = 0x9E3779B97F4A7C15

_U64_MAX = np.uint64(0xFFFFFFFFFFFFFFFF)

_CODE = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate(b"ACGT"):
    _CODE[_b] = _i


@dataclass(frozen=True)
class SketchParams:
    k: int = DEFAULT_K
    w: int = DEFAULT_W
    hash_seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not 1 <= self.k <= 31:
            raise ValueError(f"k must be in [1, 31], got {self.k}")
        if self.w < 1:
            raise ValueError(f"w must be >= 1, got {self.w}")


@dataclass(frozen=True)
class Minimizer:
    """A selected k-mer: local or global position, hash, fully-masked flag."""

    position: int
    hash: int
    masked: bool = False


def hash_kmers(packed: np.ndarray, seed: int) -> np.ndarray:
    """Invertible 64-bit mix (xorshift-multiply finalizer) of packed k-mers."""
    z = packed.astype(np.uint64) ^ np.uint64(seed)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash_kmer(kmer: bytes, seed: int = DEFAULT_SEED) -> int:
    """Scalar convenience wrapper around :func:`hash_kmers`."""
    codes = _CODE[np.frombuffer(kmer.upper(), dtype=np.uint8)]
    if np.any(codes == 255):
        raise ValueError(f"k-mer {kmer!r} contains a non-ACGT base")
    packed = 0
    for c in codes:
        packed = (packed << 2) | int(c)
    return int(hash_kmers(np.array([packed], dtype=np.uint64), seed)[0])


def pack_kmers(bases: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """2-bit pack every k-mer of an ACGTN byte array.

    Returns (packed uint64 array, valid bool array); a k-mer is valid when it
    contains no N.
    """
    n = len(bases)
    count = n - k + 1
    if count <= 0:
        return np.empty(0, dtype=np.uint64), np.empty(0, dtype=bool)
    codes = _CODE[bases]
    invalid = codes == 255
    codes = np.where(invalid, 0, codes).astype(np.uint64)
    packed = np.zeros(count, dtype=np.uint64)
    for t in range(k):
        packed = (packed << np.uint64(2)) | codes[t : t + count]
    bad = np.concatenate([[0], np.cumsum(invalid)])
    valid = (bad[k:] - bad[:-k]) == 0
    return packed, valid


def _window_all_true(flags: np.ndarray, k: int) -> np.ndarray:
    c = np.concatenate([[0], np.cumsum(flags)])
    return (c[k:] - c[:-k]) == k


def winnow(
    bases: np.ndarray,
    mask: np.ndarray | None = None,
    params: SketchParams = SketchParams(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Winnow one sequence.

    Returns (positions int64, hashes uint64, fully_masked bool), positions
    strictly increasing.  Each position selected by at least one window is
    emitted exactly once.  Sequences with fewer k-mers than the window size
    are treated as a single window; windows whose k-mers are all invalid
    yield nothing.
    """
    k, w = params.k, params.w
    packed, valid = pack_kmers(bases, k)
    count = len(packed)
    if count == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, np.empty(0, dtype=np.uint64), np.empty(0, dtype=bool)

    hashes = hash_kmers(packed, params.hash_seed)
    ranked = np.where(valid, hashes, _U64_MAX)
    ww = min(w, count)
    windows = np.lib.stride_tricks.sliding_window_view(ranked, ww)
    # argmin takes the first minimum; scan the reversed window for rightmost ties
    sel = (ww - 1) - np.argmin(windows[:, ::-1], axis=1)
    sel = sel + np.arange(len(windows), dtype=np.int64)
    sel = np.unique(sel[valid[sel]])

    if mask is not None:
        masked_kmer = _window_all_true(mask, k)[sel]
    else:
        masked_kmer = np.zeros(len(sel), dtype=bool)
    return sel.astype(np.int64), hashes[sel], masked_kmer


@dataclass
class MinimizerIndex:
    """Winnow list of a genome in global coordinates with a reverse lookup.

    ``pos``/``hashes``/``masked``/``seq_id`` are parallel arrays sorted by
    position.  ``seed_mode`` indexes drop minimizers whose k-mer is entirely
    soft-masked; extension uses the full index.
    """

    params: SketchParams
    seed_mode: bool
    pos: np.ndarray
    hashes: np.ndarray
    masked: np.ndarray
    seq_id: np.ndarray
    seq_names: list[str]
    seq_lengths: list[int]
    _order: np.ndarray = field(init=False, repr=False)
    _h_sorted: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._order = np.lexsort((self.pos, self.hashes))
        self._h_sorted = self.hashes[self._order]

    def __len__(self) -> int:
        return len(self.pos)

    def positions_for(self, h: int) -> np.ndarray:
        """Sorted global positions carrying hash ``h``."""
        lo = int(np.searchsorted(self._h_sorted, np.uint64(h), side="left"))
        hi = int(np.searchsorted(self._h_sorted, np.uint64(h), side="right"))
        out = self.pos[self._order[lo:hi]]
        return np.sort(out)

    def positions_for_many(self, hs: np.ndarray) -> np.ndarray:
        """Concatenated positions for a batch of hashes (order unspecified)."""
        hs = hs.astype(np.uint64)
        lo = np.searchsorted(self._h_sorted, hs, side="left")
        hi = np.searchsorted(self._h_sorted, hs, side="right")
        lens = hi - lo
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        # expand [lo_i, hi_i) ranges into one flat index array
        starts = np.repeat(lo, lens)
        offs = np.arange(total) - np.repeat(np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
        return self.pos[self._order[starts + offs]]

    def range_indices(self, gstart: int, gend: int) -> tuple[int, int]:
        """Index slice of minimizers fully inside global window [gstart, gend)."""
        k = self.params.k
        lo = int(np.searchsorted(self.pos, gstart, side="left"))
        hi = int(np.searchsorted(self.pos, gend - k, side="right"))
        return lo, max(lo, hi)


def build_index(genome, params: SketchParams = SketchParams(), seed_mode: bool = False) -> MinimizerIndex:
    """Winnow every sequence of a genome into one position-sorted index."""
    pos_parts, hash_parts, mask_parts, sid_parts = [], [], [], []
    for sid, seq in enumerate(genome.sequences):
        p, h, m = winnow(seq.bases, seq.mask, params)
        if seed_mode and len(p):
            keep = ~m
            p, h, m = p[keep], h[keep], m[keep]
        if len(p) == 0:
            continue
        pos_parts.append(p + int(genome.offsets[sid]))
        hash_parts.append(h)
        mask_parts.append(m)
        sid_parts.append(np.full(len(p), sid, dtype=np.int32))
    if pos_parts:
        pos = np.concatenate(pos_parts)
        hashes = np.concatenate(hash_parts)
        masked = np.concatenate(mask_parts)
        seq_id = np.concatenate(sid_parts)
    else:
        pos = np.empty(0, dtype=np.int64)
        hashes = np.empty(0, dtype=np.uint64)
        masked = np.empty(0, dtype=bool)
        seq_id = np.empty(0, dtype=np.int32)
    return MinimizerIndex(
        params=params,
        seed_mode=seed_mode,
        pos=pos,
        hashes=hashes,
        masked=masked,
        seq_id=seq_id,
        seq_names=[s.name for s in genome.sequences],
        seq_lengths=[len(s) for s in genome.sequences],
    )


def jaccard_exact(a: set[int] | list[int], b: set[int] | list[int]) -> float:
    """Plain Jaccard similarity of two k-mer hash sets; 0.0 when both empty."""
    sa, sb = set(a), set(b)
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return len(sa & sb) / union


class RollingEstimator:
    """Incrementally maintained winnowed MinHash estimate between two windows.

    Membership is tracked as two hash multisets ("own" = the fixed or left
    window, "other" = the sliding window).  The estimate is the fraction of
    the ``s`` smallest distinct hashes of the union that occur in both
    windows, with ``s`` the number of distinct own hashes.  All updates are
    O(log n); the estimate always equals the value a from-scratch
    computation on the current members would give.
    """

    __slots__ = ("_own", "_other", "_members", "_inter")

    def __init__(self):
        self._own: dict[int, int] = {}
        self._other: dict[int, int] = {}
        self._members = SortedList()
        self._inter = SortedList()

    @classmethod
    def from_hashes(cls, own, other) -> "RollingEstimator":
        est = cls()
        for h in own:
            est.add(int(h), "own")
        for h in other:
            est.add(int(h), "other")
        return est

    @property
    def sketch_size(self) -> int:
        return len(self._own)

    def add(self, h: int, side: str) -> None:
        counts = self._own if side == "own" else self._other
        opposite = self._other if side == "own" else self._own
        c = counts.get(h, 0)
        counts[h] = c + 1
        if c == 0:
            if h in opposite:
                self._inter.add(h)  # already a member via the other side
            else:
                self._members.add(h)

    def remove(self, h: int, side: str) -> None:
        counts = self._own if side == "own" else self._other
        opposite = self._other if side == "own" else self._own
        c = counts.get(h, 0)
        if c == 0:
            raise AssertionError(f"removing absent {side} member {h}")
        if c == 1:
            del counts[h]
            if h in opposite:
                self._inter.remove(h)
            else:
                self._members.remove(h)
        else:
            counts[h] = c - 1

    def estimate(self) -> float:
        s = len(self._own)
        if s == 0:
            return 0.0
        boundary = self._members[s - 1]
        return self._inter.bisect_right(boundary) / s

    def members(self) -> list[tuple[int, bool]]:
        """Current distinct union hashes with their in-intersection flag."""
        own, other = self._own, self._other
        return [(h, h in own and h in other) for h in self._members]


def rolling_update(
    est: RollingEstimator,
    add: tuple[Minimizer, str] | None = None,
    remove: tuple[Minimizer, str] | None = None,
) -> RollingEstimator:
    """Apply one add and/or remove step; returns the same estimator."""
    if remove is not None:
        est.remove(remove[0].hash, remove[1])
    if add is not None:
        est.add(add[0].hash, add[1])
    return est


# ---------------------------------------------------------------------------
# Binary index serialization
# ---------------------------------------------------------------------------

_MAGIC = b"SDIX"
_VERSION = 1


def save_index(index: MinimizerIndex, path: str) -> None:
    """Serialize an index with a little-endian versioned header."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HHHBQQ", _VERSION, index.params.k, index.params.w,
                             1 if index.seed_mode else 0, index.params.hash_seed,
                             len(index.pos)))
        fh.write(struct.pack("<I", len(index.seq_names)))
        for name, length in zip(index.seq_names, index.seq_lengths):
            enc = name.encode()
            fh.write(struct.pack("<HQ", len(enc), length))
            fh.write(enc)
        fh.write(index.pos.astype("<i8").tobytes())
        fh.write(index.hashes.astype("<u8").tobytes())
        fh.write(index.masked.astype("<u1").tobytes())
        fh.write(index.seq_id.astype("<i4").tobytes())


def load_index(path: str) -> MinimizerIndex:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an index file (bad magic {magic!r})")
        version, k, w, seed_mode, seed, n = struct.unpack("<HHHBQQ", fh.read(23))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        (nseq,) = struct.unpack("<I", fh.read(4))
        names, lengths = [], []
        for _ in range(nseq):
            ln, sl = struct.unpack("<HQ", fh.read(10))
            names.append(fh.read(ln).decode())
            lengths.append(sl)
        pos = np.frombuffer(fh.read(8 * n), dtype="<i8").astype(np.int64)
        hashes = np.frombuffer(fh.read(8 * n), dtype="<u8").astype(np.uint64)
        masked = np.frombuffer(fh.read(n), dtype="<u1").astype(bool)
        seq_id = np.frombuffer(fh.read(4 * n), dtype="<i4").astype(np.int32)
    return MinimizerIndex(
        params=SketchParams(k=k, w=w, hash_seed=seed),
        seed_mode=bool(seed_mode),
        pos=pos,
        hashes=hashes,
        masked=masked,
        seq_id=seq_id,
        seq_names=names,
        seq_lengths=lengths,
    )
