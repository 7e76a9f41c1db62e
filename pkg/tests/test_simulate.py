from dataclasses import dataclass

import numpy as np
import pytest

from sdscan.genome_io import Interval, revcomp
from sdscan.search import ErrorModel, qgram_accept
from sdscan.simulate import (
    PlantedSD,
    apply_script,
    build_genome,
    embed_pair,
    score_detection,
    simulate_pair,
)

MODELS = [
    ErrorModel(delta=0.25, delta_m=0.15),
    ErrorModel(delta=0.10, delta_m=0.05),
    ErrorModel(delta=0.30, delta_m=0.15),
]


def test_script_replays_exactly(rng):
    for trial in range(30):
        model = MODELS[trial % len(MODELS)]
        pair = simulate_pair(rng, int(rng.integers(1000, 6000)), model)
        replayed = apply_script(pair.source, pair.script)
        assert np.array_equal(replayed, pair.copy)


def test_scripted_loads_stay_inside_budgets(rng):
    for trial in range(30):
        model = MODELS[trial % len(MODELS)]
        n = int(rng.integers(1000, 8000))
        pair = simulate_pair(rng, n, model)
        s = pair.script
        assert s.scripted_error(n) <= model.delta
        assert len(s.subs) + s.small_gap_bases <= model.delta_m * n
        assert s.large_gap_bases <= model.delta_g * n
        assert s.large_gap_events <= model.p_gap * n + 1


def test_simulation_deterministic():
    a = simulate_pair(np.random.default_rng(7), 2000, MODELS[0])
    b = simulate_pair(np.random.default_rng(7), 2000, MODELS[0])
    assert np.array_equal(a.source, b.source)
    assert np.array_equal(a.copy, b.copy)
    assert a.script == b.script


def test_simulate_pair_validation(rng):
    with pytest.raises(ValueError):
        simulate_pair(rng, 0, MODELS[0])
    with pytest.raises(ValueError):
        simulate_pair(rng, 100, MODELS[0], source=np.zeros(50, np.uint8))


def test_zero_error_model_copies_verbatim(rng):
    model = ErrorModel(delta=0.0, delta_m=0.0, p_gap=0.0)
    pair = simulate_pair(rng, 1500, model)
    assert np.array_equal(pair.source, pair.copy)


def test_embed_pair_places_truth(rng):
    for strand in "+-":
        pair = simulate_pair(rng, 2000, MODELS[0])
        genome, truth = embed_pair(rng, pair, 20000, strand=strand)
        bases = genome.sequences[0].bases
        assert truth.strand == strand
        m1, m2 = truth.mate1, truth.mate2
        assert np.array_equal(bases[m1.start : m1.end], pair.source)
        placed = bases[m2.start : m2.end]
        expect = pair.copy if strand == "+" else revcomp(pair.copy)
        assert np.array_equal(placed, expect)
        assert m1.overlap(m2) == 0


def test_build_genome_structure(rng):
    model = ErrorModel(delta=0.20, delta_m=0.12)
    genome, truths = build_genome(rng, 400_000, 8, model, sd_length=(1000, 4000))
    total = genome.sequences[0].bases.size
    assert abs(total - 400_000) < 0.05 * 400_000
    assert len(truths) == 8
    bases = genome.sequences[0].bases
    for t in truths:
        assert t.mate1.start < t.mate2.start
        assert t.mate1.overlap(t.mate2) == 0
        s1 = bases[t.mate1.start : t.mate1.end]
        s2 = bases[t.mate2.start : t.mate2.end]
        if t.strand == "-":
            s2 = revcomp(s2)
        # mates must still look like a duplication under the model
        assert qgram_accept(s1, s2, 5, model)


def test_build_genome_rejects_overfull(rng):
    with pytest.raises(ValueError):
        build_genome(rng, 30_000, 20, MODELS[0], sd_length=(1000, 1500))


@dataclass
class FakeRecord:
    mate1: Interval
    mate2: Interval
    strand2: str


def test_score_detection_rules():
    truth = PlantedSD(Interval("s", 1000, 2000), Interval("s", 5000, 6000), "+")
    good = FakeRecord(Interval("s", 960, 2010), Interval("s", 4980, 6050), "+")
    swapped = FakeRecord(Interval("s", 4980, 6050), Interval("s", 960, 2010), "+")
    partial = FakeRecord(Interval("s", 1500, 2000), Interval("s", 4980, 6050), "+")
    wrong_strand = FakeRecord(Interval("s", 960, 2010), Interval("s", 4980, 6050), "-")

    found, missed = score_detection([truth], [good])
    assert found == 1 and not missed
    found, _ = score_detection([truth], [swapped])
    assert found == 1
    found, missed = score_detection([truth], [partial])
    assert found == 0 and missed == [truth]
    found, _ = score_detection([truth], [wrong_strand])
    assert found == 0
    found, _ = score_detection([truth], [])
    assert found == 0
