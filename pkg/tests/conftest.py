import numpy as np
import pytest

ALPHABET = np.frombuffer(b"ACGT", dtype=np.uint8)


def random_dna(rng, n: int) -> np.ndarray:
    """Uniform random ACGT as an uppercase ASCII uint8 array."""
    return rng.choice(ALPHABET, size=n)


def random_dna_bytes(rng, n: int) -> bytes:
    return random_dna(rng, n).tobytes()


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
