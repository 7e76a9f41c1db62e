"""sdscan: segmental duplication detection in assembled genomes.

The pipeline seeds candidate duplication pairs with a winnowed MinHash
estimator, extends them into potential regions, filters with a shared
q-gram count, chains exact anchor matches with sparse dynamic programming,
and polishes each chain with affine-gap alignment into BEDPE records.
"""

__version__ = "0.1.0"
