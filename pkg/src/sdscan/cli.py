"""Command line entry points.

Subcommands cover the whole workflow: ``search`` scans a FASTA for
duplication pairs, ``simulate`` writes a synthetic genome with a truth
table, ``score`` compares calls against such a table, ``validate``
replays call CIGARs against the genome, and ``stats`` summarizes a
BEDPE file.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from .genome_io import parse_fasta, read_bedpe, write_bedpe, write_fasta
from .pipeline import RunConfig, run, validate_records
from .search import ErrorModel
from .simulate import build_genome, read_truth, score_detection, write_truth


def _model_from_args(args) -> ErrorModel:
    return ErrorModel(delta=args.delta, delta_m=args.delta_m)


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, default=0.25,
                   help="total error budget per pair (default 0.25)")
    p.add_argument("--delta-m", type=float, default=0.15, dest="delta_m",
                   help="mutation part of the budget (default 0.15)")


def cmd_search(args) -> int:
    t0 = time.time()
    genome = parse_fasta(args.fasta)
    bases = sum(len(s.bases) for s in genome.sequences)
    print(f"read {len(genome.sequences)} sequence(s), {bases} bp", file=sys.stderr)
    config = RunConfig(
        model=_model_from_args(args),
        min_length=args.min_length,
        threads=args.threads,
        inverted=not args.no_inverted,
    )
    records = run(genome, config)
    out = args.output or "-"
    if out == "-":
        write_bedpe(records, sys.stdout)
    else:
        write_bedpe(records, out)
    print(f"{len(records)} duplication pair(s) in {time.time() - t0:.1f}s",
          file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    model = _model_from_args(args)
    genome, truths = build_genome(
        rng, args.size, args.sds, model,
        sd_length=(args.sd_min, args.sd_max),
        inverted_fraction=args.inverted_fraction,
    )
    write_fasta(genome, args.fasta)
    if args.truth:
        write_truth(truths, args.truth)
    print(f"wrote {args.fasta}: {sum(len(s.bases) for s in genome.sequences)} bp, "
          f"{len(truths)} planted pair(s)", file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    truths = read_truth(args.truth)
    records = read_bedpe(args.bedpe)
    found, missed = score_detection(truths, records, min_cover=args.min_cover)
    rate = found / len(truths) if truths else 1.0
    print(f"found {found}/{len(truths)} ({rate:.1%}) at cover>{args.min_cover}")
    for t in missed:
        print(f"missed\t{t.mate1.chrom}\t{t.mate1.start}\t{t.mate1.end}"
              f"\t{t.mate2.chrom}\t{t.mate2.start}\t{t.mate2.end}\t{t.strand}")
    return 0 if found == len(truths) else 1


def cmd_validate(args) -> int:
    genome = parse_fasta(args.fasta)
    records = read_bedpe(args.bedpe)
    config = RunConfig(model=_model_from_args(args))
    bad = validate_records(genome, records, config)
    if not bad:
        print(f"all {len(records)} record(s) check out")
        return 0
    for rec, problems in bad:
        for p in problems:
            print(f"{rec.name or rec.mate1}\t{p}")
    print(f"{len(bad)}/{len(records)} record(s) failed", file=sys.stderr)
    return 1


def cmd_stats(args) -> int:
    records = read_bedpe(args.bedpe)
    if not records:
        print("no records")
        return 0
    lens = [min(len(r.mate1), len(r.mate2)) for r in records]
    errs = [r.error_total for r in records]
    inv = sum(1 for r in records if r.strand2 == "-")
    same = sum(1 for r in records if r.mate1.chrom == r.mate2.chrom)
    print(f"records\t{len(records)}")
    print(f"inverted\t{inv}")
    print(f"same_chrom\t{same}")
    print(f"min_len\t{min(lens)}")
    print(f"median_len\t{int(np.median(lens))}")
    print(f"max_len\t{max(lens)}")
    print(f"mean_error\t{np.mean(errs):.4f}")
    print(f"max_error\t{max(errs):.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdscan",
        description="detect segmental duplications in assembled genomes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="scan a FASTA for duplication pairs")
    p.add_argument("fasta", help="genome FASTA (.gz ok; lowercase = soft-masked)")
    p.add_argument("-o", "--output", default="-",
                   help="output BEDPE path, - for stdout")
    _add_model_args(p)
    p.add_argument("--min-length", type=int, default=1000, dest="min_length",
                   help="minimum duplication length (default 1000)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-inverted", action="store_true",
                   help="skip the reverse-complement pass")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("simulate", help="write a genome with planted duplications")
    p.add_argument("fasta", help="output FASTA path")
    p.add_argument("--truth", help="output truth TSV path")
    p.add_argument("--size", type=int, default=200_000)
    p.add_argument("--sds", type=int, default=5, help="pairs to plant")
    _add_model_args(p)
    p.add_argument("--sd-min", type=int, default=1000, dest="sd_min")
    p.add_argument("--sd-max", type=int, default=8000, dest="sd_max")
    p.add_argument("--inverted-fraction", type=float, default=0.5,
                   dest="inverted_fraction")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="compare calls against a truth table")
    p.add_argument("truth", help="truth TSV from simulate")
    p.add_argument("bedpe", help="calls to score")
    p.add_argument("--min-cover", type=float, default=0.95, dest="min_cover")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("validate", help="replay call CIGARs against the genome")
    p.add_argument("fasta")
    p.add_argument("bedpe")
    _add_model_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="summarize a BEDPE file")
    p.add_argument("bedpe")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
