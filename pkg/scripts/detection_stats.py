"""Channel-check detection statistics for intercept-resend at several coverages.

For each coverage and check-set size c, runs many hash-signed QSDC sessions and
reports the pooled check mismatch rate and the fraction of runs that escaped
detection, next to the independent-position prediction (1 - coverage/4)^c.

    python scripts/detection_stats.py --trials 2000 --sizes 5 10 --coverages 0.25 0.5 1.0
"""

import argparse
from concurrent.futures import ProcessPoolExecutor

from avowable.adversary import EveKind, EveStrategy
from avowable.crypto import BitString
from avowable.harness import QsdcConfig, execute_qsdc
from avowable.seeding import derive_seed


def one_run(args: tuple[int, float, int]) -> tuple[int, int, bool]:
    c, coverage, t = args
    seed = derive_seed(c, coverage, t)
    eve = EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, coverage, seed=derive_seed(seed, "eve"))
    run = execute_qsdc(QsdcConfig(BitString.zeros(c), seed, eve))
    return run.report.mismatches, run.report.checked, not run.aborted


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--sizes", type=int, nargs="+", default=[5, 10])
    p.add_argument("--coverages", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    print(f"{'c':>3} {'coverage':>8} {'mismatch':>9} {'expected':>9} {'undetected':>11} {'expected':>9}")
    with ProcessPoolExecutor(args.jobs) as pool:
        for c in args.sizes:
            for cov in args.coverages:
                jobs = [(c, cov, t) for t in range(args.trials)]
                res = list(pool.map(one_run, jobs, chunksize=64))
                mism = sum(r[0] for r in res) / sum(r[1] for r in res)
                escaped = sum(r[2] for r in res) / len(res)
                print(f"{c:>3} {cov:>8.2f} {mism:>9.4f} {cov / 4:>9.4f} {escaped:>11.4f} {(1 - cov / 4) ** c:>9.4f}")


if __name__ == "__main__":
    main()
