"""End-to-end teleportation over swapped channels: fidelity and outcome statistics.

    python scripts/teleport_fidelity.py --runs 50 --n 20
    python scripts/teleport_fidelity.py --runs 20 --n 8 --tamper
"""

import argparse
import time
from collections import Counter

import numpy as np

from avowable.harness import TeleportConfig, execute_teleport


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--tamper", action="store_true", help="flip one bit of S_a in transit")
    args = p.parse_args()

    start = time.perf_counter()
    fids: list[float] = []
    swaps: Counter = Counter()
    alice: Counter = Counter()
    for seed in range(args.runs):
        config = TeleportConfig(args.n, seed, tamper_s_a_bit=seed if args.tamper else None)
        run = execute_teleport(config)
        if not run.ok:
            print(f"seed {seed}: aborted ({run.error})")
            continue
        fids.extend(run.fidelities)
        swaps.update(o.name for o in run.session.swap_outcomes)
        alice.update(o.name for o in run.session.alice_outcomes)
    elapsed = time.perf_counter() - start

    f = np.array(fids)
    print(f"{len(f)} states in {elapsed:.2f} s")
    print(f"fidelity: min {f.min():.12f}  mean {f.mean():.12f}  below 1-1e-9: {(f < 1 - 1e-9).sum()}")
    for label, counts in (("swap outcomes", swaps), ("Alice outcomes", alice)):
        total = sum(counts.values())
        freqs = "  ".join(f"{k} {v / total:.4f}" for k, v in sorted(counts.items()))
        print(f"{label}: {freqs}")


if __name__ == "__main__":
    main()
