"""QBER and abort rate of the BB84 key layer with and without intercept-resend.

    python scripts/bb84_qber.py --length 640 --runs 200
"""

import argparse

import numpy as np

from avowable.adversary import Basis, EveKind, EveStrategy
from avowable.crypto import BB84_ABORT_QBER, bb84_run
from avowable.seeding import derive_seed

ATTACKS = {
    "none": lambda seed: None,
    "intercept-resend": lambda seed: EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, seed=seed),
    "intercept-resend:0.5": lambda seed: EveStrategy(EveKind.INTERCEPT_RESEND_RANDOM, 0.5, seed=seed),
    "fixed Z": lambda seed: EveStrategy(EveKind.INTERCEPT_RESEND_FIXED, fixed_basis=Basis.Z, seed=seed),
}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--length", type=int, default=640)
    p.add_argument("--runs", type=int, default=200)
    args = p.parse_args()

    print(f"{'attack':<22} {'sifted':>7} {'qber':>7} {'sd':>7} {'abort':>7}")
    for name, make in ATTACKS.items():
        qbers, fracs = [], []
        for seed in range(args.runs):
            run = bb84_run(args.length, seed, make(derive_seed(seed, "eve")))
            qbers.append(run.qber)
            fracs.append(run.sifted_fraction)
        q = np.array(qbers)
        print(f"{name:<22} {np.mean(fracs):>7.4f} {q.mean():>7.4f} {q.std():>7.4f} {(q > BB84_ABORT_QBER).mean():>7.3f}")


if __name__ == "__main__":
    main()
