"""Architectural CoTM agreement as the fine-code width e grows.

Generates a fixed suite of random coalesced models and reports how often the
time-domain race (TDC + LOD + DCDE) picks the same class as the digital
argmax. The fine delay unit stays at 10 ps, so tau = 10 * 2^e.

    python demos/e_sweep.py [--n 1000] [--seed 2024]
"""

import argparse
from dataclasses import replace

import numpy as np

from tdtm.arbitration import MutexModel, tba_arbitrate
from tdtm.model import COALESCED, random_model, random_sample
from tdtm.reference import infer
from tdtm.simulator import scaled_fine_unit
from tdtm.timedomain import TimeDomainConfig, cotm_race_delays


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    suite = []
    for _ in range(args.n):
        F, C = int(rng.integers(2, 17)), int(rng.integers(2, 13))
        suite.append((random_model(rng, COALESCED, F, C, 3, include_p=0.15, weight_range=7),
                      random_sample(rng, F)))
    mutex = MutexModel()
    for e in range(1, 8):
        cfg = replace(scaled_fine_unit(TimeDomainConfig(), e), mode="architectural")
        agree = 0
        for m, x in suite:
            ref = infer(m, x)
            arrivals = cotm_race_delays(m, ref.clauses, cfg).arrivals.tolist()
            agree += tba_arbitrate(arrivals, mutex).winner == ref.prediction
        print(f"e={e}  tau={cfg.tau:>5} ps  agreement {100 * agree / len(suite):6.2f} %")


if __name__ == "__main__":
    main()
