"""Run the shipped Iris-sized models through every classifier back end.

Prints each sample's clause sums, the race arrival times and the granted class
next to the digital prediction, then the summary report for the run.

    python demos/iris_walkthrough.py
"""

from tdtm import fixtures
from tdtm.simulator import COTM_ARCH, COTM_IDEAL, DIGITAL, HAMMING, RunConfig, simulate


def main():
    samples = fixtures.iris_samples()
    runs = [(fixtures.IRIS_MULTICLASS, DIGITAL), (fixtures.IRIS_MULTICLASS, HAMMING),
            (fixtures.IRIS_COALESCED, COTM_IDEAL), (fixtures.IRIS_COALESCED, COTM_ARCH)]
    for name, mode in runs:
        model = fixtures.model(name)
        res = simulate(model, samples, RunConfig(mode=mode))
        print(f"== {name} / {mode}")
        for rec in res.records:
            row = rec.row()
            print(f"  sample {row['sample']}: sums={row['sums']} delays={row['delays_ps'] or '-'} "
                  f"-> class {row['prediction']} (oracle {row['oracle']})")
        print("  " + res.report.text().replace("\n", "\n  ").rstrip())
        print()


if __name__ == "__main__":
    main()
