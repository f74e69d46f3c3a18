"""Regenerate the shipped fixtures in ``src/tdtm/data``.

The models are not trained. Their clauses are hand-written interval rules over
a 4-threshold thermometer code of the four Iris measurements (16 features),
which is enough to classify the four shipped samples correctly and to give
the simulator realistic, non-trivial clause activity.

The small ``small_*`` models (F <= 4, C <= 6, K <= 3) are drawn at random from
fixed seeds; they are small enough for exhaustive input sweeps.
"""

import json
import os
import sys

import numpy as np

from tdtm.model import (COALESCED, MULTICLASS, Sample, TmModel, booleanize, dump_dataset, random_model,
                        save_model)

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "src", "tdtm", "data")

# sepal length, sepal width, petal length, petal width (cm)
THRESHOLDS = [
    [5.0, 5.5, 6.0, 6.5],
    [2.7, 3.0, 3.2, 3.5],
    [1.9, 3.0, 4.75, 5.1],
    [0.6, 1.0, 1.6, 1.8],
]

# four measured flowers, labels 0 setosa, 1 versicolor, 2 virginica
RAW = [
    ([6.3, 3.3, 6.0, 2.5], 2),
    ([5.1, 3.5, 1.4, 0.2], 0),
    ([7.0, 3.2, 4.7, 1.4], 1),
    ([5.0, 2.0, 3.5, 1.0], 1),
]


def pos(i):
    return 2 * i


def neg(i):
    return 2 * i + 1


# feature index = 4 * attribute + threshold index
PL, PW = 8, 12

MULTICLASS_RULES = [
    # setosa: short, narrow petals
    [[neg(PL)], [neg(PL + 1)], [neg(PW)], [neg(PL), neg(PW)], [neg(PW + 1)], [neg(PL), pos(5)],
     [pos(PL)], [pos(PW)], [pos(PL + 2)], [pos(PW + 2)], [pos(PL + 1)], [pos(PW + 1)]],
    # versicolor: middle band
    [[pos(PL), neg(PL + 2)], [pos(PW), neg(PW + 2)], [pos(PL + 1), neg(PL + 3)], [pos(PW), neg(PW + 3)],
     [pos(PL), neg(PL + 3)], [pos(PW + 1), neg(PW + 2)],
     [neg(PL)], [pos(PL + 3)], [pos(PW + 3)], [neg(PW)], [pos(PW + 2)], [pos(PL + 2), pos(PW + 2)]],
    # virginica: long, wide petals
    [[pos(PL + 3)], [pos(PW + 3)], [pos(PL + 2), pos(PW + 2)], [pos(PW + 2)], [pos(PL + 3), pos(PW + 3)],
     [pos(PL + 2)],
     [neg(PL + 2)], [neg(PW + 2)], [neg(PL)], [neg(PW + 1)], [neg(PL + 1)], [neg(PL + 3), neg(PW + 3)]],
]

SHARED_RULES = [
    [neg(PL)], [neg(PW)], [pos(PL), neg(PL + 2)], [pos(PW), neg(PW + 2)], [pos(PL + 3)], [pos(PW + 3)],
    [pos(PL + 2), pos(PW + 2)], [pos(PL + 1), neg(PL + 3)], [pos(PW + 2)], [neg(PL + 1)],
    [pos(PW + 1), neg(PW + 2)], [pos(PL + 2)],
]
WEIGHTS = [
    [6, 5, -3, -3, -4, -4, -3, -2, -3, 4, -2, -3],
    [-5, -4, 5, 4, -3, -3, -3, 3, -2, -2, 4, -1],
    [-5, -5, -2, -3, 4, 4, 5, -2, 3, -3, -3, 3],
]


def masks(rules, F=16):
    out = np.ones((len(rules), 2 * F), dtype=np.uint8)
    for row, lits in zip(out, rules):
        row[lits] = 0
    return out


def interleave(rules):
    # rules list six positive then six negative clauses; polarity alternates by index
    half = len(rules) // 2
    return [r for pair in zip(rules[:half], rules[half:]) for r in pair]


def build():
    mc = TmModel(MULTICLASS, 16, 12, 3, masks([r for cls in MULTICLASS_RULES for r in interleave(cls)]))
    co = TmModel(COALESCED, 16, 12, 3, masks(SHARED_RULES), weights=np.array(WEIGHTS))
    samples = [Sample(booleanize(raw, THRESHOLDS).features, label) for raw, label in RAW]
    return mc, co, samples


SMALL = [(2, 2, 2), (3, 4, 3), (4, 6, 3), (4, 6, 2)]


def build_small():
    out = {}
    for n, (F, C, K) in enumerate(SMALL):
        rng = np.random.default_rng(100 + n)
        out[f"small_multiclass_{n}.json"] = random_model(rng, MULTICLASS, F, C, K, include_p=0.3)
        out[f"small_coalesced_{n}.json"] = random_model(rng, COALESCED, F, C, K, include_p=0.3)
    return out


def main(out=DATA):
    for name, model in build_small().items():
        with open(os.path.join(out, name), "wb") as fh:
            fh.write(save_model(model))
    mc, co, samples = build()
    with open(os.path.join(out, "iris_multiclass.json"), "wb") as fh:
        fh.write(save_model(mc))
    with open(os.path.join(out, "iris_coalesced.json"), "wb") as fh:
        fh.write(save_model(co))
    with open(os.path.join(out, "iris_4.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(f"x{i}" for i in range(16)) + ",label\n")
        fh.write(dump_dataset(samples))
    with open(os.path.join(out, "iris_thresholds.json"), "w", encoding="utf-8") as fh:
        json.dump({"attributes": ["sepal_length", "sepal_width", "petal_length", "petal_width"],
                   "thresholds": THRESHOLDS}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
