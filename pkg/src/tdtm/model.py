"""Tsetlin machine model and dataset representation.

An exclude mask bit of 1 means the literal is left out of the clause, so a
clause with every literal excluded is the empty conjunction and outputs 1.

Multi-class models hold ``K * C`` masks (class-major), coalesced models hold
``C`` shared masks plus a ``K x C`` signed weight matrix.
"""

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

MULTICLASS = "multiclass"
COALESCED = "coalesced"
VARIANTS = (MULTICLASS, COALESCED)


class DimensionError(ValueError):
    pass


class ModelFormatError(ValueError):
    """Malformed model file; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TmModel:
    variant: str
    num_features: int
    num_clauses: int
    num_classes: int
    exclude: np.ndarray
    weights: Optional[np.ndarray] = None
    polarities: Optional[np.ndarray] = None

    def __post_init__(self):
        F, C, K = self.num_features, self.num_clauses, self.num_classes
        if self.variant not in VARIANTS:
            raise ModelFormatError("variant", f"expected one of {VARIANTS}, got {self.variant!r}")
        for name, v in (("num_features", F), ("num_clauses", C), ("num_classes", K)):
            if int(v) != v or v < 1:
                raise ModelFormatError(name, "must be a positive integer")
        exclude = np.asarray(self.exclude)
        n_masks = K * C if self.variant == MULTICLASS else C
        if exclude.ndim != 2 or exclude.shape[1] != 2 * F:
            raise ModelFormatError("exclude_masks", f"exclude mask length must be {2 * F}")
        if exclude.shape[0] != n_masks:
            raise ModelFormatError("exclude_masks", f"expected {n_masks} masks, got {exclude.shape[0]}")
        if not np.isin(exclude, (0, 1)).all():
            raise ModelFormatError("exclude_masks", "masks must be binary")
        object.__setattr__(self, "exclude", _frozen(exclude, np.uint8))

        if self.variant == MULTICLASS:
            if C % 2:
                raise ModelFormatError("num_clauses", "multiclass models need an even clause count")
            if self.weights is not None:
                raise ModelFormatError("weights", "not allowed for multiclass models")
            pol = default_polarities(C) if self.polarities is None else np.asarray(self.polarities)
            if pol.shape != (C,) or not np.isin(pol, (-1, 1)).all():
                raise ModelFormatError("polarities", f"expected {C} entries of +1/-1")
            if (pol == 1).sum() != C // 2:
                raise ModelFormatError("polarities", "need C/2 positive and C/2 negative clauses")
            object.__setattr__(self, "polarities", _frozen(pol, np.int64))
        else:
            if self.polarities is not None:
                raise ModelFormatError("polarities", "not allowed for coalesced models")
            if self.weights is None:
                raise ModelFormatError("weights", "required for coalesced models")
            w = np.asarray(self.weights)
            if w.shape != (K, C) or not np.issubdtype(w.dtype, np.integer):
                raise ModelFormatError("weights", f"expected a {K}x{C} integer matrix")
            object.__setattr__(self, "weights", _frozen(w, np.int64))

    def __eq__(self, other):
        if not isinstance(other, TmModel):
            return NotImplemented
        same = lambda a, b: (a is None and b is None) or (
            a is not None and b is not None and np.array_equal(a, b))
        return (self.variant == other.variant and self.dims == other.dims
                and np.array_equal(self.exclude, other.exclude)
                and same(self.weights, other.weights)
                and same(self.polarities, other.polarities))

    __hash__ = None

    @property
    def dims(self):
        return self.num_features, self.num_clauses, self.num_classes

    @property
    def is_multiclass(self) -> bool:
        return self.variant == MULTICLASS

    def class_masks(self, i: int) -> np.ndarray:
        """Exclude masks of class ``i`` (multiclass only)."""
        C = self.num_clauses
        return self.exclude[i * C:(i + 1) * C]

    def restrict_classes(self, k: int) -> "TmModel":
        """Copy keeping only the first ``k`` classes."""
        if not 1 <= k <= self.num_classes:
            raise DimensionError(f"cannot keep {k} of {self.num_classes} classes")
        if self.is_multiclass:
            return TmModel(MULTICLASS, self.num_features, self.num_clauses, k,
                           self.exclude[: k * self.num_clauses], polarities=self.polarities)
        return TmModel(COALESCED, self.num_features, self.num_clauses, k,
                       self.exclude, weights=self.weights[:k])


def default_polarities(num_clauses: int) -> np.ndarray:
    # even index -> positive clause, odd -> negative
    return np.where(np.arange(num_clauses) % 2 == 0, 1, -1)


@dataclass(frozen=True, eq=False)
class Sample:
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        f = np.asarray(self.features)
        if f.ndim != 1 or not np.isin(f, (0, 1)).all():
            raise DimensionError("features must be a 1-D binary vector")
        object.__setattr__(self, "features", _frozen(f, np.uint8))

    def __len__(self):
        return len(self.features)


def booleanize(raw: Sequence[float], thresholds: Sequence[Sequence[float]],
               num_features: Optional[int] = None) -> Sample:
    """Thermometer-encode raw attributes: bit is 1 iff value > threshold.

    ``thresholds[i]`` is the ascending threshold list for ``raw[i]``.
    """
    if len(raw) != len(thresholds):
        raise DimensionError(f"{len(raw)} raw values but {len(thresholds)} threshold lists")
    bits = []
    for x, th in zip(raw, thresholds):
        th = list(th)
        if any(b < a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be ascending")
        bits.extend(int(x > t) for t in th)
    if num_features is not None and len(bits) != num_features:
        raise DimensionError(f"threshold count {len(bits)} does not match F={num_features}")
    return Sample(np.array(bits, dtype=np.uint8))


def gen_literals(sample) -> np.ndarray:
    """Interleave each feature with its negation: ``[x0, ~x0, x1, ~x1, ...]``."""
    x = np.asarray(getattr(sample, "features", sample), dtype=np.uint8)
    lit = np.empty(2 * len(x), dtype=np.uint8)
    lit[0::2] = x
    lit[1::2] = 1 - x
    return lit


# -- model files -------------------------------------------------------------

def _masks_to_str(exclude) -> list[str]:
    return ["".join(str(int(b)) for b in row) for row in exclude]


def save_model(model: TmModel) -> bytes:
    doc = {
        "variant": model.variant,
        "num_features": model.num_features,
        "num_clauses": model.num_clauses,
        "num_classes": model.num_classes,
        "exclude_masks": _masks_to_str(model.exclude),
    }
    if model.is_multiclass:
        doc["polarities"] = [int(p) for p in model.polarities]
    else:
        doc["weights"] = [[int(w) for w in row] for row in model.weights]
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def load_model(data) -> TmModel:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError("<document>", f"not valid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("<document>", "expected an object")
    for key in ("variant", "num_features", "num_clauses", "num_classes", "exclude_masks"):
        if key not in doc:
            raise ModelFormatError(key, "missing")
    for key in ("num_features", "num_clauses", "num_classes"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise ModelFormatError(key, "must be an integer")
    F = doc["num_features"]
    masks = doc["exclude_masks"]
    if not isinstance(masks, list) or not all(isinstance(m, str) for m in masks):
        raise ModelFormatError("exclude_masks", "expected a list of binary strings")
    for m in masks:
        if len(m) != 2 * F:
            raise ModelFormatError("exclude_masks", f"exclude mask length {len(m)} != 2F = {2 * F}")
        if set(m) - {"0", "1"}:
            raise ModelFormatError("exclude_masks", f"non-binary character in {m!r}")
    exclude = np.array([[int(c) for c in m] for m in masks], dtype=np.uint8).reshape(len(masks), 2 * F)
    weights = doc.get("weights")
    if weights is not None:
        if not (isinstance(weights, list) and all(isinstance(r, list) for r in weights)
                and all(isinstance(w, int) and not isinstance(w, bool) for r in weights for w in r)):
            raise ModelFormatError("weights", "expected rows of integers")
        if len({len(r) for r in weights}) > 1:
            raise ModelFormatError("weights", "ragged weight rows")
        weights = np.array(weights, dtype=np.int64).reshape(len(weights), -1)
    pol = doc.get("polarities")
    if pol is not None:
        if not isinstance(pol, list) or not all(p in (1, -1) for p in pol):
            raise ModelFormatError("polarities", "expected a list of +1/-1")
        pol = np.array(pol, dtype=np.int64)
    return TmModel(doc["variant"], F, doc["num_clauses"], doc["num_classes"], exclude,
                   weights=weights, polarities=pol)


def read_model(path) -> TmModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())


def write_model(model: TmModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(model))


# -- datasets ----------------------------------------------------------------

def load_dataset(text: str, num_features: int) -> list[Sample]:
    """Parse CSV rows of ``F`` binary columns plus an optional trailing label.

    A header row is accepted if its first cell is not a number.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    samples = []
    for n, row in enumerate(rows, 1):
        cells = [c.strip() for c in row]
        if len(cells) not in (num_features, num_features + 1):
            raise DimensionError(f"row {n}: expected {num_features} features (+ optional label), "
                                 f"got {len(cells)} columns")
        try:
            bits = [int(c) for c in cells[:num_features]]
            label = int(cells[num_features]) if len(cells) > num_features else None
        except ValueError:
            raise DimensionError(f"row {n}: non-integer cell") from None
        if set(bits) - {0, 1}:
            raise DimensionError(f"row {n}: features must be 0/1")
        samples.append(Sample(np.array(bits, dtype=np.uint8), label))
    return samples


def read_dataset(path, num_features: int) -> list[Sample]:
    with open(path, encoding="utf-8") as fh:
        return load_dataset(fh.read(), num_features)


def dump_dataset(samples: Sequence[Sample]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    for s in samples:
        row = [int(b) for b in s.features]
        if s.label is not None:
            row.append(s.label)
        w.writerow(row)
    return out.getvalue()


# -- random models (test suites and sweeps) ---------------------------------

def random_model(rng: np.random.Generator, variant: str, F: int, C: int, K: int,
                 include_p: float = 0.15, weight_range: int = 7) -> TmModel:
    """Draw a model with each literal included with probability ``include_p``."""
    n = K * C if variant == MULTICLASS else C
    exclude = (rng.random((n, 2 * F)) >= include_p).astype(np.uint8)
    if variant == MULTICLASS:
        return TmModel(MULTICLASS, F, C, K, exclude)
    weights = rng.integers(-weight_range, weight_range + 1, size=(K, C))
    return TmModel(COALESCED, F, C, K, exclude, weights=weights)


def random_sample(rng: np.random.Generator, F: int) -> Sample:
    return Sample(rng.integers(0, 2, F).astype(np.uint8))
