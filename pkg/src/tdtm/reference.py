"""Bit-exact digital inference: clause evaluation, class sums and argmax.

This is the untimed oracle every time-domain path is checked against.
"""

from dataclasses import dataclass

import numpy as np

from .model import COALESCED, MULTICLASS, DimensionError, TmModel, gen_literals


class VariantError(ValueError):
    pass


def _require(model: TmModel, variant: str) -> None:
    if model.variant != variant:
        raise VariantError(f"operation needs a {variant} model, got {model.variant}")


def eval_clauses(model: TmModel, literals) -> np.ndarray:
    """Evaluate every clause of ``model`` on a literal vector.

    Returns shape ``(C,)`` for coalesced models and ``(K, C)`` for
    multiclass models. A clause outputs 1 iff ``AND(literal | exclude)``.
    """
    lit = np.asarray(literals, dtype=np.uint8)
    if lit.shape != (2 * model.num_features,):
        raise DimensionError(f"expected {2 * model.num_features} literals, got {lit.shape}")
    out = np.all((lit | model.exclude) == 1, axis=1).astype(np.uint8)
    if model.variant == MULTICLASS:
        return out.reshape(model.num_classes, model.num_clauses)
    return out


def multiclass_sums(model: TmModel, clause_vectors) -> np.ndarray:
    """Positive minus negative clause votes per class."""
    _require(model, MULTICLASS)
    cv = np.asarray(clause_vectors, dtype=np.int64)
    if cv.shape != (model.num_classes, model.num_clauses):
        raise DimensionError(f"clause vectors must be {model.num_classes}x{model.num_clauses}")
    return cv @ model.polarities


def cotm_sums(model: TmModel, clause_vector) -> np.ndarray:
    """Weighted votes of the shared clause pool, one sum per class."""
    _require(model, COALESCED)
    cv = np.asarray(clause_vector, dtype=np.int64)
    if cv.shape != (model.num_clauses,):
        raise DimensionError(f"clause vector must have length {model.num_clauses}")
    # clause acts as a {0,1} select on its weight column
    return model.weights @ cv


def argmax_class(sums) -> int:
    """Index of the largest sum; ties go to the lowest index."""
    s = np.asarray(sums)
    if s.size == 0:
        raise ValueError("need at least one class")
    return int(np.argmax(s))


@dataclass(frozen=True)
class Inference:
    prediction: int
    sums: np.ndarray
    clauses: np.ndarray
    literals: np.ndarray


def infer(model: TmModel, sample) -> Inference:
    features = np.asarray(getattr(sample, "features", sample))
    if features.shape != (model.num_features,):
        raise DimensionError(f"sample has {features.shape} features, model expects {model.num_features}")
    lit = gen_literals(features)
    clauses = eval_clauses(model, lit)
    if model.variant == MULTICLASS:
        sums = multiclass_sums(model, clauses)
    else:
        sums = cotm_sums(model, clauses)
    return Inference(argmax_class(sums), sums, clauses, lit)


def predict_all(model: TmModel, samples) -> list[int]:
    return [infer(model, s).prediction for s in samples]
