"""Access to the models and samples shipped in ``tdtm/data``."""

from importlib import resources

from .model import load_model, load_dataset

IRIS_MULTICLASS = "iris_multiclass.json"
IRIS_COALESCED = "iris_coalesced.json"
IRIS_SAMPLES = "iris_4.csv"


def path(name: str):
    """Filesystem path (a Traversable) of a shipped data file."""
    return resources.files("tdtm") / "data" / name


def names(prefix: str = "") -> list[str]:
    return sorted(p.name for p in (resources.files("tdtm") / "data").iterdir()
                  if p.name.startswith(prefix))


def model(name: str):
    return load_model(path(name).read_bytes())


def iris_samples():
    return load_dataset(path(IRIS_SAMPLES).read_text(encoding="utf-8"), 16)


def small_models(variant: str):
    """The exhaustive-sweep fixtures of one variant (``multiclass`` or ``coalesced``)."""
    return [model(n) for n in names(f"small_{variant}_")]
