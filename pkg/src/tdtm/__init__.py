"""Event-driven simulator of an asynchronous Tsetlin machine accelerator with a
hybrid digital/time-domain classifier."""

from .arbitration import MutexModel, arbiter_cost, mesh_arbitrate, mutex_resolve, tba_arbitrate
from .kernel import Kernel
from .metrics import MetricsReport, energy_efficiency, throughput
from .model import Sample, TmModel, load_model, read_dataset, read_model, save_model
from .reference import infer, predict_all
from .simulator import RunConfig, SimulationResult, simulate
from .timedomain import TimeDomainConfig, lod_extract, lod_reconstruct

__version__ = "0.1.0"
