"""Simulation of asynchronous Byzantine agreement with an inferable common coin."""

from .adversary import SCRIPTS, AdversaryScript
from .explore import ExploreConfig, ExploreReport, schedule_explore
from .field_poly import DEFAULT_PRIME, SymBivarPoly, UniPoly, interpolate_symmetric, sample_symmetric
from .harness import BatchReport, Scenario, run_batch
from .messages import IvssId
from .simnet import CSV_COLUMNS, RunMetrics, SimConfig, detect_event_E, run

__all__ = [
    "SCRIPTS",
    "AdversaryScript",
    "ExploreConfig",
    "ExploreReport",
    "schedule_explore",
    "DEFAULT_PRIME",
    "SymBivarPoly",
    "UniPoly",
    "interpolate_symmetric",
    "sample_symmetric",
    "BatchReport",
    "Scenario",
    "run_batch",
    "IvssId",
    "CSV_COLUMNS",
    "RunMetrics",
    "SimConfig",
    "detect_event_E",
    "run",
]
