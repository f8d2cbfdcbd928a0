"""RIS-assisted heterogeneous RAN energy-efficiency simulator.

Library surface: build a Scenario (scenario module), simulate it
(channel/radio/energy/simulate), train sleep/power control agents (hrl),
and aggregate seeded runs (metrics). The cli module wraps the experiment
harness.
"""

from .scenario import (
    BaseStationSpec,
    InvalidScenarioError,
    LearningConfig,
    Position,
    RadioConstants,
    RisSpec,
    Scenario,
    TrafficPattern,
    WorldInstance,
    demand_at,
    instantiate,
    load_config,
    paper_default,
    save_config,
    validate,
)
from .simulate import CellEnvironment
from .hrl import FLAT_Q, HRL, QStore, flat_q_train, train
from .metrics import RunMetrics, aggregate, sbs_on_probability, sinr_vs_elements

__all__ = [
    "BaseStationSpec", "InvalidScenarioError", "LearningConfig", "Position",
    "RadioConstants", "RisSpec", "Scenario", "TrafficPattern", "WorldInstance",
    "demand_at", "instantiate", "load_config", "paper_default", "save_config",
    "validate", "CellEnvironment", "FLAT_Q", "HRL", "QStore", "flat_q_train",
    "train", "RunMetrics", "aggregate", "sbs_on_probability",
    "sinr_vs_elements",
]

__version__ = "0.1.0"
