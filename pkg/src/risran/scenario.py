"""Static world description: geometry, radio constants, traffic, hyperparameters.

A Scenario is immutable and fully determines a simulation up to the seed.
``instantiate`` draws the random UE layout; everything downstream derives
its randomness from (scenario.seed, run index) so runs are reproducible.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

MACRO = "macro"
SMALL = "small"


class InvalidScenarioError(ValueError):
    """Raised by validate(); carries one message per violated invariant."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n" + "\n".join(self.errors))


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class BaseStationSpec:
    id: str
    kind: str                  # MACRO or SMALL
    position: Position
    coverage_radius: float     # m
    p_fixed: float             # W, consumed whenever active
    power_slope: float         # load-dependent slope (dimensionless)
    p_max_tx: float            # W, max radiated power
    p_sleep: float             # W, consumed in sleep mode
    bandwidth: float           # Hz
    num_rbs: int


@dataclass(frozen=True)
class RisSpec:
    id: str
    position: Position
    num_elements: int
    psr_bits: int              # phase-shift resolution in bits
    amplitude: float           # reflection coefficient beta, shared by elements
    element_spacing: float     # m, uniform linear array


@dataclass(frozen=True)
class RadioConstants:
    carrier_wavelength: float  # m
    pathloss_exp_los: float
    pathloss_exp_nlos: float
    noise_psd: float           # W/Hz
    sinr_threshold: float      # linear
    # extra power attenuation on direct BS-UE links from urban building
    # penetration; the BS-RIS-UE path (rooftop LOS plus a short last hop)
    # does not suffer it, which is what makes RIS assistance worthwhile
    penetration_loss: float = 0.01


@dataclass(frozen=True)
class TrafficPattern:
    hourly_multiplier: tuple   # 24 values in [0, 1], max exactly 1.0
    peak_demand: float         # bit/s aggregated over the cell at the peak hour


@dataclass(frozen=True)
class LearningConfig:
    lr_initial: float = 0.95
    lr_decay_factor: float = 0.7
    lr_decay_every: int = 40
    lr_floor: float = 0.02
    discount: float = 0.3
    epsilon_initial: float = 0.9
    epsilon_decay_factor: float = 0.995
    epsilon_floor: float = 0.01
    episodes: int = 1000
    eval_episodes: int = 10
    overload_penalty: float = 3.0e5
    load_bins: int = 10
    power_levels: tuple = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class Scenario:
    mbs: BaseStationSpec
    sbs_list: tuple            # of BaseStationSpec
    ris_list: tuple            # of RisSpec
    num_ues: int
    radio: RadioConstants
    traffic: TrafficPattern
    learning: LearningConfig
    seed: int

    @property
    def base_stations(self):
        """All BSs, MBS first; index into this tuple is the BS index used
        throughout the simulator (lowest index wins deterministic ties)."""
        return (self.mbs,) + tuple(self.sbs_list)


@dataclass(frozen=True)
class WorldInstance:
    scenario: Scenario
    ue_positions: np.ndarray   # (num_ues, 2)
    base_demand: float         # bit/s per UE before the hourly multiplier

    def __post_init__(self):
        self.ue_positions.setflags(write=False)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _check_bs(bs: BaseStationSpec, path: str, errors: list):
    if not (_finite(bs.position.x) and _finite(bs.position.y)):
        errors.append(f"{path}.position: coordinates must be finite")
    if not bs.coverage_radius > 0:
        errors.append(f"{path}.coverage_radius: must be > 0")
    if not bs.p_fixed > 0:
        errors.append(f"{path}.p_fixed: must be > 0")
    if not bs.power_slope > 0:
        errors.append(f"{path}.power_slope: must be > 0")
    if not (0 <= bs.p_sleep < bs.p_fixed):
        errors.append(f"{path}.p_sleep: must satisfy 0 <= p_sleep < p_fixed")
    if not bs.p_max_tx > 0:
        errors.append(f"{path}.p_max_tx: must be > 0")
    if not bs.num_rbs >= 1:
        errors.append(f"{path}.num_rbs: num_rbs >= 1 required")
    if bs.bandwidth <= 0:
        errors.append(f"{path}.bandwidth: must be > 0")


def validate(scenario: Scenario) -> Scenario:
    """Check every type invariant; return the scenario unchanged if clean.

    Raises InvalidScenarioError listing *all* violations with field paths.
    """
    errors: list = []

    if scenario.mbs.kind != MACRO:
        errors.append("mbs.kind: must be 'macro'")
    _check_bs(scenario.mbs, "mbs", errors)
    for i, sbs in enumerate(scenario.sbs_list):
        path = f"sbs_list[{i}]"
        if sbs.kind != SMALL:
            errors.append(f"{path}.kind: must be 'small'")
        _check_bs(sbs, path, errors)
        # SBS disk must fit inside the MBS disk so the MBS can always take over
        d = sbs.position.distance_to(scenario.mbs.position)
        if d + sbs.coverage_radius > scenario.mbs.coverage_radius + 1e-9:
            errors.append(f"{path}: coverage disk extends outside MBS coverage")

    for i, ris in enumerate(scenario.ris_list):
        path = f"ris_list[{i}]"
        if ris.num_elements < 1:
            errors.append(f"{path}.num_elements: must be >= 1")
        if ris.psr_bits < 1:
            errors.append(f"{path}.psr_bits: must be >= 1")
        if not (0.0 <= ris.amplitude <= 1.0):
            errors.append(f"{path}.amplitude: amplitude out of [0,1]")
        if ris.element_spacing <= 0:
            errors.append(f"{path}.element_spacing: must be > 0")

    r = scenario.radio
    for name in ("carrier_wavelength", "pathloss_exp_los", "pathloss_exp_nlos",
                 "noise_psd", "sinr_threshold"):
        if not getattr(r, name) > 0:
            errors.append(f"radio.{name}: must be > 0")
    if r.pathloss_exp_los >= r.pathloss_exp_nlos:
        errors.append("radio.pathloss_exp_los: must be < pathloss_exp_nlos")
    if not (0 < r.penetration_loss <= 1):
        errors.append("radio.penetration_loss: must be in (0,1]")

    t = scenario.traffic
    if len(t.hourly_multiplier) != 24:
        errors.append("traffic.hourly_multiplier: length must be exactly 24")
    else:
        if any(m < 0 for m in t.hourly_multiplier):
            errors.append("traffic.hourly_multiplier: values must be >= 0")
        if abs(max(t.hourly_multiplier) - 1.0) > 1e-12:
            errors.append("traffic.hourly_multiplier: max must equal 1.0")
    if not t.peak_demand > 0:
        errors.append("traffic.peak_demand: must be > 0")

    lc = scenario.learning
    if not (0 < lc.lr_initial <= 1):
        errors.append("learning.lr_initial: must be in (0,1]")
    if not (0 < lc.discount < 1):
        errors.append("learning.discount: must be in (0,1)")
    if not (0 <= lc.epsilon_initial <= 1):
        errors.append("learning.epsilon_initial: must be in [0,1]")
    if lc.load_bins < 2:
        errors.append("learning.load_bins: must be >= 2")
    levels = tuple(lc.power_levels)
    if not levels:
        errors.append("learning.power_levels: must be non-empty")
    elif (any(not (0 < p <= 1) for p in levels)
          or any(b <= a for a, b in zip(levels, levels[1:]))):
        errors.append("learning.power_levels: must be strictly increasing in (0,1]")
    if lc.episodes < 0:
        errors.append("learning.episodes: must be >= 0")

    if scenario.num_ues < 1:
        errors.append("num_ues: must be >= 1")
    if not (0 <= scenario.seed < 2 ** 64):
        errors.append("seed: must fit an unsigned 64-bit integer")

    if errors:
        raise InvalidScenarioError(errors)
    return scenario


def instantiate(scenario: Scenario) -> WorldInstance:
    """Draw the random UE layout for a validated scenario.

    Positions are uniform over the MBS coverage disk and depend only on
    scenario.seed; per-UE base demand is the cell peak split evenly.
    """
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 0]))
    n = scenario.num_ues
    # uniform on a disk: sqrt-radius trick
    radius = scenario.mbs.coverage_radius * np.sqrt(rng.random(n))
    angle = rng.random(n) * 2.0 * np.pi
    center = scenario.mbs.position
    pos = np.column_stack((center.x + radius * np.cos(angle),
                           center.y + radius * np.sin(angle)))
    return WorldInstance(
        scenario=scenario,
        ue_positions=pos,
        base_demand=scenario.traffic.peak_demand / n,
    )


def demand_at(traffic: TrafficPattern, hour: int, base_demand: float) -> float:
    """Traffic demand of one UE at the given hour (bit/s)."""
    if not 0 <= hour < 24:
        raise ValueError(f"hour out of range: {hour}")
    return base_demand * traffic.hourly_multiplier[hour]


# ---------------------------------------------------------------------------
# Default scenario (simulation settings of the source evaluation) and config IO
# ---------------------------------------------------------------------------

# Daily residential traffic shape: trough in the early morning, evening peak.
DEFAULT_TRAFFIC_SHAPE = (
    0.55, 0.40, 0.28, 0.18, 0.12, 0.10, 0.10, 0.12,
    0.15, 0.25, 0.35, 0.45, 0.55, 0.60, 0.60, 0.62,
    0.65, 0.72, 0.80, 0.90, 1.00, 1.00, 0.90, 0.72,
)

# 3.5 GHz carrier
DEFAULT_WAVELENGTH = 0.0857

# Effective noise density at the receiver (thermal noise plus noise figure
# and implementation margin). Calibrated so that cell-edge direct links sit
# near the 1-RB-per-UE capacity boundary, where RIS assistance matters.
DEFAULT_NOISE_PSD = 5.0e-17


def paper_default(seed: int = 20220701, peak_demand: float = 8.0e6) -> Scenario:
    """The default 4-SBS / 4-RIS / 50-UE scenario."""
    mbs = BaseStationSpec(
        id="mbs", kind=MACRO, position=Position(0.0, 0.0),
        coverage_radius=400.0, p_fixed=130.0, power_slope=4.7,
        p_max_tx=40.0, p_sleep=0.0, bandwidth=20.0e6, num_rbs=64,
    )
    sbs_radius, ris_radius = 200.0, 260.0
    angles = (45.0, 135.0, 225.0, 315.0)
    sbs_list = []
    ris_list = []
    for i, deg in enumerate(angles):
        a = math.radians(deg)
        sbs_list.append(BaseStationSpec(
            id=f"sbs{i}", kind=SMALL,
            position=Position(sbs_radius * math.cos(a), sbs_radius * math.sin(a)),
            coverage_radius=80.0, p_fixed=75.0, power_slope=2.6,
            p_max_tx=6.3, p_sleep=0.0, bandwidth=20.0e6, num_rbs=64,
        ))
        ris_list.append(RisSpec(
            id=f"ris{i}",
            position=Position(ris_radius * math.cos(a), ris_radius * math.sin(a)),
            num_elements=10, psr_bits=3, amplitude=1.0,
            element_spacing=DEFAULT_WAVELENGTH / 2,
        ))
    return Scenario(
        mbs=mbs,
        sbs_list=tuple(sbs_list),
        ris_list=tuple(ris_list),
        num_ues=50,
        radio=RadioConstants(
            carrier_wavelength=DEFAULT_WAVELENGTH,
            pathloss_exp_los=2.5,
            pathloss_exp_nlos=3.5,
            noise_psd=DEFAULT_NOISE_PSD,
            sinr_threshold=1.0,
        ),
        traffic=TrafficPattern(hourly_multiplier=DEFAULT_TRAFFIC_SHAPE,
                               peak_demand=peak_demand),
        learning=LearningConfig(),
        seed=seed,
    )


def _bs_to_dict(bs: BaseStationSpec) -> dict:
    d = dataclasses.asdict(bs)
    d["position"] = [bs.position.x, bs.position.y]
    return d


def _bs_from_dict(d: dict, kind: str) -> BaseStationSpec:
    d = dict(d)
    x, y = d.pop("position")
    return BaseStationSpec(kind=kind, position=Position(float(x), float(y)),
                           **{k: v for k, v in d.items() if k != "kind"})


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "seed": scenario.seed,
        "num_ues": scenario.num_ues,
        "mbs": _bs_to_dict(scenario.mbs),
        "sbs": [_bs_to_dict(b) for b in scenario.sbs_list],
        "ris": [
            {**dataclasses.asdict(r), "position": [r.position.x, r.position.y]}
            for r in scenario.ris_list
        ],
        "radio": dataclasses.asdict(scenario.radio),
        "traffic": {
            "peak_demand": scenario.traffic.peak_demand,
            "hourly_multiplier": list(scenario.traffic.hourly_multiplier),
        },
        "learning": {**dataclasses.asdict(scenario.learning),
                     "power_levels": list(scenario.learning.power_levels)},
    }


def scenario_from_dict(doc: dict) -> Scenario:
    def _ris(d):
        d = dict(d)
        x, y = d.pop("position")
        return RisSpec(position=Position(float(x), float(y)), **d)

    return Scenario(
        mbs=_bs_from_dict(doc["mbs"], MACRO),
        sbs_list=tuple(_bs_from_dict(d, SMALL) for d in doc["sbs"]),
        ris_list=tuple(_ris(d) for d in doc.get("ris", [])),
        num_ues=int(doc["num_ues"]),
        radio=RadioConstants(**doc["radio"]),
        traffic=TrafficPattern(
            hourly_multiplier=tuple(doc["traffic"]["hourly_multiplier"]),
            peak_demand=float(doc["traffic"]["peak_demand"]),
        ),
        learning=LearningConfig(**{
            **doc.get("learning", {}),
            "power_levels": tuple(doc.get("learning", {}).get(
                "power_levels", LearningConfig().power_levels)),
        }),
        seed=int(doc["seed"]),
    )


def load_config(path) -> Scenario:
    """Load and validate a scenario from a YAML config file."""
    with open(path, "r") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise InvalidScenarioError([f"{path}: config root must be a mapping"])
    try:
        scenario = scenario_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScenarioError([f"{path}: malformed config ({exc})"]) from exc
    return validate(scenario)


def save_config(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_dict(scenario), fh, sort_keys=False)
