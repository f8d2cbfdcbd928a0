"""Run records, cross-run aggregation with 95% CIs, and figure data series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import channel
from .scenario import Scenario, WorldInstance, instantiate

# metrics recorded per (episode, hour); r_in and sbs_on add an SBS axis
SCALAR_METRICS = ("total_power", "mean_throughput", "ee", "n_od", "r_ex",
                  "mean_sinr")


@dataclass
class SeriesBlock:
    """Per-(episode, hour) records of one training or evaluation phase."""
    total_power: np.ndarray        # (E, 24) W
    mean_throughput: np.ndarray    # (E, 24) bit/s per UE
    ee: np.ndarray                 # (E, 24) bit/J
    n_od: np.ndarray               # (E, 24)
    r_ex: np.ndarray               # (E, 24)
    mean_sinr: np.ndarray          # (E, 24) linear
    r_in: np.ndarray               # (E, 24, S)
    sbs_on: np.ndarray             # (E, 24, S) 0/1

    @classmethod
    def empty(cls, episodes: int, n_sbs: int) -> "SeriesBlock":
        shape = (episodes, 24)
        return cls(*(np.zeros(shape) for _ in SCALAR_METRICS),
                   r_in=np.zeros(shape + (n_sbs,)),
                   sbs_on=np.zeros(shape + (n_sbs,), dtype=np.int8))

    @property
    def episodes(self) -> int:
        return self.total_power.shape[0]

    def episode_mean(self, metric: str) -> np.ndarray:
        """Mean over the 24 hours, one value per episode."""
        return getattr(self, metric).mean(axis=1)


@dataclass
class RunMetrics:
    """One trained run: per-episode training series plus frozen-greedy
    evaluation episodes."""
    case: str
    run_seed: int
    train: SeriesBlock
    eval: SeriesBlock
    extra: dict = field(default_factory=dict)


def _t_halfwidth(values: np.ndarray) -> float:
    n = len(values)
    sd = float(np.std(values, ddof=1))
    return float(stats.t.ppf(0.975, n - 1) * sd / np.sqrt(n))


def aggregate(runs, window: int) -> dict:
    """Cross-run mean and 95% Student-t CI half-width per metric.

    Per run, each metric is first averaged over the final `window` training
    episodes; the CI is then computed across runs.
    """
    if len(runs) < 2:
        raise ValueError("aggregation needs at least 2 runs")
    episodes = runs[0].train.episodes
    if not 1 <= window <= episodes:
        raise ValueError(f"window {window} outside [1, {episodes}]")
    out = {}
    for metric in SCALAR_METRICS:
        finals = np.array([r.train.episode_mean(metric)[-window:].mean()
                           for r in runs])
        out[metric] = {"mean": float(finals.mean()),
                       "ci95": _t_halfwidth(finals)}
    return out


def default_window(episodes: int) -> int:
    """Final-window default: last 10% of the training episodes."""
    return max(1, episodes // 10)


def sbs_on_probability(runs, hour: int) -> np.ndarray:
    """Fraction of evaluation episodes (pooled over runs) in which each SBS
    is active at the given hour."""
    if not 0 <= hour < 24:
        raise ValueError(f"hour out of range: {hour}")
    stacked = np.concatenate([r.eval.sbs_on[:, hour, :] for r in runs], axis=0)
    if stacked.shape[0] == 0:
        raise ValueError("no evaluation episodes recorded")
    return stacked.mean(axis=0)


def eval_summary(runs, peak_hour: int) -> dict:
    """Converged-policy figures: day-average and peak-hour value of each
    scalar metric, cross-run mean with 95% CI."""
    out = {}
    for metric in SCALAR_METRICS:
        day = np.array([getattr(r.eval, metric).mean() for r in runs])
        peak = np.array([getattr(r.eval, metric)[:, peak_hour].mean()
                         for r in runs])
        out[metric] = {
            "day_mean": float(day.mean()),
            "day_ci95": _t_halfwidth(day) if len(runs) > 1 else 0.0,
            "peak_mean": float(peak.mean()),
            "peak_ci95": _t_halfwidth(peak) if len(runs) > 1 else 0.0,
        }
    return out


# ---------------------------------------------------------------------------
# SINR versus RIS size / phase resolution (figure-7 style series)
# ---------------------------------------------------------------------------

@dataclass
class SinrTable:
    """Mean UE SINR per (element count, psr bits) point.

    samples[i] holds the per-realization UE-mean SINR for point i, enabling
    paired statistical comparisons (all points share fading draws).
    """
    element_counts: tuple
    psr_bits: tuple            # 0 denotes continuous (unquantized) phases
    rows: list                 # (n, b, mean_sinr)
    samples: np.ndarray        # (len(rows), realizations)


def sinr_vs_elements(scenario: Scenario, element_counts, psr_list,
                     realizations: int, seed: int | None = None) -> SinrTable:
    """Mean UE SINR with the MBS serving every UE at full power, no
    interference, across fresh channel realizations.

    element_counts may include 0 (direct-only baseline); psr entry 0 means
    continuous phases. Fading draws are shared across all (n, b) points so
    adjacent comparisons are paired.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    world = instantiate(scenario)
    sc = scenario
    rng = np.random.default_rng(
        np.random.SeedSequence([seed if seed is not None else sc.seed, 7]))

    n_max = max(max(element_counts), 1)
    k = sc.num_ues
    mbs = sc.mbs
    ue = world.ue_positions
    d_direct = np.hypot(ue[:, 0] - mbs.position.x, ue[:, 1] - mbs.position.y)
    a_nlos = sc.radio.pathloss_exp_nlos
    g_direct = (np.sqrt(sc.radio.penetration_loss)
                * d_direct ** (-a_nlos / 2.0))

    # per-panel element phasors at the largest size; smaller sizes reuse the
    # centred sub-array
    from .scenario import RisSpec
    panels = []
    for r in sc.ris_list:
        big = RisSpec(id=r.id, position=r.position, num_elements=n_max,
                      psr_bits=r.psr_bits, amplitude=r.amplitude,
                      element_spacing=r.element_spacing)
        panels.append(channel.bs_ris_channel(
            mbs.position, big, sc.radio.carrier_wavelength,
            sc.radio.pathloss_exp_los))
    elem = np.stack(panels) if panels else np.zeros((0, n_max), complex)
    if len(panels):
        ris_xy = np.array([[r.position.x, r.position.y] for r in sc.ris_list])
        d_ru = np.hypot(ris_xy[:, None, 0] - ue[None, :, 0],
                        ris_xy[:, None, 1] - ue[None, :, 1])
        g_ru = d_ru ** (-a_nlos / 2.0)
        refl = np.abs(elem).sum(axis=1)[:, None] * g_ru
        ue_ris = np.argmax(refl, axis=0)
        elem_k = elem[ue_ris]                           # (K, n_max)
        g_k = g_ru[ue_ris, np.arange(k)]
        beta_k = np.array([sc.ris_list[i].amplitude for i in ue_ris])
    else:
        elem_k = np.zeros((k, n_max), complex)
        g_k = np.zeros(k)
        beta_k = np.zeros(k)

    p_rb = mbs.p_max_tx / mbs.num_rbs
    rb_bw = mbs.bandwidth / mbs.num_rbs
    noise = rb_bw * sc.radio.noise_psd

    points = [(n, b) for n in element_counts for b in psr_list]
    samples = np.zeros((len(points), realizations))
    for it in range(realizations):
        h = channel.rayleigh_fading(rng, k)
        direct = g_direct * h
        h_ris = channel.rayleigh_fading(rng, (k, n_max))
        terms = elem_k * g_k[:, None] * h_ris
        theta_opt = np.angle(direct)[:, None] - np.angle(terms)
        for i, (n, b) in enumerate(points):
            if n == 0:
                comp = direct
            else:
                theta = theta_opt[:, :n]
                if b > 0:
                    step = 2.0 * np.pi / (2 ** b)
                    theta = np.round(theta / step) * step
                comp = direct + (beta_k[:, None] * np.exp(1j * theta)
                                 * terms[:, :n]).sum(axis=1)
            sinr = p_rb * np.abs(comp) ** 2 / noise
            samples[i, it] = sinr.mean()

    rows = [(n, b, float(samples[i].mean()))
            for i, (n, b) in enumerate(points)]
    return SinrTable(element_counts=tuple(element_counts),
                     psr_bits=tuple(psr_list), rows=rows, samples=samples)
