"""End-to-end acceptance checks.

One test per acceptance criterion; each prints a single PASS/FAIL line.
The case-comparison tests share one full-scale study (4 cases x 4 peak
loads x 10 runs x 1000 episodes), trained once per session, so this module
takes tens of minutes on a single core.  Run it with `-s` to see the
verdict lines as they complete::

    python3 -m pytest -s tests/test_acceptance.py
"""

import dataclasses
import time

import numpy as np
import pytest
from scipy import stats

from risran import channel, cli, energy, hrl, metrics
from risran.scenario import (BaseStationSpec, LearningConfig, Position,
                             RadioConstants, Scenario, TrafficPattern,
                             MACRO, SMALL, DEFAULT_WAVELENGTH, demand_at,
                             instantiate, paper_default, save_config)
from risran.simulate import CellEnvironment

PEAKS = (2.0, 4.0, 6.0, 8.0)       # Mbps
RUNS = 10
CASES = ("typical", "sleep_only", "ris_only", "ris_sleep")


def _verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" -- {detail}"
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def study():
    """Full-scale comparison study: case -> peak (Mbps) -> trained runs."""
    base = paper_default()
    out = {}
    for case in CASES:
        out[case] = {}
        for peak in PEAKS:
            sc = dataclasses.replace(
                base, traffic=dataclasses.replace(base.traffic,
                                                  peak_demand=peak * 1e6))
            out[case][peak] = cli.train_case(sc, case, RUNS)
    return out


def _day_means(study, case, peak):
    return metrics.eval_summary(study[case][peak],
                                peak_hour=int(np.argmax(
                                    paper_default().traffic.hourly_multiplier)))


# -- 1: closed-form oracles --------------------------------------------------


def test_closed_form_oracles():
    t0 = time.perf_counter()
    notes = []

    def check(cond, label):
        if not cond:
            notes.append(label)

    # amplitude path loss at 100 m, exponent 3.5: same fading draw at unit
    # distance isolates the d**(-alpha/2) factor
    bs = BaseStationSpec(id="m", kind=MACRO, position=Position(0, 0),
                         coverage_radius=400.0, p_fixed=130.0,
                         power_slope=4.7, p_max_tx=40.0, p_sleep=0.0,
                         bandwidth=20e6, num_rbs=64)
    h100 = channel.direct_channel(bs, Position(100.0, 0.0), 3.5,
                                  np.random.default_rng(0))
    h1 = channel.direct_channel(bs, Position(1.0, 0.0), 3.5,
                                np.random.default_rng(0))
    check(abs(abs(h100) / abs(h1) - 100.0 ** -1.75) <= 1e-9, "path loss")

    # deterministic phasor: one full wavelength -> phase 0
    lam = 0.1
    from risran.scenario import RisSpec
    ris = RisSpec(id="r", position=Position(lam, 0.0), num_elements=1,
                  psr_bits=3, amplitude=1.0, element_spacing=lam / 2)
    ph = channel.bs_ris_channel(Position(0, 0), ris, lam, 2.5)
    check(abs(ph[0] / abs(ph[0]) - 1.0) <= 1e-9, "phasor")

    # two coherent unit paths quadruple the gain
    g = channel.composite_gain(1 + 0j, np.array([1 + 0j]), np.array([1 + 0j]),
                               np.array([0.0]), 1.0)
    check(abs(g - 4.0) <= 1e-9, "composite gain")

    # on-grid phase survives quantization exactly
    check(abs(channel.quantize_phases(np.array([np.pi / 4]), 3)[0]
              - np.pi / 4) <= 1e-9, "quantization")

    # load-dependent power draw and sleep draw
    mbs = paper_default().mbs
    check(abs(energy.bs_power(mbs, energy.ACTIVE, 10.0) - 177.0) <= 1e-9, "active power")
    sbs = paper_default().sbs_list[0]
    check(abs(energy.bs_power(sbs, energy.SLEEPING, 0.0) - sbs.p_sleep) <= 1e-9, "sleep power")

    # network objective and its overload penalty
    snap = energy.snapshot(np.array([200.0]), np.array([10e6]), 5e4, 0)
    check(abs(snap.ee - 50_000.0) <= 1e-9, "efficiency")
    snap = energy.snapshot(np.array([200.0]), np.array([10e6]), 5e4, 1)
    check(abs(snap.penalized_objective - 0.0) <= 1e-9, "penalty")

    # per-station reward and traffic profile
    check(abs(hrl.intrinsic_reward(1e6, 80.0, 1e5, 0) - 12_500.0) <= 1e-9, "reward")
    tr = TrafficPattern(hourly_multiplier=(0.5,) + (1.0,) * 23,
                        peak_demand=8e6)
    check(abs(demand_at(tr, 0, 160e3) - 80e3) <= 1e-9, "traffic")

    elapsed = time.perf_counter() - t0
    ok = not notes and elapsed < 1.0
    _verdict("closed-form oracles (1e-9)", ok,
             f"{elapsed * 1e3:.0f} ms" + ("; " + ", ".join(notes)
                                          if notes else ""))


# -- 2: coherent combining is optimal ----------------------------------------


def test_coherent_combining_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        direct = complex(channel.rayleigh_fading(rng))
        bs_ris = channel.rayleigh_fading(rng, n)
        ris_ue = channel.rayleigh_fading(rng, n)
        beta = rng.random()
        theta = channel.optimal_phase_shifts(direct, bs_ris, ris_ue)
        g_opt = channel.composite_gain(direct, bs_ris, ris_ue, theta, beta)
        ideal = (np.abs(direct) + beta * np.sum(np.abs(bs_ris * ris_ue))) ** 2
        if abs(g_opt - ideal) > 1e-12 * max(1.0, ideal):
            ok = False
            break
        rand = rng.random((100, n)) * 2 * np.pi
        if any(channel.composite_gain(direct, bs_ris, ris_ue, t, beta)
               > g_opt + 1e-12 for t in rand):
            ok = False
            break
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 10.0
    _verdict("coherent combining identity (1000 x 100, 1e-12)", ok,
             f"{elapsed:.1f} s")


# -- 3: phase quantization ---------------------------------------------------


def test_phase_quantization():
    rng = np.random.default_rng(6)
    theta = rng.random(10_000) * 2 * np.pi
    ok = True
    for bits in (1, 2, 3, 4):
        out = channel.quantize_phases(theta, bits)
        d = np.abs(out - theta) % (2 * np.pi)
        err = np.minimum(d, 2 * np.pi - d)
        if err.max() > np.pi / 2 ** bits + 1e-12:
            ok = False

    # 3-bit control on a direct-dominant mid-cell link stays within 2%
    # of the continuous-phase gain
    rng = np.random.default_rng(7)
    ratios = []
    for _ in range(2000):
        direct = 2.0 * complex(channel.rayleigh_fading(rng))
        bs_ris = channel.rayleigh_fading(rng, 8)
        ris_ue = channel.rayleigh_fading(rng, 8)
        scale = 1.0 / np.sum(np.abs(bs_ris * ris_ue))
        th = channel.optimal_phase_shifts(direct, bs_ris, ris_ue)
        g_c = channel.composite_gain(direct, bs_ris, ris_ue, th, scale)
        g_q = channel.composite_gain(direct, bs_ris, ris_ue,
                                     channel.quantize_phases(th, 3), scale)
        ratios.append(g_q / g_c)
    mean_ratio = float(np.mean(ratios))
    ok = ok and mean_ratio > 0.98
    _verdict("phase quantization bound + 3-bit gain", ok,
             f"3-bit/continuous gain ratio {mean_ratio:.4f}")


# -- 4: case comparison at full scale ----------------------------------------


def test_case_comparison_power_throughput_ee(study):
    s = {case: _day_means(study, case, 8.0) for case in CASES}
    power = {c: s[c]["total_power"]["day_mean"] for c in CASES}
    ee = {c: s[c]["ee"]["day_mean"] for c in CASES}

    ok_power = (power["typical"] > power["ris_only"]
                and power["ris_only"] >= power["sleep_only"]
                and power["ris_only"] >= power["ris_sleep"])

    ok_thr = True
    for peak in (6.0, 8.0):
        t = {case: _day_means(study, case, peak)["mean_throughput"]["day_mean"]
             for case in CASES}
        ok_thr = ok_thr and (t["ris_only"] >= t["typical"]
                             and t["ris_sleep"] >= t["sleep_only"])

    best_single = max(ee["sleep_only"], ee["ris_only"])
    ratio = ee["ris_sleep"] / best_single
    ok_ee = (ee["ris_sleep"] > max(ee[c] for c in CASES if c != "ris_sleep")
             and ee["typical"] < min(ee[c] for c in CASES if c != "typical")
             and ratio >= 1.5)

    detail = (f"power W {', '.join(f'{c}={power[c]:.0f}' for c in CASES)}; "
              f"EE bit/J {', '.join(f'{c}={ee[c]:.0f}' for c in CASES)}; "
              f"combined/best-single EE ratio {ratio:.2f}")
    _verdict("case comparison (power order, throughput, EE ratio >= 1.5)",
             ok_power and ok_thr and ok_ee, detail)


# -- 5: sleep schedules ------------------------------------------------------


def test_sleep_schedules(study):
    night = range(3, 9)            # 03:00-09:00
    midday = range(11, 17)         # 11:00-17:00

    def mean_on(case, hours):
        runs = study[case][8.0]
        return float(np.mean([metrics.sbs_on_probability(runs, h)
                              for h in hours]))

    night_sleep = {c: mean_on(c, night) for c in ("sleep_only", "ris_sleep")}
    ok_night = all(v < 0.3 for v in night_sleep.values())
    mid_sleep = {c: mean_on(c, midday) for c in ("sleep_only", "ris_sleep")}
    ok_mid = mid_sleep["ris_sleep"] < mid_sleep["sleep_only"]
    _verdict("sleep schedules (night on-prob < 0.3; assisted sleeps more "
             "at midday)", ok_night and ok_mid,
             f"night {night_sleep['sleep_only']:.2f}/"
             f"{night_sleep['ris_sleep']:.2f}, "
             f"midday {mid_sleep['sleep_only']:.2f}/"
             f"{mid_sleep['ris_sleep']:.2f}")


# -- 6: SINR scaling with panel size and phase resolution --------------------


def test_sinr_scaling():
    sc = paper_default()
    counts = [2, 4, 6, 8, 10]
    bits = [1, 2, 3]
    tab = metrics.sinr_vs_elements(sc, counts, bits, realizations=1000)
    idx = {(n, b): i for i, (n, b, _) in enumerate(tab.rows)}

    def significantly_nondecreasing(lo, hi):
        diff = tab.samples[idx[hi]] - tab.samples[idx[lo]]
        t = stats.ttest_rel(tab.samples[idx[hi]], tab.samples[idx[lo]],
                            alternative="greater")
        return diff.mean() > 0 and t.pvalue < 0.05

    ok = True
    for b in bits:
        for lo, hi in zip(counts, counts[1:]):
            ok = ok and significantly_nondecreasing((lo, b), (hi, b))
    for n in counts:
        for lo, hi in zip(bits, bits[1:]):
            ok = ok and significantly_nondecreasing((n, lo), (n, hi))
    top = tab.rows[idx[(10, 3)]][2]
    _verdict("SINR scaling in elements and phase bits (paired, 95%)", ok,
             f"mean SINR at (10, 3 bits) = {top:.1f}")


# -- 7: training stability ---------------------------------------------------


def test_training_stability(study):
    runs = study["ris_sleep"][8.0]
    series = np.stack([r.train.episode_mean("r_ex") for r in runs])
    smooth = cli._moving_average(series.mean(axis=0), 50)
    third = len(smooth) // 3
    y = smooth[-third:]
    x = np.arange(len(y), dtype=float)
    fit = stats.linregress(x, y)
    ok_slope = fit.slope + 2.0 * fit.stderr >= 0.0

    window = metrics.default_window(series.shape[1])
    finals = series[:, -window:].mean(axis=1)
    cov = float(np.std(finals, ddof=1) / abs(np.mean(finals)))
    ok = ok_slope and cov < 0.10
    _verdict("training stability (non-negative late slope, CoV < 10%)", ok,
             f"slope {fit.slope:.3g} +/- {fit.stderr:.3g}, CoV {cov:.3f}")


# -- 8: learned policy matches exhaustive search -----------------------------


def _toy_scenario(seed: int) -> Scenario:
    """One macro cell, one small cell, five users, flat traffic: small
    enough that every (on/off, power level) choice can be enumerated."""
    mbs = BaseStationSpec(id="mbs", kind=MACRO, position=Position(0, 0),
                          coverage_radius=300.0, p_fixed=130.0,
                          power_slope=4.7, p_max_tx=40.0, p_sleep=0.0,
                          bandwidth=7.5e6, num_rbs=24)
    sbs = BaseStationSpec(id="sbs0", kind=SMALL, position=Position(180.0, 0),
                          coverage_radius=100.0, p_fixed=75.0,
                          power_slope=2.6, p_max_tx=6.3, p_sleep=0.0,
                          bandwidth=7.5e6, num_rbs=24)
    return Scenario(
        mbs=mbs, sbs_list=(sbs,), ris_list=(), num_ues=5,
        radio=RadioConstants(carrier_wavelength=DEFAULT_WAVELENGTH,
                             pathloss_exp_los=2.5, pathloss_exp_nlos=3.5,
                             noise_psd=5e-17, sinr_threshold=1.0),
        traffic=TrafficPattern(hourly_multiplier=(1.0,) * 24,
                               peak_demand=20e6),
        learning=LearningConfig(episodes=800, eval_episodes=3,
                                power_levels=(0.25, 1.0)),
        seed=seed)


def _enumerate_best(sc, world):
    env = CellEnvironment(world, ris_enabled=False)
    combos = [(0, 0), (1, 0), (1, 1)]
    vals = []
    for goal, lvl in combos:
        env.reset_scheduler()
        rng = np.random.default_rng(123)
        frac = np.array([sc.learning.power_levels[lvl]])
        r = [env.step(h % 24, goal, frac, rng).snapshot.penalized_objective
             for h in range(420)]
        vals.append(float(np.mean(r[20:])))     # discard scheduler warm-up
    return combos[int(np.argmax(vals))]


def test_learned_policy_matches_exhaustive_search():
    seeds = (7001, 7002, 7003, 7004, 7005, 7006, 7007, 7008, 7013, 7014)
    matches = 0
    outcomes = []
    for seed in seeds:
        sc = _toy_scenario(seed)
        world = instantiate(sc)
        best = _enumerate_best(sc, world)
        agent, _ = hrl.train(sc, hrl.HRL, ris_enabled=False,
                             sleep_enabled=True, world=world)
        env = CellEnvironment(world, ris_enabled=False)
        b = hrl.bin_load(float(env.load_ratio[0, 0]), sc.learning.load_bins)
        rng = np.random.default_rng(0)
        goal = hrl.select_goal(agent, (b,), 0.0, rng)
        learned = (0, 0) if goal == 0 else (
            1, hrl.select_action(agent, 0, b, 1,
                                 len(sc.learning.power_levels), 0.0, rng))
        matches += learned == best
        outcomes.append(f"{seed}:{'=' if learned == best else '!'}")
    _verdict("trained policy matches exhaustive optimum in >= 9/10 seeds",
             matches >= 9, f"{matches}/10 ({' '.join(outcomes)})")


# -- 9: repeatable outputs ---------------------------------------------------


def test_outputs_byte_identical(tmp_path):
    sc = paper_default()
    sc = dataclasses.replace(
        sc, num_ues=20,
        learning=dataclasses.replace(sc.learning, episodes=2,
                                     eval_episodes=2))
    cfg = tmp_path / "repeat.cfg"
    save_config(sc, cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["run", str(cfg), "--case", "ris_sleep",
                         "--out", str(out), "--runs", "2"]) == 0
    ok = ((a / "runs.csv").read_bytes() == (b / "runs.csv").read_bytes()
          and (a / "aggregate.json").read_bytes()
          == (b / "aggregate.json").read_bytes())
    _verdict("repeated runs produce byte-identical outputs", ok)
