"""Per-timestep cell simulation: block-fading channels, scheduling, energy.

CellEnvironment precomputes everything that depends only on the world
geometry (path losses, LOS phasors, per-active-set associations, hourly
demand profile) so that the hot per-hour step reduces to fresh fading
draws, the PF allocation kernels and a handful of vectorised reductions.

Channels are redrawn every hour (block fading). Each RIS panel reflects the
MBS signal only; every UE uses the single panel with the largest expected
reflected power. SBS links are direct-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel, energy, radio
from .scenario import Scenario, WorldInstance

# E|h| for h ~ CN(0,1), used for the long-term average amplitude
RAYLEIGH_MEAN_AMP = float(np.sqrt(np.pi) / 2.0)


@dataclass
class StepResult:
    """Everything one simulated hour produced."""
    report: radio.LinkReport
    demands: np.ndarray        # (K,) bit/s
    serving: np.ndarray        # (K,) BS index
    p_out: np.ndarray          # (J,) radiated W
    p_in: np.ndarray           # (J,) consumed W
    n_od: int
    snapshot: energy.EnergySnapshot

    def bs_throughput(self, j: int) -> float:
        return float(self.report.throughput[self.serving == j].sum())


class CellEnvironment:
    """One world instance plus mutable per-run scheduler state."""

    def __init__(self, world: WorldInstance, ris_enabled: bool = True):
        self.world = world
        self.scenario: Scenario = world.scenario
        self.ris_enabled = ris_enabled
        sc = self.scenario
        self.bs_list = sc.base_stations
        self.n_bs = len(self.bs_list)
        self.n_sbs = len(sc.sbs_list)
        self.n_ues = sc.num_ues
        self._precompute_geometry()
        self._precompute_traffic()
        self.reset_scheduler()

    # -- static precomputation ------------------------------------------------

    def _precompute_geometry(self):
        sc = self.scenario
        ue = self.world.ue_positions
        bs_xy = np.array([[b.position.x, b.position.y] for b in self.bs_list])
        self.dist_bs_ue = np.hypot(bs_xy[:, None, 0] - ue[None, :, 0],
                                   bs_xy[:, None, 1] - ue[None, :, 1])
        a_nlos = sc.radio.pathloss_exp_nlos
        # direct links additionally suffer the building penetration loss
        self.direct_amp = (np.sqrt(sc.radio.penetration_loss)
                           * self.dist_bs_ue ** (-a_nlos / 2.0))
        radii = np.array([b.coverage_radius for b in self.bs_list])
        self.in_coverage = self.dist_bs_ue <= radii[:, None]

        # RIS precomputes (panels reflect the MBS signal only)
        n_ris = len(sc.ris_list)
        if n_ris and self.ris_enabled:
            n_elem = sc.ris_list[0].num_elements
            if any(r.num_elements != n_elem for r in sc.ris_list):
                raise ValueError("all RIS panels must share num_elements")
            bs_ris = np.stack([
                channel.bs_ris_channel(sc.mbs.position, r,
                                       sc.radio.carrier_wavelength,
                                       sc.radio.pathloss_exp_los)
                for r in sc.ris_list
            ])                                          # (R, N) complex
            ris_xy = np.array([[r.position.x, r.position.y] for r in sc.ris_list])
            d_ris_ue = np.hypot(ris_xy[:, None, 0] - ue[None, :, 0],
                                ris_xy[:, None, 1] - ue[None, :, 1])
            g_ris_ue = d_ris_ue ** (-a_nlos / 2.0)      # (R, K) amplitude
            # expected reflected amplitude per panel: N * g_BR * g_Rk
            refl = np.abs(bs_ris).sum(axis=1)[:, None] * g_ris_ue
            self.ue_ris = np.argmax(refl, axis=0)       # (K,)
            k_idx = np.arange(self.n_ues)
            self.ris_elem = bs_ris[self.ue_ris]         # (K, N) complex
            self.ris_g = g_ris_ue[self.ue_ris, k_idx]   # (K,) amplitude
            self.ris_beta = np.array([sc.ris_list[i].amplitude
                                      for i in self.ue_ris])
            bits = sc.ris_list[0].psr_bits
            if any(r.psr_bits != bits for r in sc.ris_list):
                raise ValueError("all RIS panels must share psr_bits")
            self.phase_step = 2.0 * np.pi / (2 ** bits)
            self.ris_refl_mean = (RAYLEIGH_MEAN_AMP * self.ris_beta * self.ris_g
                                  * np.abs(self.ris_elem).sum(axis=1))
        else:
            self.ue_ris = None
            self.ris_refl_mean = np.zeros(self.n_ues)

        # long-term average power gains driving the association rule
        avg_amp = RAYLEIGH_MEAN_AMP * self.direct_amp
        avg_amp[0] += self.ris_refl_mean
        self.avg_gain = avg_amp ** 2
        # expected instantaneous power gain, used in the scheduler's
        # interference estimate (E|h|^2 = 1, vs E|h| for the ranking above)
        self.exp_gain = self.avg_gain / RAYLEIGH_MEAN_AMP ** 2

        # association per active set, keyed by the SBS on/off bitmask
        self._assoc = {}
        for mask in range(2 ** self.n_sbs):
            active = self.active_from_mask(mask)
            self._assoc[mask] = radio.associate(self.avg_gain, active,
                                                self.in_coverage)

    def _precompute_traffic(self):
        sc = self.scenario
        mult = np.asarray(sc.traffic.hourly_multiplier)
        self.hourly_demand = self.world.base_demand * mult    # (24,) per UE
        # potential load ratio of each SBS: demand of UEs inside its disk
        # over its normaliser (peak scaled by the disk area ratio)
        counts = self.in_coverage[1:].sum(axis=1)             # (S,)
        area_ratio = np.array([
            (b.coverage_radius / sc.mbs.coverage_radius) ** 2
            for b in sc.sbs_list
        ])
        d_max = sc.traffic.peak_demand * area_ratio
        self.load_ratio = (counts[None, :] * self.hourly_demand[:, None]
                           / d_max[None, :])                  # (24, S)

    # -- helpers --------------------------------------------------------------

    def active_from_mask(self, mask: int) -> np.ndarray:
        active = np.zeros(self.n_bs, dtype=bool)
        active[0] = True
        for j in range(self.n_sbs):
            active[1 + j] = bool((mask >> j) & 1)
        return active

    def association(self, mask: int) -> np.ndarray:
        return self._assoc[mask]

    def reset_scheduler(self):
        """Clear the PF throughput history (start of a fresh run)."""
        self.avg_throughput = np.zeros(self.n_ues)
        # smoothed RB-grid utilisation per BS, feeding the expected
        # interference seen by the allocator; starts conservative (full)
        self.utilization = np.ones(self.n_bs)

    # -- per-hour dynamics ----------------------------------------------------

    def draw_gains(self, rng: np.random.Generator) -> np.ndarray:
        """Fresh block-fading power gains for every BS-UE link, (J, K)."""
        h = channel.rayleigh_fading(rng, (self.n_bs, self.n_ues))
        direct = self.direct_amp * h
        gains = np.abs(direct) ** 2
        if self.ue_ris is not None:
            h_ris = channel.rayleigh_fading(
                rng, (self.n_ues, self.ris_elem.shape[1]))
            terms = self.ris_elem * self.ris_g[:, None] * h_ris   # (K, N)
            theta = np.angle(direct[0])[:, None] - np.angle(terms)
            theta = np.round(theta / self.phase_step) * self.phase_step
            reflected = (self.ris_beta[:, None]
                         * np.exp(1j * theta) * terms).sum(axis=1)
            gains[0] = np.abs(direct[0] + reflected) ** 2
        return gains

    def step(self, hour: int, mask: int, sbs_power_frac: np.ndarray,
             rng: np.random.Generator) -> StepResult:
        """Simulate one hour under an on/off mask and SBS power fractions.

        sbs_power_frac[j] scales sbs_list[j].p_max_tx into its PF power
        budget; entries of sleeping SBSs are ignored. The MBS always spends
        its full budget. Channels are redrawn from rng.
        """
        sc = self.scenario
        active = self.active_from_mask(mask)
        serving = self._assoc[mask]
        demand = np.full(self.n_ues, self.hourly_demand[hour])
        gains = self.draw_gains(rng)

        budgets = np.zeros(self.n_bs)
        budgets[0] = sc.mbs.p_max_tx
        for j, sbs in enumerate(sc.sbs_list):
            if active[1 + j]:
                budgets[1 + j] = sbs_power_frac[j] * sbs.p_max_tx

        # expected per-RB interference per UE: other active BSs' RB power
        # weighted by their smoothed grid utilisation and average gains
        p_rb = np.array([budgets[j] / self.bs_list[j].num_rbs
                         for j in range(self.n_bs)])
        weight = p_rb * self.utilization * active
        i_est = weight @ self.exp_gain

        allocations = {}
        for j in np.flatnonzero(active):
            attached = np.flatnonzero(serving == j)
            bs = self.bs_list[j]
            allocations[j] = radio.allocate_rbs(
                attached, gains[j], demand, self.avg_throughput,
                budgets[j], bs.num_rbs, bs.bandwidth, sc.radio.noise_psd,
                interference_est=i_est - weight[j] * self.exp_gain[j])

        report = radio.link_report(allocations, gains, serving, demand,
                                   sc.radio.noise_psd, sc.radio.sinr_threshold)
        n_od = radio.overload_count(report, demand, serving, active)

        p_out = np.zeros(self.n_bs)
        p_in = np.empty(self.n_bs)
        for j, bs in enumerate(self.bs_list):
            if active[j]:
                p_out[j] = allocations[j].p_out
                p_in[j] = energy.bs_power(bs, energy.ACTIVE, p_out[j])
            else:
                p_in[j] = energy.bs_power(bs, energy.SLEEPING)

        snap = energy.snapshot(p_in, report.throughput,
                               sc.learning.overload_penalty, n_od)
        self.avg_throughput = ((1.0 - radio.PF_SMOOTHING) * self.avg_throughput
                               + radio.PF_SMOOTHING * report.throughput)
        used = np.array([allocations[j].n_used / self.bs_list[j].num_rbs
                         if j in allocations else 0.0
                         for j in range(self.n_bs)])
        self.utilization = 0.7 * self.utilization + 0.3 * used
        return StepResult(report=report, demands=demand, serving=serving,
                          p_out=p_out, p_in=p_in, n_od=n_od, snapshot=snap)
