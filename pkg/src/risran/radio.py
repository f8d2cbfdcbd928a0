"""UE association, proportional-fair RB allocation, SINR/rate, overload.

All functions are array-native: BSs are indexed 0..J-1 (0 is the MBS) and
UEs 0..K-1. An RB grid index r is shared across BSs (co-channel deployment),
so RBs assigned by different BSs at the same index interfere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

# PF guard and smoothing (cold-start safe): metric denominator gets an
# additive 1 bit/s, the throughput average is an EWMA with factor 0.1.
PF_EPS = 1.0
PF_SMOOTHING = 0.1
# once every demand is covered by the rate estimate, spare RBs keep being
# assigned until each UE holds this multiple of its demand, as headroom
# against fading and interference mis-estimates
PF_MARGIN = 2.0
OVERLOAD_SLACK = 0.05


def associate(avg_gain: np.ndarray, active: np.ndarray,
              in_coverage: np.ndarray) -> np.ndarray:
    """Attach each UE to the active covering BS with the largest average gain.

    avg_gain: (J, K) long-term average channel power gains.
    active: (J,) bool, active[0] (the MBS) must be True.
    in_coverage: (J, K) bool; the MBS row is ignored (it always covers).
    Ties break to the lowest BS index.
    """
    if not active[0]:
        raise ValueError("MBS must always be active")
    eligible = in_coverage & active[:, None]
    eligible[0, :] = True
    masked = np.where(eligible, avg_gain, -1.0)
    return np.argmax(masked, axis=0)


@njit(cache=True)
def _pf_kernel(gains, demands, avg_thr, interference, p_budget, num_rbs,
               rb_bw, noise_psd):
    """Greedy proportional-fair loop for one BS.

    gains/demands/avg_thr/interference are per attached UE (local indices).
    Power splits equally over the RB grid; RBs go one at a time to the UE
    maximising instantaneous RB rate over (average + already-allocated)
    throughput, skipping UEs whose allocated rate already covers demand.
    Once every demand is covered, leftover RBs are handed out by the same
    ranking as fading margin until each UE holds PF_MARGIN times its
    demand. The rate estimate uses the instantaneous gain against noise
    plus the caller's expected per-RB interference.

    Returns (owner, n_used, alloc_rate): owner[r] is the local UE index
    holding RB r (or -1), n_used the number of assigned RBs, alloc_rate the
    per-UE estimated rate used for the demand cap.
    """
    n_ue = gains.shape[0]
    owner = np.full(num_rbs, -1, dtype=np.int64)
    alloc_rate = np.zeros(n_ue)
    n_used = 0
    if n_ue == 0 or p_budget <= 0.0:
        return owner, n_used, alloc_rate
    p_rb = p_budget / num_rbs
    rb_rate = np.empty(n_ue)
    for k in range(n_ue):
        rb_rate[k] = rb_bw * np.log2(
            1.0 + p_rb * gains[k] / (rb_bw * noise_psd + interference[k]))
    for r in range(num_rbs):
        best = -1
        best_metric = -1.0
        for k in range(n_ue):
            if alloc_rate[k] >= demands[k] or demands[k] <= 0.0:
                continue
            metric = rb_rate[k] / (avg_thr[k] + alloc_rate[k] + PF_EPS)
            if metric > best_metric:
                best_metric = metric
                best = k
        if best < 0:
            # every demand is covered by the rate estimate; keep assigning
            # headroom RBs, same ranking, up to PF_MARGIN times demand
            for k in range(n_ue):
                if alloc_rate[k] >= PF_MARGIN * demands[k] or demands[k] <= 0.0:
                    continue
                metric = rb_rate[k] / (avg_thr[k] + alloc_rate[k] + PF_EPS)
                if metric > best_metric:
                    best_metric = metric
                    best = k
            if best < 0:
                break
        owner[r] = best
        alloc_rate[best] += rb_rate[best]
        n_used += 1
    return owner, n_used, alloc_rate


@dataclass
class RbAllocation:
    """Allocation of one BS over the shared RB grid."""
    owner: np.ndarray          # (num_rbs,) local UE index per RB, -1 if unassigned
    n_used: int
    p_rb: float                # W per RB
    rb_bw: float               # Hz per RB
    ue_index: np.ndarray       # (n_attached,) global UE ids for local indices

    @property
    def p_out(self) -> float:
        """Radiated power: unassigned RBs are not transmitted."""
        return self.p_rb * self.n_used

    def rbs_of(self, local_ue: int) -> np.ndarray:
        return np.flatnonzero(self.owner == local_ue)


def allocate_rbs(attached_ues: np.ndarray, gains: np.ndarray, demands: np.ndarray,
                 avg_throughput: np.ndarray, p_budget: float, num_rbs: int,
                 bandwidth: float, noise_psd: float,
                 interference_est: np.ndarray | None = None) -> RbAllocation:
    """Proportional-fair RB allocation for one active BS.

    attached_ues are global UE ids; gains/demands/avg_throughput (and the
    optional expected per-RB interference) are indexed globally and
    gathered here.
    """
    ue_index = np.asarray(attached_ues, dtype=np.int64)
    rb_bw = bandwidth / num_rbs
    if interference_est is None:
        i_est = np.zeros(len(ue_index))
    else:
        i_est = np.ascontiguousarray(interference_est[ue_index],
                                     dtype=np.float64)
    owner, n_used, _ = _pf_kernel(
        np.ascontiguousarray(gains[ue_index], dtype=np.float64),
        np.ascontiguousarray(demands[ue_index], dtype=np.float64),
        np.ascontiguousarray(avg_throughput[ue_index], dtype=np.float64),
        i_est,
        float(p_budget), int(num_rbs), float(rb_bw), float(noise_psd),
    )
    return RbAllocation(owner=owner, n_used=int(n_used),
                        p_rb=float(p_budget) / num_rbs if p_budget > 0 else 0.0,
                        rb_bw=rb_bw, ue_index=ue_index)


@dataclass
class LinkReport:
    """Per-UE link outcome for one timestep."""
    sinr: np.ndarray           # (K,) linear
    rate: np.ndarray           # (K,) bit/s, Shannon rate C
    throughput: np.ndarray     # (K,) bit/s, demand-capped W
    sinr_ok: np.ndarray        # (K,) bool, sinr >= threshold
    n_rbs: np.ndarray          # (K,) RBs held


def link_report(allocations: dict, gains: np.ndarray, serving: np.ndarray,
                demands: np.ndarray, noise_psd: float,
                sinr_threshold: float) -> LinkReport:
    """Compute SINR, rate and throughput for every UE.

    allocations: {bs_index: RbAllocation} for the active BSs.
    gains: (J, K) instantaneous power gains; serving: (K,) BS index per UE.

    Signal is summed over the UE's own RBs; interference comes from other
    BSs' power on overlapping RB indices of the shared grid.
    """
    n_ues = gains.shape[1]
    sinr = np.zeros(n_ues)
    rate = np.zeros(n_ues)
    n_rbs = np.zeros(n_ues, dtype=np.int64)

    # RBs held per UE on its serving BS
    for j, alloc in allocations.items():
        assigned = alloc.owner[:alloc.n_used]
        counts = np.bincount(assigned[assigned >= 0], minlength=len(alloc.ue_index))
        n_rbs[alloc.ue_index] = counts

    for j, alloc in allocations.items():
        if len(alloc.ue_index) == 0:
            continue
        local_n = n_rbs[alloc.ue_index].astype(float)
        b = local_n * alloc.rb_bw
        signal = alloc.p_rb * gains[j, alloc.ue_index] * local_n
        interference = np.zeros(len(alloc.ue_index))
        for j2, other in allocations.items():
            if j2 == j or other.n_used == 0:
                continue
            # a UE's RB r suffers interference from BS j2 iff j2 assigned
            # index r; count each UE's owned indices that j2 also uses
            prefix = alloc.owner[:other.n_used]
            overlap = np.bincount(prefix[prefix >= 0], minlength=len(alloc.ue_index))
            interference += other.p_rb * gains[j2, alloc.ue_index] * overlap
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(local_n > 0, signal / (b * noise_psd + interference), 0.0)
        sinr[alloc.ue_index] = s
        rate[alloc.ue_index] = b * np.log2(1.0 + s)

    throughput = np.minimum(rate, demands)
    return LinkReport(sinr=sinr, rate=rate, throughput=throughput,
                      sinr_ok=sinr >= sinr_threshold, n_rbs=n_rbs)


def overload_count(report: LinkReport, demands: np.ndarray, serving: np.ndarray,
                   active: np.ndarray) -> int:
    """Number of active BSs whose attached demand exceeds the rate they
    actually deliver.

    Per-UE rates are demand-capped before summing: surplus rate on one UE
    cannot serve another UE's demand, so uncapped sums would mask
    starvation. The relative slack keeps single-UE deep-fade blips from
    flagging a BS whose aggregate service is essentially complete.
    """
    n_od = 0
    capped = np.minimum(report.rate, demands)
    for j in np.flatnonzero(active):
        mask = serving == j
        d = float(demands[mask].sum())
        c = float(capped[mask].sum())
        if d > c * (1.0 + OVERLOAD_SLACK):
            n_od += 1
    return n_od
