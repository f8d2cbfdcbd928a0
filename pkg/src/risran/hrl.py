"""Hierarchical tabular Q-learning for SBS sleep and power control.

The meta-controller (hosted at the MBS) picks a sleep goal, one on/off bit
per SBS, from the binned SBS load ratios. Each active SBS runs its own
sub-controller choosing a transmit-power level conditioned on the goal bit.
Sub-tables are updated with the *next* goal in the max (the goal-conditioned
target), then the meta-table with the cell-wide extrinsic reward.

A flat single-table Q-learning agent over the joint (on/off mask, shared
power level) action space serves as the baseline for the comparison cases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import RunMetrics, SeriesBlock
from .scenario import Scenario, WorldInstance, instantiate, validate
from .simulate import CellEnvironment

HRL = "hrl"
FLAT_Q = "flat_q"


def bin_load(ratio: float, bins: int) -> int:
    """Discretise a load ratio into [0, bins); ratios >= 1 clamp to the top."""
    if ratio < 0:
        raise ValueError("load ratio must be >= 0")
    return min(int(ratio * bins), bins - 1)


class QStore:
    """Tabular values for the hierarchical agent.

    meta: (state tuple, goal mask) -> value; sub[j]: (bin, goal bit, action)
    -> value. Unseen keys read as 0 and are only written when visited.
    """

    def __init__(self, n_sbs: int):
        self.n_sbs = n_sbs
        self.meta: dict = {}
        self.sub: list = [dict() for _ in range(n_sbs)]

    def meta_value(self, state, goal: int) -> float:
        return self.meta.get((state, goal), 0.0)

    def sub_value(self, j: int, state: int, goal_bit: int, action: int) -> float:
        return self.sub[j].get((state, goal_bit, action), 0.0)

    def save(self, path) -> None:
        """Flat key-value text dump, one table entry per line."""
        with open(path, "w") as fh:
            fh.write(f"n_sbs {self.n_sbs}\n")
            for (state, goal), v in sorted(self.meta.items()):
                s = ",".join(str(x) for x in state)
                fh.write(f"meta {s} {goal} {v!r}\n")
            for j, table in enumerate(self.sub):
                for (state, gbit, action), v in sorted(table.items()):
                    fh.write(f"sub {j} {state} {gbit} {action} {v!r}\n")

    @classmethod
    def load(cls, path) -> "QStore":
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 2 or header[0] != "n_sbs":
                raise ValueError(f"{path}: not a QStore dump")
            store = cls(int(header[1]))
            for line in fh:
                parts = line.split()
                if parts[0] == "meta":
                    state = tuple(int(x) for x in parts[1].split(","))
                    store.meta[(state, int(parts[2]))] = float(parts[3])
                elif parts[0] == "sub":
                    j, s, g, a = (int(x) for x in parts[1:5])
                    store.sub[j][(s, g, a)] = float(parts[5])
                else:
                    raise ValueError(f"{path}: bad line {line!r}")
        return store


def select_goal(qstore: QStore, s_meta, epsilon: float,
                rng: np.random.Generator) -> int:
    """Epsilon-greedy goal (on/off mask); greedy ties break to the lowest
    mask index."""
    n_goals = 2 ** qstore.n_sbs
    if rng.random() <= epsilon:
        return int(rng.integers(n_goals))
    best, best_v = 0, -math.inf
    for g in range(n_goals):
        v = qstore.meta_value(s_meta, g)
        if v > best_v:
            best, best_v = g, v
    return best

def select_action(qstore: QStore, j: int, s_sub: int, goal_bit: int,
                  n_actions: int, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy power level for one active SBS."""
    if not goal_bit:
        raise ValueError("sleeping SBS takes no action")
    if rng.random() <= epsilon:
        return int(rng.integers(n_actions))
    best, best_v = 0, -math.inf
    for a in range(n_actions):
        v = qstore.sub_value(j, s_sub, goal_bit, a)
        if v > best_v:
            best, best_v = a, v
    return best


def update_meta(qstore: QStore, s, goal: int, r_ex: float, s_next,
                alpha: float, gamma: float) -> float:
    """One Q-learning backup on the meta table; returns the new value."""
    if not math.isfinite(r_ex):
        raise ValueError("non-finite reward")
    n_goals = 2 ** qstore.n_sbs
    best_next = max(qstore.meta_value(s_next, g) for g in range(n_goals))
    old = qstore.meta_value(s, goal)
    new = old + alpha * (r_ex + gamma * best_next - old)
    qstore.meta[(s, goal)] = new
    return new


def update_sub(qstore: QStore, j: int, s: int, goal_bit: int, action: int,
               r_in: float, s_next: int, goal_bit_next: int, alpha: float,
               gamma: float, n_actions: int) -> float:
    """One backup on SBS j's sub table, targeted at the next goal bit."""
    if not math.isfinite(r_in):
        raise ValueError("non-finite reward")
    best_next = max(qstore.sub_value(j, s_next, goal_bit_next, a)
                    for a in range(n_actions))
    old = qstore.sub_value(j, s, goal_bit, action)
    new = old + alpha * (r_in + gamma * best_next - old)
    qstore.sub[j][(s, goal_bit, action)] = new
    return new


def intrinsic_reward(own_throughput: float, input_power: float,
                     overload_penalty: float, n_od: int) -> float:
    """Own-BS energy efficiency minus the cell-wide overload penalty."""
    if input_power <= 0:
        raise ValueError("input power must be > 0")
    return own_throughput / input_power - overload_penalty * n_od


def extrinsic_reward(snap) -> float:
    """Cell-wide objective: EE minus the overload penalty term."""
    return snap.penalized_objective


class FlatQTable:
    """Single-table baseline: joint binned-load state, joint action of an
    on/off mask plus one shared SBS power level."""

    def __init__(self, n_sbs: int, n_levels: int, sleep_enabled: bool):
        self.n_sbs = n_sbs
        self.n_levels = n_levels
        self.sleep_enabled = sleep_enabled
        self.n_actions = (2 ** n_sbs if sleep_enabled else 1) * n_levels
        self.table: dict = {}

    def value(self, state, action: int) -> float:
        return self.table.get((state, action), 0.0)

    def decode(self, action: int):
        """Action index -> (on/off mask, power level index)."""
        mask, level = divmod(action, self.n_levels)
        if not self.sleep_enabled:
            mask = 2 ** self.n_sbs - 1
        return mask, level

    def select(self, state, epsilon: float, rng: np.random.Generator) -> int:
        if rng.random() <= epsilon:
            return int(rng.integers(self.n_actions))
        best, best_v = 0, -math.inf
        for a in range(self.n_actions):
            v = self.value(state, a)
            if v > best_v:
                best, best_v = a, v
        return best

    def update(self, state, action: int, reward: float, state_next,
               alpha: float, gamma: float) -> float:
        if not math.isfinite(reward):
            raise ValueError("non-finite reward")
        best_next = max(self.value(state_next, a)
                        for a in range(self.n_actions))
        old = self.value(state, action)
        new = old + alpha * (reward + gamma * best_next - old)
        self.table[(state, action)] = new
        return new

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"flat {self.n_sbs} {self.n_levels} "
                     f"{int(self.sleep_enabled)}\n")
            for (state, action), v in sorted(self.table.items()):
                s = ",".join(str(x) for x in state)
                fh.write(f"q {s} {action} {v!r}\n")


@dataclass
class _Schedule:
    """Learning-rate and exploration decay across episodes."""
    alpha: float
    epsilon: float
    lr_decay_factor: float
    lr_decay_every: int
    lr_floor: float
    eps_decay_factor: float
    eps_floor: float

    def end_episode(self, episode: int):
        self.epsilon = max(self.epsilon * self.eps_decay_factor, self.eps_floor)
        if self.lr_decay_every > 0 and (episode + 1) % self.lr_decay_every == 0:
            self.alpha = max(self.alpha * self.lr_decay_factor, self.lr_floor)


def _record(block: SeriesBlock, ep: int, hour: int, res, r_ex: float,
            r_in: np.ndarray, mask: int, n_sbs: int):
    block.total_power[ep, hour] = res.snapshot.total_power
    block.mean_throughput[ep, hour] = (res.snapshot.total_throughput
                                       / len(res.report.throughput))
    block.ee[ep, hour] = res.snapshot.ee
    block.n_od[ep, hour] = res.n_od
    block.r_ex[ep, hour] = r_ex
    block.mean_sinr[ep, hour] = res.report.sinr.mean()
    block.r_in[ep, hour] = r_in
    for j in range(n_sbs):
        block.sbs_on[ep, hour, j] = (mask >> j) & 1


def train(scenario: Scenario, agent_kind: str = HRL, *, ris_enabled: bool = True,
          sleep_enabled: bool = True, run_index: int = 0,
          episodes: int | None = None, eval_episodes: int | None = None,
          case: str = "", world: WorldInstance | None = None):
    """Train one agent on one seeded run; returns (agent, RunMetrics).

    Each episode walks the 24-hour traffic pattern in order. Channels are
    redrawn each hour. After training, `eval_episodes` greedy episodes
    (epsilon = 0, no updates) are recorded for converged-policy metrics.
    Fully deterministic given (scenario.seed, run_index).
    """
    validate(scenario)
    if world is None:
        world = instantiate(scenario)
    lc = scenario.learning
    episodes = lc.episodes if episodes is None else episodes
    eval_episodes = lc.eval_episodes if eval_episodes is None else eval_episodes

    env = CellEnvironment(world, ris_enabled=ris_enabled)
    n_sbs = env.n_sbs
    n_levels = len(lc.power_levels)
    full_mask = 2 ** n_sbs - 1
    levels = np.asarray(lc.power_levels)

    rng_channel = np.random.default_rng(
        np.random.SeedSequence([scenario.seed, run_index, 1]))
    rng_agent = np.random.default_rng(
        np.random.SeedSequence([scenario.seed, run_index, 2]))

    if agent_kind == HRL:
        agent = QStore(n_sbs)
    elif agent_kind == FLAT_Q:
        agent = FlatQTable(n_sbs, n_levels, sleep_enabled)
    else:
        raise ValueError(f"unknown agent kind: {agent_kind!r}")

    sched = _Schedule(alpha=lc.lr_initial, epsilon=lc.epsilon_initial,
                      lr_decay_factor=lc.lr_decay_factor,
                      lr_decay_every=lc.lr_decay_every, lr_floor=lc.lr_floor,
                      eps_decay_factor=lc.epsilon_decay_factor,
                      eps_floor=lc.epsilon_floor)

    bins = [[bin_load(env.load_ratio[h, j], lc.load_bins)
             for j in range(n_sbs)] for h in range(24)]
    states = [tuple(b) for b in bins]

    train_block = SeriesBlock.empty(episodes, n_sbs)
    eval_block = SeriesBlock.empty(eval_episodes, n_sbs)
    gamma = lc.discount

    def run_hour(block, ep, hour, epsilon, learn: bool, carry):
        """One decision epoch; carry holds the pre-selected goal."""
        s = states[hour]
        if agent_kind == HRL:
            if sleep_enabled:
                goal = carry if carry is not None else select_goal(
                    agent, s, epsilon, rng_agent)
            else:
                goal = full_mask
            actions = np.zeros(n_sbs, dtype=np.int64)
            frac = np.zeros(n_sbs)
            for j in range(n_sbs):
                if (goal >> j) & 1:
                    actions[j] = select_action(agent, j, bins[hour][j], 1,
                                               n_levels, epsilon, rng_agent)
                    frac[j] = levels[actions[j]]
            mask = goal
        else:
            a_flat = carry if carry is not None else agent.select(
                s, epsilon, rng_agent)
            mask, level = agent.decode(a_flat)
            frac = np.full(n_sbs, levels[level])

        res = env.step(hour, mask, frac, rng_channel)
        r_ex = extrinsic_reward(res.snapshot)
        r_in = np.zeros(n_sbs)
        for j in range(n_sbs):
            if (mask >> j) & 1:
                r_in[j] = intrinsic_reward(res.bs_throughput(1 + j),
                                           res.p_in[1 + j],
                                           lc.overload_penalty, res.n_od)
        _record(block, ep, hour, res, r_ex, r_in, mask, n_sbs)

        h_next = (hour + 1) % 24
        s_next = states[h_next]
        if agent_kind == HRL:
            if learn:
                # the sub target needs the next goal (Algorithm 1 order:
                # sub backups inside the SBS loop, meta backup after)
                goal_next = (select_goal(agent, s_next, epsilon, rng_agent)
                             if sleep_enabled else full_mask)
                for j in range(n_sbs):
                    if (mask >> j) & 1:
                        update_sub(agent, j, bins[hour][j], 1,
                                   int(actions[j]), r_in[j], bins[h_next][j],
                                   (goal_next >> j) & 1, sched.alpha, gamma,
                                   n_levels)
                update_meta(agent, s, goal, r_ex, s_next, sched.alpha, gamma)
                return goal_next
            return None
        if learn:
            agent.update(s, a_flat, r_ex, s_next, sched.alpha, gamma)
        return None

    carry = None
    for ep in range(episodes):
        for hour in range(24):
            carry = run_hour(train_block, ep, hour, sched.epsilon, True, carry)
        sched.end_episode(ep)

    carry = None
    for ep in range(eval_episodes):
        for hour in range(24):
            carry = run_hour(eval_block, ep, hour, 0.0, False, carry)

    run = RunMetrics(case=case or agent_kind, run_seed=scenario.seed,
                     train=train_block, eval=eval_block,
                     extra={"run_index": run_index,
                            "ris_enabled": ris_enabled,
                            "sleep_enabled": sleep_enabled})
    return agent, run


def flat_q_train(scenario: Scenario, *, ris_enabled: bool,
                 sleep_enabled: bool, **kwargs):
    """Conventional single-table Q-learning baseline (comparison cases)."""
    return train(scenario, FLAT_Q, ris_enabled=ris_enabled,
                 sleep_enabled=sleep_enabled, **kwargs)
