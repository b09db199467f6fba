"""Tabular learning stack and one-shot baselines: Q-value updates,
epsilon-greedy selection, policy hill-climbing with and without the
win-or-learn-fast variable step, exhaustive immediate-reward search, and the
no-surface optimal power split."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .codec import ActionCodec, feasible_power_combos
from .environment import (AntiJamEnv, PowerAllocation, REWARD_POWER_UNITS,
                          TransmitBeamformers, jamming_gains, transmit_beamformer)
from .jammer import JammerAction


@dataclass
class QTable:
    """Action-value table with its learning rate and discount factor."""

    values: np.ndarray
    alpha: float
    gamma: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Q-table entries must be finite")

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, alpha: float, gamma: float) -> "QTable":
        return cls(np.zeros((n_states, n_actions)), alpha, gamma)


def q_update(q: QTable, s: int, a: int, r: float, s_next: int) -> float:
    """One bootstrapped update:
    Q(s,a) <- (1-alpha) Q(s,a) + alpha (r + gamma max_a' Q(s_next, a')).
    Returns the new entry."""
    if not np.isfinite(r):
        raise ValueError("reward must be finite")
    target = r + q.gamma * q.values[s_next].max()
    q.values[s, a] = (1.0 - q.alpha) * q.values[s, a] + q.alpha * target
    return float(q.values[s, a])


def epsilon_greedy(q_row: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Best action with probability 1-eps, otherwise uniform over the remaining
    actions (each with probability eps/(|A|-1)). Ties break to the lowest index."""
    n = len(q_row)
    if n < 2:
        raise ValueError("epsilon-greedy needs at least two actions")
    if not 0 <= eps <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    best = int(np.argmax(q_row))
    if rng.random() < eps:
        other = int(rng.integers(n - 1))
        return other if other < best else other + 1
    return best


@dataclass
class MixedPolicy:
    """Row-stochastic policy table plus the running average policy and per-state
    visit counts used by the win/lose test. delta_win is applied when the
    current policy outperforms the average one, delta_lose otherwise."""

    probs: np.ndarray
    avg_probs: np.ndarray
    visit_counts: np.ndarray
    delta_win: float
    delta_lose: float

    def __post_init__(self):
        if not 0 < self.delta_win <= self.delta_lose <= 1:
            raise ValueError("need 0 < delta_win <= delta_lose <= 1")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int, delta_win: float,
                delta_lose: float) -> "MixedPolicy":
        probs = np.full((n_states, n_actions), 1.0 / n_actions)
        return cls(probs, probs.copy(), np.zeros(n_states, dtype=np.int64),
                   delta_win, delta_lose)


def phc_update(policy: MixedPolicy, s: int, q_row: np.ndarray, xi: float) -> np.ndarray:
    """Hill-climb the policy row at ``s``: add ``xi`` to the highest-valued
    action's probability and subtract xi/(|A|-1) from every other, then project
    back onto the simplex by clamping to [0, 1] and renormalizing."""
    if not 0 < xi <= 1:
        raise ValueError("xi must be in (0, 1]")
    row = policy.probs[s]
    n = row.size
    best = int(np.argmax(q_row))
    row -= xi / (n - 1)
    row[best] += xi + xi / (n - 1)
    np.clip(row, 0.0, 1.0, out=row)
    row /= row.sum()
    return row


def wolf_phc_step(policy: MixedPolicy, s: int, q_row: np.ndarray) -> np.ndarray:
    """Variable-step hill climb: pull the average policy toward the current one
    with weight 1/visits, then use the small step when the current policy's
    expected value beats the average policy's (win) and the large step
    otherwise (ties lose)."""
    policy.visit_counts[s] += 1
    c = policy.visit_counts[s]
    policy.avg_probs[s] += (policy.probs[s] - policy.avg_probs[s]) / c
    winning = float(policy.probs[s] @ q_row) > float(policy.avg_probs[s] @ q_row)
    xi = policy.delta_win if winning else policy.delta_lose
    return phc_update(policy, s, q_row, xi)


class QLearningAgent:
    """Plain tabular Q-learning with epsilon-greedy selection."""

    name = "q-learning"

    def __init__(self, n_states: int, n_actions: int, alpha: float = 5e-3,
                 gamma: float = 0.9, epsilon: float = 0.1, alpha_decay: float = 1.0):
        self.q = QTable.zeros(n_states, n_actions, alpha, gamma)
        self.epsilon = epsilon
        self.alpha_decay = alpha_decay

    def select_action(self, s: int, rng: np.random.Generator) -> int:
        return epsilon_greedy(self.q.values[s], self.epsilon, rng)

    def update(self, s: int, a: int, r: float, s_next: int) -> None:
        q_update(self.q, s, a, r, s_next)

    def end_episode(self) -> None:
        self.q.alpha = max(self.q.alpha * self.alpha_decay, 1e-8)


class WolfPhcAgent:
    """Q-learning plus a hill-climbed mixed policy with the win-or-learn-fast
    variable step. Actions are sampled from the mixed policy by default;
    ``selection="epsilon-greedy"`` switches to Q-row selection instead."""

    name = "wolf-phc"

    def __init__(self, n_states: int, n_actions: int, alpha: float = 5e-3,
                 gamma: float = 0.9, delta_win: float = 0.04,
                 delta_lose: float = 0.16, epsilon: float = 0.1,
                 selection: str = "policy", alpha_decay: float = 1.0):
        if selection not in ("policy", "epsilon-greedy"):
            raise ValueError(f"unknown selection mode {selection!r}")
        self.q = QTable.zeros(n_states, n_actions, alpha, gamma)
        self.policy = MixedPolicy.uniform(n_states, n_actions, delta_win, delta_lose)
        self.epsilon = epsilon
        self.selection = selection
        self.alpha_decay = alpha_decay

    def select_action(self, s: int, rng: np.random.Generator) -> int:
        if self.selection == "policy":
            return int(rng.choice(self.policy.probs.shape[1], p=self.policy.probs[s]))
        return epsilon_greedy(self.q.values[s], self.epsilon, rng)

    def update(self, s: int, a: int, r: float, s_next: int) -> None:
        q_update(self.q, s, a, r, s_next)
        wolf_phc_step(self.policy, s, self.q.values[s])

    def end_episode(self) -> None:
        self.q.alpha = max(self.q.alpha * self.alpha_decay, 1e-8)


class ActionEvaluator:
    """Vectorized immediate-reward evaluation of every codec action against
    fixed channels. The per-phase-config composite gains are precomputed once
    per coherence block; per-call work is one broadcast over the jamming term.
    """

    def __init__(self, codec: ActionCodec, ch: ChannelSet, w: TransmitBeamformers,
                 noise: float, lambda1: float = 0.0, power_unit: str = "watt",
                 include_irs: bool = True):
        self.codec = codec
        self.noise = noise
        self.lambda1 = lambda1
        self.unit_scale = REWARD_POWER_UNITS[power_unit]
        base = np.conj(ch.g_bs_ue)                                   # (K, N)
        if include_irs:
            coeffs = codec.all_phase_coefficients()                  # (C, M)
            heff = np.einsum("cm,km,mn->ckn", coeffs, np.conj(ch.g_irs_ue),
                             ch.g_bs_irs) + base
        else:
            heff = base[None, :, :]
        self.gains = np.abs(np.einsum("ckn,in->cki", heff, w.vectors)) ** 2
        self.powers = codec.power_levels[np.asarray(codec.combos)]   # (B, K)
        self.sum_powers = self.powers.sum(axis=1)

    def rewards(self, jam: JammerAction | None = None,
                ch: ChannelSet | None = None) -> np.ndarray:
        """Immediate reward of every action index, given the jammer action the
        step will face (None means no jamming)."""
        k = self.gains.shape[1]
        jam_terms = np.zeros(k)
        if jam is not None:
            jam_terms = jam.jam_powers * jamming_gains(ch, jam)
        received = np.einsum("cki,bi->bck", self.gains, self.powers)
        desired = self.powers[:, None, :] * np.einsum("ckk->ck", self.gains)[None, :, :]
        sinr = desired / (received - desired + jam_terms + self.noise)
        rate = np.log2(1.0 + sinr).sum(axis=2)                       # (B, C)
        rew = rate - self.lambda1 * self.unit_scale * self.sum_powers[:, None]
        if self.gains.shape[0] == 1:                                 # no surface: tile
            rew = np.broadcast_to(rew, (rew.shape[0], self.codec.n_phase_configs))
        return rew.reshape(-1)

    def best(self, jam: JammerAction | None = None,
             ch: ChannelSet | None = None) -> int:
        return int(np.argmax(self.rewards(jam, ch)))


def greedy_baseline(env: AntiJamEnv, codec: ActionCodec,
                    jam: JammerAction | None = None) -> int:
    """Exhaustive one-step optimizer: the action index with the best immediate
    reward against the current channels and the given (previous) jammer action.
    Ties break to the lowest index."""
    ev = ActionEvaluator(codec, env.channels, env.beamformers, env.noise,
                         env.lambda1, env.reward_power_unit, env.irs_enabled)
    return ev.best(jam, env.channels)


def optimal_pa_no_irs(ch: ChannelSet, jam: JammerAction | None, noise: float,
                      power_levels, p_max: float,
                      w: TransmitBeamformers | None = None) -> PowerAllocation:
    """Best discrete power split when only the direct links carry signal:
    exhaustive search of the feasible grid maximizing the sum rate. The surface
    plays no part, so the result is independent of any phase configuration."""
    if w is None:
        w = transmit_beamformer(ch)
    levels = np.asarray(power_levels, dtype=float)
    combos = feasible_power_combos(levels, p_max, ch.n_ue)
    gains = np.abs(np.conj(ch.g_bs_ue) @ w.vectors.T) ** 2           # (K, K)
    k = ch.n_ue
    jam_terms = np.zeros(k)
    if jam is not None:
        jam_terms = jam.jam_powers * jamming_gains(ch, jam)
    powers = levels[np.asarray(combos)]                              # (B, K)
    received = powers @ gains.T
    desired = powers * np.diag(gains)
    rates = np.log2(1.0 + desired / (received - desired + jam_terms + noise)).sum(axis=1)
    return PowerAllocation(powers[int(np.argmax(rates))], p_max)


def save_checkpoint(path, agent, codec_summary: dict,
                    rng: np.random.Generator | None = None) -> None:
    """Serialize an agent to a single npz: tables as exact arrays, everything
    else (kind, hyperparameters, codec summary, RNG state) as a JSON header.
    Loading reproduces the agent bit for bit."""
    meta = {
        "kind": agent.name,
        "alpha": agent.q.alpha,
        "gamma": agent.q.gamma,
        "epsilon": agent.epsilon,
        "alpha_decay": agent.alpha_decay,
        "codec": codec_summary,
        "rng_state": rng.bit_generator.state if rng is not None else None,
    }
    arrays = {"q_values": agent.q.values}
    if isinstance(agent, WolfPhcAgent):
        meta["delta_win"] = agent.policy.delta_win
        meta["delta_lose"] = agent.policy.delta_lose
        meta["selection"] = agent.selection
        arrays["probs"] = agent.policy.probs
        arrays["avg_probs"] = agent.policy.avg_probs
        arrays["visit_counts"] = agent.policy.visit_counts
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path):
    """Rebuild (agent, codec_summary, rng) from a checkpoint file. The rng is
    None when no RNG state was stored."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        n_states, n_actions = data["q_values"].shape
        if meta["kind"] == "wolf-phc":
            agent = WolfPhcAgent(n_states, n_actions, meta["alpha"], meta["gamma"],
                                 meta["delta_win"], meta["delta_lose"], meta["epsilon"],
                                 meta["selection"], meta["alpha_decay"])
            agent.policy.probs = data["probs"].copy()
            agent.policy.avg_probs = data["avg_probs"].copy()
            agent.policy.visit_counts = data["visit_counts"].copy()
        elif meta["kind"] == "q-learning":
            agent = QLearningAgent(n_states, n_actions, meta["alpha"], meta["gamma"],
                                   meta["epsilon"], meta["alpha_decay"])
        else:
            raise ValueError(f"unknown checkpoint kind {meta['kind']!r}")
        agent.q.values = data["q_values"].copy()
    rng = None
    if meta["rng_state"] is not None:
        rng = np.random.default_rng()
        state = meta["rng_state"]
        # json turns the uint32 key array into a list; restore it
        if isinstance(state.get("state"), dict) and "key" in state["state"]:
            state["state"]["key"] = np.array(state["state"]["key"], dtype=np.uint32)
        rng.bit_generator.state = state
    return agent, meta["codec"], rng
