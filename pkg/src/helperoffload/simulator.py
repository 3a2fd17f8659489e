"""Episode runner, Monte Carlo evaluation and exact path-enumeration evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chains import sample_path, stationary_dist, transition_prob
from .energy import Action, SlotState, SystemParams, check_feasible, next_state, slot_cost
from .policies import Policy, make_policy


class PolicyInfeasibleError(RuntimeError):
    """A policy emitted an action that violates the model constraints."""


@dataclass(frozen=True)
class SlotRecord:
    state: SlotState
    action: Action
    energy: float


@dataclass
class EpisodeTrace:
    """One realized episode.

    ``demand_bits`` are the buffered bits the user computed locally in the last
    slot because the helper was busy; they are included in the last ``u_lo``.
    """

    records: list[SlotRecord]
    demand_bits: float
    total_energy: float
    seed: int | None

    @property
    def local_bits(self) -> float:
        return sum(r.action.u_lo for r in self.records)

    @property
    def offloaded_bits(self) -> float:
        return sum(r.action.u_of for r in self.records)

    @property
    def helper_bits(self) -> float:
        """Offloaded bits that the helper actually computed."""
        return self.offloaded_bits - self.demand_bits


@dataclass(frozen=True)
class EvalReport:
    policy: str
    params_hash: str
    n: int
    mean_energy: float
    std_energy: float
    base_seed: int
    energies: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def stderr(self) -> float:
        return self.std_energy / math.sqrt(self.n)


def _nearest(x: float) -> int:
    return int(math.floor(x + 0.5))


def round_action(params: SystemParams, state: SlotState, action: Action) -> Action:
    """Map a real-valued action to whole bits.

    The slot total is rounded first (and fixed to ``L`` in the last slot), then the
    offload is rounded and clipped to what is admissible; local takes the rest.
    """
    L = int(round(state.L))
    if state.k == params.K:
        total = L
    else:
        total = min(max(_nearest(action.total), 0), L)
    cap = total
    if not state.idle:
        cap = min(cap, max(int(math.floor(params.Q - state.q + 1e-9)), 0))
    u_of = min(max(_nearest(action.u_of), 0), cap)
    return Action(float(u_of), float(total - u_of))


def _resolve_policy(params: SystemParams, policy) -> Policy:
    if isinstance(policy, str):
        return make_policy(policy, params)
    if policy.params != params:
        raise ValueError(f"policy {policy.name!r} was built for different parameters")
    return policy


def _decide(params: SystemParams, policy, state: SlotState, rounding: bool, validate: bool):
    """Policy action for ``state`` after rounding and environment overrides.

    Returns ``(action, demand_bits)``.
    """
    if state.k == params.K and not state.idle:
        # demand-computing is enforced here regardless of what the policy wants
        return Action(0.0, state.L + state.q), state.q
    action = policy(state)
    if rounding:
        action = round_action(params, state, action)
    if validate:
        tol = 0.0 if rounding else 1e-9 * max(params.D, 1.0)
        try:
            check_feasible(params, state, action, tol)
        except ValueError as exc:
            raise PolicyInfeasibleError(f"policy {getattr(policy, 'name', policy)!r}: {exc}") from exc
    if state.k == params.K and not rounding:
        # absorb float drift so the task is finished exactly
        action = Action(action.u_of, max(state.L - action.u_of, 0.0))
    return action, 0.0


def episode_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent CPU and channel random streams derived from one episode seed."""
    cpu_ss, chan_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(cpu_ss), np.random.default_rng(chan_ss)


def sample_states(params: SystemParams, seed: int, initial: tuple[int, int] | None = None):
    """CPU and channel paths of one episode."""
    cpu_rng, chan_rng = episode_streams(seed)
    c0, h0 = (None, None) if initial is None else initial
    K = int(params.K)
    return sample_path(params.cpu_chain, K, cpu_rng, c0), sample_path(params.channel_chain, K, chan_rng, h0)


def run_path(
    params: SystemParams,
    policy,
    cpu_path,
    channel_path,
    *,
    rounding: bool = True,
    validate: bool = True,
    seed: int | None = None,
) -> EpisodeTrace:
    policy = _resolve_policy(params, policy)
    D = float(params.D)
    state = SlotState(cpu_path[0], channel_path[0], D, 0.0, 1)
    records = []
    demand = 0.0
    total = 0.0
    K = int(params.K)
    for k in range(1, K + 1):
        action, d = _decide(params, policy, state, rounding, validate)
        demand += d
        energy = slot_cost(params, state, action)
        total += energy
        records.append(SlotRecord(state, action, energy))
        if k < K:
            state = next_state(state, action, cpu_path[k], channel_path[k])
    return EpisodeTrace(records, demand, total, seed)


def run_episode(
    params: SystemParams,
    policy,
    seed: int,
    *,
    rounding: bool = True,
    validate: bool = True,
    initial: tuple[int, int] | None = None,
) -> EpisodeTrace:
    """Simulate one episode from ``L = D``, ``q = 0``.

    Initial CPU and channel states are stationary draws unless ``initial`` fixes them.
    """
    cpu_path, channel_path = sample_states(params, seed, initial)
    return run_path(params, policy, cpu_path, channel_path, rounding=rounding, validate=validate, seed=seed)


def validate_trace(params: SystemParams, trace: EpisodeTrace, tol: float = 1e-9) -> None:
    """Check conservation, completion and buffer bounds of a finished episode."""
    slack = tol * max(float(params.D), 1.0)
    done = trace.local_bits + trace.helper_bits
    if abs(done - params.D) > slack:
        raise AssertionError(f"computed {done} bits, task has {params.D}")
    last = trace.records[-1]
    if abs(last.action.total - (last.state.L + (0 if last.state.idle else last.state.q))) > slack:
        raise AssertionError("task not finished in the last slot")
    for r in trace.records:
        if r.state.q > params.Q + slack:
            raise AssertionError(f"slot {r.state.k}: buffer {r.state.q} exceeds Q={params.Q}")
        if not r.state.idle and r.state.k < params.K and r.state.q + r.action.u_of > params.Q + slack:
            raise AssertionError(f"slot {r.state.k}: offload overflows the buffer")


def evaluate(
    params: SystemParams,
    policy,
    n: int,
    base_seed: int = 0,
    *,
    rounding: bool = True,
    initial: tuple[int, int] | None = None,
    validate: bool = True,
) -> EvalReport:
    """Mean and sample deviation of the energy over episodes seeded base_seed..base_seed+n-1."""
    if n < 1:
        raise ValueError("need at least one episode")
    policy = _resolve_policy(params, policy)
    energies = np.empty(n)
    for i in range(n):
        trace = run_episode(
            params, policy, base_seed + i, rounding=rounding, validate=validate, initial=initial
        )
        energies[i] = trace.total_energy
    std = float(energies.std(ddof=1)) if n > 1 else 0.0
    return EvalReport(policy.name, params.digest(), n, float(energies.mean()), std, base_seed, energies)


def buffer_gain(params: SystemParams, policy_with_buffer, n: int, base_seed: int = 0, **kw) -> float:
    """Ratio of zero-buffer optimal energy to the buffered policy's energy, same seeds."""
    no_buffer = evaluate(params.with_(Q=0), "zero-opt", n, base_seed, **kw)
    with_buffer = evaluate(params, policy_with_buffer, n, base_seed, **kw)
    if with_buffer.mean_energy == 0:
        if no_buffer.mean_energy > 0:
            raise ZeroDivisionError("buffered policy has zero energy while the reference does not")
        return 1.0
    return no_buffer.mean_energy / with_buffer.mean_energy


def exact_expected_energy(
    params: SystemParams,
    policy,
    *,
    rounding: bool = True,
    initial: tuple[int, int] | None = None,
) -> float:
    """Expected total energy by enumerating every (CPU, channel) path with its probability.

    Averaged over stationary initial states unless ``initial`` is given.
    Cost grows as 4**K.
    """
    policy = _resolve_policy(params, policy)
    K = int(params.K)

    def value(state: SlotState) -> float:
        action, _ = _decide(params, policy, state, rounding, True)
        cost = slot_cost(params, state, action)
        if state.k == K:
            return cost
        future = 0.0
        for c2 in (0, 1):
            pc = transition_prob(params.cpu_chain, state.cpu, c2)
            for h2 in (0, 1):
                p = pc * transition_prob(params.channel_chain, state.channel, h2)
                if p > 0:
                    future += p * value(next_state(state, action, c2, h2))
        return cost + future

    if initial is not None:
        return value(SlotState(initial[0], initial[1], float(params.D), 0.0, 1))
    pc = stationary_dist(params.cpu_chain)
    ph = stationary_dist(params.channel_chain)
    total = 0.0
    for c in (0, 1):
        for h in (0, 1):
            if pc[c] * ph[h] > 0:
                total += pc[c] * ph[h] * value(SlotState(c, h, float(params.D), 0.0, 1))
    return total
