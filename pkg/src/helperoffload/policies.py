"""Closed-form offloading policies and the tables they are built from.

All closed forms return real-valued bit splits. Rounding to whole bits is done by
the simulator (see :func:`helperoffload.simulator.round_action`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chains import CpuState, transition_prob
from .energy import ZERO_ACTION, Action, SlotState, SystemParams

POLICY_NAMES = ("zero-opt", "large-sub", "tlbp", "zbp", "bacs", "equal", "dp")


class WrongSlotError(ValueError):
    pass


@dataclass(frozen=True)
class STable:
    """Backward-recursion table indexed by (slot k, cpu c, channel h).

    ``values[k-1, c, h]`` holds S_k for k < K. Slot K has no finite value; it is
    marked terminal and :meth:`inv_sqrt` returns 0 there.
    """

    values: np.ndarray

    @property
    def K(self) -> int:
        return self.values.shape[0]

    def __call__(self, k: int, c: int, h: int) -> float:
        if k == self.K:
            raise WrongSlotError("S is unbounded in the last slot; use inv_sqrt")
        return float(self.values[k - 1, c, h])

    def inv_sqrt(self, k: int, c: int, h: int) -> float:
        if k == self.K:
            return 0.0
        return 1.0 / math.sqrt(self.values[k - 1, c, h])


@dataclass(frozen=True)
class VTable:
    """Probability that a busy CPU stays busy through the deadline: V[k-1, c]."""

    values: np.ndarray

    def __call__(self, k: int, c: int) -> float:
        return float(self.values[k - 1, c])


def _chain_weights(params: SystemParams) -> np.ndarray:
    """w[c, h, c2, h2] = P(c2 | c) * P(h2 | h)."""
    w = np.empty((2, 2, 2, 2))
    for c in (0, 1):
        for h in (0, 1):
            for c2 in (0, 1):
                for h2 in (0, 1):
                    w[c, h, c2, h2] = transition_prob(params.cpu_chain, c, c2) * transition_prob(
                        params.channel_chain, h, h2
                    )
    return w


def _sqrt_gains(params: SystemParams) -> np.ndarray:
    return np.sqrt([params.gain_good, params.gain_bad])


def _backward_s(params: SystemParams, offload_scale) -> STable:
    """Shared backward recursion. ``offload_scale(k, c)`` is the CPU-dependent
    multiplier of sqrt(alpha/lam) * sqrt(h) inside the bracket at slot k."""
    K = int(params.K)
    w = _chain_weights(params)
    sg = _sqrt_gains(params)
    values = np.zeros((K, 2, 2))
    inv_sqrt_next = np.zeros((2, 2))  # slot K sentinel
    for k in range(K - 1, 0, -1):
        scale_next = np.array([offload_scale(k + 1, c) for c in (0, 1)])
        bracket = 1.0 + inv_sqrt_next + params.sqrt_ratio * scale_next[:, None] * sg[None, :]
        values[k - 1] = np.einsum("chxy,xy->ch", w, bracket**-2.0)
        inv_sqrt_next = 1.0 / np.sqrt(values[k - 1])
    return STable(values)


def build_s_table_zero_buffer(params: SystemParams) -> STable:
    return _backward_s(params, lambda k, c: float(c))


def build_v_table(params: SystemParams) -> VTable:
    K = int(params.K)
    values = np.zeros((K, 2))
    for k in range(1, K + 1):
        values[k - 1, CpuState.BUSY] = params.P00 ** (K - k)
    return VTable(values)


def build_s_tilde_table(params: SystemParams, v_table: VTable) -> STable:
    return _backward_s(params, lambda k, c: (1.0 - v_table(k, c)) ** 1.5)


def _idle_split(params: SystemParams, bits: float, h: int) -> Action:
    """Cost-minimizing split of ``bits`` between local and offload in one slot."""
    if bits <= 0:
        return ZERO_ACTION
    u_lo = bits / (1.0 + params.sqrt_ratio * math.sqrt(params.gain(h)))
    return Action(max(bits - u_lo, 0.0), u_lo)


def last_slot_zero_buffer(params: SystemParams, state: SlotState) -> Action:
    if state.k != params.K:
        raise WrongSlotError(f"last-slot rule called at slot {state.k} != K={params.K}")
    if not state.idle:
        return Action(0.0, state.L)
    return _idle_split(params, state.L, state.channel)


def _zero_buffer_denominator(params: SystemParams, s_table: STable, state: SlotState) -> float:
    c, h = state.cpu, state.channel
    return 1.0 + s_table.inv_sqrt(state.k, c, h) + params.sqrt_ratio * c * math.sqrt(params.gain(h))


def zero_buffer_policy(params: SystemParams, s_table: STable, state: SlotState) -> Action:
    if state.k == params.K:
        return last_slot_zero_buffer(params, state)
    if state.L <= 0:
        return ZERO_ACTION
    u_lo = state.L / _zero_buffer_denominator(params, s_table, state)
    u_of = params.sqrt_ratio * state.cpu * math.sqrt(params.gain(state.channel)) * u_lo
    return Action(u_of, u_lo)


def expected_energy_zero_buffer(params: SystemParams, s_table: STable, x1: SlotState) -> float:
    """Minimum expected energy from ``x1`` to the deadline with no helper buffer.

    Valid for any slot; with ``x1`` at slot 1 and ``L = D`` it is the optimal total.
    """
    return params.alpha * x1.L**3 * _zero_buffer_denominator(params, s_table, x1) ** -2


def expected_energy_zero_buffer_stationary(params: SystemParams, s_table: STable | None = None) -> float:
    """Closed-form optimum averaged over stationary initial CPU and channel states."""
    from .chains import stationary_dist

    s_table = s_table or build_s_table_zero_buffer(params)
    pc = stationary_dist(params.cpu_chain)
    ph = stationary_dist(params.channel_chain)
    total = 0.0
    for c in (0, 1):
        for h in (0, 1):
            x1 = SlotState(c, h, params.D, 0, 1)
            total += pc[c] * ph[h] * expected_energy_zero_buffer(params, s_table, x1)
    return total


def last_slot_large_buffer(params: SystemParams, state: SlotState) -> Action:
    if state.k != params.K:
        raise WrongSlotError(f"last-slot rule called at slot {state.k} != K={params.K}")
    if not state.idle:
        return Action(0.0, state.L + state.q)
    return _idle_split(params, state.L, state.channel)


def large_buffer_policy(
    params: SystemParams, s_tilde: STable, v_table: VTable, state: SlotState
) -> Action:
    """Sub-optimal large-buffer rule (buffer constraint relaxed).

    When the buffered term pushes the closed-form total above ``L`` both
    components are scaled down to ``L`` together, keeping their ratio.
    """
    if state.k == params.K:
        return last_slot_large_buffer(params, state)
    V = v_table(state.k, state.cpu)
    work = state.L + V * state.q
    if state.L <= 0 or work <= 0:
        return ZERO_ACTION
    c, h = state.cpu, state.channel
    sqrt_h = math.sqrt(params.gain(h))
    denom = 1.0 + s_tilde.inv_sqrt(state.k, c, h) + params.sqrt_ratio * (1.0 - V) ** 1.5 * sqrt_h
    u_lo = work / denom
    u_of = params.sqrt_ratio * sqrt_h * math.sqrt(1.0 - V) * u_lo
    total = u_lo + u_of
    if total > state.L:
        u_lo *= state.L / total
        u_of *= state.L / total
    return Action(u_of, u_lo)


def tlbp_policy(
    params: SystemParams, s_tilde: STable, v_table: VTable, state: SlotState, reoptimize: bool = False
) -> Action:
    """Large-buffer rule with the offload clipped to the free buffer when busy.

    ``reoptimize`` is experimental: after clipping it gives the truncated bits to
    local computing only if that lowers the one-slot cost plus the large-buffer
    cost-to-go approximation. Off by default.
    """
    relaxed = large_buffer_policy(params, s_tilde, v_table, state)
    if state.idle or state.k == params.K:
        return relaxed
    headroom = max(params.Q - state.q, 0.0)
    u_of = min(max(relaxed.u_of, 0.0), headroom)
    if not reoptimize or u_of == relaxed.u_of:
        return Action(u_of, relaxed.u_lo)
    # busy slot, offload clipped: re-solve the local share for the reduced offload
    V = v_table(state.k, state.cpu)
    S = s_tilde(state.k, state.cpu, state.channel)
    # stationarity of alpha*u**3 + alpha*S*(L - u - u_of + V*(q + u_of))**3 in u
    rest = state.L - u_of + V * (state.q + u_of)
    u_lo = min(rest / (1.0 + 1.0 / math.sqrt(S)), state.L - u_of)
    return Action(u_of, max(u_lo, 0.0))


def zbp_policy(params: SystemParams, s_table: STable, state: SlotState) -> Action:
    return zero_buffer_policy(params, s_table, state)


def bacs_policy(
    params: SystemParams,
    q_threshold: float,
    state: SlotState,
    s_table: STable | None = None,
    s_tilde: STable | None = None,
    v_table: VTable | None = None,
) -> Action:
    if params.Q >= q_threshold:
        v_table = v_table or build_v_table(params)
        return tlbp_policy(params, s_tilde or build_s_tilde_table(params, v_table), v_table, state)
    return zbp_policy(params, s_table or build_s_table_zero_buffer(params), state)


def equal_allocation_policy(params: SystemParams, state: SlotState) -> Action:
    """Baseline: process D/K bits per slot, split by the single-slot rule.

    A busy helper with free buffer still takes min(single-slot offload share, Q - q).
    """
    if state.k == params.K:
        return last_slot_large_buffer(params, state)
    budget = min(params.D / params.K, state.L)
    if budget <= 0:
        return ZERO_ACTION
    split = _idle_split(params, budget, state.channel)
    if state.idle:
        return split
    u_of = min(split.u_of, max(params.Q - state.q, 0.0))
    return Action(u_of, budget - u_of)


def lemma4_lower_bound(params: SystemParams, state: SlotState, action: Action) -> float:
    """Separable lower bound on the expected last-slot energy after ``action`` at slot K-1."""
    if state.k != params.K - 1:
        raise WrongSlotError(f"bound applies at slot K-1={params.K - 1}, got {state.k}")
    V = (1 - state.cpu) * params.P00
    F = ((state.L - action.u_lo - action.u_of) + V * (state.q + action.u_of)) ** 3
    S = build_s_table_zero_buffer(params)(params.K - 1, state.cpu, state.channel)
    return params.alpha * F * S


def expected_last_slot_energy(params: SystemParams, state: SlotState, action: Action) -> float:
    """Exact expected slot-K energy after ``action`` at slot K-1, by enumerating (c_K, h_K)."""
    if state.k != params.K - 1:
        raise WrongSlotError(f"expected slot K-1={params.K - 1}, got {state.k}")
    L_next = state.L - action.u_lo - action.u_of
    q_next = (state.q + action.u_of) * (1 - state.cpu)
    total = 0.0
    for c2 in (0, 1):
        for h2 in (0, 1):
            p = transition_prob(params.cpu_chain, state.cpu, c2) * transition_prob(
                params.channel_chain, state.channel, h2
            )
            bits = L_next + (1 - c2) * q_next
            factor = 1.0 + params.sqrt_ratio * c2 * math.sqrt(params.gain(h2))
            total += p * params.alpha * bits**3 / factor**2
    return total


class Policy:
    """Common decision interface: ``policy(state) -> Action``."""

    name = "policy"
    needs_large_buffer = False

    def __init__(self, params: SystemParams):
        self.params = params

    def __call__(self, state: SlotState) -> Action:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class ZeroBufferOptimal(Policy):
    name = "zero-opt"

    def __init__(self, params):
        super().__init__(params)
        self.s_table = build_s_table_zero_buffer(params)

    def __call__(self, state):
        return zero_buffer_policy(self.params, self.s_table, state)


class ZBP(ZeroBufferOptimal):
    name = "zbp"


class LargeBufferSubOpt(Policy):
    name = "large-sub"
    needs_large_buffer = True

    def __init__(self, params):
        if params.Q < params.D:
            raise ValueError(f"large-buffer policy needs Q >= D, got Q={params.Q} < D={params.D}")
        super().__init__(params)
        self.v_table = build_v_table(params)
        self.s_tilde = build_s_tilde_table(params, self.v_table)

    def __call__(self, state):
        return large_buffer_policy(self.params, self.s_tilde, self.v_table, state)


class TLBP(Policy):
    name = "tlbp"

    def __init__(self, params, reoptimize: bool = False):
        super().__init__(params)
        self.reoptimize = reoptimize
        self.v_table = build_v_table(params)
        self.s_tilde = build_s_tilde_table(params, self.v_table)

    def __call__(self, state):
        return tlbp_policy(self.params, self.s_tilde, self.v_table, state, self.reoptimize)


class BACS(Policy):
    name = "bacs"

    def __init__(self, params, q_threshold: float):
        if not 0 <= q_threshold <= params.D:
            raise ValueError(f"switching threshold must lie in [0, D], got {q_threshold}")
        super().__init__(params)
        self.q_threshold = q_threshold
        self.chosen = TLBP(params) if params.Q >= q_threshold else ZBP(params)

    def __call__(self, state):
        return self.chosen(state)


class EqualAllocation(Policy):
    name = "equal"

    def __call__(self, state):
        return equal_allocation_policy(self.params, state)


class DpTable(Policy):
    name = "dp"

    def __init__(self, params, solution):
        super().__init__(params)
        self.solution = solution

    def __call__(self, state):
        from .dp import query

        return query(self.solution, state)


def make_policy(name: str, params: SystemParams, *, q_threshold: float | None = None, solution=None) -> Policy:
    """Build a policy by its CLI name."""
    if name == "zero-opt":
        return ZeroBufferOptimal(params)
    if name == "zbp":
        return ZBP(params)
    if name == "large-sub":
        return LargeBufferSubOpt(params)
    if name == "tlbp":
        return TLBP(params)
    if name == "bacs":
        if q_threshold is None:
            raise ValueError("bacs needs a switching threshold")
        return BACS(params, q_threshold)
    if name == "equal":
        return EqualAllocation(params)
    if name == "dp":
        if solution is None:
            from .dp import DpGrid, solve

            solution = solve(params, DpGrid())
        return DpTable(params, solution)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
