"""System parameters, MDP state/action records and per-slot energy costs."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property

from .chains import ChannelState, CpuState, TwoStateChain


class InfeasibleActionError(ValueError):
    """An action violates the data, demand-computing or buffer constraints."""


@dataclass(frozen=True)
class SystemParams:
    """Physical and statistical constants of one offloading scenario.

    Attributes:
        D: task size in bits.
        K: number of slots before the deadline.
        t0: slot duration in seconds.
        gamma: CPU energy coefficient (energy per cycle is ``gamma * f**2``).
        w: CPU cycles needed per bit.
        lambda0: transmission energy coefficient (bandwidth and noise folded in).
        gain_good, gain_bad: channel power gains of the good and bad states.
        cpu_chain: stay probabilities (P00 busy, P11 idle) of the helper CPU.
        channel_chain: stay probabilities (Pgg, Pbb) of the channel.
        Q: helper buffer size in bits.
    """

    D: float = 3000
    K: int = 5
    t0: float = 0.1
    gamma: float = 1e-28
    w: float = 1e5
    lambda0: float = 1e-15
    gain_good: float = 1e-3
    gain_bad: float = 1e-5
    cpu_chain: TwoStateChain = field(default_factory=lambda: TwoStateChain(0.7, 0.8))
    channel_chain: TwoStateChain = field(default_factory=lambda: TwoStateChain(0.8, 0.7))
    Q: float = 300

    def __post_init__(self):
        if not self.D >= 0:
            raise ValueError(f"D must be non-negative, got {self.D}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        for name in ("t0", "gamma", "w", "lambda0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.gain_good > self.gain_bad > 0:
            raise ValueError("channel gains must satisfy gain_good > gain_bad > 0")
        if not self.Q >= 0:
            raise ValueError(f"Q must be non-negative, got {self.Q}")

    @cached_property
    def alpha(self) -> float:
        """Local computing coefficient: energy of ``u`` local bits is ``alpha * u**3``."""
        return self.gamma * self.w**3 / self.t0**2

    @cached_property
    def lam(self) -> float:
        """Offloading coefficient: energy of ``u`` offloaded bits is ``lam * u**3 / gain``."""
        return self.lambda0 / self.t0**2

    @cached_property
    def sqrt_ratio(self) -> float:
        """sqrt(alpha / lam), the scale of every offload-to-local ratio."""
        return math.sqrt(self.alpha / self.lam)

    @property
    def P00(self) -> float:
        return self.cpu_chain.stay0

    @property
    def P11(self) -> float:
        return self.cpu_chain.stay1

    @property
    def Pgg(self) -> float:
        return self.channel_chain.stay0

    @property
    def Pbb(self) -> float:
        return self.channel_chain.stay1

    def gain(self, h: int) -> float:
        return self.gain_good if h == ChannelState.GOOD else self.gain_bad

    def with_(self, **changes) -> "SystemParams":
        """Copy with fields replaced. Accepts P00/P11/Pgg/Pbb shorthands."""
        cpu = changes.pop("P00", None), changes.pop("P11", None)
        chan = changes.pop("Pgg", None), changes.pop("Pbb", None)
        if cpu != (None, None):
            changes["cpu_chain"] = TwoStateChain(
                self.P00 if cpu[0] is None else cpu[0], self.P11 if cpu[1] is None else cpu[1]
            )
        if chan != (None, None):
            changes["channel_chain"] = TwoStateChain(
                self.Pgg if chan[0] is None else chan[0], self.Pbb if chan[1] is None else chan[1]
            )
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cpu_chain"] = {"P00": self.P00, "P11": self.P11}
        d["channel_chain"] = {"Pgg": self.Pgg, "Pbb": self.Pbb}
        return d

    def digest(self) -> str:
        """Short stable hash of all parameter values."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class SlotState:
    """MDP state at the start of slot ``k`` (1-based)."""

    cpu: int
    channel: int
    L: float
    q: float
    k: int

    @property
    def idle(self) -> bool:
        return self.cpu == CpuState.IDLE


@dataclass(frozen=True)
class Action:
    u_of: float
    u_lo: float

    def __post_init__(self):
        if self.u_of < 0 or self.u_lo < 0:
            raise ValueError(f"action components must be non-negative, got {self}")

    @property
    def total(self) -> float:
        return self.u_of + self.u_lo


ZERO_ACTION = Action(0.0, 0.0)


def local_energy(params: SystemParams, u_lo: float) -> float:
    if u_lo < 0:
        raise ValueError(f"local bits must be non-negative, got {u_lo}")
    return params.alpha * u_lo**3


def offload_energy(params: SystemParams, u_of: float, gain: float) -> float:
    if gain <= 0:
        raise ValueError(f"channel gain must be positive, got {gain}")
    if u_of < 0:
        raise ValueError(f"offloaded bits must be non-negative, got {u_of}")
    return params.lam * u_of**3 / gain


def slot_cost(params: SystemParams, state: SlotState, action: Action) -> float:
    return local_energy(params, action.u_lo) + offload_energy(
        params, action.u_of, params.gain(state.channel)
    )


def check_feasible(params: SystemParams, state: SlotState, action: Action, tol: float = 0.0) -> None:
    """Raise InfeasibleActionError unless ``action`` is admissible in ``state``.

    ``tol`` is an absolute slack in bits for real-valued actions.
    """
    u_of, u_lo = action.u_of, action.u_lo
    where = f"slot {state.k}"
    if u_of < -tol or u_lo < -tol:
        raise InfeasibleActionError(f"{where}: negative action {action}")
    if state.k == params.K:
        if not state.idle:
            if abs(u_of) > tol or abs(u_lo - (state.L + state.q)) > tol:
                raise InfeasibleActionError(
                    f"{where}: demand-computing requires (0, L+q)=(0, {state.L + state.q}), got {action}"
                )
            return
        if abs(u_of + u_lo - state.L) > tol:
            raise InfeasibleActionError(
                f"{where}: last idle slot must process exactly L={state.L} bits, got {u_of + u_lo}"
            )
        return
    if u_of + u_lo > state.L + tol:
        raise InfeasibleActionError(f"{where}: data constraint u_of+u_lo <= L={state.L} violated by {action}")
    if not state.idle and u_of > params.Q - state.q + tol:
        raise InfeasibleActionError(
            f"{where}: buffer constraint u_of <= Q-q={params.Q - state.q} violated by u_of={u_of}"
        )


def next_state(state: SlotState, action: Action, next_cpu: int, next_channel: int) -> SlotState:
    """Apply the remaining-data and buffer dynamics, then move to slot k+1."""
    L = state.L - action.u_of - action.u_lo
    q = 0 if state.idle else state.q + action.u_of
    return SlotState(next_cpu, next_channel, L, q, state.k + 1)
