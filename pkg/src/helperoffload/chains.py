"""Two-state stationary Markov chains for the helper CPU and the wireless channel."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class CpuState(enum.IntEnum):
    """Helper CPU occupancy. The integer value multiplies expressions directly."""

    BUSY = 0
    IDLE = 1


class ChannelState(enum.IntEnum):
    """Gilbert-Elliott channel label. Index 0 is the good state."""

    GOOD = 0
    BAD = 1


@dataclass(frozen=True)
class TwoStateChain:
    """Stationary two-state chain given by its two stay (self-transition) probabilities.

    State indices are 0 and 1. For the CPU chain index 0 is busy (P00) and 1 is
    idle (P11); for the channel chain index 0 is good (Pgg) and 1 is bad (Pbb).
    """

    stay0: float
    stay1: float

    def __post_init__(self):
        for name in ("stay0", "stay1"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be a probability in [0, 1], got {p}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.stay0, 1.0 - self.stay0], [1.0 - self.stay1, self.stay1]])

    def stay(self, state: int) -> float:
        return self.stay0 if state == 0 else self.stay1


def transition_prob(chain: TwoStateChain, frm: int, to: int) -> float:
    """Entry ``(frm, to)`` of the chain's transition matrix."""
    if frm not in (0, 1) or to not in (0, 1):
        raise ValueError(f"state indices must be 0 or 1, got ({frm}, {to})")
    stay = chain.stay(frm)
    return stay if frm == to else 1.0 - stay


def sample_next(chain: TwoStateChain, frm: int, rng) -> int:
    """Draw the next state. ``rng`` is a numpy Generator or a float variate in [0, 1)."""
    u = rng if isinstance(rng, float) else rng.random()
    return frm if u < chain.stay(frm) else 1 - frm


def stationary_dist(chain: TwoStateChain) -> tuple[float, float]:
    leave0 = 1.0 - chain.stay0
    leave1 = 1.0 - chain.stay1
    if leave0 + leave1 == 0.0:
        raise ValueError("chain with both states absorbing has no unique stationary distribution")
    pi0 = leave1 / (leave0 + leave1)
    return pi0, 1.0 - pi0


def sample_initial(chain: TwoStateChain, rng) -> int:
    """Draw a state from the stationary distribution."""
    pi0, _ = stationary_dist(chain)
    u = rng if isinstance(rng, float) else rng.random()
    return 0 if u < pi0 else 1


def sample_path(chain: TwoStateChain, length: int, rng, initial: int | None = None) -> list[int]:
    """State sequence of ``length`` slots; the first state is stationary unless ``initial`` is given.

    Consumes exactly ``length`` variates from ``rng`` regardless of ``initial`` so that
    overriding the start state does not shift the rest of the stream.
    """
    u = rng.random(length)
    state = sample_initial(chain, float(u[0])) if initial is None else int(initial)
    path = [state]
    for k in range(1, length):
        state = sample_next(chain, state, float(u[k]))
        path.append(state)
    return path
