"""Exact finite-horizon DP over whole-bit states and actions.

Values are tabulated as ``value[k-1, c, h, i, j]`` where the remaining data is
``L = i * step`` and the buffered data is ``q = j * step``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chains import transition_prob
from .energy import Action, SlotState, SystemParams, check_feasible, next_state


class BudgetExceededError(MemoryError):
    """The state-action space is larger than the configured budget."""

    def __init__(self, count: float, budget: float):
        super().__init__(
            f"DP needs about {count:.3g} state-action evaluations, budget is {budget:.3g}; "
            "shrink D (or Q) or coarsen the bit step"
        )
        self.count = count
        self.budget = budget


class OffGridError(ValueError):
    pass


@dataclass(frozen=True)
class DpGrid:
    step: int = 1
    budget: float = 5e8

    def __post_init__(self):
        if int(self.step) != self.step or self.step < 1:
            raise ValueError(f"bit step must be a positive integer, got {self.step}")

    def axes(self, params: SystemParams) -> tuple[int, int]:
        """Number of points on the L and q axes."""
        for name, v in (("D", params.D), ("Q", params.Q)):
            if v % self.step:
                raise ValueError(f"{name}={v} is not a multiple of the bit step {self.step}")
        nL = int(params.D) // self.step + 1
        nQ = min(int(params.Q), int(params.D)) // self.step + 1
        return nL, nQ


@dataclass(frozen=True)
class DpSolution:
    params: SystemParams
    step: int
    value: np.ndarray
    u_of: np.ndarray
    u_lo: np.ndarray

    def index(self, state: SlotState) -> tuple[int, int, int, int, int]:
        K, _, _, nL, nQ = self.value.shape
        i, ri = divmod(state.L, self.step)
        j, rj = divmod(state.q, self.step)
        if ri or rj or not (0 <= i < nL and 0 <= j < nQ and 1 <= state.k <= K):
            raise OffGridError(f"state {state} is not on the solved grid")
        return state.k - 1, int(state.cpu), int(state.channel), int(i), int(j)

    def value_at(self, state: SlotState) -> float:
        return float(self.value[self.index(state)])

    def initial_value(self, c: int, h: int) -> float:
        return float(self.value[0, c, h, -1, 0])


def estimate_work(params: SystemParams, grid: DpGrid) -> float:
    """Rough count of (state, action) pairs visited by backward induction."""
    nL, nQ = grid.axes(params)
    return float(params.K) * 4 * nQ * nL * (nL + 1) * (nL + 2) / 6


def feasible_actions(params: SystemParams, state: SlotState, step: int = 1) -> list[Action]:
    """All whole-step actions admissible in ``state``."""
    L, q = int(state.L), int(state.q)
    if state.k == params.K:
        if not state.idle:
            return [Action(0, L + q)]
        return [Action(of, L - of) for of in range(0, L + 1, step)]
    cap = L if state.idle else min(L, int(params.Q) - q)
    return [
        Action(of, lo)
        for of in range(0, max(cap, -1) + 1, step)
        for lo in range(0, L - of + 1, step)
    ]


def transition(params: SystemParams, state: SlotState, action: Action, next_c: int, next_h: int) -> SlotState:
    check_feasible(params, state, action)
    return next_state(state, action, next_c, next_h)


def _weights(params: SystemParams) -> np.ndarray:
    w = np.empty((2, 2, 2, 2))
    for c in (0, 1):
        for h in (0, 1):
            for c2 in (0, 1):
                for h2 in (0, 1):
                    w[c, h, c2, h2] = transition_prob(params.cpu_chain, c, c2) * transition_prob(
                        params.channel_chain, h, h2
                    )
    return w


def _expected_next(w_ch: np.ndarray, v_next: np.ndarray) -> np.ndarray:
    """Sum over (c', h') of weight * next value, accumulated in a fixed order."""
    out = np.zeros(v_next.shape[2:])
    for c2 in (0, 1):
        for h2 in (0, 1):
            out = out + w_ch[c2, h2] * v_next[c2, h2]
    return out


def q_value(offload_e: float, local_e: float, expected_next: float):
    """Bellman objective for one action; the grouping is fixed so that recomputation is bit-exact."""
    return offload_e + (local_e + expected_next)


def solve(params: SystemParams, grid: DpGrid = DpGrid()) -> DpSolution:
    """Backward induction from slot K to 1 with exact expectations.

    Ties go to the smallest offload, then the smallest local share.
    """
    work = estimate_work(params, grid)
    if work > grid.budget:
        raise BudgetExceededError(work, grid.budget)
    nL, nQ = grid.axes(params)
    K, s = int(params.K), grid.step
    bits = np.arange(nL) * float(s)
    local = params.alpha * bits**3
    off = {h: params.lam * bits**3 / params.gain(h) for h in (0, 1)}
    w = _weights(params)

    value = np.zeros((K, 2, 2, nL, nQ))
    a_of = np.zeros((K, 2, 2, nL, nQ), dtype=np.int64)
    a_lo = np.zeros((K, 2, 2, nL, nQ), dtype=np.int64)

    i_idx = np.arange(nL)
    j_idx = np.arange(nQ)
    # tri[r, u] is True for u <= r: local share u out of r remaining steps
    tri = i_idx[None, :] <= i_idx[:, None]
    diff = np.clip(i_idx[:, None] - i_idx[None, :], 0, None)

    for k in range(K, 0, -1):
        for c in (0, 1):
            for h in (0, 1):
                if k == K:
                    ev = np.zeros((nL, nQ))
                else:
                    ev = _expected_next(w[c, h], value[k])
                if k == K and c == 0:
                    # demand computing: everything left plus the buffer, locally
                    tot = i_idx[:, None] + j_idx[None, :]
                    value[k - 1, c, h] = params.alpha * (tot * float(s)) ** 3
                    a_lo[k - 1, c, h] = tot * s
                    continue
                if c == 1:
                    # idle helper drains the buffer; only q' = 0 matters
                    if k == K:
                        # must finish: local share is r - 0 exactly
                        wv = q_value(0.0, local, 0.0)
                        wu = i_idx.copy()
                    else:
                        m = np.where(tri, local[None, :] + ev[diff, 0], np.inf)
                        wu = np.argmin(m, axis=1)
                        wv = m[i_idx, wu]
                    # choose offload o in 0..L; local comes from wu[L - o]
                    o = i_idx[None, :]
                    Lg = i_idx[:, None]
                    valid = o <= Lg
                    r = np.clip(Lg - o, 0, None)
                    tot = np.where(valid, off[h][None, :] + wv[r], np.inf)
                    best_o = np.argmin(tot, axis=1)
                    v = tot[i_idx, best_o]
                    value[k - 1, c, h] = v[:, None]
                    a_of[k - 1, c, h] = (best_o * s)[:, None]
                    a_lo[k - 1, c, h] = (wu[i_idx - best_o] * s)[:, None]
                    continue
                # busy, k < K: offload o goes to the buffer, q' = q + o
                # W[r, j'] = min_u local(u) + ev(r - u, j')
                m = np.where(tri[:, :, None], local[None, :, None] + ev[diff, :], np.inf)
                wu = np.argmin(m, axis=1)  # (nL, nQ)
                wv = np.take_along_axis(m, wu[:, None, :], axis=1)[:, 0, :]
                o = i_idx[None, None, :]
                Lg = i_idx[:, None, None]
                Jg = j_idx[None, :, None]
                valid = (o <= Lg) & (Jg + o < nQ) & ((Jg + o) * s <= params.Q)
                r = np.clip(Lg - o, 0, None)
                jn = np.clip(Jg + o, 0, nQ - 1)
                r_b, jn_b = np.broadcast_arrays(r, jn)
                tot = np.where(valid, off[h][o] + wv[r_b, jn_b], np.inf)
                best_o = np.argmin(tot, axis=2)
                v = np.take_along_axis(tot, best_o[:, :, None], axis=2)[:, :, 0]
                value[k - 1, c, h] = v
                a_of[k - 1, c, h] = best_o * s
                r_best = i_idx[:, None] - best_o
                a_lo[k - 1, c, h] = wu[r_best, np.clip(j_idx[None, :] + best_o, 0, nQ - 1)] * s
    return DpSolution(params, s, value, a_of, a_lo)


def query(solution: DpSolution, state: SlotState) -> Action:
    idx = solution.index(state)
    return Action(float(solution.u_of[idx]), float(solution.u_lo[idx]))


def bellman_recompute(solution: DpSolution, state: SlotState) -> tuple[float, Action]:
    """Brute-force minimization over :func:`feasible_actions` at one state."""
    params, s = solution.params, solution.step
    best, best_a = math.inf, None
    w = _weights(params)
    for a in feasible_actions(params, state, s):
        lo_e = params.alpha * float(a.u_lo) ** 3
        of_e = params.lam * float(a.u_of) ** 3 / params.gain(state.channel)
        if state.k == params.K:
            ev = 0.0
        else:
            nxt = next_state(state, a, 0, 0)
            i, j = int(nxt.L) // s, int(nxt.q) // s
            ev = 0.0
            for c2 in (0, 1):
                for h2 in (0, 1):
                    ev = ev + w[state.cpu, state.channel, c2, h2] * solution.value[state.k, c2, h2, i, j]
        if state.k == params.K and not state.idle:
            v = lo_e
        else:
            v = q_value(of_e, lo_e, ev)
        if v < best:
            best, best_a = v, a
    return best, best_a


def save(solution: DpSolution, path) -> None:
    np.savez_compressed(
        path,
        value=solution.value,
        u_of=solution.u_of,
        u_lo=solution.u_lo,
        step=solution.step,
        params=np.array(_params_json(solution.params)),
    )


def load(path) -> DpSolution:
    from .config import params_from_dict
    import json

    with np.load(path) as z:
        params = params_from_dict(json.loads(str(z["params"])))
        return DpSolution(params, int(z["step"]), z["value"], z["u_of"], z["u_lo"])


def _params_json(params: SystemParams) -> str:
    import json

    return json.dumps(params.to_dict(), sort_keys=True)
