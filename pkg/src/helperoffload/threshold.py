"""Bisection search for the BACS switching threshold."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .energy import SystemParams
from .policies import TLBP, ZBP
from .simulator import evaluate

log = logging.getLogger(__name__)


@dataclass
class ThresholdResult:
    q_threshold: float
    iterations: int
    gap: float
    episodes: int
    base_seed: int
    converged: bool
    zbp_energy: float
    eps: float
    probes: list[tuple[float, float]] = field(default_factory=list)
    bracket: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "q_threshold": self.q_threshold,
            "iterations": self.iterations,
            "gap_J": self.gap,
            "episodes": self.episodes,
            "base_seed": self.base_seed,
            "converged": self.converged,
            "zbp_energy_J": self.zbp_energy,
            "eps_J": self.eps,
            "probes": [{"Q": q, "tlbp_energy_J": e} for q, e in self.probes],
            "bracket": self.bracket,
        }


def find_q_threshold(
    params: SystemParams,
    n: int = 10_000,
    eps: float | None = None,
    max_iter: int = 30,
    base_seed: int = 0,
    *,
    rel_eps: float = 0.005,
    step: int = 1,
    rounding: bool = True,
) -> ThresholdResult:
    """Bisect Q in [0, D/2] for the buffer size where TLBP and ZBP tie.

    Every probe reuses the same episode seeds, so the comparison is paired.
    ``eps`` is an absolute energy tolerance; when omitted it is ``rel_eps`` times
    the ZBP energy.
    """
    if n < 1 or max_iter < 1:
        raise ValueError("n and max_iter must be at least 1")
    if eps is not None and eps <= 0:
        raise ValueError("eps must be positive")

    e_z = evaluate(params, ZBP(params), n, base_seed, rounding=rounding).mean_energy
    eps = rel_eps * e_z if eps is None else eps
    cache: dict[float, float] = {}

    def e_t(q: float) -> float:
        if q not in cache:
            p = params.with_(Q=q)
            cache[q] = evaluate(p, TLBP(p), n, base_seed, rounding=rounding).mean_energy
        return cache[q]

    def snap(q: float) -> float:
        return float(step * round(q / step))

    lo, hi = 0.0, params.D / 2
    bracket = {
        "Q_low": snap(lo),
        "tlbp_low_J": e_t(snap(lo)),
        "Q_high": snap(hi),
        "tlbp_high_J": e_t(snap(hi)),
        "zbp_J": e_z,
    }
    log.info(
        "bracket: E_T(%g)=%.6g, E_T(%g)=%.6g, E_Z=%.6g",
        bracket["Q_low"], bracket["tlbp_low_J"], bracket["Q_high"], bracket["tlbp_high_J"], e_z,
    )

    probes = []
    best = None
    for it in range(1, max_iter + 1):
        qm = snap((lo + hi) / 2)
        et = e_t(qm)
        probes.append((qm, et))
        gap = abs(et - e_z)
        if best is None or gap < best[1]:
            best = (qm, gap)
        if gap <= eps:
            return ThresholdResult(qm, it, gap, n, base_seed, True, e_z, eps, probes, bracket)
        if et < e_z:
            hi = (lo + hi) / 2
        else:
            lo = (lo + hi) / 2
    log.warning("threshold search hit max_iter=%d without |E_T - E_Z| <= %g", max_iter, eps)
    return ThresholdResult(best[0], max_iter, best[1], n, base_seed, False, e_z, eps, probes, bracket)
