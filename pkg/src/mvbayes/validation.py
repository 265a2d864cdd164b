"""Exhaustive check of the analytic policy on a two-period binomial market.

The risky gross return is ``up`` with probability ``q`` and ``down``
otherwise, independently across the two periods, and the investor exits
after period 1 or 2 with probabilities ``p1`` and ``p2``.  Wealth after
period 2 depends on the first-period outcome through the feedback control
``u1``, so a policy is the triple ``(u0, u1_up, u1_down)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mvbayes import _core
from mvbayes.mv_optimizer import ExcessMoments, ExitDistribution, dp_coefficients, optimal_policy

__all__ = ["BinomialInstance", "GridResult", "scenario_objective", "analytic_controls", "grid_search"]


@dataclass(frozen=True)
class BinomialInstance:
    up: float = 1.12
    down: float = 0.94
    q: float = 0.55
    r0: float = 1.01
    p1: float = 0.3
    x0: float = 1.0

    @property
    def p2(self) -> float:
        return 1.0 - self.p1

    def moments(self) -> ExcessMoments:
        eu, ed = self.up - self.r0, self.down - self.r0
        mean = self.q * eu + (1 - self.q) * ed
        second = self.q * eu * eu + (1 - self.q) * ed * ed
        return ExcessMoments(np.full(2, mean), np.full(2, second), self.r0)

    def exit(self) -> ExitDistribution:
        return ExitDistribution(np.array([self.p1, self.p2]))


def scenario_objective(inst: BinomialInstance, u0: float, u1_up: float, u1_down: float,
                       risk_aversion: float) -> Tuple[float, float, float]:
    """``(E, Var, E - omega Var)`` by enumerating every (exit, return path) scenario."""
    E = E2 = 0.0
    for exit_at, p_exit in ((1, inst.p1), (2, inst.p2)):
        for first, p_first in ((inst.up, inst.q), (inst.down, 1 - inst.q)):
            x1 = inst.r0 * inst.x0 + (first - inst.r0) * u0
            u1 = u1_up if first == inst.up else u1_down
            for second, p_second in ((inst.up, inst.q), (inst.down, 1 - inst.q)):
                x = x1 if exit_at == 1 else inst.r0 * x1 + (second - inst.r0) * u1
                w = p_exit * p_first * p_second
                E += w * x
                E2 += w * x * x
    var = E2 - E * E
    return E, var, E - risk_aversion * var


def analytic_controls(inst: BinomialInstance, risk_aversion: float) -> Tuple[float, float, float]:
    """``(u0, u1_up, u1_down)`` from the optimal affine policy."""
    policy = optimal_policy(dp_coefficients(inst.moments(), inst.exit()), inst.moments(),
                            risk_aversion, inst.x0)
    u0 = float(policy.control(0, inst.x0))
    x1u = inst.r0 * inst.x0 + (inst.up - inst.r0) * u0
    x1d = inst.r0 * inst.x0 + (inst.down - inst.r0) * u0
    return u0, float(policy.control(1, x1u)), float(policy.control(1, x1d))


@dataclass(frozen=True)
class GridResult:
    best: float
    controls: Tuple[float, float, float]
    spacing: float
    cell_spread: float


def _branch_tables(inst: BinomialInstance, grid: np.ndarray, first: float):
    """Contributions to ``E`` and ``E x^2`` of the scenarios starting with ``first``."""
    pf = inst.q if first == inst.up else 1 - inst.q
    x1 = inst.r0 * inst.x0 + (first - inst.r0) * grid  # indexed by u0
    E = np.zeros((grid.size, grid.size))
    E2 = np.zeros_like(E)
    E += inst.p1 * pf * x1[:, None]
    E2 += inst.p1 * pf * (x1 * x1)[:, None]
    for second, ps in ((inst.up, inst.q), (inst.down, 1 - inst.q)):
        x2 = inst.r0 * x1[:, None] + (second - inst.r0) * grid[None, :]
        E += inst.p2 * pf * ps * x2
        E2 += inst.p2 * pf * ps * x2 * x2
    return E, E2


def grid_search(inst: BinomialInstance, risk_aversion: float, lower: float, upper: float,
                points: int = 2001) -> GridResult:
    """Best policy on a ``points``-per-control grid over ``[lower, upper]``.

    ``cell_spread`` is the largest objective change between the best grid
    point and its axis neighbours, the resolution of the search.
    """
    grid = np.linspace(lower, upper, points)
    Eu, E2u = _branch_tables(inst, grid, inst.up)
    Ed, E2d = _branch_tables(inst, grid, inst.down)
    _, i, j, l = _core.max_two_state_objective(Eu, E2u, Ed, E2d, risk_aversion)
    best = scenario_objective(inst, grid[i], grid[j], grid[l], risk_aversion)[2]
    spread = 0.0
    for di, dj, dl in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
        for s in (-1, 1):
            a, b, c = i + s * di, j + s * dj, l + s * dl
            if 0 <= a < points and 0 <= b < points and 0 <= c < points:
                nb = scenario_objective(inst, grid[a], grid[b], grid[c], risk_aversion)[2]
                spread = max(spread, abs(best - nb))
    return GridResult(float(best), (float(grid[i]), float(grid[j]), float(grid[l])), float(grid[1] - grid[0]), spread)
