import pytest

from mvbayes.validation import BinomialInstance, analytic_controls, grid_search, scenario_objective


def test_scenario_probabilities_sum_to_one():
    inst = BinomialInstance()
    E, var, _ = scenario_objective(inst, 0.0, 0.0, 0.0, 1.0)
    # riskless policy: wealth r0 or r0^2 depending on the exit date only
    assert E == pytest.approx(inst.p1 * inst.r0 + inst.p2 * inst.r0**2)
    assert var == pytest.approx(inst.p1 * inst.p2 * (inst.r0**2 - inst.r0) ** 2)


@pytest.mark.parametrize("omega", [2.0, 5.0])
def test_coarse_grid_brackets_analytic_policy(omega):
    inst = BinomialInstance(up=1.08, down=0.97, q=0.5, r0=1.005, p1=0.4)
    u = analytic_controls(inst, omega)
    g = grid_search(inst, omega, -6.0, 6.0, points=241)
    analytic = scenario_objective(inst, *u, omega)[2]
    assert analytic >= g.best - 1e-12
    assert analytic - g.best <= g.cell_spread
    assert all(abs(a - b) <= g.spacing for a, b in zip(u, g.controls))
