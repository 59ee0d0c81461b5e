import numpy as np
import pytest
from scipy import integrate

from relpov import dists
from relpov.errors import DomainError
from relpov.transfer import (
    apply_transfer,
    plan_transfer,
    plan_transfer_empirical,
    post_transfer_headcount,
    transfer_budget_report,
    transfer_map,
)

LN = dists.Lognormal(0.0, 1.0)


@pytest.fixture(scope="module")
def ln_plan():
    return plan_transfer(LN, 0.5, 0.8)


@pytest.fixture(scope="module")
def ln_big():
    return dists.sample(LN, 10_000, 515)


def test_lognormal_plan_values(ln_plan):
    assert ln_plan.poverty_line == pytest.approx(0.5)
    assert ln_plan.shortfall == pytest.approx(0.1946243, abs=1e-6)
    assert ln_plan.cutoff == pytest.approx(2.320125, abs=1e-5)
    assert ln_plan.mean_above == pytest.approx(4.640498, abs=1e-5)
    assert ln_plan.rate == pytest.approx(0.04194, abs=5e-5)
    assert ln_plan.is_monotone


def test_conditional_means_by_quadrature(ln_plan):
    L, c = ln_plan.poverty_line, ln_plan.cutoff
    num, _ = integrate.quad(lambda x: x * LN.pdf(x), 0, L)
    assert ln_plan.mean_below == pytest.approx(num / LN.cdf(L), rel=1e-8)
    num, _ = integrate.quad(lambda x: x * LN.pdf(x), c, np.inf)
    assert ln_plan.mean_above == pytest.approx(num / (1 - LN.cdf(c)), rel=1e-7)


def test_uniform_rates_coincide():
    model = dists.Uniform(0.0, 10.0)
    plan = plan_transfer(model, 0.5, 0.75)
    report = transfer_budget_report(model, plan)
    # T = 1.25, E[X | X > 7.5] = 8.75, H = 0.25 and 1 - u_c = 0.25
    assert plan.rate == pytest.approx(1.25 / 8.75)
    assert report.rate_weighted == pytest.approx(plan.rate)


def test_budget_report_lognormal(ln_plan):
    r = transfer_budget_report(LN, ln_plan)
    assert r.rate_weighted == pytest.approx(0.05119, abs=5e-5)
    assert r.deficit_per_head == pytest.approx(r.headcount * ln_plan.shortfall)
    assert r.revenue_per_head == pytest.approx(0.2 * ln_plan.shortfall)
    assert set(r.as_dict()) >= {"rate_per_capita", "rate_weighted"}


def test_rate_directions():
    rates = [plan_transfer(LN, 0.5, u).rate for u in (0.6, 0.7, 0.8, 0.9, 0.95)]
    assert rates == pytest.approx([0.06113, 0.05186, 0.04194, 0.03033, 0.02274], abs=5e-5)
    assert np.all(np.diff(rates) < 0)
    weighted = [transfer_budget_report(LN, plan_transfer(LN, 0.5, u)).rate_weighted
                for u in (0.6, 0.7, 0.8, 0.9, 0.95)]
    assert np.all(np.diff(weighted) > 0)
    by_p = [plan_transfer(LN, p, 0.8).rate for p in (0.3, 0.4, 0.5, 0.6)]
    assert np.all(np.diff(by_p) > 0)


@pytest.mark.parametrize("u_c", [0.5, 0.3, 1.0, 1.2])
def test_cutoff_domain(u_c):
    with pytest.raises(DomainError):
        plan_transfer(LN, 0.5, u_c)


@pytest.mark.parametrize("model", [LN, dists.Exponential(1.0), dists.Uniform(0.0, 1.0),
                                   dists.ParetoII(2.5, 1.2), dists.Dagum(4.273, 14.28, 0.36)],
                         ids=str)
@pytest.mark.parametrize("p,u_c", [(0.99, 0.51), (0.99, 0.999), (0.5, 0.8)])
def test_model_plans_are_feasible(model, p, u_c):
    # T < L <= median < c <= E[X | X > c], so r stays below one
    assert 0.0 < plan_transfer(model, p, u_c).rate < 1.0


def test_transfer_map_regions(ln_plan):
    x = np.array([0.1, 0.5, 0.7, 1.0, ln_plan.cutoff, 3.0, 10.0])
    y = transfer_map(x, ln_plan)
    assert y[:2].tolist() == [0.5, 0.5]
    assert y[2:5].tolist() == x[2:5].tolist()
    assert y[5:] == pytest.approx((1 - ln_plan.rate) * x[5:])
    assert np.all(y[x > ln_plan.cutoff] <= x[x > ln_plan.cutoff])


def test_apply_transfer(ln_plan, ln_big):
    out = apply_transfer(ln_big, ln_plan)
    assert out.values.min() >= ln_plan.poverty_line
    assert np.all(np.diff(out.values) >= 0)
    # taxed incomes just above c can drop below untaxed ones, hence the re-sort
    mapped = transfer_map(ln_big.values, ln_plan)
    assert np.any(np.diff(mapped) < 0)
    assert np.array_equal(out.values, np.sort(mapped))
    h = post_transfer_headcount(out, ln_plan)
    assert h["strict_below_line"] == 0.0
    assert h["at_or_below_line"] == pytest.approx(np.mean(ln_big.values <= 0.5))
    # lifted incomes sit at the model line, below the relative line iff the sample median exceeds 1
    lifted = np.mean(ln_big.values <= 0.5)
    assert h["relative_strict_below"] == (lifted if out.median > 1.0 else 0.0)


def test_empirical_plan_clears_relative_line(ln_big):
    plan = plan_transfer_empirical(ln_big, 0.5, 0.8)
    out = apply_transfer(ln_big, plan)
    assert out.median == pytest.approx(ln_big.median)
    h = post_transfer_headcount(out, plan)
    assert h["relative_strict_below"] == 0.0
    assert h["strict_below_line"] == 0.0
    # the taxes raised cover the sample shortfall exactly
    v = ln_big.values
    raised = plan.rate * v[v > plan.cutoff].sum()
    need = (plan.poverty_line - v[v < plan.poverty_line]).sum()
    assert raised / v[v > plan.cutoff].size == pytest.approx(need / v[v < plan.poverty_line].size)


def test_non_monotone_plan_rejected(ln_plan):
    from dataclasses import replace

    bad = replace(ln_plan, rate=0.9)
    assert not bad.is_monotone
    with pytest.raises(DomainError):
        apply_transfer(dists.sample(LN, 50, 1), bad)


def test_plan_as_dict(ln_plan):
    d = ln_plan.as_dict()
    assert d["rate"] == ln_plan.rate and d["cutoff_quantile"] == 0.8
