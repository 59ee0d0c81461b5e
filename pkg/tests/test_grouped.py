import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relpov import dists
from relpov.errors import DomainError, IngestError, UnsupportedMethodError
from relpov.estimate import headcount_estimate
from relpov.grouped import (
    DECILES,
    GroupedTable,
    fit_grouped,
    gld_fit,
    gld_fit_grouped,
    grouped_bootstrap_interval,
    grouped_headcount,
    li_cdf,
    li_fit,
    li_quantile,
    reconstruct_sample,
)
from relpov.intervals import BootstrapConfig
from relpov.ingest import AU_INCOME_YEARS, fixture_path, ingest, read_grouped


@pytest.fixture
def two_bin():
    # uniform-ish body and an exponential tail with scale 2
    return GroupedTable.from_bins([(0.0, 1.0, 50, 0.5), (1.0, None, 50, 3.0)])


@pytest.fixture(scope="module")
def au2014():
    return read_grouped(fixture_path("au_income_2014.csv"))


# Linear interpolation -------------------------------------------------------

def test_li_single_bin_coefficients():
    fit = li_fit(GroupedTable.from_bins([(0.0, 1.0, 1, 7.0 / 12.0)]))
    assert fit.alpha[0] == pytest.approx(0.5)
    assert fit.beta[0] == pytest.approx(1.0)
    assert fit.segments == [(pytest.approx(0.5), pytest.approx(1.0), (0.0, 1.0))]
    # density 0.5 + x has cdf 0.5 x + 0.5 x^2
    assert li_cdf(fit, 0.4) == pytest.approx(0.2 + 0.08)


def test_li_tail(two_bin):
    fit = li_fit(two_bin)
    assert fit.theta == pytest.approx(2.0)
    assert fit.pdf(1.0) == pytest.approx(0.25)
    assert fit.pdf(np.array([1.0 + 2.0]))[0] == pytest.approx(0.25 * math.exp(-1.0))
    assert fit.quantile(0.75) == pytest.approx(1.0 + 2.0 * math.log(2.0))
    assert li_cdf(fit, 1e6) == pytest.approx(1.0)
    assert li_cdf(fit, -1.0) == 0.0


def test_li_cdf_at_edges_matches_cumulative_shares():
    g = GroupedTable.from_bins([(0, 2, 10, 1.2), (2, 5, 30, 3.1), (5, 9, 40, 6.4), (9, None, 20, 14.0)])
    fit = li_fit(g)
    assert li_cdf(fit, np.array([2.0, 5.0, 9.0])) == pytest.approx([0.1, 0.4, 0.8], abs=1e-12)
    for j, (lo, hi) in enumerate(zip(g.lower[:-1], g.upper[:-1])):
        xs = lo + (np.arange(20000) + 0.5) * (hi - lo) / 20000
        dens = fit.pdf(xs)
        bin_mean = np.sum(xs * dens) / np.sum(dens)
        assert bin_mean == pytest.approx(g.means[j], rel=1e-6)


def test_li_clipped_bin_keeps_mass():
    # a mean close to the lower edge forces the linear density negative at the top
    g = GroupedTable.from_bins([(0, 1, 60, 0.15), (1, None, 40, 2.0)])
    fit = li_fit(g)
    assert fit.clipped[0]
    assert fit.stop[0] < 1.0
    assert fit.segment_masses()[0] == pytest.approx(0.6)
    assert fit.pdf(0.99) == 0.0


def test_li_atom_first_bin():
    g = GroupedTable.from_bins([(0, 0, 10, 0.0), (0, 10, 60, 5.0), (10, None, 30, 20.0)])
    fit = li_fit(g)
    assert li_cdf(fit, 0.0) == pytest.approx(0.1)
    assert fit.quantile(0.05) == 0.0


@pytest.mark.parametrize("u", [0.01, 0.1, 0.33, 0.5, 0.77, 0.9, 0.999])
def test_li_quantile_round_trip(u, two_bin):
    fit = li_fit(two_bin)
    assert li_cdf(fit, li_quantile(fit, u)) == pytest.approx(u, abs=1e-10)


def test_li_requires_means(au2014):
    with pytest.raises(UnsupportedMethodError, match="GLD"):
        li_fit(au2014)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 5.0), st.integers(1, 50), st.floats(0.02, 0.98)),
                min_size=1, max_size=8),
       st.floats(0.1, 10.0))
def test_li_segment_mass_identity(bins, tail_excess):
    rows, lo = [], 0.0
    for width, count, frac in bins:
        rows.append((lo, lo + width, count, lo + frac * width))
        lo += width
    rows.append((lo, None, 5, lo + tail_excess))
    g = GroupedTable.from_bins(rows)
    fit = li_fit(g)
    assert fit.segment_masses() == pytest.approx(g.proportions, abs=1e-9)
    assert np.all(fit.pdf(np.linspace(0, lo * 1.5, 300)) >= 0)
    assert li_cdf(fit, 1e9) == pytest.approx(1.0)


def test_li_bias_on_lognormal_deciles():
    s = dists.sample(dists.Lognormal(0, 1), 5000, 3)
    g = GroupedTable.from_sample(s, 10)
    assert grouped_headcount(li_fit(g), 0.5) == pytest.approx(headcount_estimate(s, 0.5).h_hat, abs=0.01)


# GLD ----------------------------------------------------------------------

def test_gld_recovers_exact_deciles():
    model = dists.GLD(0.0, 1.0, 0.2, 0.4)
    pairs = list(zip(DECILES, model.quantile(DECILES)))
    fit = gld_fit(pairs)
    assert (fit.lam, fit.eta, fit.alpha, fit.beta) == pytest.approx((0.0, 1.0, 0.2, 0.4), abs=1e-4)
    assert fit.objective < 1e-10


def test_gld_symmetric_fit():
    model = dists.GLD(5.0, 2.0, 0.3, 0.3)
    u = np.linspace(0.05, 0.95, 19)
    fit = gld_fit(list(zip(u, model.quantile(u))))
    assert fit.alpha == pytest.approx(fit.beta, abs=1e-4)
    assert fit.median == pytest.approx(5.0, abs=1e-6)


def test_gld_on_lognormal_deciles():
    pairs = list(zip(DECILES, dists.Lognormal(0, 1).quantile(DECILES)))
    fit = gld_fit(pairs)
    for u, x in pairs:
        assert fit.quantile(u) == pytest.approx(x, abs=0.01)
    truth = dists.headcount_true(dists.Lognormal(0, 1), 0.5)
    assert grouped_headcount(fit, 0.5) == pytest.approx(truth, abs=0.01)


@pytest.mark.parametrize("pairs", [[(0.1, 1), (0.2, 2), (0.3, 3)],
                                   [(0.1, 1), (0.2, 2), (0.2, 3), (0.4, 4)],
                                   [(0.1, 1), (0.2, 2), (0.3, 1.5), (0.4, 4)]])
def test_gld_pair_validation(pairs):
    with pytest.raises(DomainError):
        gld_fit(pairs)


def test_grouped_pairs_option(au2014):
    with pytest.raises(DomainError):
        gld_fit_grouped(au2014, pairs="octiles")
    a = gld_fit_grouped(au2014, pairs="boundaries")
    b = gld_fit_grouped(au2014)
    assert a.objective > 0 and b.objective > 0
    assert abs(grouped_headcount(a) - grouped_headcount(b)) < 0.03


@pytest.mark.parametrize("method", ["li", "gld"])
def test_scale_equivariance(method):
    s = dists.sample(dists.Lognormal(0, 0.8), 2000, 8)
    g = GroupedTable.from_sample(s, 10)
    h1 = grouped_headcount(fit_grouped(g, method), 0.5)
    h2 = grouped_headcount(fit_grouped(g.scaled(250.0), method), 0.5)
    assert h1 == pytest.approx(h2, abs=1e-6)


def test_unknown_method(two_bin):
    with pytest.raises(DomainError):
        fit_grouped(two_bin, "spline")


def test_grouped_bootstrap_interval_contains_point():
    s = dists.sample(dists.Exponential(1.0), 500, 4)
    g = GroupedTable.from_sample(s, 10)
    fit = li_fit(g)
    ci = grouped_bootstrap_interval(fit, g, 0.5, BootstrapConfig(200, 1))
    assert ci.lower <= ci.point <= ci.upper
    assert 0.03 < ci.width < 0.1
    again = grouped_bootstrap_interval(fit, g, 0.5, BootstrapConfig(200, 1))
    assert ci == again


# Table construction and quantile pairs ----------------------------------------

def test_table_validation():
    with pytest.raises(DomainError, match="contiguous"):
        GroupedTable.from_bins([(0, 1, 5), (2, None, 5)])
    with pytest.raises(DomainError, match="unbounded"):
        GroupedTable.from_bins([(0, None, 5), (1, None, 5)])
    with pytest.raises(DomainError, match="outside"):
        GroupedTable.from_bins([(0, 1, 5, 1.5), (1, None, 5)])
    with pytest.raises(DomainError, match="zero"):
        GroupedTable.from_bins([(0, 1, 0), (1, None, 0)])


def test_inclusive_integer_bins():
    g = GroupedTable.from_inclusive_integer_bins([0, 1, 50], [0, 49, math.inf], [3, 4, 5])
    assert g.is_atom.tolist() == [True, False, False]
    assert g.upper.tolist() == [0.0, 50.0, math.inf]


def test_quantile_pairs_on_ogive():
    g = GroupedTable.from_bins([(0, 10, 20), (10, 20, 30), (20, 40, 40), (40, None, 10)])
    pairs = g.quantile_pairs()
    assert [u for u, _ in pairs] == pytest.approx(DECILES[:9].tolist())
    got = dict(pairs)
    assert got[0.1] == pytest.approx(5.0)
    assert got[0.5] == pytest.approx(20.0)
    assert got[0.7] == pytest.approx(30.0)
    assert got[0.9] == pytest.approx(40.0)
    assert g.boundary_pairs() == [(0.2, 10.0), (0.5, 20.0), (pytest.approx(0.9), 40.0)]


def test_quantile_pairs_skip_open_bin():
    g = GroupedTable.from_bins([(0, 10, 50), (10, 20, 30), (20, None, 20)])
    assert [u for u, _ in g.quantile_pairs()] == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])


# Fixtures and reconstruction ----------------------------------------------------

@pytest.mark.parametrize("year", AU_INCOME_YEARS)
def test_au_income_fixtures(year):
    g = ingest(fixture_path(f"au_income_{year}.csv"))
    assert isinstance(g, GroupedTable)
    assert g.n_bins == 29
    assert g.is_atom[0] and not g.has_means
    assert math.isinf(g.upper[-1])
    assert g.lower[1] == 1.0
    assert np.all(g.lower[2:] == g.upper[1:-1])


def test_au_income_total(au2014):
    assert au2014.total == pytest.approx(22679.1)


def test_bad_grouped_file(write_lines):
    path = write_lines(["lower,upper,count", "0,10,5", "10,x,3", "20,,-1"])
    with pytest.raises(IngestError) as exc:
        read_grouped(path)
    assert exc.value.rows == [3, 4]


@pytest.mark.parametrize("scale", [1.0, 10.0])
def test_reconstruction_support_and_counts(au2014, scale):
    s = reconstruct_sample(au2014, seed=3, scale=scale)
    v = s.values
    expect = np.rint(au2014.counts * scale)
    assert s.n == int(expect.sum())
    assert v.min() >= 0.0
    j = np.searchsorted(au2014.lower, v, side="right") - 1
    j[v == 0.0] = 0
    assert np.bincount(j, minlength=au2014.n_bins).tolist() == expect.astype(int).tolist()
    assert np.all(v[v >= 2000] >= 2000)


def test_reconstruction_deterministic(au2014):
    a = reconstruct_sample(au2014, seed=11)
    b = reconstruct_sample(au2014, seed=11)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(DomainError):
        reconstruct_sample(au2014, tail_shape=0)


def test_reconstruction_bounded_last_bin():
    g = GroupedTable.from_bins([(0, 1, 10), (1, 3, 10)])
    s = reconstruct_sample(g, seed=0)
    assert s.values.max() < 3.0
