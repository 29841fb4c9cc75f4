import math
import statistics
import xml.dom.minidom

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset, random_dataset
from pswdisparity.config import CovariateSpec
from pswdisparity.diagnostics import (
    asd,
    asd_values,
    balance_report,
    love_plot_svg,
    overlap_summary,
    pooled_sd,
    ps_density_svg,
)
from pswdisparity.propensity import fit_logistic
from pswdisparity.synth import POOR_OVERLAP, WELL_OVERLAPPED, generate
from pswdisparity.weighting import Scheme, balancing_weights


def _asd_oracle(x, z, w):
    x1 = [a for a, g in zip(x, z) if g == 1]
    x0 = [a for a, g in zip(x, z) if g == 0]
    w1 = [a for a, g in zip(w, z) if g == 1]
    w0 = [a for a, g in zip(w, z) if g == 0]
    m1 = sum(a * b for a, b in zip(x1, w1)) / sum(w1)
    m0 = sum(a * b for a, b in zip(x0, w0)) / sum(w0)
    s = math.sqrt((statistics.variance(x1) + statistics.variance(x0)) / 2)
    return abs(m1 - m0) / s


def test_asd_small_example():
    x, z = [1.0, 2.0, 3.0, 4.0], [1, 1, 0, 0]
    # means 1.5 vs 3.5, both group variances 0.5
    assert asd_values(x, z) == pytest.approx(2 / math.sqrt(0.5), rel=1e-15)
    w = [1.0, 3.0, 1.0, 1.0]
    assert asd_values(x, z, w) == pytest.approx(_asd_oracle(x, z, w), rel=1e-13)


def test_pooled_sd_uses_sample_variance():
    x, z = np.array([0.0, 2.0, 5.0, 5.0, 8.0]), np.array([1, 1, 0, 0, 0])
    assert pooled_sd(x, z) == pytest.approx(math.sqrt((2.0 + 3.0) / 2))


def test_zero_spread():
    assert asd_values([1.0, 1.0, 2.0, 2.0], [1, 1, 0, 0]) == math.inf
    assert asd_values([3.0, 3.0, 3.0, 3.0], [1, 1, 0, 0]) == 0.0


def test_singleton_group_has_zero_spread_contribution():
    x, z = [5.0, 1.0, 2.0, 3.0], [1, 0, 0, 0]
    assert asd_values(x, z) == pytest.approx(3.0 / math.sqrt(0.5))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3),
       st.floats(-1e3, 1e3))
def test_asd_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(30)
    z = np.r_[np.ones(15, int), np.zeros(15, int)]
    w = rng.uniform(0.1, 3, 30)
    assert asd_values(a * x + b, z, w) == pytest.approx(asd_values(x, z, w), rel=1e-8, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100))
def test_constant_weights_equal_unweighted(seed, c):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(25)
    z = (np.arange(25) % 3 == 0).astype(int)
    assert asd_values(x, z, np.full(25, c)) == pytest.approx(asd_values(x, z), rel=1e-12, abs=1e-14)


def test_asd_by_name(tmp_path):
    ds = make_dataset([1, 1, 0, 0], [0.0] * 4, [[1.0], [2.0], [3.0], [4.0]])
    assert asd(ds, "x1") == asd_values([1, 2, 3, 4], [1, 1, 0, 0])


@pytest.fixture(scope="module")
def fitted():
    ds, _ = generate(WELL_OVERLAPPED)
    return ds, fit_logistic(ds, CovariateSpec(ds.covariate_names))


def test_balance_report(fitted):
    ds, model = fitted
    rep = balance_report(ds, model)
    assert [r.name for r in rep.rows] == sorted(ds.covariate_names,
                                                key=lambda c: -asd(ds, c))
    assert rep.exact_balance_ok and rep.max_asd("ow") <= 1e-6
    assert rep.flags[Scheme.OW] == []
    assert set(rep.flags["unweighted"]) == {r.name for r in rep.rows if r.unweighted > 0.1}
    ipw = balancing_weights(model, ds.group, "ipw")
    row = next(r for r in rep.rows if r.name == "h1")
    assert row.by_scheme[Scheme.IPW] == asd(ds, "h1", ipw)


def test_balance_report_csv(fitted, tmp_path):
    ds, model = fitted
    rep = balance_report(ds, model)
    rep.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "covariate,unweighted,ipw,att,ow"
    assert len(lines) == 1 + len(ds.covariate_names)


def test_overlap_all_half():
    s = overlap_summary(np.full(8, 0.5), [1, 0] * 4, bins=10)
    assert s.counts[1].tolist() == [0] * 5 + [4] + [0] * 4
    assert s.counts[0].tolist() == s.counts[1].tolist()
    assert s.tail_mass == {1: 0.0, 0: 0.0}


def test_overlap_edges_and_exclusion():
    e = np.array([0.0, 0.02, 0.5, 0.97, 1.0, 0.3])
    z = np.array([1, 1, 1, 0, 0, 0])
    s = overlap_summary(e, z, bins=4)
    assert s.counts[1].tolist() == [2, 0, 1, 0] and s.counts[0].tolist() == [0, 1, 0, 2]
    assert s.tail_mass[1] == pytest.approx(2 / 3) and s.tail_mass[0] == pytest.approx(2 / 3)
    t = overlap_summary(e, z, bins=4, exclude=[0, 4])
    assert t.counts[1].sum() + t.counts[0].sum() == 4 and t.n_excluded == 2


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=60), st.integers(2, 40))
def test_overlap_counts_conserved(e, bins):
    z = np.arange(len(e)) % 2
    s = overlap_summary(np.array(e), z, bins=bins)
    assert s.counts[1].sum() == np.sum(z == 1) and s.counts[0].sum() == np.sum(z == 0)


def test_poor_overlap_tail_mass():
    ds, truth = generate(POOR_OVERLAP)
    s = overlap_summary(truth.propensities, ds.group)
    assert max(s.tail_mass.values()) > 0.20


def test_svg_is_well_formed(fitted):
    ds, model = fitted
    rep = balance_report(ds, model)
    for text in (love_plot_svg(rep), ps_density_svg(rep.propensity_summary)):
        doc = xml.dom.minidom.parseString(text)
        assert doc.documentElement.tagName == "svg"
    assert "h1" in love_plot_svg(rep)


def test_random_ow_balance_small():
    ds = random_dataset(np.random.default_rng(8), 300, 4)
    model = fit_logistic(ds, CovariateSpec(ds.covariate_names))
    ws = balancing_weights(model, ds.group, "ow")
    assert max(asd(ds, c, ws) for c in ds.covariate_names) <= 1e-6
