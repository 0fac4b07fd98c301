import io
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from _helpers import scans
from wifitopo.errors import ParameterError, ValidationError
from wifitopo.ingest import WifiDataset
from wifitopo.likelihood import (DEFAULT_GRID, SUPPORT, EvaluationGrid, Kde, Normal, Pmf,
                                 estimate_kde, estimate_normal, estimate_pmf, evaluate_on_grid,
                                 fingerprint_segment, invisible_likelihood, read_fingerprints,
                                 write_fingerprints)
from wifitopo.motionseg import WifiSegment

# frozen from an independent plain-Python summation
KDE_PAIR_AT_MINUS_65 = 0.00876415024678427
LAPLACE_PEAK = 0.5287958115183246
LAPLACE_REST = 0.005235602094240838

rssi_lists = st.lists(st.integers(-100, -10), min_size=1, max_size=40)


def test_pmf_relative_frequencies():
    p = estimate_pmf([-70, -70, -68])
    assert p.as_dict() == pytest.approx({-70: 2 / 3, -68: 1 / 3})
    assert p.source_count == 3


def test_pmf_empty_is_invisible():
    assert estimate_pmf([]).as_dict() == {-100: 1.0}


def test_pmf_laplace_arithmetic():
    p = estimate_pmf([-70], 0.01)
    assert p.pmf(-70) == pytest.approx(LAPLACE_PEAK, rel=1e-12)
    assert p.pmf(-71) == pytest.approx(LAPLACE_REST, rel=1e-12)
    assert p.strictly_positive


def test_pmf_rejects_bad_input():
    with pytest.raises(ValidationError):
        estimate_pmf([-101])
    with pytest.raises(ValidationError):
        estimate_pmf([-70.5])
    with pytest.raises(ParameterError):
        estimate_pmf([-70], -1)
    with pytest.raises(ValidationError):
        Pmf(np.full(91, 0.5))


@settings(max_examples=100, deadline=None)
@given(rssi_lists, st.sampled_from([0.0, 1e-6, 0.01, 1.0]))
def test_pmf_normalised_and_argmax_preserved(values, eps):
    raw = estimate_pmf(values)
    p = estimate_pmf(values, eps)
    assert abs(p.probs.sum() - 1) < 1e-9 and np.all(p.probs >= 0)
    if eps > 0:
        assert p.strictly_positive
        assert np.argmax(p.probs) == np.argmax(raw.probs)


def test_normal_estimates():
    n = estimate_normal([-70, -70, -68])
    assert n.mu == pytest.approx(-69 - 1 / 3)
    assert n.sigma2 == pytest.approx(4 / 3)


def test_normal_single_sample_floor():
    n = estimate_normal([-55])
    assert (n.mu, n.sigma2) == (-55, 1.0)


def test_normal_empty():
    n = estimate_normal([])
    assert (n.mu, n.sigma2, n.source_count) == (-100, 1.0, 0)


@settings(max_examples=100, deadline=None)
@given(rssi_lists.filter(lambda v: len(set(v)) >= 2))
def test_normal_matches_two_pass_oracle(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    est = estimate_normal(values, sigma_min=0.01)
    assert est.mu == pytest.approx(mean, rel=1e-14, abs=1e-12)
    assert est.sigma2 == pytest.approx(max(var, 1e-4), rel=1e-12)


def test_kde_peak():
    k = estimate_kde([-70], 2.0)
    assert k.pdf(-70.0) == pytest.approx(1 / (2 * math.sqrt(2 * math.pi)), rel=1e-14)


def test_kde_two_samples_oracle():
    assert estimate_kde([-70, -60], 2.0).pdf(-65.0) == pytest.approx(KDE_PAIR_AT_MINUS_65, rel=1e-13)


def test_kde_empty_and_bandwidth():
    k = estimate_kde([])
    assert list(k.samples) == [-100.0]
    with pytest.raises(ParameterError):
        estimate_kde([-70], 0.0)
    with pytest.raises(ParameterError):
        Kde(np.array([-70.0]), -1.0)


def direct_kde(samples, h, x):
    return sum(math.exp(-0.5 * ((x - s) / h) ** 2) for s in samples) / (len(samples) * h * math.sqrt(2 * math.pi))


@settings(max_examples=60, deadline=None)
@given(rssi_lists, st.floats(0.5, 6.0))
def test_kde_grid_matches_direct_summation(values, h):
    pdf, _ = evaluate_on_grid(estimate_kde(values, h))
    ref = np.array([direct_kde(values, h, x) for x in DEFAULT_GRID.midpoints])
    assert np.max(np.abs(pdf - ref)) < 1e-10


@settings(max_examples=60, deadline=None)
@given(rssi_lists, st.sampled_from(["normal", "kde"]))
def test_quadrature_matches_cdf_mass(values, kind):
    lik = estimate_normal(values) if kind == "normal" else estimate_kde(values, 2.0)
    xs = DEFAULT_GRID.edges
    inside = float(lik.cdf(xs[-1]) - lik.cdf(xs[0]))
    # trapezoid end error is O(step^2 f') where the grid cuts a kernel short
    assert abs(trapezoid(lik.pdf(xs), xs) - inside) < 1e-3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-90, -20), min_size=1, max_size=40), st.sampled_from(["normal", "kde"]))
def test_continuous_integrates_to_one(values, kind):
    # a kernel centred at -10 leaves 2.5 h of tail beyond the grid, so the
    # unit-mass check only applies to data away from the support edges
    lik = estimate_normal(values) if kind == "normal" else estimate_kde(values, 2.0)
    if kind == "normal":
        assume(lik.mu - 8 * lik.sigma > -105 and lik.mu + 8 * lik.sigma < -5)
    xs = DEFAULT_GRID.edges
    assert abs(trapezoid(lik.pdf(xs), xs) - 1) < 1e-4


def test_default_grid():
    g = DEFAULT_GRID
    assert g.n_cells == 200 and g.covers_support()
    assert g.midpoints[0] == -104.75 and g.right_edges[-1] == -5.0
    with pytest.raises(ParameterError):
        EvaluationGrid(-100, -10, 0.7)


def test_pmf_cdf_step_on_grid():
    pdf, cdf = evaluate_on_grid(estimate_pmf([-70]))
    k = int(np.flatnonzero(DEFAULT_GRID.right_edges == -70.0)[0])
    assert np.all(cdf[:k] == 0) and np.all(cdf[k:] == 1)
    assert pdf[k] == pytest.approx(1 / DEFAULT_GRID.step)


@pytest.mark.parametrize("lik", [Normal(-70.0, 4.0), estimate_kde([-70], 2.0)], ids=["normal", "kde"])
def test_cdf_symmetry_at_centre(lik):
    assert lik.cdf(-70.0) == pytest.approx(0.5, abs=1e-15)
    _, cdf = evaluate_on_grid(lik)
    assert cdf[DEFAULT_GRID.right_edges == -70.0][0] == pytest.approx(0.5, abs=1e-15)


def test_narrow_grid_warns():
    with pytest.warns(UserWarning, match="tail mass"):
        evaluate_on_grid(Normal(-70.0, 4.0), EvaluationGrid(-80, -60, 0.5))


def test_invisible_likelihood_cached():
    a = invisible_likelihood("kde", h=2.0)
    assert a is invisible_likelihood("kde", h=2.0)
    assert list(a.samples) == [-100.0]
    with pytest.raises(ParameterError):
        invisible_likelihood("histogram")


# -- fingerprints -----------------------------------------------------------


def segment(readings, n=5):
    obs = tuple(WifiDataset.from_observations(scans(range(0, n * 1000, 1000), readings)).observations)
    return WifiSegment("A", 0, n * 1000, obs, 7)


def test_fingerprint_with_invisibility():
    fp = fingerprint_segment(segment({"b1": -60, "b2": -70}), {"b1", "b2", "b3"}, "kde")
    assert sorted(fp.per_ap) == ["b1", "b2", "b3"]
    assert list(fp.per_ap["b3"].samples) == [-100.0]


def test_fingerprint_without_invisibility():
    fp = fingerprint_segment(segment({"b1": -60, "b2": -70}), {"b1", "b2", "b3"}, "kde", invisibility=False)
    assert sorted(fp.per_ap) == ["b1", "b2"]
    assert fp.get("b3").same_distribution(invisible_likelihood("kde", h=2.0))


def test_fingerprint_pmf_matches_estimator():
    seg = segment({"b1": -60, "b2": -70})
    fp = fingerprint_segment(seg, None, "pmf", laplace_epsilon=1e-6)
    ref = estimate_pmf([-60] * 5, 1e-6)
    assert fp.per_ap["b1"].same_distribution(ref)


def test_fingerprint_errors():
    with pytest.raises(ParameterError):
        fingerprint_segment(segment({"b1": -60}), None, "gmm")
    with pytest.raises(ValidationError):
        fingerprint_segment(WifiSegment("A", 0, 1, (), 0))


@pytest.mark.parametrize("method", ["pmf", "normal", "kde"])
def test_fingerprint_jsonl_round_trip(method):
    seg = segment({"b1": -60, "b2": -70, "b3": -88})
    fp = fingerprint_segment(seg, {"b1", "b2", "b3", "b4"}, method, laplace_epsilon=1e-6)
    buf = io.StringIO()
    write_fingerprints([fp], buf, config_hash="abc")
    (back,) = read_fingerprints(io.StringIO(buf.getvalue()))
    assert back.segment_id == 7 and back.method == method and back.options == fp.options
    assert back.invisibility_modeled
    for b, lik in fp.per_ap.items():
        assert back.per_ap[b].same_distribution(lik)
    again = io.StringIO()
    write_fingerprints([back], again, config_hash="abc")
    assert again.getvalue() == buf.getvalue()


def test_fingerprint_jsonl_bad_line():
    with pytest.raises(ValidationError, match="line 1"):
        read_fingerprints(io.StringIO('{"segment_id": 1}\n'))


def test_support_constant():
    assert SUPPORT[0] == -100 and SUPPORT[-1] == -10 and SUPPORT.size == 91
