import random

import numpy as np
import pytest

from cfrisk.additivity import AdditiveDecomposition, decompose
from cfrisk.distributions import (
    Record,
    RecordBatch,
    random_model,
    random_system,
    simulate_records,
    uniform_model,
)
from cfrisk.errors import EmptyPropensityCell, NeedExactLoss
from cfrisk.estimation import (
    PluginRiskEstimator,
    empirical_view,
    estimate_identified_risk,
    estimate_risk_difference,
    population_view,
    replicate_estimates,
)
from cfrisk.losses import builtin_decomposition
from cfrisk.risk import true_risk
from cfrisk.spaces import Spaces

from helpers import additive_loss

SP = Spaces(2, 2)
CLASSIF = dict(l0=1, l1=0, lt0=0, lt1="1/2", c0=0, c1="1/10")
FOUR = [Record(0, 0, 0, 0), Record(0, 1, 0, 1), Record(0, 1, 1, 1), Record(0, 0, 1, 0)]


def test_four_record_frequencies():
    view = empirical_view(FOUR, SP)
    assert view.conditional(0, 0, 0) == 0.5 and view.conditional(1, 1, 0) == 0.5
    assert view.conditional(1, 1, 1) == 0.5 and view.conditional(0, 0, 1) == 0.5
    assert view.conditional(0, 1, 0) == 0 and view.conditional(1, 0, 1) == 0
    assert view.propensity["all"] == (0.5, 0.5)
    assert view.stratum_weights["all"] == 1.0


def test_four_record_risk_by_hand():
    dec = builtin_decomposition("classification-general", CLASSIF)
    risk = estimate_identified_risk(dec, empirical_view(FOUR, SP)).total
    # each assigned arm sees (d*=0, y=0) and (d*=1, y=1) half the time
    expected = sum(float(dec.weight(k, d, d)) / 2 for k in range(2) for d in range(2))
    assert risk == pytest.approx(expected)


def test_empty_cell():
    with pytest.raises(EmptyPropensityCell):
        empirical_view([Record(0, 0, 0, 0), Record(0, 1, 0, 1)], SP)
    with pytest.raises(EmptyPropensityCell):
        empirical_view([Record(0, 0, 0, 0), Record(0, 0, 1, 0)], Spaces(2, 2, ("a", "b")))


def test_frequencies_near_truth():
    sp = Spaces(3, 2, ("a", "b"))
    model = random_model(sp, random.Random(1))
    view = empirical_view(simulate_records(model, 200_000, seed=7))
    truth = population_view(model)
    for s, x in enumerate(sp.strata):
        for k in range(3):
            m = view.counts[s, :, k, :].sum()
            for d in range(3):
                for y in range(2):
                    p = float(truth.conditional(d, y, k, x))
                    assert abs(view.conditional(d, y, k, x) - p) <= 4 * np.sqrt(p * (1 - p) / m) + 1e-12


def test_population_view_is_exact():
    rng = random.Random(2)
    for _ in range(20):
        sp = Spaces(rng.choice([2, 3]), 2, ("a", "b"))
        loss, _, _ = additive_loss(sp, rng, intercept=False)
        model = random_model(sp, rng)
        report = estimate_identified_risk(decompose(loss), population_view(model))
        assert report.total == true_risk(loss, model).total


def test_permutation_invariance():
    batch = simulate_records(random_model(SP, random.Random(3)), 500, seed=1)
    order = np.random.default_rng(0).permutation(len(batch))
    dec = builtin_decomposition("classification-general", CLASSIF)
    a = estimate_identified_risk(dec, empirical_view(batch)).total
    b = estimate_identified_risk(dec, empirical_view(batch.take(order))).total
    assert a == pytest.approx(b, abs=1e-12)


def test_intercept_blocks_level():
    dec = AdditiveDecomposition(SP, {"all": [0] * 8}, {"all": [1, 0, 0, 0]})
    view = empirical_view(simulate_records(uniform_model(SP), 200, seed=0))
    with pytest.raises(NeedExactLoss):
        estimate_identified_risk(dec, view)
    assert estimate_identified_risk(dec, view, level=False).identified_total == 0


def test_difference_estimate_with_intercept():
    rng = random.Random(4)
    loss, _, _ = additive_loss(SP, rng, intercept=True)
    dec = decompose(loss)
    first = random_model(SP, rng)
    second = random_system({"all": first.outcome_law()}, SP, rng)
    truth = true_risk(loss, first).total - true_risk(loss, second).total
    assert estimate_risk_difference(dec, population_view(first), population_view(second)) == truth
    truth = float(truth)
    n = 100_000
    est = estimate_risk_difference(dec, empirical_view(simulate_records(first, n, seed=1)),
                                   empirical_view(simulate_records(second, n, seed=2)))
    scale = sum(abs(float(v)) for v in dec.weights["all"])
    assert abs(est - truth) <= 8 * scale / np.sqrt(n)


def test_replications_center_on_truth():
    dec = builtin_decomposition("classification-general", CLASSIF)
    model = uniform_model(SP)
    est = replicate_estimates(dec, model, 20_000, range(20))
    assert len(est) == 20 and len(set(est.tolist())) == 20
    assert abs(est.mean() - 0.8) <= 4 * est.std(ddof=1) / np.sqrt(20)
    assert np.array_equal(est, replicate_estimates(dec, model, 20_000, range(20), jobs=2))


def test_plugin_estimator():
    dec = builtin_decomposition("classification-general", CLASSIF, strata=("a", "b"))
    batch = simulate_records(uniform_model(Spaces(2, 2, ("a", "b"))), 1000, seed=5)
    with pytest.raises(ValueError):
        PluginRiskEstimator(dec).set_params(bogus=1)
    est = PluginRiskEstimator(dec).fit(batch)
    assert est.get_params() == {"decomposition": dec, "level": True}
    assert est.n_records_ == 1000
    assert set(est.conditional_risk_) == {"a", "b"}
    w = est.view_.stratum_weights
    assert est.risk_ == pytest.approx(sum(w[x] * est.conditional_risk_[x] for x in ("a", "b")))
    est.set_params(level=False).fit(batch)
    assert est.risk_ == pytest.approx(est.report_.identified_total)


def test_batch_roundtrip_for_estimation():
    batch = RecordBatch.from_records(SP, FOUR)
    assert empirical_view(batch).q == empirical_view(FOUR, SP).q
