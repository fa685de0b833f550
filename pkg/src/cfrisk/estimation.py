"""Plug-in estimation of the identified risk from IID records.

Counts ``n(x, d*, k, y)`` of units in stratum ``x`` with system decision
``d*``, assigned decision ``k`` and observed outcome ``y`` give
``Pr(D* = d*, Y = y | D = k, x)``, which under randomized assignment equals
``Pr(D* = d*, Y(k) = y | x)``. Those frequencies and the stratum
frequencies ``n(x) / n`` are substituted into the identification formula.
No smoothing: an empty ``(k, x)`` cell is an error.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .additivity import AdditiveDecomposition
from .distributions import (
    JointModel,
    ObservableView,
    Record,
    RecordBatch,
    View,
    observed_conditionals,
    simulate_records,
    validate_records,
)
from .errors import EmptyPropensityCell, NeedExactLoss
from .risk import RiskReport, identified_risk
from .spaces import Spaces


@dataclass(frozen=True)
class EmpiricalView:
    """Estimated conditionals ``q[x]`` in marginal-row order ``(d*, k, y)``,
    stratum weights and assignment frequencies. ``counts`` has shape
    ``(strata, K, K, M)`` indexed ``[x, d*, k, y]``; it is ``None`` for a
    population view built from exact probabilities."""

    spaces: Spaces
    q: Mapping[str, tuple]
    stratum_weights: Mapping[str, object]
    propensity: Mapping[str, tuple]
    counts: Optional[np.ndarray] = None

    def to_observable(self) -> ObservableView:
        return ObservableView(self.spaces, View.MARGINALS_ONLY, self.q, self.stratum_weights)

    def conditional(self, d_star: int, y: int, k: int, x: Optional[str] = None):
        x = self.spaces.strata[0] if x is None else x
        sp = self.spaces
        return self.q[x][(d_star * sp.K + k) * sp.M + y]


def empirical_view(records: Union[RecordBatch, Sequence[Record]], spaces: Optional[Spaces] = None) -> EmpiricalView:
    if not isinstance(records, RecordBatch):
        if spaces is None:
            raise ValueError("spaces are required for a plain list of records")
        records = RecordBatch.from_records(spaces, records)
    validate_records(records)
    sp = records.spaces
    S, K, M = len(sp.strata), sp.K, sp.M
    flat = ((records.x * K + records.d_star) * K + records.d) * M + records.y
    counts = np.bincount(flat, minlength=S * K * K * M).reshape(S, K, K, M)
    n = counts.sum()
    per_k = counts.sum(axis=(1, 3))
    q, weights, prop = {}, {}, {}
    for s, x in enumerate(sp.strata):
        for k in range(K):
            if per_k[s, k] == 0:
                raise EmptyPropensityCell(f"no records with D = {k} in stratum {x!r}")
        freq = counts[s] / per_k[s][None, :, None]
        q[x] = tuple(float(freq[d, k, y]) for d in range(K) for k in range(K) for y in range(M))
        weights[x] = float(per_k[s].sum() / n)
        prop[x] = tuple(float(v) for v in per_k[s] / per_k[s].sum())
    return EmpiricalView(sp, q, weights, prop, counts)


def population_view(model: JointModel) -> EmpiricalView:
    """The view an infinite sample would give: exact conditional
    probabilities of the observed tuple."""
    obs = observed_conditionals(model)
    return EmpiricalView(model.spaces, obs.q, dict(model.stratum_weights), dict(model.propensity))


def estimate_identified_risk(decomp: AdditiveDecomposition, view: EmpiricalView, level: bool = True) -> RiskReport:
    """Plug-in risk. With a nonzero intercept the level is not identified from
    records: ``level=True`` raises :class:`NeedExactLoss`, ``level=False``
    returns the identified part only (useful for differences)."""
    if level and decomp.has_intercept:
        raise NeedExactLoss("the loss has a nonzero intercept; only risk differences can be estimated")
    return identified_risk(decomp, view.to_observable(), allow_unknown_constant=True)


def estimate_risk_difference(decomp: AdditiveDecomposition, first: EmpiricalView, second: EmpiricalView):
    """Identified risk of the first system minus the second; the intercept
    cancels when both share the potential-outcome law."""
    a = identified_risk(decomp, first.to_observable(), allow_unknown_constant=True)
    b = identified_risk(decomp, second.to_observable(), allow_unknown_constant=True)
    return a.identified_total - b.identified_total


def _one_replication(args):
    decomp, model, n, seed = args
    view = empirical_view(simulate_records(model, n, seed))
    return float(estimate_identified_risk(decomp, view, level=False).identified_total)


def replicate_estimates(decomp: AdditiveDecomposition, model: JointModel, n: int, seeds: Sequence[int],
                        jobs: int = 1) -> np.ndarray:
    """Identified-part estimates over independent simulated samples, one per
    seed, in seed order."""
    tasks = [(decomp, model, n, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return np.array(list(pool.map(_one_replication, tasks)))
    return np.array([_one_replication(t) for t in tasks])


class PluginRiskEstimator:
    """Estimator-style wrapper: parameters in the constructor, ``fit`` on
    records, results in trailing-underscore attributes."""

    def __init__(self, decomposition: AdditiveDecomposition, level: bool = True):
        self.decomposition = decomposition
        self.level = level

    def get_params(self, deep: bool = True) -> dict:
        return {"decomposition": self.decomposition, "level": self.level}

    def set_params(self, **params) -> "PluginRiskEstimator":
        for key, value in params.items():
            if key not in ("decomposition", "level"):
                raise ValueError(f"invalid parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, records: RecordBatch) -> "PluginRiskEstimator":
        self.view_ = empirical_view(records)
        self.report_ = estimate_identified_risk(self.decomposition, self.view_, self.level)
        self.risk_ = self.report_.total if self.level else self.report_.identified_total
        self.conditional_risk_ = dict(self.report_.identified_part)
        self.n_records_ = len(records)
        return self
