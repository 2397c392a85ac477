"""Outcome-interpretation toolkit: fit metrics, willingness-to-pay with
Delta-method standard errors, model comparison and latent-class elbow data."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import modelspec as ms
from .errors import NoCostCoefficient, NoLatentClassModels, TooFewModels
from .estimation import EstimationResult


@dataclass(frozen=True)
class FitMetrics:
    n_params: int
    sample_size: int
    n_individuals: int
    ll_null: float
    ll_init: float
    ll_final: float
    lr_test_null: float
    rho2: float
    adj_rho2: float
    aic: float
    bic: float
    gradient_norm: float
    est_time: float

    def to_dict(self) -> dict:
        return asdict(self)


def fit_metrics(res: EstimationResult) -> FitMetrics:
    k, n = res.n_params, res.n_obs
    return FitMetrics(
        n_params=k,
        sample_size=n,
        n_individuals=res.n_individuals,
        ll_null=res.ll_null,
        ll_init=res.ll_init,
        ll_final=res.ll_final,
        lr_test_null=2.0 * (res.ll_final - res.ll_null),
        rho2=1.0 - res.ll_final / res.ll_null,
        adj_rho2=1.0 - (res.ll_final - k) / res.ll_null,
        aic=-2.0 * res.ll_final + 2.0 * k,
        bic=-2.0 * res.ll_final + k * math.log(n),
        gradient_norm=res.gradient_norm,
        est_time=res.wall_time,
    )


@dataclass(frozen=True)
class WtpEntry:
    attribute: str
    wtp: float
    se: float
    t_stat: float
    defined: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _coefficient_index(res: EstimationResult, name: str) -> int:
    try:
        return res.param_names.index(name)
    except ValueError:
        return -1


def wtp(res: EstimationResult, attribute: str,
        class_index: int | None = None) -> WtpEntry:
    """Willingness-to-pay -beta_attr / beta_cost with Delta-method se.

    Random coefficients enter at their point value: the mean for normal,
    the median exp(mu) for lognormal.  A normally distributed cost
    coefficient makes the ratio ill-defined; the entry is still reported at
    the means but flagged ``defined=False``.  ``class_index`` selects one
    latent class's coefficients.
    """
    attr = attribute.lower()
    suffix = f"_c{class_index}" if class_index is not None else ""
    ia = _coefficient_index(res, f"b_{attr}{suffix}")
    ic = _coefficient_index(res, f"b_cost{suffix}")
    if ic < 0:
        raise NoCostCoefficient("specification has no generic cost coefficient")
    if ia < 0:
        raise NoCostCoefficient(f"specification has no generic {attribute} coefficient")

    def point(index, name):
        """Point value and d(point)/d(raw coefficient) for the Delta method."""
        value = float(res.estimates[index])
        if f"lognormal_{name}" in res.dist_tags:
            sign = ms.LOGNORMAL_SIGN[name.capitalize()]
            b = sign * math.exp(value)         # median of the lognormal
            return b, b, False
        if f"normal_{name}" in res.dist_tags:
            return value, 1.0, True            # mean of the normal
        return value, 1.0, False

    beta_a, da, a_normal = point(ia, attr)
    beta_c, dc, c_normal = point(ic, "cost")
    defined = not c_normal
    ratio = -beta_a / beta_c
    g = np.zeros(len(res.param_names))
    g[ia] = (-1.0 / beta_c) * da
    g[ic] = (beta_a / beta_c ** 2) * dc
    var = float(g @ res.robust_covariance @ g)
    se = math.sqrt(max(var, 0.0))
    t = ratio / se if se > 0 else float("nan")
    return WtpEntry(attribute=attribute, wtp=ratio, se=se, t_stat=t, defined=defined)


def wtp_table(res: EstimationResult) -> list:
    """WTP entries for every non-cost attribute present in the model.

    Latent class results produce one set of entries per class, with the
    class index recorded in the attribute label."""
    entries = []
    attrs = ("stores", "transport", "city", "noise", "green")
    if res.family == ms.LC:
        for ci in range(1, _n_class_of(res) + 1):
            for attr in attrs:
                if _coefficient_index(res, f"b_{attr}_c{ci}") >= 0:
                    entry = wtp(res, attr, class_index=ci)
                    entries.append(WtpEntry(f"{attr} (class {ci})", entry.wtp,
                                            entry.se, entry.t_stat, entry.defined))
        return entries
    for attr in attrs:
        if _coefficient_index(res, f"b_{attr}") >= 0:
            entries.append(wtp(res, attr))
    return entries


def compare_models(results: list) -> dict:
    """Aligned parameter and metric rows across two or more results."""
    if len(results) < 2:
        raise TooFewModels("need at least two results to compare")
    all_params: list[str] = []
    for res in results:
        for name in res.param_names:
            if name not in all_params:
                all_params.append(name)
    param_rows = []
    for name in all_params:
        row = {"parameter": name, "values": []}
        for res in results:
            idx = _coefficient_index(res, name)
            if idx < 0:
                row["values"].append(None)
            else:
                row["values"].append({"estimate": float(res.estimates[idx]),
                                      "robust_se": float(res.robust_se[idx])})
        param_rows.append(row)
    metrics = [fit_metrics(res) for res in results]
    higher_better = {"ll_final": True, "rho2": True, "adj_rho2": True,
                     "aic": False, "bic": False}
    metric_rows = []
    for key, is_max in higher_better.items():
        values = [getattr(m, key) for m in metrics]
        best = max(values) if is_max else min(values)
        ties = [i for i, v in enumerate(values) if abs(v - best) <= 1e-6]
        metric_rows.append({"metric": key, "values": values,
                            "best": ties[0], "tie": len(ties) > 1})
    return {"parameters": param_rows, "metrics": metric_rows,
            "spec_keys": [res.spec_key for res in results]}


def elbow_data(results: list) -> dict:
    """Best-log-likelihood latent-class result per class count, as metric
    series over n_class."""
    by_class: dict[int, EstimationResult] = {}
    for res in results:
        if res.family != ms.LC:
            continue
        n_class = _n_class_of(res)
        cur = by_class.get(n_class)
        if cur is None or res.ll_final > cur.ll_final:
            by_class[n_class] = res
    if not by_class:
        raise NoLatentClassModels("no latent class results supplied")
    counts = sorted(by_class)
    series = {}
    for key in ("ll_final", "aic", "bic", "rho2", "adj_rho2"):
        series[key] = [(c, getattr(fit_metrics(by_class[c]), key)) for c in counts]
    return {"n_class": counts, "series": series}


def _n_class_of(res: EstimationResult) -> int:
    suffixes = {name.rsplit("_c", 1)[1] for name in res.param_names
                if "_c" in name and name.rsplit("_c", 1)[1].isdigit()}
    return max(int(s) for s in suffixes)
