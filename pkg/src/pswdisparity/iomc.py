"""IOM-concordant disparity: log-link outcome model plus rank-and-replace.

Pipeline, for one weighting scheme:

1. fit the propensity model on the health-status covariates and build weights;
2. fit ``log E[Y | Z, X_H, X_S] = g0 + g1 Z + X_H'gH + X_S'gS`` on the full sample;
3. form the SES index ``X_S'gS`` and, within each group, give unit i the index
   value of the unit whose unweighted rank matches i's weighted rank;
4. predict outcomes with the replaced index and take the Hajek difference.

Step 3 undoes the shift in the SES distribution that weighting on health
status induces through the correlation between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import CovariateSpec
from .data import Dataset, check_full_rank
from .errors import AllZeroWeights, DataError, NegativeOutcome, NoConvergence
from .estimation import WacdEstimate, bootstrap_se, hajek_means
from .propensity import PropensityModel, fit_logistic
from .weighting import Scheme, WeightSet, balancing_weights, effective_sample_size

SCORE_TOL = 1e-8
MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class OutcomeModel:
    gamma0: float
    gamma1: float
    gamma_h: np.ndarray
    gamma_s: np.ndarray
    health_names: tuple[str, ...]
    ses_names: tuple[str, ...]
    iterations: int = 0
    max_abs_score: float = 0.0

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.gamma0, self.gamma1], self.gamma_h, self.gamma_s])

    def ses_index(self, ds: Dataset) -> np.ndarray:
        if not self.ses_names:
            return np.zeros(ds.n_units)
        return ds.matrix(self.ses_names) @ self.gamma_s

    def health_predictor(self, ds: Dataset) -> np.ndarray:
        eta = self.gamma0 + self.gamma1 * ds.group
        if self.health_names:
            eta = eta + ds.matrix(self.health_names) @ self.gamma_h
        return eta

    def predict(self, ds: Dataset, ses_index=None) -> np.ndarray:
        """Fitted means at observed Z, optionally with a substituted SES index."""
        s = self.ses_index(ds) if ses_index is None else np.asarray(ses_index, float)
        return np.exp(self.health_predictor(ds) + s)

    def with_gamma_s(self, gamma_s) -> "OutcomeModel":
        return OutcomeModel(self.gamma0, self.gamma1, self.gamma_h,
                            np.asarray(gamma_s, float), self.health_names, self.ses_names,
                            self.iterations, self.max_abs_score)


def fit_loglink(x, y, *, tol=SCORE_TOL, max_iter=MAX_ITER):
    """Quasi-likelihood fit of a log-link mean with variance proportional to the mean.

    Newton/IRLS on ``sum(y * eta - exp(eta))`` with step halving. Converged
    when ``max |X'(y - mu)| <= tol * max(1, sum(y))``; the scale makes the
    criterion independent of the outcome's units.

    Returns ``(coef, iterations, max_abs_score)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ybar = y.mean()
    if not ybar > 0:
        raise DataError("log-link model needs a positive mean outcome")
    limit = tol * max(1.0, float(np.sum(y)))
    coef = np.zeros(x.shape[1])
    coef[0] = math.log(ybar)

    def quasi_ll(c):
        eta = x @ c
        return float(np.sum(y * eta - np.exp(eta)))

    ll = quasi_ll(coef)
    for it in range(max_iter + 1):
        mu = np.exp(x @ coef)
        score = x.T @ (y - mu)
        max_score = float(np.max(np.abs(score)))
        if max_score <= limit:
            return coef, it, max_score
        if it == max_iter:
            break
        info = (x * mu[:, None]).T @ x
        step = np.linalg.solve(info, score)
        t = 1.0
        for _ in range(40):
            cand = coef + t * step
            with np.errstate(over="ignore"):
                ll_new = quasi_ll(cand)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        coef, ll = cand, ll_new
    raise NoConvergence(max_iter, max_score)


def fit_outcome_model(ds: Dataset, health=None, ses=None) -> OutcomeModel:
    """Fit the log-linear outcome model on Z, health-status and SES covariates.

    ``health`` / ``ses`` default to the columns carrying those roles. Zero
    outcomes are allowed (no logarithm of Y is taken); negative ones are not.
    """
    health = ds.columns_with_role("health_status") if health is None else tuple(health)
    ses = ds.columns_with_role("ses") if ses is None else tuple(ses)
    neg = np.flatnonzero(ds.outcome < 0)
    if neg.size:
        raise NegativeOutcome((neg + 1).tolist())
    x = np.column_stack([np.ones(ds.n_units), ds.group, ds.matrix(health), ds.matrix(ses)])
    check_full_rank(x, ("(intercept)", ds.group_name, *health, *ses))
    coef, it, score = fit_loglink(x, ds.outcome)
    kh = len(health)
    return OutcomeModel(float(coef[0]), float(coef[1]), coef[2:2 + kh], coef[2 + kh:],
                        health, ses, it, score)


def _group_order(values, members):
    # stable: ties keep original row order
    return members[np.argsort(values[members], kind="stable")]


def unweighted_rank(values, group) -> np.ndarray:
    """Within-group ranks 1..n_g (ties broken by row order)."""
    values = np.asarray(values, dtype=np.float64)
    z = np.asarray(group)
    ranks = np.empty(values.shape[0], dtype=np.int64)
    for g in (1, 0):
        order = _group_order(values, np.flatnonzero(z == g))
        ranks[order] = np.arange(1, order.shape[0] + 1)
    return ranks


def weighted_rank(values, weights, group) -> np.ndarray:
    """Weighted mid-rank positions within each group, on the scale (0, n_g).

    Unit i's position is ``n_g * (W_before + w_i / 2) / W``, where ``W_before``
    is the weight of the units preceding i in the stable sort of the group's
    values. With equal weights this is ``k - 1/2`` for the unit of rank k.
    """
    values = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    z = np.asarray(group)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("weights must be finite and nonnegative")
    pos = np.empty(values.shape[0])
    for g in (1, 0):
        order = _group_order(values, np.flatnonzero(z == g))
        if order.size == 0:
            continue
        wg = w[order]
        total = math.fsum(wg)
        if not total > 0:
            raise AllZeroWeights(g)
        before = np.concatenate([[0.0], np.cumsum(wg)[:-1]])
        pos[order] = order.shape[0] * (before + wg / 2.0) / total
    return pos


@dataclass(frozen=True, eq=False)
class SesIndex:
    value: np.ndarray
    weighted_rank: np.ndarray
    unweighted_rank: np.ndarray
    source: np.ndarray
    group: np.ndarray

    @property
    def replaced_value(self) -> np.ndarray:
        return self.value[self.source]

    @property
    def n_identity(self) -> int:
        return int(np.sum(self.source == np.arange(self.source.shape[0])))


def rank_and_replace(values, weights, group) -> SesIndex:
    """Give each unit the value of the same-group unit whose unweighted rank
    is nearest its weighted rank.

    The lookup rank is ``ceil(weighted position)``, i.e. the nearest unweighted
    mid-rank ``k - 1/2`` with ties going to the lower rank. Equal weights
    therefore reproduce every unit's own value.
    """
    if isinstance(weights, WeightSet):
        weights = weights.weights
    values = np.asarray(values, dtype=np.float64)
    z = np.asarray(group)
    pos = weighted_rank(values, weights, z)
    ranks = unweighted_rank(values, z)
    source = np.empty(values.shape[0], dtype=np.int64)
    for g in (1, 0):
        members = np.flatnonzero(z == g)
        if members.size == 0:
            continue
        order = _group_order(values, members)
        k = np.clip(np.ceil(pos[members]).astype(np.int64), 1, members.shape[0])
        source[members] = order[k - 1]
    return SesIndex(values, pos, ranks, source, z)


def ecdf_sup_distance(original, replaced, weights) -> float:
    """sup_t |weighted ECDF of ``replaced`` - unweighted ECDF of ``original``|."""
    original = np.sort(np.asarray(original, dtype=np.float64))
    replaced = np.asarray(replaced, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    order = np.argsort(replaced, kind="stable")
    rs, cw = replaced[order], np.cumsum(w[order]) / math.fsum(w)
    grid = np.unique(np.concatenate([original, rs]))
    f_orig = np.searchsorted(original, grid, side="right") / original.shape[0]
    k = np.searchsorted(rs, grid, side="right")
    f_rep = np.where(k > 0, cw[np.maximum(k - 1, 0)], 0.0)
    return float(np.max(np.abs(f_rep - f_orig)))


def ecdf_distances(idx: SesIndex, weights) -> dict:
    """Per-group restoration error of a rank-and-replace result."""
    w = weights.weights if isinstance(weights, WeightSet) else np.asarray(weights, float)
    out = {}
    for g in (1, 0):
        m = idx.group == g
        if not m.any():
            continue
        out[g] = ecdf_sup_distance(idx.value[m], idx.replaced_value[m], w[m])
    return out


@dataclass(frozen=True, eq=False)
class IomcResult:
    tau_hat: float
    group_means: tuple[float, float]
    predicted: np.ndarray
    ses: SesIndex
    weights: WeightSet
    outcome_model: OutcomeModel


def iomc_point(ds: Dataset, ws: WeightSet, om: OutcomeModel) -> IomcResult:
    """Rank-and-replace the SES index under ``ws`` and take the Hajek difference
    of the predicted outcomes."""
    idx = rank_and_replace(om.ses_index(ds), ws.weights, ds.group)
    yhat = om.predict(ds, idx.replaced_value)
    m1, m0 = hajek_means(yhat, ds.group, ws.weights)
    return IomcResult(m1 - m0, (m1, m0), yhat, idx, ws, om)


def iomc_pipeline(spec: CovariateSpec, scheme, trim=None):
    """Closure re-running every stage (propensity, outcome model, replacement)."""
    scheme = Scheme.parse(scheme)

    def run(d: Dataset) -> float:
        model = fit_logistic(d, spec)
        ws = balancing_weights(model, d.group, scheme, trim=trim)
        return iomc_point(d, ws, fit_outcome_model(d)).tau_hat

    return run


def iomc_disparity(ds: Dataset, model: PropensityModel, scheme, om: OutcomeModel | None = None,
                   reps: int | None = None, seed: int = 0, trim=None,
                   extreme_multiple: float = 10.0) -> WacdEstimate:
    """IOM-concordant WACD of predicted outcomes under ``scheme``.

    With ``reps`` the standard error comes from a stratified bootstrap that
    refits the propensity model, the outcome model and the replacement in every
    replicate (``model.spec`` defines the propensity design). Without it the
    SE is NaN.
    """
    scheme = Scheme.parse(scheme)
    om = fit_outcome_model(ds) if om is None else om
    ws = balancing_weights(model, ds.group, scheme, trim=trim, extreme_multiple=extreme_multiple)
    res = iomc_point(ds, ws, om)
    extra = {
        "gamma1": om.gamma1,
        "n_replaced_identity": res.ses.n_identity,
        "ecdf_sup_distance_per_group": ecdf_distances(res.ses, ws),
    }
    ess = effective_sample_size(ws)
    if reps is None:
        return WacdEstimate(res.group_means, math.nan, scheme, "none", ess=ess,
                            n_trimmed=len(ws.trimmed), extra=extra)
    if model.spec is None:
        raise DataError("model carries no CovariateSpec; cannot refit in bootstrap")
    boot = bootstrap_se(ds, iomc_pipeline(model.spec, scheme, trim), reps, seed)
    return WacdEstimate(res.group_means, boot.se, scheme, "bootstrap", reps, seed, ess,
                        len(ws.trimmed), boot.n_redrawn, extra)
