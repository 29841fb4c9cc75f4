"""Hajek weighted average controlled difference, with sandwich or bootstrap SEs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import CovariateSpec
from .data import Dataset, design_matrix
from .errors import (
    DataError,
    DegenerateResample,
    NumericError,
    RequiresUntrimmed,
    SingularJacobian,
    ZeroGroupWeight,
)
from .propensity import PropensityModel, fit_logistic
from .weighting import Scheme, WeightSet, balancing_weights, effective_sample_size

Z95 = 1.96


@dataclass(frozen=True)
class WacdEstimate:
    group_means: tuple[float, float]
    se: float
    scheme: Scheme
    variance_method: str
    n_reps: int | None = None
    seed: int | None = None
    ess: tuple[float, float] | None = None
    n_trimmed: int = 0
    n_redrawn: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def tau_hat(self) -> float:
        return self.group_means[0] - self.group_means[1]

    @property
    def ci_95(self) -> tuple[float, float]:
        return normal_ci(self.tau_hat, self.se)


def normal_ci(estimate: float, se: float, z: float = Z95) -> tuple[float, float]:
    return estimate - z * se, estimate + z * se


def hajek_means(y, z, w) -> tuple[float, float]:
    """Ratio-normalized weighted outcome means of group 1 and group 0.

    Sums are compensated (``math.fsum``) and taken around a common reference
    value, so a constant outcome yields identical means exactly.
    """
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z)
    w = np.asarray(w, dtype=np.float64)
    ref = float(y[0]) if y.size else 0.0
    out = []
    for g in (1, 0):
        m = z == g
        den = math.fsum(w[m])
        if not den > 0:
            raise ZeroGroupWeight(g)
        out.append(ref + math.fsum((y[m] - ref) * w[m]) / den)
    return out[0], out[1]


def hajek_wacd(ds, ws) -> float:
    """Hajek estimate of the weighted average controlled difference.

    ``ds`` may be a :class:`Dataset` or an outcome vector; ``ws`` a
    :class:`WeightSet` or a raw weight vector (then ``ds`` must be a Dataset).
    """
    if isinstance(ws, WeightSet):
        z, w = ws.group, ws.weights
    else:
        z, w = ds.group, ws
    y = ds.outcome if isinstance(ds, Dataset) else ds
    m1, m0 = hajek_means(y, z, w)
    return m1 - m0


def estimating_functions(x, z, y, e, scheme, mu1, mu0):
    """Per-unit stacked estimating functions (logistic score, two weighted means)."""
    scheme = Scheme.parse(scheme)
    w1, w0 = scheme.w1(e), scheme.w0(e)
    psi_beta = x * (z - e)[:, None]
    psi1 = z * w1 * (y - mu1)
    psi0 = (1 - z) * w0 * (y - mu0)
    return np.column_stack([psi_beta, psi1, psi0])


def estimating_jacobian(x, z, y, e, scheme, mu1, mu0):
    """Mean derivative of :func:`estimating_functions` in (beta, mu1, mu0)."""
    scheme = Scheme.parse(scheme)
    n, k = x.shape
    v = e * (1.0 - e)  # de/d(eta)
    jac = np.zeros((k + 2, k + 2))
    jac[:k, :k] = -(x * v[:, None]).T @ x
    jac[k, :k] = (z * (y - mu1) * scheme.dw1_de(e) * v) @ x
    jac[k + 1, :k] = ((1 - z) * (y - mu0) * scheme.dw0_de(e) * v) @ x
    jac[k, k] = -np.sum(z * scheme.w1(e))
    jac[k + 1, k + 1] = -np.sum((1 - z) * scheme.w0(e))
    return jac / n


def sandwich_variance(x, z, y, e, scheme) -> float:
    """Variance of mu1 - mu0 from the stacked M-estimation system.

    Uses the influence representation ``-J^{-1} psi_i``, so the returned value
    equals the contrast of ``J^{-1} B J^{-T} / n``.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    scheme = Scheme.parse(scheme)
    mu1, mu0 = hajek_means(y, z, np.where(z == 1, scheme.w1(e), scheme.w0(e)))
    n, k = x.shape
    psi = estimating_functions(x, z, y, e, scheme, mu1, mu0)
    jac = estimating_jacobian(x, z, y, e, scheme, mu1, mu0)
    contrast = np.zeros(k + 2)
    contrast[k], contrast[k + 1] = 1.0, -1.0
    if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > 1e14:
        raise SingularJacobian("estimating-equation Jacobian is singular")
    a = np.linalg.solve(jac.T, contrast)
    infl = psi @ a
    return float(math.fsum(infl * infl) / n**2)


def sandwich_se(ds: Dataset, model: PropensityModel, scheme, ws: WeightSet | None = None) -> float:
    """Sandwich standard error of the Hajek WACD, accounting for the estimated
    propensity coefficients.

    Requires the model to have been fitted on ``ds``; trimmed weight sets are
    rejected because the estimating equations assume smooth weights.
    """
    if ws is not None and ws.trimmed:
        raise RequiresUntrimmed()
    if model.spec is None:
        raise DataError("model carries no CovariateSpec; cannot rebuild its design")
    x = design_matrix(ds, model.spec)
    e = model.propensities
    if e.shape[0] != ds.n_units:
        raise DataError("model was not fitted on this dataset")
    return math.sqrt(max(sandwich_variance(x, ds.group, ds.outcome, e, scheme), 0.0))


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    estimates: np.ndarray
    n_reps: int
    seed: int
    n_redrawn: int

    def __float__(self):
        return self.se


def resample_index(group, rng) -> np.ndarray:
    """Stratified resample: draw each group's size with replacement from itself."""
    group = np.asarray(group)
    parts = []
    for g in (1, 0):
        members = np.flatnonzero(group == g)
        parts.append(rng.choice(members, size=members.shape[0], replace=True))
    return np.sort(np.concatenate(parts))


def replicate_rng(seed: int, rep: int, attempt: int = 0) -> np.random.Generator:
    """Counter-based generator: depends only on (seed, replicate, attempt)."""
    return np.random.default_rng([seed, rep, attempt])


def bootstrap_se(ds: Dataset, pipeline, n_reps: int = 1000, seed: int = 0) -> BootstrapResult:
    """Nonparametric bootstrap, stratified by group.

    ``pipeline`` maps a resampled Dataset to a scalar estimate and must redo
    every fitting stage. A replicate whose pipeline raises a numeric or data
    error (e.g. separation in the refit) is redrawn; after ``10 * n_reps``
    total attempts :class:`DegenerateResample` is raised.
    """
    if n_reps < 2:
        raise DataError("bootstrap needs n_reps >= 2")
    estimates = np.empty(n_reps)
    redrawn = 0
    budget = 10 * n_reps
    attempts = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(n_reps):
            attempt = 0
            while True:
                attempts += 1
                if attempts > budget:
                    raise DegenerateResample(
                        f"DegenerateResample: {redrawn} redraws exhausted the budget of {budget} attempts"
                    )
                idx = resample_index(ds.group, replicate_rng(seed, r, attempt))
                try:
                    estimates[r] = pipeline(ds.take(idx))
                    break
                except (NumericError, DataError):
                    redrawn += 1
                    attempt += 1
    se = float(np.std(estimates, ddof=1))
    estimates.setflags(write=False)
    return BootstrapResult(se, estimates, n_reps, seed, redrawn)


def wacd_pipeline(spec: CovariateSpec, scheme, trim=None):
    """Closure refitting the propensity model and returning the Hajek WACD."""
    scheme = Scheme.parse(scheme)

    def run(d: Dataset) -> float:
        model = fit_logistic(d, spec)
        return hajek_wacd(d, balancing_weights(model, d.group, scheme, trim=trim))

    return run


def estimate_wacd(ds: Dataset, spec: CovariateSpec, scheme="ow", variance="sandwich",
                  reps: int = 1000, seed: int = 0, trim=None, model: PropensityModel | None = None,
                  extreme_multiple: float = 10.0) -> WacdEstimate:
    """Fit, weight, estimate and attach a standard error in one call."""
    scheme = Scheme.parse(scheme)
    if variance not in ("sandwich", "bootstrap"):
        raise DataError(f"unknown variance method {variance!r}")
    if variance == "sandwich" and trim is not None:
        raise RequiresUntrimmed()
    model = fit_logistic(ds, spec) if model is None else model
    ws = balancing_weights(model, ds.group, scheme, trim=trim, extreme_multiple=extreme_multiple)
    means = hajek_means(ds.outcome, ds.group, ws.weights)
    ess = effective_sample_size(ws)
    if variance == "sandwich":
        se = sandwich_se(ds, model, scheme, ws)
        return WacdEstimate(means, se, scheme, "sandwich", ess=ess)
    boot = bootstrap_se(ds, wacd_pipeline(spec, scheme, trim), reps, seed)
    return WacdEstimate(means, boot.se, scheme, "bootstrap", reps, seed, ess,
                        len(ws.trimmed), boot.n_redrawn)
