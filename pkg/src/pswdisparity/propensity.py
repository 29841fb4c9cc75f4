"""Logistic propensity score model fitted by exact maximum likelihood."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .config import CovariateSpec
from .data import Dataset, check_full_rank, design_columns, design_matrix
from .errors import DimensionMismatch, EmptyGroup, NoConvergence, Separation

SCORE_TOL = 1e-8
MAX_ITER = 100
BOUNDARY_EPS = 1e-10
MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """Fitted logistic model for Pr(Z=1 | X).

    ``coefficients`` are on the log-odds scale, intercept first, aligned with
    ``names``. ``propensities`` are the fitted values for the units the model
    was estimated on.
    """

    coefficients: np.ndarray
    names: tuple[str, ...]
    propensities: np.ndarray
    converged: bool
    iterations: int
    max_abs_score: float
    spec: CovariateSpec | None = None

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:]

    def to_dict(self) -> dict:
        return {
            "coefficients": {n: float(c) for n, c in zip(self.names, self.coefficients)},
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "max_abs_score": float(self.max_abs_score),
            "n": int(self.propensities.shape[0]),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _loglik(x, z, beta):
    eta = x @ beta
    return float(np.sum(z * eta - np.logaddexp(0.0, eta)))


def fit_logistic_matrix(x: np.ndarray, z: np.ndarray, names=None, *, tol=SCORE_TOL,
                        max_iter=MAX_ITER, check_rank=True):
    """Newton/IRLS for a logistic regression on an explicit design matrix.

    Each Newton step is halved until the log-likelihood does not decrease.
    Convergence is declared when the largest absolute score component
    ``X'(z - e)`` is at most ``tol``.

    Returns ``(beta, e, iterations, max_abs_score)``.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    names = list(names) if names is not None else [f"x{j}" for j in range(x.shape[1])]
    if check_rank:
        check_full_rank(x, names)
    for g in (1, 0):
        if not np.any(z == g):
            raise EmptyGroup(g)

    beta = np.zeros(x.shape[1])
    # start at the marginal log-odds so intercept-only fits converge in one step
    pbar = z.mean()
    beta[0] = np.log(pbar / (1.0 - pbar)) if np.allclose(x[:, 0], 1.0) else 0.0
    ll = _loglik(x, z, beta)
    at_boundary = 0
    for it in range(1, max_iter + 1):
        e = expit(x @ beta)
        score = x.T @ (z - e)
        max_score = float(np.max(np.abs(score)))
        if max_score <= tol:
            return beta, e, it - 1, max_score
        near = (e < BOUNDARY_EPS) | (e > 1.0 - BOUNDARY_EPS)
        # a transient overshoot is tolerated; persistence means the MLE diverges
        at_boundary = at_boundary + 1 if np.any(near) else 0
        if at_boundary >= 3:
            raise Separation(np.flatnonzero(near).tolist())
        info = (x * (e * (1.0 - e))[:, None]).T @ x
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise Separation(np.flatnonzero(e * (1 - e) < 1e-8).tolist()) from None
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            ll_new = _loglik(x, z, cand)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        beta, ll = cand, ll_new
    e = expit(x @ beta)
    max_score = float(np.max(np.abs(x.T @ (z - e))))
    if max_score <= tol:
        return beta, e, max_iter, max_score
    near = (e < BOUNDARY_EPS) | (e > 1.0 - BOUNDARY_EPS)
    if np.any(near):
        raise Separation(np.flatnonzero(near).tolist())
    raise NoConvergence(max_iter, max_score)


def fit_logistic(ds: Dataset, spec: CovariateSpec, **kw) -> PropensityModel:
    """Fit e(x) = Pr(Z=1 | X=x) on the design built from ``spec``."""
    x = design_matrix(ds, spec)
    names = ("(intercept)",) + design_columns(ds, spec)
    beta, e, it, score = fit_logistic_matrix(x, ds.group, names, check_rank=False, **kw)
    beta.setflags(write=False)
    e.setflags(write=False)
    return PropensityModel(beta, names, e, True, it, score, spec)


def predict(model: PropensityModel, x) -> np.ndarray | float:
    """Propensity for one covariate vector (or a matrix of row vectors).

    ``x`` excludes the intercept and follows the model's covariate order.
    """
    x = np.asarray(x, dtype=np.float64)
    k = model.coefficients.shape[0] - 1
    if x.shape[-1:] != (k,) and not (k == 0 and x.size == 0):
        raise DimensionMismatch(f"expected {k} covariates, got shape {x.shape}")
    eta = model.intercept + x @ model.slopes if k else np.full(x.shape[:-1], model.intercept)
    p = expit(eta)
    return float(p) if np.ndim(p) == 0 else p


def predict_dataset(model: PropensityModel, ds: Dataset) -> np.ndarray:
    """Propensities for every unit of ``ds`` (e.g. a bootstrap resample)."""
    return predict(model, ds.matrix(model.names[1:]))
