"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: each oracle takes plain
arrays and recomputes a quantity by a different route (grid search plus a
generic optimizer, exact rational arithmetic, explicit enumeration).
"""

from fractions import Fraction
import itertools

import numpy as np
from scipy import optimize


def logistic_mle(x, z):
    """Logistic MLE by coarse grid search refined with BFGS (no Newton/IRLS)."""
    x = np.asarray(x, float)
    z = np.asarray(z, float)

    def nll(b):
        eta = x @ b
        return float(np.sum(np.logaddexp(0.0, eta) - z * eta))

    def grad(b):
        return x.T @ (1.0 / (1.0 + np.exp(-(x @ b))) - z)

    k = x.shape[1]
    axis = np.linspace(-2.0, 2.0, 9)
    grid = np.array(list(itertools.product(axis, repeat=k)))
    vals = np.logaddexp(0.0, grid @ x.T).sum(axis=1) - grid @ (x.T @ z)
    start = grid[np.argmin(vals)]
    res = optimize.minimize(nll, start, jac=grad, method="BFGS",
                            options={"gtol": 1e-11, "maxiter": 10_000})
    # polish: a few more rounds from the BFGS solution
    for _ in range(3):
        res = optimize.minimize(nll, res.x, jac=grad, method="BFGS",
                                options={"gtol": 1e-12, "maxiter": 10_000})
    return res.x


def hajek_exact(y, z, w):
    """Hajek difference with exact rational arithmetic on the float inputs."""
    num = {0: Fraction(0), 1: Fraction(0)}
    den = {0: Fraction(0), 1: Fraction(0)}
    for yi, zi, wi in zip(y, z, w):
        g = int(zi)
        num[g] += Fraction(float(yi)) * Fraction(float(wi))
        den[g] += Fraction(float(wi))
    return float(num[1] / den[1] - num[0] / den[0])


def kish_ess(w):
    w = [float(v) for v in w]
    return sum(w) ** 2 / sum(v * v for v in w)


def weighted_midrank_positions(values, weights):
    """Weighted mid-rank position of each unit in a single group, by enumeration.

    Position = n * (weight of units strictly before i in (value, index) order
    + half of i's own weight) / total weight.
    """
    n = len(values)
    total = Fraction(0)
    for w in weights:
        total += Fraction(float(w))
    pos = []
    for i in range(n):
        before = Fraction(0)
        for j in range(n):
            if (values[j], j) < (values[i], i):
                before += Fraction(float(weights[j]))
        pos.append(float(n * (before + Fraction(float(weights[i])) / 2) / total))
    return pos


def ecdf_sup(original, replaced, weights):
    """sup_t |F_w(replaced)(t) - F(original)(t)| by evaluating at every data point."""
    pts = sorted(set(map(float, original)) | set(map(float, replaced)))
    tot = sum(map(float, weights))
    best = 0.0
    for t in pts:
        f0 = sum(1 for v in original if v <= t) / len(original)
        f1 = sum(float(w) for v, w in zip(replaced, weights) if v <= t) / tot
        best = max(best, abs(f1 - f0))
    return best


def loglink_mle(x, y):
    """Quasi-Poisson (log link) coefficients via statsmodels' GLM IRLS."""
    import statsmodels.api as sm

    res = sm.GLM(np.asarray(y, float), np.asarray(x, float),
                 family=sm.families.Poisson()).fit(tol=1e-14, maxiter=200)
    return np.asarray(res.params)
