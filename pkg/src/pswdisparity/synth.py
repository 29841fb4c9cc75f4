"""Synthetic scenarios with known propensities and known controlled differences.

Covariates are ``h1..hK`` (standard normals, optionally equicorrelated) and
``b1..bM`` (Bernoulli), all health-status. Group membership follows a
logistic model with coefficients ``overlap_knob * beta``. Optional SES
covariates ``s1..sJ`` are drawn *after* the group:

    s_j = ses_loading * mean(h) + ses_shift * Z + N(0, 1)

so they are correlated with health status and differ between groups. The
outcome mean given (Z=z, x, s) is ``a_z + x'b_z + s'ses_coef`` (linear) or its
exponential (loglinear). The true conditional difference tau(x) integrates
the SES covariates out in closed form.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .data import Dataset
from .errors import InvalidScenario, NumericError
from .estimation import Z95, hajek_means, sandwich_variance
from .propensity import fit_logistic_matrix
from .weighting import Scheme

TRUTH_DRAWS = 1_000_000
TRUTH_SEED = 20220817


@dataclass(frozen=True)
class Scenario:
    n: int = 2000
    beta: tuple = (0.0, 0.5, -0.5, 0.3, 0.4)
    n_normal: int = 3
    n_binary: int = 1
    corr: float = 0.0
    binary_p: float = 0.5
    outcome: str = "linear"
    coef1: tuple = (1.0, 1.0, 0.5, -0.5, 1.0)
    coef0: tuple = (0.0, 0.5, 0.5, 0.0, 0.5)
    noise: float = 1.0
    overlap_knob: float = 1.0
    n_ses: int = 0
    ses_loading: float = 0.0
    ses_shift: float = 0.0
    ses_coef: tuple = ()
    seed: int = 0

    def __post_init__(self):
        for name in ("beta", "coef1", "coef0", "ses_coef"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        p = self.n_normal + self.n_binary
        problems = []
        if self.n < 4:
            problems.append("n must be >= 4")
        if len(self.beta) != 1 + p:
            problems.append(f"beta needs {1 + p} entries (intercept + {p} slopes)")
        for name in ("coef1", "coef0"):
            if len(getattr(self, name)) != 1 + p:
                problems.append(f"{name} needs {1 + p} entries")
        if len(self.ses_coef) != self.n_ses:
            problems.append(f"ses_coef needs {self.n_ses} entries")
        if self.outcome not in ("linear", "loglinear"):
            problems.append("outcome must be 'linear' or 'loglinear'")
        if self.n_normal > 1 and not (-1.0 / (self.n_normal - 1) < self.corr < 1.0):
            problems.append("corr outside the positive-definite range")
        if not 0.0 < self.binary_p < 1.0:
            problems.append("binary_p must lie in (0, 1)")
        if self.noise < 0 or self.seed < 0 or self.overlap_knob < 0:
            problems.append("noise, seed and overlap_knob must be nonnegative")
        if problems:
            raise InvalidScenario("; ".join(problems))

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidScenario(f"unknown scenario fields {sorted(unknown)}")
        return cls(**raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @property
    def health_names(self) -> tuple[str, ...]:
        return tuple(f"h{j + 1}" for j in range(self.n_normal)) + tuple(
            f"b{j + 1}" for j in range(self.n_binary))

    @property
    def ses_names(self) -> tuple[str, ...]:
        return tuple(f"s{j + 1}" for j in range(self.n_ses))

    def draw_health(self, rng, n) -> np.ndarray:
        k = self.n_normal
        normals = rng.standard_normal((n, k))
        if k > 1 and self.corr != 0.0:
            c = np.full((k, k), self.corr)
            np.fill_diagonal(c, 1.0)
            normals = normals @ np.linalg.cholesky(c).T
        binary = (rng.random((n, self.n_binary)) < self.binary_p).astype(np.float64)
        return np.column_stack([normals, binary])

    def propensity(self, xh) -> np.ndarray:
        b = self.overlap_knob * np.asarray(self.beta)
        return expit(b[0] + xh @ b[1:])

    def _ses_center(self, xh):
        h = xh[:, : self.n_normal]
        return self.ses_loading * (h.mean(axis=1) if self.n_normal else 0.0)

    def mean_given_health(self, xh, z) -> np.ndarray:
        """E[Y | Z=z, X_H=xh], integrating over the SES covariates."""
        coef = np.asarray(self.coef1 if z == 1 else self.coef0)
        eta = coef[0] + xh @ coef[1:]
        gs = np.asarray(self.ses_coef)
        if self.n_ses:
            eta = eta + gs.sum() * (self._ses_center(xh) + self.ses_shift * z)
        if self.outcome == "linear":
            return eta
        return np.exp(eta + 0.5 * float(gs @ gs))

    def tau(self, xh) -> np.ndarray:
        return self.mean_given_health(xh, 1) - self.mean_given_health(xh, 0)


@dataclass(frozen=True)
class GroundTruth:
    propensities: np.ndarray
    tau_h: dict
    tau_h_mc_se: dict
    n_mc: int = TRUTH_DRAWS

    def to_dict(self) -> dict:
        return {
            "tau_h": {s.value: v for s, v in self.tau_h.items()},
            "tau_h_mc_se": {s.value: v for s, v in self.tau_h_mc_se.items()},
            "n_mc": self.n_mc,
        }


def _truth_key(sc: Scenario) -> Scenario:
    return replace(sc, n=4, seed=0)


@functools.lru_cache(maxsize=32)
def _true_wacd(key: Scenario, n_mc: int):
    rng = np.random.default_rng(TRUTH_SEED)
    tau_h, mc_se = {}, {}
    xh = key.draw_health(rng, n_mc)
    e = key.propensity(xh)
    t = key.tau(xh)
    for s in Scheme:
        h = s.tilt(e)
        hbar = math.fsum(h) / n_mc
        est = math.fsum(h * t) / n_mc / hbar
        # delta-method standard error of a ratio of means
        resid = h * (t - est) / hbar
        tau_h[s] = est
        mc_se[s] = float(np.std(resid, ddof=1) / math.sqrt(n_mc))
    return tau_h, mc_se


def true_wacd(sc: Scenario, n_mc: int = TRUTH_DRAWS) -> tuple[dict, dict]:
    """True WACD per scheme by Monte-Carlo integration, with its MC standard error."""
    return _true_wacd(_truth_key(sc), n_mc)


def _draw(sc: Scenario, rng) -> tuple[Dataset, np.ndarray]:
    xh = sc.draw_health(rng, sc.n)
    e = sc.propensity(xh)
    z = (rng.random(sc.n) < e).astype(np.int64)
    cols = [xh]
    if sc.n_ses:
        center = sc._ses_center(xh) + sc.ses_shift * z
        cols.append(center[:, None] + rng.standard_normal((sc.n, sc.n_ses)))
    x = np.column_stack(cols)
    c1, c0 = np.asarray(sc.coef1), np.asarray(sc.coef0)
    eta = np.where(z == 1, c1[0] + xh @ c1[1:], c0[0] + xh @ c0[1:])
    if sc.n_ses:
        eta = eta + x[:, xh.shape[1]:] @ np.asarray(sc.ses_coef)
    if sc.outcome == "linear":
        y = eta + sc.noise * rng.standard_normal(sc.n)
    elif sc.noise > 0:
        shape = 1.0 / sc.noise**2
        y = np.exp(eta) * rng.gamma(shape, 1.0 / shape, sc.n)
    else:
        y = np.exp(eta)
    names = sc.health_names + sc.ses_names
    roles = {c: "health_status" for c in sc.health_names} | {c: "ses" for c in sc.ses_names}
    if not (z.any() and (1 - z).any()):
        raise InvalidScenario("scenario produced an empty group; increase n or reduce beta")
    return Dataset(z, y, x, names, roles, group_name="z", outcome_name="y"), e


def generate(sc: Scenario, rng=None, truth: bool = True):
    """Draw one dataset; returns ``(Dataset, GroundTruth | None)``.

    Uses ``sc.seed`` unless a generator is supplied.
    """
    rng = np.random.default_rng(sc.seed) if rng is None else rng
    ds, e = _draw(sc, rng)
    if not truth:
        return ds, None
    tau_h, se = true_wacd(sc)
    e.setflags(write=False)
    return ds, GroundTruth(e, tau_h, se)


@dataclass(frozen=True)
class StudyRow:
    scheme: Scheme
    truth: float
    truth_mc_se: float
    mean_estimate: float
    bias: float
    bias_mc_se: float
    empirical_sd: float
    mean_se: float
    coverage: float
    n_ok: int
    n_failed: int

    def as_dict(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        return d


@dataclass(frozen=True)
class StudyTable:
    rows: list
    estimates: dict = field(default_factory=dict)
    ses: dict = field(default_factory=dict)

    def row(self, scheme) -> StudyRow:
        scheme = Scheme.parse(scheme)
        return next(r for r in self.rows if r.scheme is scheme)

    def to_csv(self, path) -> None:
        cols = list(StudyRow.__dataclass_fields__)
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(cols)
            for r in self.rows:
                d = r.as_dict()
                out.writerow([repr(v) if isinstance(v, float) else v for v in (d[c] for c in cols)])


def replicate_study(sc: Scenario, n_reps: int, schemes=("ipw", "att", "ow"),
                    seed: int | None = None) -> StudyTable:
    """Monte-Carlo bias, SD, mean sandwich SE and 95% coverage per scheme.

    Replicate r uses the generator seeded by ``(seed, r)`` (``seed`` defaults
    to ``sc.seed``), so results do not depend on execution order. The
    propensity model is the correctly specified logistic model on all health
    covariates. Replicates whose fit fails are counted in ``n_failed``.
    """
    if n_reps < 100:
        raise InvalidScenario("replicate_study needs n_reps >= 100")
    schemes = tuple(Scheme.parse(s) for s in schemes)
    seed = sc.seed if seed is None else seed
    tau_h, tau_se = true_wacd(sc)
    est = {s: np.full(n_reps, np.nan) for s in schemes}
    ses = {s: np.full(n_reps, np.nan) for s in schemes}
    p_h = len(sc.health_names)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for r in range(n_reps):
            ds, _ = generate(sc, np.random.default_rng([seed, r]), truth=False)
            x = np.column_stack([np.ones(ds.n_units), ds.covariates[:, :p_h]])
            try:
                _, e, _, _ = fit_logistic_matrix(x, ds.group, check_rank=False)
            except NumericError:
                continue
            for s in schemes:
                w = np.where(ds.group == 1, s.w1(e), s.w0(e))
                m1, m0 = hajek_means(ds.outcome, ds.group, w)
                est[s][r] = m1 - m0
                ses[s][r] = math.sqrt(max(sandwich_variance(x, ds.group, ds.outcome, e, s), 0.0))
    rows = []
    for s in schemes:
        ok = np.isfinite(est[s])
        v, se = est[s][ok], ses[s][ok]
        n_ok = int(ok.sum())
        sd = float(np.std(v, ddof=1)) if n_ok > 1 else math.nan
        mean = float(np.mean(v)) if n_ok else math.nan
        cover = float(np.mean(np.abs(v - tau_h[s]) <= Z95 * se)) if n_ok else math.nan
        rows.append(StudyRow(s, tau_h[s], tau_se[s], mean, mean - tau_h[s],
                             sd / math.sqrt(n_ok) if n_ok else math.nan, sd,
                             float(np.mean(se)) if n_ok else math.nan, cover, n_ok, n_reps - n_ok))
    return StudyTable(rows, est, ses)


def load_scenario(path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidScenario(f"cannot read scenario {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidScenario("scenario file must hold a JSON object")
    return Scenario.from_dict(raw)


WELL_OVERLAPPED = Scenario()
POOR_OVERLAP = Scenario(overlap_knob=4.0)
SES_SCENARIO = Scenario(
    n=5000, beta=(0.5, 0.8, -0.6, 0.4, 0.3), outcome="loglinear",
    coef1=(7.5, 0.3, 0.2, 0.1, 0.2), coef0=(7.4, 0.3, 0.2, 0.1, 0.2), noise=1.0,
    n_ses=2, ses_loading=1.0, ses_shift=0.5, ses_coef=(0.25, 0.15),
)
