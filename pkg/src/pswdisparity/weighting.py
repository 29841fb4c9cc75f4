"""Balancing weights for the combined, one-group and overlap target populations.

For a tilting function h, group-1 units get h(e)/e and group-0 units get
h(e)/(1 - e). The natural constants are used (h = 1, e, 1 - e, e(1 - e));
weights are stored raw because the Hajek estimator normalizes within group.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllZeroWeights, DataError, ExtremeWeightWarning, TrimmingWarning
from .propensity import PropensityModel


class Scheme(enum.Enum):
    """Target population / tilting function.

    ``IPW``: h = 1 (both groups combined). ``ATT``: h = e (group 1's
    population). ``ATC``: h = 1 - e (group 0's population). ``OW``:
    h = e(1 - e) (overlap population).
    """

    IPW = "ipw"
    ATT = "att"
    ATC = "atc"
    OW = "ow"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower()
        aliases = {"combined": "ipw", "onegroup": "att", "one_group": "att",
                   "overlap": "ow", "treated": "att", "control": "atc"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise DataError(f"unknown weighting scheme {value!r}") from None

    @property
    def label(self) -> str:
        return {"ipw": "Combined", "att": "OneGroup", "atc": "OneGroup(0)", "ow": "Overlap"}[self.value]

    def flipped(self) -> "Scheme":
        """Scheme targeting the same population after exchanging group labels."""
        return {Scheme.ATT: Scheme.ATC, Scheme.ATC: Scheme.ATT}.get(self, self)

    def tilt(self, e):
        e = np.asarray(e, dtype=np.float64)
        if self is Scheme.IPW:
            return np.ones_like(e)
        if self is Scheme.ATT:
            return e
        if self is Scheme.ATC:
            return 1.0 - e
        return e * (1.0 - e)

    def w1(self, e):
        e = np.asarray(e, dtype=np.float64)
        if self is Scheme.IPW:
            return 1.0 / e
        if self is Scheme.ATT:
            return np.ones_like(e)
        if self is Scheme.ATC:
            return (1.0 - e) / e
        return 1.0 - e

    def w0(self, e):
        e = np.asarray(e, dtype=np.float64)
        if self is Scheme.IPW:
            return 1.0 / (1.0 - e)
        if self is Scheme.ATT:
            return e / (1.0 - e)
        if self is Scheme.ATC:
            return np.ones_like(e)
        return e.copy()

    def dw1_de(self, e):
        e = np.asarray(e, dtype=np.float64)
        if self in (Scheme.IPW, Scheme.ATC):
            return -1.0 / e**2
        if self is Scheme.ATT:
            return np.zeros_like(e)
        return -np.ones_like(e)

    def dw0_de(self, e):
        e = np.asarray(e, dtype=np.float64)
        if self in (Scheme.IPW, Scheme.ATT):
            return 1.0 / (1.0 - e) ** 2
        if self is Scheme.ATC:
            return np.zeros_like(e)
        return np.ones_like(e)


@dataclass(frozen=True, eq=False)
class WeightSet:
    weights: np.ndarray
    scheme: Scheme
    group: np.ndarray
    propensities: np.ndarray
    trimmed: tuple[int, ...] = ()
    trim_bounds: tuple[float, float] | None = None

    @property
    def normalization(self) -> tuple[float, float]:
        """Total raw weight in group 1 and group 0."""
        w, z = self.weights, self.group
        return math.fsum(w[z == 1]), math.fsum(w[z == 0])

    def scaled(self, c: float) -> "WeightSet":
        return WeightSet(self.weights * c, self.scheme, self.group, self.propensities,
                         self.trimmed, self.trim_bounds)

    def to_csv(self, path, unit_ids=None) -> None:
        """Audit export: unit_id, group, propensity, weight, trimmed."""
        trimmed = np.zeros(self.weights.shape[0], dtype=bool)
        trimmed[list(self.trimmed)] = True
        ids = range(1, len(self.weights) + 1) if unit_ids is None else unit_ids
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["unit_id", "group", "propensity", "weight", "trimmed"])
            for uid, g, e, w, t in zip(ids, self.group, self.propensities, self.weights, trimmed):
                out.writerow([uid, int(g), repr(float(e)), repr(float(w)), int(t)])


def balancing_weights(model, group, scheme, trim=None, extreme_multiple=10.0) -> WeightSet:
    """Per-unit balancing weights for ``scheme``.

    ``model`` is a :class:`PropensityModel` or an array of propensities.
    With ``trim=(lo, hi)``, units whose propensity falls outside ``[lo, hi]``
    get weight exactly 0 and are listed in ``WeightSet.trimmed``; this changes
    the target population and is signalled with a :class:`TrimmingWarning`.

    For IPW/ATT/ATC an :class:`ExtremeWeightWarning` is issued when a weight
    exceeds ``extreme_multiple`` times its group's mean weight.
    """
    scheme = Scheme.parse(scheme)
    e = model.propensities if isinstance(model, PropensityModel) else model
    e = np.asarray(e, dtype=np.float64)
    z = np.asarray(group)
    if e.shape != z.shape:
        raise DataError(f"propensities {e.shape} and group {z.shape} differ in shape")
    if np.any((e <= 0) | (e >= 1)) or not np.all(np.isfinite(e)):
        raise DataError("propensities must lie strictly inside (0, 1)")

    w = np.where(z == 1, scheme.w1(e), scheme.w0(e))
    trimmed = ()
    if trim is not None:
        lo, hi = map(float, trim)
        if not (0.0 <= lo < hi <= 1.0):
            raise DataError(f"trim bounds must satisfy 0 <= lo < hi <= 1, got {trim}")
        out = (e < lo) | (e > hi)
        w = np.where(out, 0.0, w)
        trimmed = tuple(int(i) for i in np.flatnonzero(out))
        if trimmed:
            warnings.warn(
                f"trimming to propensity range [{lo}, {hi}] excluded {len(trimmed)} units; "
                "the target population is changed",
                TrimmingWarning, stacklevel=2,
            )
        trim = (lo, hi)
    for g in (1, 0):
        if not np.any(w[z == g] > 0):
            raise AllZeroWeights(g)

    if scheme is not Scheme.OW and extreme_multiple is not None:
        for g in (1, 0):
            wg = w[(z == g) & (w > 0)]
            big = np.sum(wg > extreme_multiple * wg.mean())
            if big:
                warnings.warn(
                    f"{scheme.value}: {big} group-{g} weights exceed {extreme_multiple:g}x the "
                    f"group mean (max {wg.max():.3g}); overlap may be poor",
                    ExtremeWeightWarning, stacklevel=2,
                )
    w.setflags(write=False)
    return WeightSet(w, scheme, z, e, trimmed, trim)


def effective_sample_size(ws: WeightSet, group=None) -> tuple[float, float]:
    """Kish effective sample size (sum w)^2 / sum w^2 for group 1 and group 0."""
    z = ws.group if group is None else np.asarray(group)
    out = []
    for g in (1, 0):
        wg = ws.weights[z == g]
        s1 = math.fsum(wg)
        if not s1 > 0:
            raise AllZeroWeights(g)
        out.append(s1 * s1 / math.fsum(wg * wg))
    return out[0], out[1]
