"""Linear regression performance models for NVMe and HDD total IO time:
prediction from the published coefficient tables, and an OLS fitting path
(with R-squared, residual standard error and per-term t statistics) for new
training data.

Predictor semantics
  NVMe: x1 client threads, x2 distinct block addresses (carried in the data
        model, unused by the published terms), x3 request size (bytes),
        x4 request count, x5 address range (bytes).
  HDD:  x1 processes, x2 stripe count, x3 stripes per disk, x4 stripe size
        (bytes), x5 file size (bytes).
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class RankDeficientError(ValueError):
    """The design matrix is rank-deficient; names the collinear terms."""

    def __init__(self, terms: list[str]):
        self.terms = terms
        super().__init__(f"design matrix is rank deficient; "
                         f"collinear terms: {', '.join(terms)}")


class Device(enum.Enum):
    NVME_READ = "nvme-read"
    NVME_WRITE = "nvme-write"
    HDD_READ = "hdd-read"
    HDD_WRITE = "hdd-write"


Term = tuple[int, ...]  # 1-based predictor indices; () is the intercept


def term_name(term: Term) -> str:
    return "(Intercept)" if not term else ":".join(f"x{i}" for i in term)


def _factor_expansion(*groups: tuple[int, ...]) -> tuple[Term, ...]:
    """All main effects and interactions of each factor group (the R-formula
    ``a*b*c`` convention), intercept first, ordered by interaction depth."""
    terms: set[Term] = set()
    for group in groups:
        k = len(group)
        for mask in range(1, 2 ** k):
            terms.add(tuple(sorted(group[i] for i in range(k)
                                   if mask >> i & 1)))
    return ((),) + tuple(sorted(terms, key=lambda t: (len(t), t)))


@dataclass(frozen=True)
class ModelTermSet:
    terms: tuple[Term, ...]  # includes the leading intercept ()

    def __post_init__(self):
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate terms")
        if self.terms[0] != ():
            raise ValueError("intercept must come first")

    def design_matrix(self, x: np.ndarray) -> np.ndarray:
        """x is (n_samples, 5); returns (n_samples, n_terms)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        cols = [np.ones(len(x))]
        for term in self.terms[1:]:
            col = np.ones(len(x))
            for idx in term:
                col = col * x[:, idx - 1]
            cols.append(col)
        return np.column_stack(cols)

    def names(self) -> list[str]:
        return [term_name(t) for t in self.terms]


# Expansion of x1*x3*x4 + x5*x4*x3 -> 11 terms + intercept.
NVME_TERMS = ModelTermSet(_factor_expansion((1, 3, 4), (3, 4, 5)))
# Expansion of x3*x4 + x5*x1*x2 -> 10 terms + intercept.
HDD_TERMS = ModelTermSet(_factor_expansion((3, 4), (1, 2, 5)))

FAMILY_TERMS = {
    Device.NVME_READ: NVME_TERMS,
    Device.NVME_WRITE: NVME_TERMS,
    Device.HDD_READ: HDD_TERMS,
    Device.HDD_WRITE: HDD_TERMS,
}

# Published coefficient estimates, keyed by term.
_PAPER_COEFFICIENTS: dict[Device, dict[Term, float]] = {
    Device.NVME_WRITE: {
        (): -5.941e+00,
        (1,): 6.252e-01, (3,): -6.326e-05, (4,): 3.726e-05, (5,): 6.213e-11,
        (1, 3): 1.667e-06, (1, 4): -8.464e-07, (3, 4): -1.650e-09,
        (4, 5): 2.029e-16, (3, 5): -6.564e-16,
        (1, 3, 4): 1.973e-10, (3, 4, 5): 1.103e-20,
    },
    Device.NVME_READ: {
        (): -6.059e+00,
        (1,): 2.182e-02, (3,): 1.009e-04, (4,): -3.566e-06, (5,): 6.963e-11,
        (1, 3): -2.066e-07, (1, 4): -1.165e-08, (3, 4): -4.060e-10,
        (4, 5): 1.259e-16, (3, 5): -2.984e-15,
        (1, 3, 4): -6.675e-12, (3, 4, 5): 1.896e-20,
    },
    Device.HDD_WRITE: {
        (): 7.297e+00,
        (3,): 4.318e-04, (4,): -4.354e-06, (5,): 1.002e-08,
        (1,): 3.869e-01, (2,): 6.664e+00,
        (3, 4): 2.007e-11, (1, 5): -7.486e-11, (2, 5): -9.269e-10,
        (1, 2): -9.916e-02, (1, 2, 5): 8.344e-12,
    },
    Device.HDD_READ: {
        (): -3.771e-01,
        (3,): 5.913e-04, (4,): -1.584e-06, (2,): 8.933e+00,
        (1,): -2.563e+00, (5,): 6.274e-10,
        (3, 4): 1.715e-08, (1, 2): 3.694e-01, (2, 5): -2.272e-10,
        (1, 5): -4.751e-11, (1, 2, 5): 5.167e-12,
    },
}


class Provenance(enum.Enum):
    PAPER_TABLE = "paper-table"
    FITTED = "fitted"


@dataclass(frozen=True)
class FitStats:
    r_squared: float
    residual_se: float
    t_values: tuple[float, ...]
    std_errors: tuple[float, ...]


@dataclass(frozen=True)
class DeviceModel:
    """Immutable fitted/published model: total IO time (seconds) as a linear
    combination of predictor products."""

    device: Device
    term_set: ModelTermSet
    coefficients: tuple[float, ...]
    provenance: Provenance
    stats: FitStats | None = None

    def __post_init__(self):
        if len(self.coefficients) != len(self.term_set.terms):
            raise ValueError("one coefficient per term (intercept included)")

    def predict(self, x: Sequence[float]) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != 5:
            raise ValueError("predictor vector must have 5 entries")
        row = self.term_set.design_matrix(x[None, :])[0]
        return float(row @ np.asarray(self.coefficients))

    def predict_checked(self, x: Sequence[float]) -> tuple[float, bool]:
        """Prediction plus a flag marking non-positive (out-of-envelope)
        values; the value itself is returned unclamped."""
        y = self.predict(x)
        return y, y <= 0.0

    def mean_request_time(self, x: Sequence[float],
                          floor: float = 1e-6) -> float:
        """Per-request service time predict(x)/x4, clamped below at ``floor``
        seconds so downstream service rates stay positive."""
        x = np.asarray(x, dtype=np.float64)
        if x[3] <= 0:
            raise ValueError("x4 (request count) must be > 0")
        return max(self.predict(x) / float(x[3]), floor)

    def to_dict(self) -> dict:
        d = {
            "device": self.device.value,
            "terms": [list(t) for t in self.term_set.terms],
            "coefficients": list(self.coefficients),
            "provenance": self.provenance.value,
        }
        if self.stats is not None:
            d["stats"] = {
                "r_squared": self.stats.r_squared,
                "residual_se": self.stats.residual_se,
                "t_values": list(self.stats.t_values),
                "std_errors": list(self.stats.std_errors),
            }
        return d

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def model_from_dict(d: dict) -> DeviceModel:
    stats = None
    if "stats" in d:
        s = d["stats"]
        stats = FitStats(s["r_squared"], s["residual_se"],
                         tuple(s["t_values"]), tuple(s["std_errors"]))
    return DeviceModel(
        device=Device(d["device"]),
        term_set=ModelTermSet(tuple(tuple(t) for t in d["terms"])),
        coefficients=tuple(d["coefficients"]),
        provenance=Provenance(d["provenance"]),
        stats=stats,
    )


def load_paper_model(device: Device) -> DeviceModel:
    """Model with the published coefficient estimates embedded as data."""
    term_set = FAMILY_TERMS[device]
    table = _PAPER_COEFFICIENTS[device]
    coeffs = tuple(table[t] for t in term_set.terms)
    return DeviceModel(device, term_set, coeffs, Provenance.PAPER_TABLE)


def paper_coefficient(device: Device, term: Term) -> float:
    return _PAPER_COEFFICIENTS[device][tuple(sorted(term))]


@dataclass(frozen=True)
class TrainingSample:
    predictors: tuple[float, float, float, float, float]
    observed_time: float

    def __post_init__(self):
        if any(p < 0 for p in self.predictors):
            raise ValueError("predictors must be >= 0")
        if self.observed_time <= 0:
            raise ValueError("observed_time must be > 0")


def fit(device: Device, samples: Sequence[TrainingSample],
        term_set: ModelTermSet | None = None,
        rank_tol: float = 1e-10) -> DeviceModel:
    """Ordinary least squares over the term set's design matrix.

    Uses pivoted QR both to solve and to detect rank deficiency; collinear
    terms are named in the error. Reports R-squared, residual standard error
    and per-term t statistics.
    """
    if term_set is None:
        term_set = FAMILY_TERMS[device]
    n_terms = len(term_set.terms)
    if len(samples) <= n_terms:
        raise ValueError(f"need more than {n_terms} samples, "
                         f"got {len(samples)}")
    x = np.array([s.predictors for s in samples], dtype=np.float64)
    y = np.array([s.observed_time for s in samples], dtype=np.float64)
    design = term_set.design_matrix(x)

    # Column scaling keeps the pivot test meaningful across wildly different
    # predictor magnitudes (bytes vs counts).
    scale = np.linalg.norm(design, axis=0)
    scale[scale == 0.0] = 1.0
    a = design / scale
    q, r, piv = _qr_pivoted(a)
    diag = np.abs(np.diag(r))
    bad = diag < rank_tol * diag.max()
    if bad.any():
        names = term_set.names()
        raise RankDeficientError([names[piv[i]]
                                  for i in np.nonzero(bad)[0]])
    z = np.linalg.solve(r, q.T @ y)  # coefficients in pivoted column order
    coef_scaled = np.empty(n_terms)
    coef_scaled[piv] = z
    coefficients = coef_scaled / scale

    resid = y - design @ coefficients
    dof = len(samples) - n_terms
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    sigma2 = rss / dof
    xtx_inv = np.linalg.inv(design.T @ design)
    std_errors = np.sqrt(sigma2 * np.diag(xtx_inv))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = np.where(std_errors > 0, coefficients / std_errors, np.inf)
    stats = FitStats(
        r_squared=1.0 - rss / tss if tss > 0 else 1.0,
        residual_se=float(np.sqrt(sigma2)),
        t_values=tuple(t_values),
        std_errors=tuple(std_errors),
    )
    return DeviceModel(device, term_set, tuple(coefficients),
                       Provenance.FITTED, stats)


def _qr_pivoted(a: np.ndarray):
    """Householder QR with column pivoting (reduced form)."""
    m, n = a.shape
    r = a.copy()
    q = np.eye(m)
    piv = np.arange(n)
    for j in range(n):
        norms = np.linalg.norm(r[j:, j:], axis=0)
        k = int(np.argmax(norms)) + j
        if k != j:
            r[:, [j, k]] = r[:, [k, j]]
            piv[[j, k]] = piv[[k, j]]
        v = r[j:, j].copy()
        alpha = -np.sign(v[0]) * np.linalg.norm(v) if v[0] != 0 \
            else -np.linalg.norm(v)
        if alpha == 0.0:
            continue
        v[0] -= alpha
        v /= np.linalg.norm(v)
        r[j:, :] -= 2.0 * np.outer(v, v @ r[j:, :])
        q[:, j:] -= 2.0 * np.outer(q[:, j:] @ v, v)
    return q[:, :n], r[:n, :], piv


TRAINING_HEADER = ["x1", "x2", "x3", "x4", "x5", "y_seconds"]


def load_training_csv(path) -> list[TrainingSample]:
    """Training CSV: header ``x1,x2,x3,x4,x5,y_seconds``."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAINING_HEADER:
            raise ValueError(f"{path}: bad header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if len(vals) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns")
            out.append(TrainingSample(tuple(vals[:5]), vals[5]))
    return out
