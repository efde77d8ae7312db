"""Toy data, JSON-lines dataset files, predictor standardization and metrics."""
import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import prob
from .errors import (
    EmptySampleSet,
    InconsistentDimensions,
    NoPredictors,
    ParseError,
    SpdError,
)
from .spd import dist_affine, dist_frobenius, random_spd, symmetrize, validate_spd

log = logging.getLogger(__name__)


@dataclass
class MatrixRecord:
    matrix: np.ndarray
    predictors: np.ndarray = None

    def __post_init__(self):
        self.matrix = validate_spd(self.matrix)
        if self.predictors is not None:
            self.predictors = np.asarray(self.predictors, dtype=float).reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, MatrixRecord):
            return NotImplemented
        if (self.predictors is None) != (other.predictors is None):
            return False
        same_p = self.predictors is None or np.array_equal(self.predictors, other.predictors)
        return np.array_equal(self.matrix, other.matrix) and same_p


@dataclass(frozen=True)
class ToySpec:
    center: np.ndarray
    sigma: float = 0.1
    count: int = 15000

    def __post_init__(self):
        object.__setattr__(self, "center", validate_spd(self.center))
        if not self.sigma > 0 or self.count < 0:
            raise ValueError("sigma must be positive and count non-negative")

    @property
    def dim(self):
        return self.center.shape[-1]


def default_center(dim, rng):
    """Random center with Haar eigenvectors, eigenvalues log-uniform in [0.5, 2]."""
    return random_spd(dim, rng)


def generate_toy(spec, rng, cfg=None):
    """``spec.count`` independent draws from ``G(center, sigma^2)``."""
    if spec.count == 0:
        return []
    X = prob.sample(prob.RiemannianGaussian(spec.center, spec.sigma), rng, cfg, size=spec.count)
    return [MatrixRecord(x) for x in X]


# ---------------------------------------------------------------------------
# File I/O

def _record_json(rec):
    doc = {"matrix": [[float(v) for v in row] for row in rec.matrix]}
    if rec.predictors is not None:
        doc["predictors"] = [float(v) for v in rec.predictors]
    return json.dumps(doc)


def save_dataset(records, path):
    """One JSON object per line; floats use the shortest round-trip repr."""
    check_consistent(records)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(_record_json(rec) + "\n")


def check_consistent(records):
    dims = {r.matrix.shape[-1] for r in records}
    plens = {None if r.predictors is None else r.predictors.size for r in records}
    if len(dims) > 1:
        raise InconsistentDimensions(f"mixed matrix dimensions {sorted(dims)}")
    if len(plens) > 1:
        raise InconsistentDimensions(f"mixed predictor lengths {sorted(plens, key=str)}")


def load_dataset(path, diagonal_loading=0.0):
    """Parse a JSON-lines dataset. ``diagonal_loading`` is added to every
    matrix before validation (use for raw flow/adjacency counts)."""
    records = []
    with open(path) as fh:
        for no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                M = np.asarray(doc["matrix"], dtype=float)
                if M.ndim != 2 or M.shape[0] != M.shape[1]:
                    raise ValueError(f"matrix must be square, got shape {M.shape}")
                if diagonal_loading:
                    M = M + diagonal_loading * np.eye(M.shape[0])
                rec = MatrixRecord(M, doc.get("predictors"))
            except (ValueError, KeyError, TypeError, SpdError) as exc:
                raise ParseError(no, str(exc)) from exc
            if records:
                first = records[0]
                if rec.matrix.shape != first.matrix.shape:
                    raise InconsistentDimensions(
                        f"line {no}: matrix is {rec.matrix.shape[0]}x{rec.matrix.shape[0]}, "
                        f"expected {first.matrix.shape[0]}x{first.matrix.shape[0]}"
                    )
                pl = None if rec.predictors is None else rec.predictors.size
                pf = None if first.predictors is None else first.predictors.size
                if pl != pf:
                    raise InconsistentDimensions(f"line {no}: {pl} predictors, expected {pf}")
            records.append(rec)
    return records


def ingest_flow_matrix(W, predictors=None, diagonal_loading=1e-3):
    """Turn a symmetric weighted adjacency matrix into a record by adding
    ``diagonal_loading * I``; fails if the result is still not SPD."""
    W = symmetrize(np.asarray(W, dtype=float))
    return MatrixRecord(W + diagonal_loading * np.eye(W.shape[0]), predictors)


def load_center(path):
    """Read a reference matrix: a JSON list of rows or ``{"matrix": ...}``."""
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = doc["matrix"]
    return validate_spd(np.asarray(doc, dtype=float))


def save_center(X, path):
    with open(path, "w") as fh:
        json.dump({"matrix": [[float(v) for v in row] for row in np.asarray(X)]}, fh)


# ---------------------------------------------------------------------------
# Predictors

def standardize_predictors(records):
    """Z-score every predictor column (population std).

    Returns ``(new_records, means, stds)``. Zero-variance columns become 0
    and are reported with a warning; their std is stored as 0.
    """
    if not records or any(r.predictors is None for r in records):
        raise NoPredictors("every record needs predictors to standardize")
    check_consistent(records)
    P = np.stack([r.predictors for r in records])
    means = P.mean(axis=0)
    stds = P.std(axis=0)
    flat = stds == 0
    if np.any(flat):
        log.warning("zero-variance predictor columns left at 0: %s", np.flatnonzero(flat).tolist())
    Z = np.where(flat, 0.0, (P - means) / np.where(flat, 1.0, stds))
    return [MatrixRecord(r.matrix, z) for r, z in zip(records, Z)], means, stds


def unstandardize_predictors(records, means, stds):
    return [MatrixRecord(r.matrix, r.predictors * stds + means) for r in records]


# ---------------------------------------------------------------------------
# Metrics and exports

@dataclass
class MetricsReport:
    mean_affine_distance: float
    mean_frobenius: float
    metric: str = "affine"
    per_sample: np.ndarray = field(default=None, repr=False)

    @property
    def mean(self):
        return self.mean_affine_distance if self.metric == "affine" else self.mean_frobenius

    def rows(self):
        return [
            ("mean_affine_distance", self.mean_affine_distance),
            ("mean_frobenius", self.mean_frobenius),
            ("n_samples", len(self.per_sample)),
        ]


def eval_mean_distance(samples, reference, metric="affine"):
    """Distances of every sample to ``reference`` under both metrics;
    ``per_sample`` follows ``metric``."""
    S = np.asarray([getattr(x, "matrix", x) for x in samples], dtype=float)
    if S.shape[0] == 0:
        raise EmptySampleSet("no samples to evaluate")
    if metric not in ("affine", "frobenius"):
        raise ValueError(f"unknown metric {metric!r}")
    aff = dist_affine(S, reference)
    fro = dist_frobenius(S, reference)
    per = aff if metric == "affine" else fro
    return MetricsReport(float(aff.mean()), float(fro.mean()), metric, per)


def write_metrics_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for name, value in report.rows():
            w.writerow([name, repr(value) if isinstance(value, float) else value])


def _fmt(v):
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


def export_heat_csv(X, path):
    X = validate_spd(X)
    with open(path, "w") as fh:
        for row in X:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_heat_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)
