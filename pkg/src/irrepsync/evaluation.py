"""Gauge-invariant distances between rotation sets."""

from dataclasses import dataclass

import numpy as np

from .consensus import project_to_so
from .errors import UsageError
from .group import Rotation, rotation_angles, stack_matrices


def _as_stack(x):
    if isinstance(x, np.ndarray):
        return np.asarray(x, dtype=float)
    if hasattr(x, "matrices"):
        return np.asarray(x.matrices, dtype=float)
    return stack_matrices(x)


def _pair(truth, estimate):
    a, b = _as_stack(truth), _as_stack(estimate)
    if a.shape != b.shape:
        raise UsageError(f"truth has shape {a.shape}, estimate {b.shape}")
    if a.shape[0] < 1:
        raise UsageError("need at least one rotation")
    return a, b


def optimal_gauge(truth, estimate):
    """Rotation U minimizing sum_i ||U Rhat_i - R_i||_F^2."""
    a, b = _pair(truth, estimate)
    return project_to_so(np.einsum("nab,ncb->ac", a, b))


def d_F(truth, estimate):
    """Normalized Frobenius distance after gauge alignment, and the gauge."""
    a, b = _pair(truth, estimate)
    n, d = a.shape[0], a.shape[1]
    u = optimal_gauge(a, b)
    resid = np.einsum("ab,nbc->nac", u, b) - a
    return float(np.linalg.norm(resid) / (2.0 * np.sqrt(d * n))), u


def d_inf(truth, estimate):
    """Worst per-node normalized error under the Frobenius-optimal gauge."""
    a, b = _pair(truth, estimate)
    d = a.shape[1]
    u = optimal_gauge(a, b)
    resid = np.einsum("ab,nbc->nac", u, b) - a
    return float(np.max(np.linalg.norm(resid, axis=(1, 2))) / (2.0 * np.sqrt(d)))


@dataclass
class ErrorReport:
    d_F: float
    d_inf: float
    gauge: Rotation
    angular_errors: np.ndarray

    def as_dict(self):
        return {
            "d_F": self.d_F,
            "d_inf": self.d_inf,
            "gauge": list(self.gauge.params),
            "angular_error_mean": float(np.mean(self.angular_errors)),
            "angular_error_max": float(np.max(self.angular_errors)),
            "angular_errors": [float(v) for v in self.angular_errors],
        }


def error_report(truth, estimate):
    a, b = _pair(truth, estimate)
    value, u = d_F(a, b)
    aligned = np.einsum("ab,nbc->nac", u, b)
    ang = rotation_angles(np.einsum("nba,nbc->nac", a, aligned))
    return ErrorReport(value, d_inf(a, b), Rotation.from_matrix(u), ang)
