"""Error metrics: squared Gaussian Wasserstein distance and angle error.

An ellipse is viewed as a Gaussian with the center as mean and the shape
matrix as covariance; the squared Wasserstein distance between the two
Gaussians then scores position and shape jointly. The orientation error
is the absolute angle difference modulo pi, since an ellipse is invariant
under a half turn.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotPSD
from .state import DecoupledEstimate, shape_matrix

_EIG_TOL = -1e-9


@dataclass(frozen=True)
class EllipseParams:
    """Center, orientation, and semi-axes of an ellipse."""
    center: np.ndarray
    theta: float
    semi_axes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "semi_axes",
                           np.asarray(self.semi_axes, dtype=float).reshape(2))

    def matrix(self) -> np.ndarray:
        return shape_matrix(self.theta, self.semi_axes)


@dataclass(frozen=True)
class ErrorRecord:
    """Per-step errors of an estimate against the ground truth."""
    gwd_sq: float
    orient_err: float


def ellipse_from_estimate(est: DecoupledEstimate) -> EllipseParams:
    """Extract the ellipse described by a decoupled estimate's means."""
    return EllipseParams(est.kin.center, est.orient.mean, est.axis.mean)


def matrix_sqrt_2x2(mat: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of a symmetric PSD 2x2 matrix.

    Uses the closed form via trace and determinant; falls back to an
    eigendecomposition when the closed-form denominator degenerates
    (matrix near zero).
    """
    mat = np.asarray(mat, dtype=float)
    det = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    trace = mat[0, 0] + mat[1, 1]
    if det < _EIG_TOL or trace < _EIG_TOL:
        raise NotPSD(f"matrix with trace {trace} and determinant {det}")
    s = np.sqrt(max(det, 0.0))
    denom_sq = trace + 2.0 * s
    if denom_sq > 1e-12:
        return (mat + s * np.eye(2)) / np.sqrt(denom_sq)
    eigval, eigvec = np.linalg.eigh(0.5 * (mat + mat.T))
    if eigval[0] < _EIG_TOL:
        raise NotPSD(f"eigenvalue {eigval[0]} below tolerance")
    eigval = np.sqrt(np.maximum(eigval, 0.0))
    return (eigvec * eigval) @ eigvec.T


def gwd_squared(a: EllipseParams, b: EllipseParams) -> float:
    """Squared Gaussian Wasserstein distance between two ellipses.

    Zero iff the ellipses coincide (up to the theta + pi and axis-swap
    symmetries of the shape matrix); symmetric in its arguments and
    invariant under a joint rigid transform.
    """
    xa, xb = a.matrix(), b.matrix()
    root_a = matrix_sqrt_2x2(xa)
    inner = matrix_sqrt_2x2(root_a @ xb @ root_a)
    center_term = float(np.sum((a.center - b.center) ** 2))
    # the trace term can dip epsilon-negative for identical shapes
    return max(0.0, center_term + float(np.trace(xa + xb - 2.0 * inner)))


def orientation_error(theta_est: float, theta_true: float) -> float:
    """Absolute orientation difference modulo pi, in [0, pi/2].

    Adding pi to either angle describes the same ellipse, so the raw
    difference is folded into (-pi/2, pi/2] first.
    """
    diff = np.mod(theta_est - theta_true, np.pi)
    if diff > np.pi / 2.0:
        diff -= np.pi
    return float(abs(diff))
