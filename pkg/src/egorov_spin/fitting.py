"""Log-log scaling fits with noise-floor exclusion."""

from __future__ import annotations

import numpy as np


class FitError(RuntimeError):
    """Too few points rise above the noise floor to fit a slope."""

    def __init__(self, msg: str, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


def fit_loglog(x, y, floor=0.0, min_points: int = 3):
    """Least-squares slope of log y against log x.

    Points with y <= 10 * floor are dropped: residuals sitting on the
    grid floor carry no scaling information.  `floor` may be a scalar or
    a per-point array.  Returns (slope, intercept, used_mask); raises
    FitError when fewer than min_points survive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    floor = np.broadcast_to(np.asarray(floor, dtype=float), y.shape)
    keep = y > 10.0 * floor
    if int(keep.sum()) < min_points:
        raise FitError(
            f"only {int(keep.sum())} points above the noise floor "
            f"{float(floor.max()):.1e}; need {min_points}", residuals=y)
    slope, intercept = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope), float(intercept), keep
