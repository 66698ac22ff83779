"""Small circular-statistics helpers shared by the dynamics and analysis code.

Angles are radians. Wrapped values live in the half-open interval (-pi, pi].
"""

from __future__ import annotations

import numpy as np

__all__ = ["wrap_angle", "resultant", "circular_mean"]


def wrap_angle(x):
    """Wrap angle(s) into (-pi, pi].

    Parameters
    ----------
    x : float or ndarray
        Angle(s) in radians.

    Returns
    -------
    float or ndarray
        Wrapped angle(s); exactly pi maps to pi, not -pi.
    """
    w = np.mod(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    # np.mod lands on [-pi, pi); move the -pi edge to +pi.
    w = np.where(w <= -np.pi, w + 2.0 * np.pi, w)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(w)
    return w


def resultant(angles) -> complex:
    """Mean resultant vector (1/n) sum_k exp(i angle_k)."""
    a = np.asarray(angles, dtype=float)
    return complex(np.mean(np.exp(1j * a)))


def circular_mean(angles) -> float:
    """Circular mean direction, arg of the mean resultant vector.

    For angles concentrated in an interval of length < pi this agrees with
    the arithmetic mean of wrapped deviations to second order.  The result
    is meaningless when the resultant magnitude is ~0 (uniformly spread
    phases); callers that need to detect that case should use
    :func:`resultant` directly.
    """
    return float(np.angle(resultant(angles)))
