"""Closed-form linear spectrum of twisted states on the ring graphon.

A q-twisted state u = 2*pi*q*x (winding number q) of the nonlocally coupled
phase model on the band graphon of half-width kappa has a linearization
whose eigenfunctions are the Fourier modes cos(2*pi*l*x) -+ i*sin(2*pi*l*x).
The corresponding eigenvalues are

    lambda_l = p*chi1(kappa; l, q)*cos(sigma) -+ i*p*chi2(kappa; l, q)*sin(sigma)

with the window overlap integrals chi1/chi2 available in closed form, plus
an always-present simple zero eigenvalue from the phase-shift symmetry.

This module provides chi1, chi2, the kappa-derivative of chi1, the scaled
window function phi and its extremal points zeta_j, the distinguished root
zeta0 of phi = 1 (which locates the first instability of the q = q mode at
kappa = zeta0/(2*pi*q)), and eigenvalue enumeration with a stability
verdict.  The winding-free case q = 0 has its own real spectrum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import cos, pi, sin
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "BracketError",
    "ModeParams",
    "SpectrumReport",
    "chi1",
    "chi2",
    "chi1_dkappa",
    "phi",
    "zeta_extremum",
    "zeta0",
    "eigenvalues",
    "eigenvalues_q0",
    "write_chi_curves_csv",
    "write_spectrum_csv",
]

#: Verdict threshold: |max Re lambda| at or below this is reported "marginal".
MARGINAL_TOLERANCE = 1e-10

#: Default number of Fourier modes enumerated for a stability verdict.  The
#: eigenvalue real parts are dominated for large l by the constant term
#: -p*cos(sigma)*sin(2*pi*q*kappa)/(pi*q) (the oscillatory terms decay like
#: 1/l), so 64 modes are ample for q <= 8; overridable per call.
DEFAULT_ELL_MAX = 64

_BISECT_TOL = 1e-12


class BracketError(RuntimeError):
    """A root bracket showed no sign change (indicates a formula bug)."""


def _validate_mode(kappa: float, ell: int, q: int) -> None:
    if not (isinstance(ell, (int, np.integer)) and ell >= 1):
        raise ValueError(f"ell must be an integer >= 1, got {ell!r}")
    if not (isinstance(q, (int, np.integer)) and q >= 1):
        raise ValueError(
            f"q must be an integer >= 1, got {q!r} (use eigenvalues_q0 for q = 0)"
        )
    if not 0.0 < kappa <= 0.5:
        raise ValueError(f"kappa must lie in (0, 1/2], got {kappa!r}")


def chi1(kappa: float, ell: int, q: int) -> float:
    """Real part factor of the mode-l eigenvalue of a q-twisted state.

    chi1(kappa; l, q) multiplies p*cos(sigma) in the eigenvalue.  Its sign
    decides linear stability of mode l: negative means damped.

    Parameters
    ----------
    kappa : float
        Coupling window half-width, in (0, 1/2].
    ell, q : int
        Fourier mode index (l >= 1) and winding number (q >= 1).

    Returns
    -------
    float
    """
    _validate_mode(kappa, ell, q)
    tail = sin(2 * pi * q * kappa) / (pi * q)
    if ell == q:
        return kappa + sin(4 * pi * q * kappa) / (4 * pi * q) - tail
    return (
        sin(2 * pi * (ell - q) * kappa) / (2 * pi * (ell - q))
        + sin(2 * pi * (ell + q) * kappa) / (2 * pi * (ell + q))
        - tail
    )


def chi2(kappa: float, ell: int, q: int) -> float:
    """Imaginary part factor of the mode-l eigenvalue (multiplies p*sin(sigma))."""
    _validate_mode(kappa, ell, q)
    if ell == q:
        return kappa - sin(4 * pi * q * kappa) / (4 * pi * q)
    return sin(2 * pi * (ell - q) * kappa) / (2 * pi * (ell - q)) - sin(
        2 * pi * (ell + q) * kappa
    ) / (2 * pi * (ell + q))


def chi1_dkappa(kappa: float, ell: int, q: int) -> float:
    """Analytic derivative of chi1 with respect to kappa."""
    _validate_mode(kappa, ell, q)
    if ell == q:
        return 1.0 + cos(4 * pi * q * kappa) - 2.0 * cos(2 * pi * q * kappa)
    return (
        cos(2 * pi * (ell - q) * kappa)
        + cos(2 * pi * (ell + q) * kappa)
        - 2.0 * cos(2 * pi * q * kappa)
    )


def phi(zeta):
    """Scaled window function phi(z) = (sin z / z)*(2 - cos z), phi(0) = 1.

    Relates the diagonal mode to its own window: chi1(kappa; q, q) =
    kappa*(1 - phi(2*pi*q*kappa)).  Accepts scalars or arrays; the z -> 0
    limit is handled exactly through np.sinc.
    """
    z = np.asarray(zeta, dtype=float)
    out = np.sinc(z / np.pi) * (2.0 - np.cos(z))
    if np.ndim(zeta) == 0:
        return float(out)
    return out


def _bisect(f: Callable[[float], float], lo: float, hi: float,
            tol: float = _BISECT_TOL) -> float:
    """Bracketed bisection to absolute tolerance, plus one secant polish.

    Raises
    ------
    BracketError
        If f(lo) and f(hi) do not have opposite signs.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(
            f"no sign change on [{lo!r}, {hi!r}]: f(lo)={flo!r}, f(hi)={fhi!r}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    # One secant step sharpens the last bisection digit; keep it bracketed.
    denom = fhi - flo
    if denom != 0.0:
        cand = lo - flo * (hi - lo) / denom
        if lo <= cand <= hi:
            return cand
    return 0.5 * (lo + hi)


def _extremum_equation(z: float) -> float:
    # Critical points of phi solve sin(z)/z = (2cos^2 z - 2cos z - 1)/(cos z - 2).
    c = cos(z)
    return sin(z) / z - (2.0 * c * c - 2.0 * c - 1.0) / (c - 2.0)


def zeta_extremum(j: int) -> float:
    """j-th positive critical point of phi, bracketed in ((j-1)*pi, j*pi).

    Parameters
    ----------
    j : int
        Index >= 1.

    Raises
    ------
    BracketError
        If the bracket shows no sign change.
    """
    if not (isinstance(j, (int, np.integer)) and j >= 1):
        raise ValueError(f"j must be an integer >= 1, got {j!r}")
    lo = (j - 1) * pi
    if j == 1:
        # The equation has a degenerate root at z = 0 (both sides -> 1);
        # start just inside, where the left side is strictly smaller.
        lo = 1e-3
    return _bisect(_extremum_equation, lo, j * pi)


def zeta0() -> float:
    """The unique root of phi(z) = 1 between the first two critical points.

    kappa = zeta0()/(2*pi*q) is where the diagonal mode l = q changes sign,
    i.e. the instability threshold of that mode.
    """
    z1 = zeta_extremum(1)
    z2 = zeta_extremum(2)
    return _bisect(lambda z: phi(z) - 1.0, z1, z2)


@dataclass(frozen=True)
class ModeParams:
    """Parameters of a linearization mode query.

    Attributes
    ----------
    ell : int
        Fourier mode index (>= 1); used by single-mode queries and ignored
        by the eigenvalue enumeration, which sweeps l = 1..ell_max.
    q : int
        Winding number of the base twisted state (>= 0; q = 0 routes to the
        winding-free formulas).
    kappa : float
        Window half-width in (0, 1/2].
    sigma : float
        Phase-lag in (-pi/2, pi/2).
    p : float
        Coupling weight in (0, 1].
    """

    ell: int = 1
    q: int = 1
    kappa: float = 0.25
    sigma: float = 0.0
    p: float = 1.0

    def __post_init__(self) -> None:
        if not (isinstance(self.ell, (int, np.integer)) and self.ell >= 1):
            raise ValueError(f"ell must be an integer >= 1, got {self.ell!r}")
        if not (isinstance(self.q, (int, np.integer)) and self.q >= 0):
            raise ValueError(f"q must be an integer >= 0, got {self.q!r}")
        if not 0.0 < self.kappa <= 0.5:
            raise ValueError(f"kappa must lie in (0, 1/2], got {self.kappa!r}")
        if not -pi / 2 < self.sigma < pi / 2:
            raise ValueError(f"sigma must lie in (-pi/2, pi/2), got {self.sigma!r}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must lie in (0, 1], got {self.p!r}")


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues of the twisted-state linearization and a verdict.

    Attributes
    ----------
    eigenvalues : tuple of (complex, complex)
        Pair (lambda_l^+, lambda_l^-) for l = 1..ell_max; the two members
        are complex conjugates (equal when sigma = 0, each then carried by
        the cos and sin eigenfunctions).
    zero_mode : complex
        The always-present 0 eigenvalue (constant eigenfunction).
    verdict : str
        "linearly_stable", "unstable", or "marginal".
    max_real_part : float
        Max over modes 1..ell_max of Re lambda (the zero mode excluded).
    critical_mode : int
        Mode index attaining max_real_part.
    """

    eigenvalues: tuple = field(repr=False)
    zero_mode: complex
    verdict: str
    max_real_part: float
    critical_mode: int

    @property
    def ell_max(self) -> int:
        return len(self.eigenvalues)


def _verdict(max_real: float) -> str:
    if abs(max_real) <= MARGINAL_TOLERANCE:
        return "marginal"
    return "unstable" if max_real > 0 else "linearly_stable"


def eigenvalues(params: ModeParams, ell_max: int = DEFAULT_ELL_MAX) -> SpectrumReport:
    """Enumerate linearization eigenvalues of a q-twisted state.

    lambda_l^{+-} = p*chi1*cos(sigma) -+ i*p*chi2*sin(sigma) for
    l = 1..ell_max, plus the simple zero mode.  The verdict reads the max
    real part with marginal tolerance 1e-10; callers near a bifurcation
    should inspect ``max_real_part`` directly.  q = 0 dispatches to
    :func:`eigenvalues_q0`.
    """
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max!r}")
    if params.q == 0:
        return eigenvalues_q0(params.kappa, params.sigma, params.p, ell_max)
    pairs = []
    max_real = -np.inf
    crit = 1
    for ell in range(1, ell_max + 1):
        re = params.p * chi1(params.kappa, ell, params.q) * cos(params.sigma)
        im = params.p * chi2(params.kappa, ell, params.q) * sin(params.sigma)
        pairs.append((complex(re, -im), complex(re, im)))
        if re > max_real:
            max_real, crit = re, ell
    return SpectrumReport(
        eigenvalues=tuple(pairs),
        zero_mode=0j,
        verdict=_verdict(max_real),
        max_real_part=max_real,
        critical_mode=crit,
    )


def eigenvalues_q0(kappa: float, sigma: float, p: float,
                   ell_max: int = DEFAULT_ELL_MAX) -> SpectrumReport:
    """Spectrum of the winding-free (q = 0, synchronized) state.

    All eigenvalues are real: lambda_l = -p*cos(sigma)*(2*kappa -
    sin(2*pi*l*kappa)/(pi*l)), each carried by both the cos and sin mode-l
    eigenfunctions, plus the simple zero mode.  Since |sin z| < z for
    z > 0, every lambda_l is negative exactly when cos(sigma) > 0.
    """
    if not 0.0 < kappa <= 0.5:
        raise ValueError(f"kappa must lie in (0, 1/2], got {kappa!r}")
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max!r}")
    pairs = []
    max_real = -np.inf
    crit = 1
    for ell in range(1, ell_max + 1):
        lam = -p * cos(sigma) * (2.0 * kappa - sin(2 * pi * ell * kappa) / (pi * ell))
        pairs.append((complex(lam), complex(lam)))
        if lam > max_real:
            max_real, crit = lam, ell
    return SpectrumReport(
        eigenvalues=tuple(pairs),
        zero_mode=0j,
        verdict=_verdict(max_real),
        max_real_part=max_real,
        critical_mode=crit,
    )


def write_chi_curves_csv(path, q: int, ell_list: Sequence[int],
                         kappa_grid: Sequence[float]) -> None:
    """Write (kappa, ell, chi1, chi2) rows for plotting mode curves."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kappa", "ell", "chi1", "chi2"])
        for kappa in kappa_grid:
            for ell in ell_list:
                writer.writerow(
                    [repr(float(kappa)), ell,
                     repr(chi1(float(kappa), int(ell), q)),
                     repr(chi2(float(kappa), int(ell), q))]
                )


def write_spectrum_csv(path, report: SpectrumReport) -> None:
    """Write (ell, branch, re, im) eigenvalue rows; the zero mode is ell 0."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ell", "branch", "re", "im"])
        writer.writerow([0, "zero", repr(report.zero_mode.real),
                         repr(report.zero_mode.imag)])
        for ell, (lam_plus, lam_minus) in enumerate(report.eigenvalues, start=1):
            writer.writerow([ell, "plus", repr(lam_plus.real), repr(lam_plus.imag)])
            writer.writerow([ell, "minus", repr(lam_minus.real), repr(lam_minus.imag)])
