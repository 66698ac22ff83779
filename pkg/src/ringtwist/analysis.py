"""Post-processing: twisted-state fits, modulation tracking, convergence.

All comparisons between phase configurations are made modulo a global
rotation (the dynamics is equivariant under adding a constant to every
phase), using the circular mean of the pointwise difference as the
optimal alignment angle.  The slow modulation around a twisted state is
summarized by its first spatial harmonic: amplitude r and phase psi of
the best fit v ~ r * sin(2*pi*k/n + psi) to the aligned deviation field.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .circular import resultant, wrap_angle
from .dynamics import (
    SimulationConfig,
    Trajectory,
    integrate_system,
    make_rhs,
    twisted_profile,
)
from .graphs import build_coupling

__all__ = [
    "NoFitError",
    "TwistedFit",
    "fit_twisted",
    "deviation_field",
    "deviation_series",
    "fourier_mode1",
    "ModulationEstimate",
    "estimate_modulation",
    "distance_mod_rotation",
    "convergence_study",
    "write_fit_json",
    "write_modulation_csv",
    "write_convergence_csv",
]

_DEGENERATE_RESULTANT = 1e-12

# psi is meaningless where the modulation amplitude is below this floor,
# so aliasing checks skip such samples
_PSI_AMPLITUDE_FLOOR = 1e-3


class NoFitError(RuntimeError):
    """Raised when an alignment or modulation estimate is ill-posed."""


@dataclass(frozen=True)
class TwistedFit:
    """Best rigid rotation of the q-twisted profile onto a phase snapshot."""

    q: int
    theta: float
    residual_max: float
    residual_l2: float


def fit_twisted(phases: np.ndarray, q: int) -> TwistedFit:
    """Fit u_k ~ 2*pi*q*k/n + theta and report wrapped residuals.

    theta is the circular mean of u_k - 2*pi*q*k/n; residual_l2 is the
    sqrt of the mean squared wrapped residual (1/n-normalized).

    Raises
    ------
    NoFitError
        If the residual phases spread so evenly that the alignment angle
        is undefined (resultant magnitude below 1e-12).
    """
    phases = np.asarray(phases, dtype=float)
    v_raw = phases - twisted_profile(len(phases), q)
    z = resultant(v_raw)
    if abs(z) < _DEGENERATE_RESULTANT:
        raise NoFitError(
            f"alignment undefined: resultant magnitude {abs(z):.3e} < 1e-12"
        )
    theta = float(np.angle(z))
    res = wrap_angle(v_raw - theta)
    return TwistedFit(
        q=q, theta=theta,
        residual_max=float(np.max(np.abs(res))),
        residual_l2=float(np.sqrt(np.mean(res**2))),
    )


def deviation_field(phases: np.ndarray, q: int) -> np.ndarray:
    """Wrapped deviation from the aligned q-twisted profile.

    Subtracts the twisted profile, removes the circular-mean offset, and
    wraps to (-pi, pi].  If the offset is degenerate it is taken as 0.
    """
    phases = np.asarray(phases, dtype=float)
    v_raw = phases - twisted_profile(len(phases), q)
    z = resultant(v_raw)
    theta = float(np.angle(z)) if abs(z) >= _DEGENERATE_RESULTANT else 0.0
    return wrap_angle(v_raw - theta)


def deviation_series(trajectory: Trajectory, q: int | None = None) -> np.ndarray:
    """Per-sample max absolute deviation from the aligned twisted profile."""
    if q is None:
        q = trajectory.config.q
    return np.array(
        [np.max(np.abs(deviation_field(row, q))) for row in trajectory.phases]
    )


def fourier_mode1(v: np.ndarray) -> tuple[float, float, float, float]:
    """First-harmonic content of a deviation field on nodes k = 1..n.

    Returns (c, s, r, psi) with c = mean(v*cos x), s = mean(v*sin x) for
    x = 2*pi*k/n, amplitude r = 2*sqrt(c^2 + s^2) and phase
    psi = atan2(c, s), so that v ~ r * sin(x + psi).
    """
    v = np.asarray(v, dtype=float)
    x = 2.0 * np.pi * np.arange(1, len(v) + 1) / len(v)
    c = float(np.mean(v * np.cos(x)))
    s = float(np.mean(v * np.sin(x)))
    r = 2.0 * float(np.hypot(c, s))
    psi = float(np.arctan2(c, s))
    return c, s, r, psi


@dataclass(frozen=True)
class ModulationEstimate:
    """Windowed time series of the first-harmonic modulation.

    drift is the unwrapped alignment angle (global rotation) per sample;
    omega_tilde is its least-squares rate, the observed rotation speed of
    the whole pattern.  psi is the unwrapped modulation phase and
    psi_rate its least-squares rate, the observed modulation frequency.
    """

    times: np.ndarray
    c: np.ndarray
    s: np.ndarray
    r: np.ndarray
    psi: np.ndarray
    drift: np.ndarray
    omega_tilde: float
    psi_rate: float

    @property
    def r_final(self) -> float:
        return float(self.r[-1])

    @property
    def r_min(self) -> float:
        return float(np.min(self.r))

    @property
    def r_max(self) -> float:
        return float(np.max(self.r))


def estimate_modulation(trajectory: Trajectory, q: int | None = None,
                        t_min: float | None = None,
                        t_max: float | None = None) -> ModulationEstimate:
    """Track the first-harmonic modulation over a time window.

    Per sample: subtract the q-twisted profile, take the circular mean as
    the drift angle, wrap the recentered field, and project onto the
    first harmonic.  Drift and psi are unwrapped across samples before
    rate fits.

    Raises
    ------
    NoFitError
        If fewer than two samples fall in the window, or psi advances by
        more than 0.9*pi between consecutive samples while the amplitude
        is meaningful (rate estimate would alias; decrease sample_dt).
    """
    if q is None:
        q = trajectory.config.q
    times = trajectory.times
    lo = times[0] if t_min is None else t_min
    hi = times[-1] if t_max is None else t_max
    idx = np.nonzero((times >= lo - 1e-12) & (times <= hi + 1e-12))[0]
    if len(idx) < 2:
        raise NoFitError(
            f"need at least 2 samples in [{lo:g}, {hi:g}], found {len(idx)}"
        )
    profile = twisted_profile(trajectory.n, q)
    c_arr = np.empty(len(idx))
    s_arr = np.empty(len(idx))
    r_arr = np.empty(len(idx))
    psi_raw = np.empty(len(idx))
    drift_raw = np.empty(len(idx))
    for out, i in enumerate(idx):
        v_raw = trajectory.phases[i] - profile
        z = resultant(v_raw)
        theta = float(np.angle(z)) if abs(z) >= _DEGENERATE_RESULTANT else 0.0
        drift_raw[out] = theta
        v = wrap_angle(v_raw - theta)
        c_arr[out], s_arr[out], r_arr[out], psi_raw[out] = fourier_mode1(v)
    steps = wrap_angle(np.diff(psi_raw))
    meaningful = (r_arr[1:] > _PSI_AMPLITUDE_FLOOR) & (r_arr[:-1] > _PSI_AMPLITUDE_FLOOR)
    if np.any(meaningful & (np.abs(steps) > 0.9 * np.pi)):
        raise NoFitError(
            "psi advances more than 0.9*pi per sample; decrease sample_dt"
        )
    t_sel = times[idx]
    psi = np.unwrap(psi_raw)
    drift = np.unwrap(drift_raw)
    omega_tilde = float(np.polyfit(t_sel, drift, 1)[0])
    psi_rate = float(np.polyfit(t_sel, psi, 1)[0])
    return ModulationEstimate(
        times=t_sel, c=c_arr, s=s_arr, r=r_arr, psi=psi, drift=drift,
        omega_tilde=omega_tilde, psi_rate=psi_rate,
    )


def distance_mod_rotation(a: np.ndarray, b: np.ndarray) -> float:
    """L2 distance between phase configurations modulo global rotation.

    The alignment angle is the circular mean of the pointwise difference
    (0 if degenerate); the distance is the root mean squared wrapped
    residual, so identical configurations rotated by any constant are at
    distance 0.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    z = resultant(a - b)
    theta = float(np.angle(z)) if abs(z) >= _DEGENERATE_RESULTANT else 0.0
    res = wrap_angle(a - b - theta)
    return float(np.sqrt(np.mean(res**2)))


def convergence_study(config_template: SimulationConfig,
                      n_list: Sequence[int], reference_n: int,
                      profile: Callable[[np.ndarray], np.ndarray] | None = None,
                      t_end: float | None = None) -> list[dict]:
    """Distance of coarse runs to a fine reference at the final time.

    Each resolution n integrates from the exact (noise-free) profile
    u0_k = g(k/n); the default g is the template's twisted profile plus a
    smooth bump, g(x) = 2*pi*q*x + 0.1*sin(2*pi*x).  Final states are
    embedded onto the reference grid piecewise-constantly (reference_n
    must be a multiple of every n) and compared modulo rotation.

    Returns one row dict per coarse n: {"n", "error"}.
    """
    q = config_template.q
    if profile is None:
        def profile(x):
            return 2.0 * np.pi * q * x + 0.1 * np.sin(2.0 * np.pi * x)
    horizon = config_template.t_end if t_end is None else t_end
    for n in n_list:
        if reference_n % n != 0:
            raise ValueError(f"reference_n={reference_n} is not a multiple of n={n}")

    def final_state(n: int) -> np.ndarray:
        graph = replace(config_template.graph, n=n)
        config = replace(config_template, graph=graph, t_end=horizon,
                         perturbation_amplitude=0.0, ic_seed=None)
        coupling = build_coupling(graph)
        y0 = profile(np.arange(1, n + 1) / n)
        rhs = make_rhs(coupling, config.resolved_omega(), config.sigma)
        _, states = integrate_system(
            rhs, y0, horizon, rel_tol=config.rel_tol, abs_tol=config.abs_tol,
            sample_dt=horizon,
        )
        return states[-1]

    reference = final_state(reference_n)
    rows = []
    for n in n_list:
        embedded = np.repeat(final_state(n), reference_n // n)
        rows.append({"n": int(n), "error": distance_mod_rotation(embedded, reference)})
    return rows


def write_fit_json(path, fit: TwistedFit) -> None:
    with open(path, "w") as fh:
        json.dump(
            {"q": fit.q, "theta": fit.theta, "residual_max": fit.residual_max,
             "residual_l2": fit.residual_l2},
            fh, indent=2,
        )
        fh.write("\n")


def write_modulation_csv(path, estimate: ModulationEstimate) -> None:
    """Columns t, c, s, r, psi, drift; floats in shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "c", "s", "r", "psi", "drift"])
        for row in zip(estimate.times, estimate.c, estimate.s, estimate.r,
                       estimate.psi, estimate.drift):
            writer.writerow([repr(float(x)) for x in row])


def write_convergence_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "error"])
        for row in rows:
            writer.writerow([row["n"], repr(float(row["error"]))])
