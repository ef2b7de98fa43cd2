"""Dichotomous (telegraph) noise: trajectories, phase integrals, propagators.

The process alpha(t) takes values +-1 with stationary autocorrelation
exp(-nu |t - t'|); its flips therefore form a Poisson process of rate nu/2.
The three closed-form propagators are the noise averages of the Kubo
oscillator S(t) = exp(-i Omega int_0^t alpha):

    S0(t) = <S(t)>,  S1(t) = <alpha(t) S(t)>,  S2(t) = <alpha(0) alpha(t) S(t)>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ETA_DEGENERATE = 1e-4  # |eta t / 2| below which the sinh(z)/z series is used


@dataclass(frozen=True)
class NoiseParams:
    """Telegraph noise with amplitude omega_amp (Omega >= 0) and rate nu > 0."""

    omega_amp: float
    nu: float

    def __post_init__(self):
        if not (math.isfinite(self.omega_amp) and self.omega_amp >= 0):
            raise ValueError(f"omega_amp must be >= 0, got {self.omega_amp}")
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be > 0, got {self.nu}")

    @property
    def color(self) -> float:
        """Noise color K = Omega/nu; slow (oscillatory) noise for K > 1/2."""
        return self.omega_amp / self.nu

    @property
    def eta(self) -> complex:
        """sqrt(nu^2 - 4 Omega^2): real for K <= 1/2, imaginary for K > 1/2."""
        return complex(np.emath.sqrt(self.nu**2 - 4.0 * self.omega_amp**2))

    @property
    def nu_plus(self) -> complex:
        return self.nu + self.eta

    @property
    def nu_minus(self) -> complex:
        return self.nu - self.eta

    @staticmethod
    def from_color(color: float, nu: float) -> "NoiseParams":
        """Build from (K, nu) instead of (Omega, nu)."""
        return NoiseParams(omega_amp=color * nu, nu=nu)


@dataclass(frozen=True)
class TelegraphTrajectory:
    """One realization: value flips at each jump time; +-1 in between."""

    jump_times: np.ndarray
    initial_value: int
    horizon: float

    def __post_init__(self):
        j = np.asarray(self.jump_times, dtype=float)
        if len(j) and (np.any(np.diff(j) <= 0) or j[0] <= 0 or j[-1] > self.horizon):
            raise ValueError("jump_times must be strictly increasing within (0, horizon]")
        if self.initial_value not in (+1, -1):
            raise ValueError("initial_value must be +1 or -1")


def sample_trajectory(p: NoiseParams, horizon: float, seed) -> TelegraphTrajectory:
    """Draw one realization over [0, horizon], reproducible for a fixed seed.

    The initial value is +-1 with equal probability and flips occur with
    exponential waiting times of rate nu/2, which yields the stationary
    autocorrelation exp(-nu |t-t'|).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    initial = 1 if rng.random() < 0.5 else -1
    rate = 0.5 * p.nu
    # draw in blocks; mean count is rate * horizon
    jumps = []
    t = 0.0
    block = max(8, int(rate * horizon * 1.3) + 4)
    while True:
        waits = rng.exponential(1.0 / rate, size=block)
        for w in waits:
            t += w
            if t > horizon:
                return TelegraphTrajectory(
                    jump_times=np.asarray(jumps), initial_value=initial, horizon=horizon
                )
            jumps.append(t)


def value_at(traj: TelegraphTrajectory, t) -> int | np.ndarray:
    """alpha(t): piecewise-constant lookup, O(log n_jumps) per query."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0) or np.any(tt > traj.horizon):
        raise ValueError(f"t outside [0, {traj.horizon}]")
    flips = np.searchsorted(traj.jump_times, tt, side="right")
    val = traj.initial_value * (-1) ** (flips & 1)
    return int(val) if np.isscalar(t) else val.astype(np.int64)


def phase_knots(traj: TelegraphTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints and exact values of phi(t) = int_0^t alpha; phi is
    piecewise linear, so linear interpolation between knots is exact."""
    knots = np.concatenate([[0.0], traj.jump_times, [traj.horizon]])
    segs = np.diff(knots)
    vals = traj.initial_value * (-1.0) ** np.arange(len(segs))
    phi = np.concatenate([[0.0], np.cumsum(vals * segs)])
    return knots, phi


def kubo_phase(traj: TelegraphTrajectory, t1: float, t2: float) -> float:
    """int_{t1}^{t2} alpha(tau) dtau, exact over the piecewise segments."""
    if not (0 <= t1 <= t2 <= traj.horizon):
        raise ValueError("need 0 <= t1 <= t2 <= horizon")
    knots, phi = phase_knots(traj)
    lo, hi = np.interp([t1, t2], knots, phi)
    return float(hi - lo)


def _sinhc(z: np.ndarray) -> np.ndarray:
    """sinh(z)/z for complex z, series-stable near z = 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _ETA_DEGENERATE
    zs = z[small]
    out[small] = 1.0 + zs * zs / 6.0 + zs**4 / 120.0
    zb = z[~small]
    out[~small] = np.sinh(zb) / zb
    return out


def propagators(p: NoiseParams, t) -> tuple:
    """(S0, S1, S2) at time(s) t >= 0; S0, S2 real, S1 purely imaginary.

    Computed in complex arithmetic through the single stable form
        S0/S2 = e^{-nu t/2} [cosh(eta t/2) +- (nu t/2) sinhc(eta t/2)],
        S1    = -i Omega t e^{-nu t/2} sinhc(eta t/2),
    which covers fast noise (eta real), slow noise (eta imaginary) and the
    degenerate eta = 0 point in one code path.  Residual imaginary parts
    (below 1e-12) are discarded.
    """
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < 0):
        raise ValueError("t must be >= 0")
    z = 0.5 * p.eta * tt.astype(complex)
    env = np.exp(-0.5 * p.nu * tt)
    ch = np.cosh(z)
    sh = _sinhc(z)
    s0 = env * (ch + 0.5 * p.nu * tt * sh)
    s2 = env * (ch - 0.5 * p.nu * tt * sh)
    s1 = -1j * p.omega_amp * tt * env * sh
    # eta is purely real or purely imaginary, so all three are real/imaginary
    # up to roundoff
    s0r, s2r, s1i = s0.real, s2.real, s1.imag
    if np.isscalar(t):
        return float(s0r[0]), complex(0.0, float(s1i[0])), float(s2r[0])
    return s0r, 1j * s1i, s2r


def propagator_s0(p: NoiseParams, t) -> float | np.ndarray:
    """Convenience accessor for S0 alone."""
    s0, _, _ = propagators(p, t)
    return s0
