"""Trace-distance distinguishability, information flow, and the BLP measure.

For a qubit the trace distance reduces to half the Euclidean distance of the
Bloch vectors.  The measure accumulates every rise of D(t); the maximization
over initial pairs is realized by the antipodal equatorial pair
(+-1, 0, 0), which is orthogonal and lies on the state-space boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamics import BlochState, SystemParams
from .errors import RegimeError
from .noise import NoiseParams, _sinhc, propagator_s0

GROWTH_FLOOR = 1e-9  # increments below this are float jitter, not backflow


def trace_distance(p1: BlochState, p2: BlochState) -> float:
    """D(rho1, rho2) = |P1 - P2|/2 for states inside the Bloch ball."""
    for p in (p1, p2):
        if p.norm() > 1.0 + 1e-6:
            raise ValueError(f"state outside the Bloch ball: |P| = {p.norm():.8f}")
    d = 0.5 * math.sqrt(
        (p1.px - p2.px) ** 2 + (p1.py - p2.py) ** 2 + (p1.pz - p2.pz) ** 2
    )
    return d


def optimal_initial_pair() -> tuple[BlochState, BlochState]:
    """The orthogonal boundary pair (|0> + |1>)/sqrt2 and (|0> - |1>)/sqrt2."""
    return BlochState(1.0, 0.0, 0.0), BlochState(-1.0, 0.0, 0.0)


@dataclass
class DistinguishabilityTrace:
    """D(t) sampled on a uniform grid."""

    times: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        if len(self.times) != len(self.d):
            raise ValueError("times and d must have equal length")


@dataclass
class BlpResult:
    measure: float
    growth_intervals: list[tuple[float, float]]


def blp_measure(trace: DistinguishabilityTrace) -> BlpResult:
    """Total rise of D over all growth intervals.

    Sums the positive grid increments exceeding the jitter floor; growth
    intervals are the maximal runs of such increments.
    """
    t, d = trace.times, trace.d
    if len(t) < 10:
        raise ValueError("need at least 10 grid points")
    dt = np.diff(t)
    if dt[0] <= 0 or not np.allclose(dt, dt[0], rtol=1e-9):
        raise ValueError("grid must be uniform and increasing")

    rising = np.diff(d) > GROWTH_FLOOR
    intervals = []
    total = []
    i = 0
    n = len(rising)
    while i < n:
        if rising[i]:
            j = i
            while j < n and rising[j]:
                j += 1
            intervals.append((float(t[i]), float(t[j])))
            total.extend(d[i + 1 : j + 1] - d[i:j])
            i = j
        else:
            i += 1
    return BlpResult(measure=float(math.fsum(total)), growth_intervals=intervals)


def analytic_distinguishability(noise: NoiseParams, t) -> float | np.ndarray:
    """|S0(t)|: the strong-coupling/high-temperature limit of D(t) for the
    optimal pair, independent of the static bias."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise ValueError("t must be >= 0")
    out = np.abs(propagator_s0(noise, tt))
    return float(out) if np.isscalar(t) else out


def analytic_blp(noise: NoiseParams) -> float:
    """Closed-form measure of the |S0| trace in the slow-noise regime K > 1/2.

    With eta_osc = sqrt(4 Omega^2 - nu^2) the maxima of |S0| sit at
    t_k = 2 pi k / eta_osc with heights exp(-pi nu k / eta_osc) and each
    revival rises from an exact zero, so the measure is the geometric sum

        N = 1 / (exp(pi nu / eta_osc) - 1).

    Validated against the numerically integrated |S0| trace (see
    numeric_blp_of_s0); raises RegimeError for K <= 1/2 where |S0| is
    monotone and the measure vanishes.
    """
    if noise.color <= 0.5:
        raise RegimeError("no revivals for K <= 1/2; the measure is 0")
    eta_osc = math.sqrt(4.0 * noise.omega_amp**2 - noise.nu**2)
    return 1.0 / math.expm1(math.pi * noise.nu / eta_osc)


def analytic_blp_published(noise: NoiseParams) -> float:
    """Literal transcription of the published closed form,
    2 (1 - nu(nu+2)/(4 Omega^2)) / (e^xi - 1) with xi = -2 i pi nu / eta,
    taking the real value that results for imaginary eta.  Kept for
    comparison: it disagrees with the numeric oracle (it can even go
    negative), see analytic_blp for the resolved form."""
    if noise.color <= 0.5:
        raise RegimeError("published form is defined only for K > 1/2")
    xi = complex(-2j * math.pi * noise.nu) / noise.eta
    value = 2.0 * (1.0 - noise.nu * (noise.nu + 2.0) / (4.0 * noise.omega_amp**2)) / (
        np.exp(xi) - 1.0
    )
    return float(value.real)


def numeric_blp_of_s0(noise: NoiseParams, horizon: float | None = None) -> float:
    """Independent oracle: locate the zeros of S0 by bracketing + root
    refinement and the maxima between them by bounded scalar minimization,
    then sum the rises of |S0|.  No use of the closed-form revival layout."""
    if horizon is None:
        horizon = 60.0 / noise.nu

    def s0(t):
        return propagator_s0(noise, float(t))

    tg = np.linspace(1e-9, horizon, 200001)
    vals = propagator_s0(noise, tg)
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    zeros = [brentq(s0, tg[i], tg[i + 1], xtol=1e-15) for i in sign_change]
    total = 0.0
    for k, lo in enumerate(zeros):
        hi = zeros[k + 1] if k + 1 < len(zeros) else horizon
        res = minimize_scalar(
            lambda t: -abs(s0(t)), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13},
        )
        total += abs(s0(res.x))
    return total


def reduced_limit_solution(
    sys: SystemParams, noise: NoiseParams, t, initial: np.ndarray | None = None
) -> np.ndarray:
    """Closed-form coherence 4-vector (Px, Py, ax, ay) of the
    constant-coefficient limit system

        dPx =  eps0 Py + Omega ay          dPy = -eps0 Px - Omega ax
        dax = -nu ax + eps0 ay + Omega Py  day = -nu ay - eps0 ax - Omega Px.

    In complex pairs p = Px + i Py, a = ax + i ay the system is the Kubo
    oscillator in a frame rotating at eps0, so the propagator is assembled
    from the same stable cosh/sinhc forms as the noise propagators.  With
    the optimal initial pair the implied D(t) equals |S0(t)| and is
    independent of eps0.
    """
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if initial is None:
        initial = np.array([1.0, 0.0, 0.0, 0.0])
    p0 = complex(initial[0], initial[1])
    a0 = complex(initial[2], initial[3])

    nu, om = noise.nu, noise.omega_amp
    z = 0.5 * noise.eta * tt.astype(complex)
    env = np.exp(-0.5 * nu * tt)
    ch = np.cosh(z)
    sh = _sinhc(z)
    # e^{Mt} for M = [[0, -i Om], [-i Om, -nu]] in the rotating frame
    m00 = env * (ch + 0.5 * nu * tt * sh)
    m01 = -1j * om * tt * env * sh
    m11 = env * (ch - 0.5 * nu * tt * sh)
    rot = np.exp(-1j * sys.epsilon0 * tt)
    p = rot * (m00 * p0 + m01 * a0)
    a = rot * (m01 * p0 + m11 * a0)
    out = np.column_stack([p.real, p.imag, a.real, a.imag])
    return out[0] if np.isscalar(t) else out
