"""Structured oscillator bath: spectral density, correlation integrals, decay fit.

The bath enters the dynamics only through the two integrated correlation
functions

    Q1(t) = (1/2pi) int_0^inf dw J(w)/w^2 sin(w t)
    Q2(t) = (1/2pi) int_0^inf dw J(w)/w^2 coth(beta w/2) (1 - cos(w t))

whose kernel envelope G(t) = exp(-Q2(t)) sets the environmental decay time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, QuadratureError
from .oscquad import build_panels, geometric_edges

_HEAD_X, _HEAD_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class BathParams:
    """Damped-resonance bath: coupling kappa, peak frequency omega0, width gamma,
    inverse temperature beta (all strictly positive, energy units)."""

    kappa: float
    omega0: float
    gamma: float
    beta: float

    def __post_init__(self):
        for name in ("kappa", "omega0", "gamma", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"BathParams.{name} must be positive and finite, got {v}")

    def alpha(self) -> float:
        """Dimensionless interaction strength 4 kappa^2 gamma / omega0^3."""
        return 4.0 * self.kappa**2 * self.gamma / self.omega0**3

    def reorg_energy(self) -> float:
        """Reorganization energy kappa^2 / omega0."""
        return self.kappa**2 / self.omega0

    @staticmethod
    def from_alpha(alpha: float, omega0: float, gamma: float, beta: float) -> "BathParams":
        """Build from the dimensionless strength instead of the raw coupling."""
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        kappa = math.sqrt(alpha * omega0**3 / (4.0 * gamma))
        return BathParams(kappa=kappa, omega0=omega0, gamma=gamma, beta=beta)


def spectral_density(omega, p: BathParams):
    """J(w) = 8 kappa^2 gamma omega0 w / ((w^2 - omega0^2)^2 + 4 gamma^2 w^2).

    Accepts a scalar or array of non-negative frequencies.
    """
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("omega must be finite and non-negative")
    num = 8.0 * p.kappa**2 * p.gamma * p.omega0 * w
    den = (w * w - p.omega0**2) ** 2 + 4.0 * p.gamma**2 * w * w
    out = num / den
    return float(out) if np.isscalar(omega) else out


def _j_over_w(w: np.ndarray, p: BathParams) -> np.ndarray:
    # J(w)/w, entire on the real line (no w=0 singularity)
    return 8.0 * p.kappa**2 * p.gamma * p.omega0 / (
        (w * w - p.omega0**2) ** 2 + 4.0 * p.gamma**2 * w * w
    )


def _coth(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    out[~small] = 1.0 / np.tanh(x[~small])
    return out


@dataclass
class CorrelationTable:
    """Q1/Q2 tabulated on a uniform grid over [0, T]; linear in between."""

    times: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    params: BathParams = field(repr=False, default=None)

    def __post_init__(self):
        dt = np.diff(self.times)
        if len(self.times) < 2 or not np.allclose(dt, dt[0], rtol=1e-9) or dt[0] <= 0:
            raise ValueError("times must be a uniform, strictly increasing grid")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def interp(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Linearly interpolated (Q1, Q2) at t; t must lie inside the grid."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise ValueError(f"t outside tabulated range [0, {self.horizon}]")
        return np.interp(t, self.times, self.q1), np.interp(t, self.times, self.q2)

    def envelope(self) -> np.ndarray:
        """Kernel envelope G(t) = exp(-Q2(t)) on the grid."""
        return np.exp(-np.minimum(self.q2, 745.0))


def _omega_cutoff(p: BathParams) -> float:
    return max(20.0 * p.omega0, 20.0 / p.beta, 50.0 * p.gamma)


def compute_correlations(
    p: BathParams,
    horizon: float,
    n: int,
    rel_tol: float = 1e-10,
) -> CorrelationTable:
    """Tabulate Q1 and Q2 on n+1 uniform points over [0, horizon].

    The frequency integral is split into a short non-oscillatory head
    [0, w_b] with w_b * horizon <= 1/4 (plain Gauss-Legendre, with the
    coth w->0 limit handled by series) and a Filon-panel region up to the
    cutoff max(20 omega0, 20/beta, 50 gamma).  Panels refine adaptively
    around the resonance; the cutoff is doubled until the algebraic tail
    is below 1e-8 of the integral.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if n < 2:
        raise ValueError("need n >= 2 grid intervals")

    ts = np.linspace(0.0, horizon, n + 1)
    w_max = _omega_cutoff(p)
    w_b = min(0.25 / horizon, 0.5 * min(p.omega0, 1.0 / p.beta, p.gamma))

    def f1(w):
        return _j_over_w(w, p) / w

    def f2(w):
        return _j_over_w(w, p) * _coth(0.5 * p.beta * w) / w

    # extend the cutoff until the 1/w^5-type tails are negligible
    for _ in range(40):
        tail1 = f1(np.array([w_max]))[0] * w_max / 4.0
        tail2 = f2(np.array([w_max]))[0] * w_max / 4.0
        if tail1 <= 1e-8 * _rough_scale(f1, w_b, w_max) and tail2 <= 1e-8 * _rough_scale(
            f2, w_b, w_max
        ):
            break
        w_max *= 2.0
    else:
        raise QuadratureError("could not bound the frequency tail below 1e-8")

    edges = _seed_edges(p, w_b, w_max)
    panels1 = build_panels(f1, edges, rel_tol=rel_tol)
    panels2 = build_panels(f2, edges, rel_tol=rel_tol)

    # head contribution, exact zeros at t=0 by construction
    xg = 0.5 * w_b * (_HEAD_X + 1.0)
    wg = 0.5 * w_b * _HEAD_W
    jred = _j_over_w(xg, p)
    cothg = _coth(0.5 * p.beta * xg)
    wt = np.outer(ts, xg)
    head1 = np.sin(wt) @ (wg * jred / xg)
    head2 = (2.0 * np.sin(0.5 * wt) ** 2) @ (wg * jred * cothg / xg)

    fi1 = panels1.fourier(ts)
    fi2 = panels2.fourier(ts)
    q1 = (head1 + fi1.imag) / (2.0 * np.pi)
    q2 = (head2 + panels2.total - fi2.real) / (2.0 * np.pi)

    # Q2 >= 0 analytically; trim sub-roundoff negatives near t=0
    floor = -1e-10 * max(abs(panels2.total), 1.0)
    if q2.min() < floor:
        raise QuadratureError(f"Q2 went negative beyond roundoff: min {q2.min():.3e}")
    np.maximum(q2, 0.0, out=q2)
    q1[0] = 0.0
    q2[0] = 0.0
    return CorrelationTable(times=ts, q1=q1, q2=q2, params=p)


def _rough_scale(f, w_b: float, w_max: float) -> float:
    wg = np.geomspace(w_b, w_max, 200)
    return float(np.trapezoid(np.abs(f(wg)), wg)) + 1e-300


def _seed_edges(p: BathParams, w_b: float, w_max: float) -> np.ndarray:
    edges = list(geometric_edges(w_b, w_max, ratio=2.0))
    if p.gamma < 0.5 * p.omega0:
        # pre-split the resonance so adaptivity starts near the peak
        res = p.omega0 + p.gamma * np.array(
            [-12.0, -8.0, -5.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0]
        )
        edges.extend(res[(res > w_b) & (res < w_max)])
    return np.unique(np.asarray(edges))


def bath_operator_average(table: CorrelationTable, t, sign: int) -> complex | np.ndarray:
    """Average of the dressing operators: exp(-Q2(t) -+ i Q1(t)).

    sign=+1 gives exp(-Q2 - i Q1) (operator ordering B+(0)B-(t)); sign=-1
    the complex conjugate.  Modulus is exp(-Q2) <= 1.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    q1, q2 = table.interp(t)
    out = np.exp(-q2 - 1j * sign * q1)
    return complex(out) if np.isscalar(t) else out


@dataclass(frozen=True)
class DecayFit:
    """Result of fitting the kernel envelope G(t)."""

    tau_d: float
    model: str | None   # "exponential" | "gaussian" | None if not decayed
    decayed: bool
    oscillatory: bool


def fit_decay_time(
    times: np.ndarray,
    g: np.ndarray,
    maxima_floor: float = 1e-3,
    decay_threshold: float = 0.1,
) -> DecayFit:
    """Fit G(t) (or the envelope of its maxima) to exp(-t/tau) or exp(-t^2/tau^2).

    G is oscillatory if it has at least two interior local maxima above
    `maxima_floor`; then only the maxima (plus t=0) are fitted.  The model
    with the smaller log-space residual wins.  If G never falls below
    `decay_threshold`, returns tau_d = horizon with decayed=False.
    """
    times = np.asarray(times, dtype=float)
    g = np.asarray(g, dtype=float)
    if len(g) < 3:
        raise InsufficientDataError("need at least 3 samples of G(t)")
    if abs(g[0] - 1.0) > 1e-9:
        raise ValueError("G(0) must equal 1")

    interior = np.flatnonzero(
        (g[1:-1] > g[:-2]) & (g[1:-1] >= g[2:]) & (g[1:-1] > maxima_floor)
    ) + 1
    oscillatory = len(interior) >= 2

    if oscillatory:
        keep = np.concatenate([[0], interior])
        if g[interior].min() > decay_threshold:
            # oscillations died before the envelope decayed; the maxima alone
            # cannot see the decay, so append the monotone stretch after the
            # last maximum
            tail = np.arange(interior[-1] + 1, len(g))
            drop = np.flatnonzero(np.diff(g[tail]) > 0)
            if len(drop):
                tail = tail[: drop[0] + 1]
            tail = tail[g[tail] > 1e-4]
            keep = np.concatenate([keep, tail])
        tf = times[keep]
        gf = g[keep]
    else:
        # fit the decaying stretch; drop the deep tail where log G is noise-dominated
        below = np.flatnonzero(g < 1e-4)
        stop = below[0] if len(below) else len(g)
        tf, gf = times[:stop], g[:stop]

    if len(tf) < 3:
        raise InsufficientDataError("fewer than 3 usable fit points")
    if gf.min() > decay_threshold:
        return DecayFit(tau_d=float(times[-1]), model=None, decayed=False,
                        oscillatory=oscillatory)

    logg = np.log(np.maximum(gf, 1e-300))
    # least squares through the origin for log g = -t/tau (or -t^2/tau^2)
    with np.errstate(divide="ignore"):
        inv_tau = -np.dot(tf, logg) / np.dot(tf, tf)
        inv_tau2 = -np.dot(tf**2, logg) / np.dot(tf**2, tf**2)
    res_exp = np.sum((logg + inv_tau * tf) ** 2)
    res_gau = np.sum((logg + inv_tau2 * tf**2) ** 2)

    if res_gau < res_exp and inv_tau2 > 0:
        return DecayFit(tau_d=float(1.0 / math.sqrt(inv_tau2)), model="gaussian",
                        decayed=True, oscillatory=oscillatory)
    if inv_tau <= 0:
        return DecayFit(tau_d=float(times[-1]), model=None, decayed=False,
                        oscillatory=oscillatory)
    return DecayFit(tau_d=float(1.0 / inv_tau), model="exponential",
                    decayed=True, oscillatory=oscillatory)


def decay_time(
    p: BathParams,
    start_horizon: float = 2.0,
    max_horizon: float = 200.0,
    n: int = 800,
) -> DecayFit:
    """Fit tau_d of G(t) = exp(-Q2(t)), adapting the horizon to the decay.

    The horizon grows until G falls below 0.1 (or max_horizon is reached,
    giving the no-decay flag) and shrinks when the decay happens in the
    first few grid points, so the fit window is always resolved.
    """
    horizon = start_horizon
    for _ in range(60):
        horizon = min(max(horizon, 1e-6), max_horizon)
        table = compute_correlations(p, horizon, n, rel_tol=1e-9)
        g = table.envelope()
        below = np.flatnonzero(g < 0.1)
        if len(below) and below[0] < n // 20 and horizon > 1e-5:
            # decay happens within the first few grid points; zoom in
            horizon = 3.0 * table.times[below[0]]
            continue
        fit = fit_decay_time(table.times, g)
        if fit.decayed or horizon >= max_horizon:
            return fit
        horizon *= 2.0
    raise QuadratureError("decay_time horizon search did not settle")
