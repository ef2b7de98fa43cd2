"""Two-state dynamics under the dressed tunneling kernel and telegraph driving.

Implements four solvers for the Bloch components:

* exact noise-averaged memory-kernel (Volterra) equations for the doubled
  state (<P_x>,<P_y>,<P_z>,<a_x>,<a_y>,<a_z>) with a_i = <alpha(t) P_i(t)>,
* exact noise-averaged time-local equations for the same state,
* per-realization memory-kernel / time-local equations for a single
  telegraph trajectory,
* Monte-Carlo ensemble averaging of the per-realization solutions, used as
  the independent oracle for the exact-averaged systems.

All equations are linear; memory integrals are discretized by trapezoid
over the stored history and stepped with a second-order predictor-corrector
(Heun).  The averaged time-local system uses classical RK4 with the
accumulated coefficient tables interpolated at half steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.signal import fftconvolve

from .bath import CorrelationTable
from .errors import StabilityError
from .noise import (
    NoiseParams,
    TelegraphTrajectory,
    phase_knots,
    propagators,
    sample_trajectory,
    value_at,
)

_BALL_TOL = 1e-3  # norm excess that triggers a stability error

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class SystemParams:
    """Static bias epsilon0 and tunneling amplitude V >= 0 of the two-state
    system."""

    epsilon0: float
    tunneling: float

    def __post_init__(self):
        if not math.isfinite(self.epsilon0):
            raise ValueError("epsilon0 must be finite")
        if not (math.isfinite(self.tunneling) and self.tunneling >= 0):
            raise ValueError("tunneling must be finite and >= 0")


@dataclass(frozen=True)
class BlochState:
    px: float
    py: float
    pz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.px, self.py, self.pz], dtype=float)

    def norm(self) -> float:
        return float(np.hypot(np.hypot(self.px, self.py), self.pz))


@dataclass(frozen=True)
class AveragedState:
    """Noise-averaged Bloch vector plus the three correlators <alpha P_i>."""

    p: BlochState
    ax: float = 0.0
    ay: float = 0.0
    az: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.p.px, self.p.py, self.p.pz, self.ax, self.ay, self.az], dtype=float
        )

    @staticmethod
    def from_bloch(p: BlochState) -> "AveragedState":
        """Initial condition for noise uncorrelated with the prepared state."""
        return AveragedState(p=p)


def bloch_to_density(p: BlochState) -> np.ndarray:
    """rho = (I + P . sigma)/2; Hermitian with unit trace."""
    return 0.5 * (
        np.eye(2, dtype=complex) + p.px * _SIGMA_X + p.py * _SIGMA_Y + p.pz * _SIGMA_Z
    )


def default_step(sys: SystemParams, noise: NoiseParams | None, omega0: float,
                 horizon: float) -> float:
    """h = min(0.01/max(eps0 + Omega, V, omega0/10), horizon/1000), snapped so
    horizon/h is an integer."""
    omega = noise.omega_amp if noise is not None else 0.0
    fastest = max(abs(sys.epsilon0) + omega, sys.tunneling, omega0 / 10.0, 1e-12)
    h = min(0.01 / fastest, horizon / 1000.0)
    n = max(10, int(math.ceil(horizon / h)))
    return horizon / n


@dataclass(frozen=True)
class SolverConfig:
    """Time grid and solver selection.

    method: "nz" (memory kernel) or "tcl" (time local).
    averaging: "exact" (closed noise-averaged system) or "monte_carlo"
    (ensemble of per-realization solutions; n_traj and seed apply).
    """

    horizon: float
    step: float
    method: str = "tcl"
    averaging: str = "exact"
    n_traj: int = 0
    seed: int = 0
    batch: int = 2500

    def __post_init__(self):
        if self.horizon <= 0 or self.step <= 0:
            raise ValueError("horizon and step must be positive")
        ratio = self.horizon / self.step
        if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 10:
            raise ValueError("horizon/step must be an integer >= 10")
        if self.method not in ("nz", "tcl"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.averaging not in ("exact", "monte_carlo"):
            raise ValueError(f"unknown averaging {self.averaging!r}")
        if self.averaging == "monte_carlo" and self.n_traj < 100:
            raise ValueError("monte_carlo averaging needs n_traj >= 100")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


# --------------------------------------------------------------------------
# kernel tables
# --------------------------------------------------------------------------


def _noise_on_grid(noise: NoiseParams | None, ts: np.ndarray):
    """(Omega, nu, S0, Im S1, S2) on the grid; the no-noise limit is
    S0 = S2 = 1, S1 = 0 with nu = 0."""
    if noise is None:
        one = np.ones_like(ts)
        return 0.0, 0.0, one, np.zeros_like(ts), one
    s0, s1, s2 = propagators(noise, ts)
    return noise.omega_amp, noise.nu, s0, s1.imag, s2


@dataclass
class KernelTables:
    """Grid samples of everything the solvers convolve or accumulate."""

    times: np.ndarray
    qc: np.ndarray      # exp(-Q2) cos(Q1)
    qs: np.ndarray      # exp(-Q2) sin(Q1)
    s0: np.ndarray
    s1im: np.ndarray    # S1 = i * s1im
    s2: np.ndarray
    cos_e: np.ndarray   # cos(eps0 t)
    sin_e: np.ndarray
    eps0: float
    v2: float
    omega: float
    nu: float

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    # kernels of the averaged memory equations
    def k1(self) -> np.ndarray:
        return 4.0 * self.v2 * self.qs * self.s0 * self.sin_e

    def k2(self) -> np.ndarray:
        return 4.0 * self.v2 * self.qc * self.s0 * self.cos_e

    def k3(self) -> np.ndarray:
        # 4 i V^2 qc S1 sin -> real through S1 = i s1im
        return -4.0 * self.v2 * self.qc * self.s1im * self.sin_e

    def k4(self) -> np.ndarray:
        return -4.0 * self.v2 * self.qs * self.s1im * self.cos_e

    def k5(self) -> np.ndarray:
        return 4.0 * self.v2 * self.qc * self.s2 * self.cos_e

    def coherence_kernel(self) -> np.ndarray:
        """2 V^2 exp(-Q2) cos(Q1), the <P_x>/<P_y> memory kernel."""
        return 2.0 * self.v2 * self.qc

    def correlator_kernel(self) -> np.ndarray:
        """Same kernel dressed with exp(-nu t) for the <a_x>/<a_y> memory."""
        return self.coherence_kernel() * np.exp(-self.nu * self.times)

    def gammas(self) -> np.ndarray:
        """(6, n+1) cumulative coefficients of the time-local system."""
        g5_int = 2.0 * self.v2 * self.qc * self.s0 * self.sin_e
        g6_int = -2.0 * self.v2 * self.qc * self.s1im * self.cos_e
        rows = [self.k1(), self.k2(), self.k3(), self.k4(), g5_int, g6_int]
        return np.stack(
            [cumulative_trapezoid(r, self.times, initial=0.0) for r in rows]
        )


def build_tables(
    bath: CorrelationTable,
    sys: SystemParams,
    noise: NoiseParams | None,
    ts: np.ndarray,
) -> KernelTables:
    """Sample bath/noise kernel factors on the solver grid (linear in Q1/Q2)."""
    q1, q2 = bath.interp(ts)
    env = np.exp(-np.minimum(q2, 745.0))
    omega, nu, s0, s1im, s2 = _noise_on_grid(noise, ts)
    return KernelTables(
        times=ts,
        qc=env * np.cos(q1),
        qs=env * np.sin(q1),
        s0=s0,
        s1im=s1im,
        s2=s2,
        cos_e=np.cos(sys.epsilon0 * ts),
        sin_e=np.sin(sys.epsilon0 * ts),
        eps0=sys.epsilon0,
        v2=sys.tunneling**2,
        omega=omega,
        nu=nu,
    )


def kernels_K(t, bath: CorrelationTable, sys: SystemParams,
              noise: NoiseParams | None) -> tuple:
    """(K1..K5) at time(s) t: the memory kernels of the averaged population
    block.  K3 and K4 are real; the explicit i cancels the imaginary S1."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    q1, q2 = bath.interp(tt)
    env = np.exp(-np.minimum(q2, 745.0))
    omega, nu, s0, s1im, s2 = _noise_on_grid(noise, tt)
    v2 = sys.tunneling**2
    ce, se = np.cos(sys.epsilon0 * tt), np.sin(sys.epsilon0 * tt)
    qc, qs = env * np.cos(q1), env * np.sin(q1)
    out = (
        4.0 * v2 * qs * s0 * se,
        4.0 * v2 * qc * s0 * ce,
        -4.0 * v2 * qc * s1im * se,
        -4.0 * v2 * qs * s1im * ce,
        4.0 * v2 * qc * s2 * ce,
    )
    if np.isscalar(t):
        return tuple(float(k[0]) for k in out)
    return out


def coefficients_Gamma(t, bath: CorrelationTable, sys: SystemParams,
                       noise: NoiseParams | None, step: float | None = None) -> tuple:
    """(Gamma1..Gamma6) at time t, accumulated by trapezoid on a uniform grid."""
    t = float(t)
    if t == 0.0:
        return (0.0,) * 6
    omega0 = bath.params.omega0 if bath.params is not None else 10.0
    h = step if step is not None else min(t / 200.0, default_step(
        sys, noise, omega0=omega0, horizon=t))
    n = max(10, int(round(t / h)))
    ts = np.linspace(0.0, t, n + 1)
    g = build_tables(bath, sys, noise, ts).gammas()
    return tuple(float(g[k, -1]) for k in range(6))


# --------------------------------------------------------------------------
# evolution containers
# --------------------------------------------------------------------------


@dataclass
class Evolution:
    """Uniform time series of the (averaged) state, one row per grid point."""

    times: np.ndarray
    states: np.ndarray            # (n+1, 6): Px, Py, Pz, ax, ay, az
    method: str
    stderr: np.ndarray | None = field(default=None)  # set for Monte-Carlo runs

    def bloch(self) -> np.ndarray:
        return self.states[:, :3]

    def half_bloch_norm(self) -> np.ndarray:
        """Half the Euclidean norm of the Bloch part; for a homogeneous
        difference run this is the trace distance D(t) directly."""
        return 0.5 * np.linalg.norm(self.states[:, :3], axis=1)


def _check_ball(norm_sq: np.ndarray | float, limit: float, method: str):
    m = float(np.max(norm_sq))
    if m > limit * limit:
        raise StabilityError(
            f"{method} state norm reached {math.sqrt(m):.6f} (> {limit:.6f}); "
            "reduce the step size"
        )


# --------------------------------------------------------------------------
# exact noise-averaged solvers
# --------------------------------------------------------------------------


def solve_tcl_averaged(
    bath: CorrelationTable,
    sys: SystemParams,
    noise: NoiseParams | None,
    cfg: SolverConfig,
    initial: AveragedState,
    homogeneous: bool = False,
) -> Evolution:
    """Integrate the averaged time-local system with RK4.

    The six coupled linear ODEs use the cumulative coefficient tables; at
    half steps the tables are interpolated linearly.  `homogeneous=True`
    drops the inhomogeneous (Gamma1/Gamma4) drive, which is the evolution
    obeyed by the difference of two solutions.
    """
    ts = cfg.times()
    tab = build_tables(bath, sys, noise, ts)
    g = tab.gammas()                      # (6, n+1)
    g_half = 0.5 * (g[:, :-1] + g[:, 1:])  # (6, n)
    nu, omega, eps0 = tab.nu, tab.omega, tab.eps0

    def generator(gcol):
        g1, g2, g3, g4, g5, g6 = gcol
        rot = eps0 + g5
        drv = omega + g6
        L = np.array([
            [-0.5 * g2, rot, 0.0, 0.5 * g3, drv, 0.0],
            [-rot, -0.5 * g2, 0.0, -drv, 0.5 * g3, 0.0],
            [0.0, 0.0, -g2, 0.0, 0.0, g3],
            [0.5 * g3, drv, 0.0, -nu - 0.5 * g2, rot, 0.0],
            [-drv, 0.5 * g3, 0.0, -rot, -nu - 0.5 * g2, 0.0],
            [0.0, 0.0, g3, 0.0, 0.0, -nu - g2],
        ])
        b = np.zeros(6)
        if not homogeneous:
            b[2] = -g1
            b[5] = g4
        return L, b

    y = initial.as_array().copy()
    out = np.empty((len(ts), 6))
    out[0] = y
    limit = max(1.0, float(np.linalg.norm(y[:3]))) + _BALL_TOL
    h = cfg.step
    for i in range(len(ts) - 1):
        L0, b0 = generator(g[:, i])
        Lh, bh = generator(g_half[:, i])
        L1, b1 = generator(g[:, i + 1])
        k1 = L0 @ y + b0
        k2 = Lh @ (y + 0.5 * h * k1) + bh
        k3 = Lh @ (y + 0.5 * h * k2) + bh
        k4 = L1 @ (y + h * k3) + b1
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
        _check_ball(y[0] ** 2 + y[1] ** 2 + y[2] ** 2, limit, "tcl")
    return Evolution(times=ts, states=out, method="tcl")


def solve_nz_averaged(
    bath: CorrelationTable,
    sys: SystemParams,
    noise: NoiseParams | None,
    cfg: SolverConfig,
    initial: AveragedState,
    homogeneous: bool = False,
) -> Evolution:
    """Integrate the averaged memory-kernel (Volterra) system.

    History is stored on the uniform grid; each memory integral is a
    trapezoid sum over the stored past.  Stepping is predict (explicit with
    the current memory sum) / correct once (trapezoid with the updated
    endpoint).
    """
    ts = cfg.times()
    h = cfg.step
    n = len(ts) - 1
    tab = build_tables(bath, sys, noise, ts)
    nu, omega, eps0 = tab.nu, tab.omega, tab.eps0

    kq = tab.coherence_kernel()
    kqn = tab.correlator_kernel()
    k2, k3, k5 = tab.k2(), tab.k3(), tab.k5()
    if homogeneous:
        gamma1 = gamma4 = np.zeros_like(ts)
    else:
        gamma1 = cumulative_trapezoid(tab.k1(), ts, initial=0.0)
        gamma4 = cumulative_trapezoid(tab.k4(), ts, initial=0.0)

    # memory streams: (kernel, history column) pairs
    streams = [
        (kq, 0), (kq, 1),      # <Px>, <Py>
        (kqn, 3), (kqn, 4),    # <ax>, <ay>
        (k2, 2), (k3, 5),      # <Pz> eq: K2*Pz, K3*az
        (k3, 2), (k5, 5),      # <az> eq: K3*Pz, K5*az
    ]
    kr = [k[::-1].copy() for k, _ in streams]
    hist = np.zeros((n + 1, 6))
    hist[0] = initial.as_array()
    limit = max(1.0, float(np.linalg.norm(hist[0, :3]))) + _BALL_TOL

    def rhs(i, y, mem):
        mx, my, max_, may, m2z, m3a, m3p, m5a = mem
        return np.array([
            eps0 * y[1] + omega * y[4] - mx,
            -eps0 * y[0] - omega * y[3] - my,
            -gamma1[i] - m2z + m3a,
            -nu * y[3] + eps0 * y[4] + omega * y[1] - max_,
            -nu * y[4] - eps0 * y[3] - omega * y[0] - may,
            -nu * y[5] + m3p - gamma4[i] - m5a,
        ])

    shead = np.zeros(len(streams))  # history part of each memory sum at step i
    for i in range(n):
        y = hist[i]
        mem_i = np.array([
            shead[s] + 0.5 * h * streams[s][0][0] * y[streams[s][1]]
            for s in range(len(streams))
        ]) if i > 0 else np.zeros(len(streams))
        f1 = rhs(i, y, mem_i)
        y_pred = y + h * f1

        m = i + 1
        for s, (k, col) in enumerate(streams):
            acc = kr[s][n - m : n] @ hist[:m, col]     # j = 0 .. m-1
            shead[s] = h * (acc - 0.5 * k[m] * hist[0, col])
        mem_p = np.array([
            shead[s] + 0.5 * h * streams[s][0][0] * y_pred[streams[s][1]]
            for s in range(len(streams))
        ])
        f2 = rhs(m, y_pred, mem_p)
        hist[m] = y + 0.5 * h * (f1 + f2)
        _check_ball(hist[m, 0] ** 2 + hist[m, 1] ** 2 + hist[m, 2] ** 2, limit, "nz")
    return Evolution(times=ts, states=hist, method="nz")


# --------------------------------------------------------------------------
# per-realization solvers and Monte-Carlo ensemble
# --------------------------------------------------------------------------


def _causal_conv(k: np.ndarray, H: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid-weighted running convolution C[m] = h * sum_j w_j k[m-j] H[j]
    for the full grid at once (H known in advance)."""
    full = fftconvolve(H, k[:, None], axes=0)[: H.shape[0]]
    full -= 0.5 * np.outer(k[: H.shape[0]], H[0])
    full -= 0.5 * k[0] * H
    out = h * full
    out[0] = 0.0
    return out


def _batch_grids(
    trajs: list[TelegraphTrajectory], ts: np.ndarray, eps0: float, omega: float
) -> tuple[np.ndarray, np.ndarray]:
    """Exact accumulated phase theta(t) = eps0 t + Omega * int alpha and the
    noise value alpha(t) on the grid, one column per trajectory."""
    n1, B = len(ts), len(trajs)
    theta = np.empty((n1, B))
    alpha = np.empty((n1, B))
    for j, traj in enumerate(trajs):
        knots, phi = phase_knots(traj)
        theta[:, j] = eps0 * ts + omega * np.interp(ts, knots, phi)
        alpha[:, j] = value_at(traj, ts)
    return theta, alpha


def _tcl_batch(
    tab: KernelTables,
    theta: np.ndarray,
    alpha: np.ndarray,
    h: float,
    y0: np.ndarray,
    homogeneous: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Heun integration of the per-realization time-local equations for a
    batch of trajectories.  The time-dependent coefficients are accumulated
    beforehand: they depend only on the noise phase, not on the state."""
    n1, B = theta.shape
    cth, sth = np.cos(theta), np.sin(theta)
    kq = tab.coherence_kernel()
    ku = 4.0 * tab.v2 * tab.qs
    cc = _causal_conv(kq, cth, h)
    cs = _causal_conv(kq, sth, h)
    uc = _causal_conv(ku, cth, h)
    us = _causal_conv(ku, sth, h)
    a_c = cth * cc + sth * cs          # cos-phase coefficient
    a_s = sth * cc - cth * cs          # sin-phase coefficient
    b_u = np.zeros_like(a_c) if homogeneous else sth * uc - cth * us
    eps = tab.eps0 + tab.omega * alpha

    px = np.full(B, y0[0])
    py = np.full(B, y0[1])
    pz = np.full(B, y0[2])
    out_x = np.empty((n1, B)); out_y = np.empty((n1, B)); out_z = np.empty((n1, B))
    out_x[0], out_y[0], out_z[0] = px, py, pz
    # per-trajectory time-local states may leave the ball transiently; only
    # guard against blow-up here (the ensemble mean is ball-checked)
    limit = 10.0 * max(1.0, float(np.linalg.norm(y0)))

    def deriv(i, x, y, z):
        dx = eps[i] * y - a_c[i] * x + a_s[i] * y
        dy = -eps[i] * x - a_s[i] * x - a_c[i] * y
        dz = -b_u[i] - 2.0 * a_c[i] * z
        return dx, dy, dz

    for i in range(n1 - 1):
        d1 = deriv(i, px, py, pz)
        xp, yp, zp = px + h * d1[0], py + h * d1[1], pz + h * d1[2]
        d2 = deriv(i + 1, xp, yp, zp)
        px = px + 0.5 * h * (d1[0] + d2[0])
        py = py + 0.5 * h * (d1[1] + d2[1])
        pz = pz + 0.5 * h * (d1[2] + d2[2])
        out_x[i + 1], out_y[i + 1], out_z[i + 1] = px, py, pz
        _check_ball(px * px + py * py + pz * pz, limit, "tcl")
    return out_x, out_y, out_z


def _nz_batch(
    tab: KernelTables,
    theta: np.ndarray,
    alpha: np.ndarray,
    h: float,
    y0: np.ndarray,
    homogeneous: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Heun/trapezoid integration of the per-realization memory-kernel
    equations for a batch of trajectories; the full state history feeds the
    memory integrals."""
    n1, B = theta.shape
    n = n1 - 1
    cth, sth = np.cos(theta), np.sin(theta)
    kq = tab.coherence_kernel()
    kw = 2.0 * kq                       # population kernel 4 V^2 qc
    ku = 4.0 * tab.v2 * tab.qs
    if homogeneous:
        b_u = np.zeros_like(cth)
    else:
        b_u = sth * _causal_conv(ku, cth, h) - cth * _causal_conv(ku, sth, h)
    eps = tab.eps0 + tab.omega * alpha
    kq_rev = kq[::-1].copy()
    kw_rev = kw[::-1].copy()

    hx = np.empty((n1, B)); hy = np.empty((n1, B)); hz = np.empty((n1, B))
    hzc = np.empty((n1, B)); hzs = np.empty((n1, B))
    hx[0] = y0[0]; hy[0] = y0[1]; hz[0] = y0[2]
    hzc[0] = cth[0] * hz[0]; hzs[0] = sth[0] * hz[0]
    limit = 10.0 * max(1.0, float(np.linalg.norm(y0)))

    sx = np.zeros(B); sy = np.zeros(B); szc = np.zeros(B); szs = np.zeros(B)
    for i in range(n):
        if i == 0:
            mx = my = mzc = mzs = 0.0
        else:
            mx = sx + 0.5 * h * kq[0] * hx[i]
            my = sy + 0.5 * h * kq[0] * hy[i]
            mzc = szc + 0.5 * h * kw[0] * hzc[i]
            mzs = szs + 0.5 * h * kw[0] * hzs[i]
        dx1 = eps[i] * hy[i] - mx
        dy1 = -eps[i] * hx[i] - my
        dz1 = -b_u[i] - (cth[i] * mzc + sth[i] * mzs)
        xp = hx[i] + h * dx1
        yp = hy[i] + h * dy1
        zp = hz[i] + h * dz1

        m = i + 1
        sx = h * (kq_rev[n - m : n] @ hx[:m] - 0.5 * kq[m] * hx[0])
        sy = h * (kq_rev[n - m : n] @ hy[:m] - 0.5 * kq[m] * hy[0])
        szc = h * (kw_rev[n - m : n] @ hzc[:m] - 0.5 * kw[m] * hzc[0])
        szs = h * (kw_rev[n - m : n] @ hzs[:m] - 0.5 * kw[m] * hzs[0])
        mx = sx + 0.5 * h * kq[0] * xp
        my = sy + 0.5 * h * kq[0] * yp
        mzc = szc + 0.5 * h * kw[0] * (cth[m] * zp)
        mzs = szs + 0.5 * h * kw[0] * (sth[m] * zp)
        dx2 = eps[m] * yp - mx
        dy2 = -eps[m] * xp - my
        dz2 = -b_u[m] - (cth[m] * mzc + sth[m] * mzs)

        hx[m] = hx[i] + 0.5 * h * (dx1 + dx2)
        hy[m] = hy[i] + 0.5 * h * (dy1 + dy2)
        hz[m] = hz[i] + 0.5 * h * (dz1 + dz2)
        hzc[m] = cth[m] * hz[m]
        hzs[m] = sth[m] * hz[m]
        _check_ball(hx[m] ** 2 + hy[m] ** 2 + hz[m] ** 2, limit, "nz")
    return hx, hy, hz


def solve_per_realization(
    traj: TelegraphTrajectory,
    bath: CorrelationTable,
    sys: SystemParams,
    noise: NoiseParams,
    cfg: SolverConfig,
    initial: BlochState,
    homogeneous: bool = False,
) -> Evolution:
    """Solve one noise realization; the a-columns of the result hold the
    single-trajectory correlators alpha(t) P_i(t)."""
    if traj.horizon < cfg.horizon - 1e-12:
        raise ValueError("trajectory horizon is shorter than the solver horizon")
    ts = cfg.times()
    tab = build_tables(bath, sys, noise, ts)
    theta, alpha = _batch_grids([traj], ts, sys.epsilon0, noise.omega_amp)
    solver = _nz_batch if cfg.method == "nz" else _tcl_batch
    px, py, pz = solver(tab, theta, alpha, cfg.step, initial.as_array(), homogeneous)
    states = np.column_stack([
        px[:, 0], py[:, 0], pz[:, 0],
        alpha[:, 0] * px[:, 0], alpha[:, 0] * py[:, 0], alpha[:, 0] * pz[:, 0],
    ])
    return Evolution(times=ts, states=states, method=cfg.method)


def ensemble_average(
    bath: CorrelationTable,
    sys: SystemParams,
    noise: NoiseParams,
    cfg: SolverConfig,
    initial: BlochState,
    homogeneous: bool = False,
) -> Evolution:
    """Average per-realization solutions over cfg.n_traj independent
    trajectories (substreams spawned from cfg.seed by trajectory index).

    Returns the mean of (P, alpha*P) per grid point with per-component
    standard errors; reruns with the same seed are bit-identical.
    """
    if noise is None:
        raise ValueError("ensemble averaging requires noise parameters")
    ts = cfg.times()
    n1 = len(ts)
    tab = build_tables(bath, sys, noise, ts)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_traj)
    solver = _nz_batch if cfg.method == "nz" else _tcl_batch
    y0 = initial.as_array()

    sums = np.zeros((n1, 6))
    sumsq = np.zeros((n1, 6))
    for start in range(0, cfg.n_traj, cfg.batch):
        block = children[start : start + cfg.batch]
        trajs = [
            sample_trajectory(noise, cfg.horizon, np.random.default_rng(ss))
            for ss in block
        ]
        theta, alpha = _batch_grids(trajs, ts, sys.epsilon0, noise.omega_amp)
        px, py, pz = solver(tab, theta, alpha, cfg.step, y0, homogeneous)
        for col, arr in enumerate((px, py, pz, alpha * px, alpha * py, alpha * pz)):
            sums[:, col] += arr.sum(axis=1)
            sumsq[:, col] += (arr * arr).sum(axis=1)

    n = cfg.n_traj
    mean = sums / n
    var = np.maximum(sumsq - n * mean * mean, 0.0) / max(n - 1, 1)
    stderr = np.sqrt(var / n)
    limit = max(1.0, float(np.linalg.norm(y0))) + _BALL_TOL
    _check_ball((mean[:, :3] ** 2).sum(axis=1), limit, cfg.method)
    return Evolution(times=ts, states=mean, method=cfg.method, stderr=stderr)


def solve_averaged(
    bath: CorrelationTable,
    sys: SystemParams,
    noise: NoiseParams | None,
    cfg: SolverConfig,
    initial: AveragedState,
    homogeneous: bool = False,
) -> Evolution:
    """Dispatch on cfg: exact averaging (NZ or TCL) or Monte-Carlo ensemble."""
    if cfg.averaging == "monte_carlo":
        return ensemble_average(bath, sys, noise, cfg, initial.p, homogeneous)
    if cfg.method == "nz":
        return solve_nz_averaged(bath, sys, noise, cfg, initial, homogeneous)
    return solve_tcl_averaged(bath, sys, noise, cfg, initial, homogeneous)
