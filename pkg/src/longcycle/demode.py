"""Fluid limit of 2-Greedy on the all-Y pseudo-graph with Exp<=20 weights.

State (y, m, maxw, W) over scaled time x, with p = 3y / (2m):

    y'    = -2p(2 - p) / (2 - p^2)
    2m'   = -(8 - 4p - 2p^2) / (2 - p^2)
    maxw' = -(e^maxw - 1) p^2 / (m (2 - p^2))
    W'    = p^2 maxw / (2 - p^2) + (2 - 2p^2)/(2 - p^2) * E[Exp<=maxw(1)]

maxw' is about -3e8 at x = 0, so the solver works with u = exp(-maxw),
u' = (1 - u) p^2 / (m (2 - p^2)), which stays below 1 on the domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp

SIGMA = 1.0 - 1e-5
INITIAL = (1.0, 1.5, 20.0, 0.0)  # y, m, maxw, W
Y_FLOOR = 1e-13
DOMAIN = {"y": (Y_FLOOR, 1.1), "two_m_over_y": 2.5, "two_m_max": 3.1, "maxw": (0.0, 21.0), "W": (0.0, 21.0)}


class DomainExit(ArithmeticError):
    """The state left the domain before the requested end time."""


@dataclass
class OdeState:
    x: float
    y: float
    m: float
    maxw: float
    W: float

    @property
    def u(self) -> float:
        return math.exp(-self.maxw)

    @property
    def p(self) -> float:
        return 3.0 * self.y / (2.0 * self.m)

    def in_domain(self) -> bool:
        return (Y_FLOOR <= self.y <= 1.1 and 2.5 * self.y <= 2 * self.m <= 3.1
                and 0.0 <= self.maxw <= 21.0 and 0.0 <= self.W <= 21.0)


@njit(cache=True)
def _trunc_mean_u(maxw, u):
    # E[Exp<=maxw(1)] = (1 - u(maxw + 1)) / (1 - u); series near maxw = 0
    if maxw < 1e-4:
        return maxw / 2.0 - maxw * maxw / 12.0
    return (1.0 - u * (maxw + 1.0)) / (1.0 - u)


@njit(cache=True)
def _rhs_u(y, m, u, W):
    p = 3.0 * y / (2.0 * m)
    q = 2.0 - p * p
    maxw = -math.log(u)
    dy = -2.0 * p * (2.0 - p) / q
    dm = -(8.0 - 4.0 * p - 2.0 * p * p) / (2.0 * q)
    du = (1.0 - u) * p * p / (m * q)
    dW = p * p * maxw / q + (2.0 - 2.0 * p * p) / q * _trunc_mean_u(maxw, u)
    return dy, dm, du, dW


@njit(cache=True)
def _rhs_maxw(y, m, maxw, W):
    p = 3.0 * y / (2.0 * m)
    q = 2.0 - p * p
    u = math.exp(-maxw)
    dy = -2.0 * p * (2.0 - p) / q
    dm = -(8.0 - 4.0 * p - 2.0 * p * p) / (2.0 * q)
    dmaxw = -math.expm1(maxw) * p * p / (m * q)
    dW = p * p * maxw / q + (2.0 - 2.0 * p * p) / q * _trunc_mean_u(maxw, u)
    return dy, dm, dmaxw, dW


def rhs(s: OdeState, form: str = "maxw") -> tuple[float, float, float, float]:
    """Derivatives at ``s``: (y', m', maxw' or u', W')."""
    if s.m <= 0 or s.p ** 2 >= 2:
        raise DomainExit(f"rhs undefined at p={s.p}, m={s.m}")
    if form == "u":
        return _rhs_u(s.y, s.m, s.u, s.W)
    if form == "maxw":
        return _rhs_maxw(s.y, s.m, s.maxw, s.W)
    raise ValueError(f"unknown form {form!r}")


@dataclass
class Trajectory:
    x: np.ndarray
    y: np.ndarray
    m: np.ndarray
    maxw: np.ndarray
    W: np.ndarray
    tol: float
    x_end: float
    exited: bool = False
    exit_x: float | None = None
    nfev: int = 0
    steps: int = 0
    _sol: object = field(default=None, repr=False)

    def at(self, x) -> np.ndarray:
        """Dense-output state (y, m, maxw, W) at scaled time(s) ``x``."""
        xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if np.any(xs < 0) or np.any(xs > self.x[-1] + 1e-15):
            raise ValueError("x outside the integrated range")
        z = self._sol(xs)
        out = np.vstack([z[0], z[1], -np.log(z[2]), z[3]])
        return out[:, 0] if np.ndim(x) == 0 else out

    def final(self) -> OdeState:
        return OdeState(float(self.x[-1]), float(self.y[-1]), float(self.m[-1]),
                        float(self.maxw[-1]), float(self.W[-1]))

    def to_csv(self, path=None) -> str:
        lines = ["x,y,m,maxw,W"]
        lines += [",".join(repr(float(v)) for v in r)
                  for r in zip(self.x, self.y, self.m, self.maxw, self.W)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _ivp_rhs(x, z):
    y, m, u, W = z
    return np.array(_rhs_u(y, m, u, W))


def _leave_domain(x, z):
    y, m, u, W = z
    p = 3.0 * y / (2.0 * m)
    # positive inside; hits zero at the y floor or where p^2 -> 2
    return min(y - Y_FLOOR, 2.0 - p * p - 1e-12, m)


_leave_domain.terminal = True
_leave_domain.direction = -1


def integrate(x_end: float = SIGMA, tol: float = 1e-10, grid: int = 1001) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) in (y, m, u, W) from the standard initial state.

    u starts near e^-20, so its absolute tolerance is scaled down by 1e-9.

    ``grid`` points (uniform in x, plus x_end) are sampled from the dense output.
    """
    if not 0.0 < x_end < 1.0:
        raise ValueError("x_end must lie in (0, 1)")
    y0, m0, w0, W0 = INITIAL
    sol = solve_ivp(_ivp_rhs, (0.0, x_end), [y0, m0, math.exp(-w0), W0], method="RK45",
                    rtol=tol, atol=[tol, tol, tol * 1e-9, tol], dense_output=True,
                    events=_leave_domain)
    if sol.status < 0:
        raise DomainExit(f"integrator failed: {sol.message}")
    exited = sol.status == 1
    xe = float(sol.t[-1])
    xs = np.linspace(0.0, xe, grid) if grid > 1 else np.array([xe])
    z = sol.sol(xs)
    # accepted steps are monotone (y, m, maxw down; W up) on the domain
    zs = sol.y
    if not (np.all(np.diff(zs[0]) <= 1e-14) and np.all(np.diff(zs[1]) <= 1e-14)
            and np.all(np.diff(zs[2]) >= -1e-14) and np.all(np.diff(zs[3]) >= -1e-14)):
        raise AssertionError("monotonicity violated along accepted steps")
    return Trajectory(xs, z[0], z[1], -np.log(z[2]), z[3], tol, x_end, exited,
                      xe if exited else None, int(sol.nfev), len(sol.t) - 1, sol.sol)


def alpha(traj: Trajectory) -> float:
    """W(sigma) - 1e-10; needs a trajectory that reached sigma."""
    if traj.exited or traj.x[-1] < SIGMA - 1e-15:
        raise DomainExit("trajectory does not reach sigma")
    return float(traj.at(SIGMA)[3]) - 1e-10


@njit(cache=True)
def _rk4(y, m, u, W, x0, x1, h):
    n = int(math.ceil((x1 - x0) / h))
    hh = (x1 - x0) / n
    for _ in range(n):
        a = _rhs_u(y, m, u, W)
        b = _rhs_u(y + hh / 2 * a[0], m + hh / 2 * a[1], u + hh / 2 * a[2], W + hh / 2 * a[3])
        c = _rhs_u(y + hh / 2 * b[0], m + hh / 2 * b[1], u + hh / 2 * b[2], W + hh / 2 * b[3])
        d = _rhs_u(y + hh * c[0], m + hh * c[1], u + hh * c[2], W + hh * c[3])
        y += hh / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        m += hh / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
        u += hh / 6 * (a[2] + 2 * b[2] + 2 * c[2] + d[2])
        W += hh / 6 * (a[3] + 2 * b[3] + 2 * c[3] + d[3])
    return y, m, u, W


def rk4_fixed(x_end: float = SIGMA, h: float = 1e-6) -> OdeState:
    """Classical fixed-step RK4 in u-form: an independent check on ``integrate``."""
    y0, m0, w0, W0 = INITIAL
    y, m, u, W = _rk4(y0, m0, math.exp(-w0), W0, 0.0, x_end, h)
    return OdeState(x_end, y, m, -math.log(u), W)


@njit(cache=True)
def _rk4_maxw(y, m, mw, W, x0, x1, h):
    n = int(math.ceil((x1 - x0) / h))
    hh = (x1 - x0) / n
    for _ in range(n):
        a = _rhs_maxw(y, m, mw, W)
        b = _rhs_maxw(y + hh / 2 * a[0], m + hh / 2 * a[1], mw + hh / 2 * a[2], W + hh / 2 * a[3])
        c = _rhs_maxw(y + hh / 2 * b[0], m + hh / 2 * b[1], mw + hh / 2 * b[2], W + hh / 2 * b[3])
        d = _rhs_maxw(y + hh * c[0], m + hh * c[1], mw + hh * c[2], W + hh * c[3])
        y += hh / 6 * (a[0] + 2 * b[0] + 2 * c[0] + d[0])
        m += hh / 6 * (a[1] + 2 * b[1] + 2 * c[1] + d[1])
        mw += hh / 6 * (a[2] + 2 * b[2] + 2 * c[2] + d[2])
        W += hh / 6 * (a[3] + 2 * b[3] + 2 * c[3] + d[3])
    return y, m, mw, W


def integrate_direct(start: OdeState, x_end: float, h: float = 1e-5) -> OdeState:
    """Fixed-step RK4 on the untransformed maxw equation (only sane away from x = 0)."""
    y, m, mw, W = _rk4_maxw(start.y, start.m, start.maxw, start.W, start.x, x_end, h)
    return OdeState(x_end, y, m, mw, W)


# -- comparison with simulated traces ---------------------------------------

@dataclass
class DeviationReport:
    sigma_prime: float
    rows: int
    dev_y: float
    dev_m: float
    dev_W: float
    dev_wmax: float
    initial: dict[str, float]

    @property
    def max_dev(self) -> float:
        return max(self.dev_y, self.dev_m, self.dev_W, self.dev_wmax)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_dev"] = self.max_dev
        return d


def compare_trace(trace, traj: Trajectory, n: int, sigma_prime: float = 0.8) -> DeviationReport:
    """Maximum deviations of a 2-Greedy trace from the fluid limit up to x = sigma_prime.

    Rows are aligned at x = (t - tau1)/n; rows before tau1 are skipped.
    """
    if trace.tau1 < 0:
        raise ValueError("trace never reached zeta = 0")
    rows = trace.rows
    t = rows[:, 0]
    keep = t >= trace.tau1
    x = (t[keep] - trace.tau1) / n
    sel = x <= sigma_prime
    if x.max() < sigma_prime and not trace.completed:
        raise ValueError("trace shorter than the requested range")
    if x[sel].size == 0:
        raise ValueError("no trace rows inside the requested range")
    r = rows[keep][sel]
    x = x[sel]
    if x.max() > traj.x[-1]:
        raise ValueError("trajectory shorter than the requested range")
    ode = traj.at(x)
    W0 = rows[keep][0, 6]
    dy = np.abs(r[:, 2] / n - ode[0])
    dm = np.abs(r[:, 4] / n - ode[1])
    dW = np.abs((r[:, 6] - W0) / n - ode[3])
    dw = np.abs(r[:, 5] - ode[2])
    init = {"y": float(dy[0]), "m": float(dm[0]), "W": float(dW[0]), "wmax": float(dw[0])}
    return DeviationReport(sigma_prime, int(len(x)), float(dy.max()), float(dm.max()),
                           float(dW.max()), float(dw.max()), init)


def summary(traj: Trajectory) -> dict:
    f = traj.at(SIGMA)
    return {
        "alpha": round(alpha(traj), 12),
        "maxw_sigma": float(f[2]),
        "two_m_sigma": float(2 * f[1]),
        "y_sigma": float(f[0]),
        "W_sigma": float(f[3]),
        "tol": traj.tol,
        "nfev": traj.nfev,
        "steps": traj.steps,
    }


def write_summary(traj: Trajectory, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary(traj), fh, sort_keys=True, indent=2)
        fh.write("\n")
